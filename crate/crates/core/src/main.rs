fn main() {
    std::process::exit(bernstein_sparse::cli::run(std::env::args_os()));
}
