//! `bernsparse` command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | usage error: bad flag, bad parameter value, unsolvable setting |
//! | 2 | data error: unreadable or malformed input, unwritable output |
//! | 3 | solver did not converge; partial results were written |
//! | 4 | a verification suite reported failing checks; the table was written |
//! | 5 | internal invariant violated (a bug) |

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::cdpath::{self, cd_fit, cd_path, default_grid, CdOptions};
use crate::cm::{cm_solve, default_w0, CmOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::harness::export::{export, Format};
use crate::harness::oracle::{oracle_experiment, OracleSettings};
use crate::harness::sim::SimConfig;
use crate::harness::verify::{run_suite, Suite};
use crate::penalty::PenaltySpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_VERIFY_FAILED: i32 = 4;
pub const EXIT_INTERNAL: i32 = 5;

pub const DEFAULT_N_ETAS: usize = 50;
pub const DEFAULT_N_ALPHAS: usize = 20;

/// Sparse regression with Bernstein-function penalties.
#[derive(Debug, Parser)]
#[command(name = "bernsparse", version, after_help = "Exit codes: 0 ok, 1 usage, 2 data, 3 no convergence (partial output written), 4 verification failed, 5 internal error.\nThread cap for simulate: BERNSPARSE_THREADS.")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one (rho, alpha, eta) model by coordinate descent.
    Fit(FitArgs),
    /// Solve the full (alpha, eta) grid with warm starts.
    Path(PathArgs),
    /// Run the conjugate-maximization algorithm.
    Cm(CmArgs),
    /// Run a support-recovery simulation campaign.
    Simulate(SimulateArgs),
    /// Run a built-in verification suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV with a header row; every column must be numeric.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Name of the response column.
    #[arg(long, short, default_value = "y")]
    pub target: String,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Output format.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CdArgs {
    /// Stop when the largest coordinate change of a sweep is below this.
    #[arg(long, default_value_t = cdpath::DEFAULT_TOL)]
    pub tol: f64,
    /// Sweep cap per fit.
    #[arg(long, default_value_t = cdpath::DEFAULT_MAX_SWEEPS)]
    pub max_sweeps: usize,
    /// Solve cells violating the continuity condition with the discontinuous operator.
    #[arg(long)]
    pub allow_discontinuous: bool,
}

impl CdArgs {
    fn options(&self) -> CdOptions {
        CdOptions {
            tol: self.tol,
            max_sweeps: self.max_sweeps,
            allow_discontinuous: self.allow_discontinuous,
            record_trace: false,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Penalty family parameter, at most 1.
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
    /// Nonconvexity parameter, positive.
    #[arg(long)]
    pub alpha: f64,
    /// Penalty level, positive.
    #[arg(long)]
    pub eta: f64,
    #[command(flatten)]
    pub cd: CdArgs,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub out: OutputArgs,
    /// Penalty family parameter, at most 1.
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
    /// Number of eta values (L).
    #[arg(long, default_value_t = DEFAULT_N_ETAS)]
    pub etas: usize,
    /// Number of alpha values (K).
    #[arg(long, default_value_t = DEFAULT_N_ALPHAS)]
    pub alphas: usize,
    #[command(flatten)]
    pub cd: CdArgs,
}

#[derive(Debug, Args)]
pub struct CmArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Trace output (iter, J, max_coef_change, num_nonzero).
    #[command(flatten)]
    pub out: OutputArgs,
    /// Final model as JSON {coefficients, eta, iterations, converged}.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Penalty family parameter, at most 1.
    #[arg(long, allow_negative_numbers = true)]
    pub rho: f64,
    /// Nonconvexity parameter, positive; fixed during the run.
    #[arg(long)]
    pub alpha: f64,
    /// Initial weight level lambda (w0 = lambda * 1). Default: 0.5 * max_j |x_j^T y|.
    #[arg(long)]
    pub w0: Option<f64>,
    /// Relative objective change and coefficient change that stop the run.
    #[arg(long, default_value_t = CmOptions::default().tol)]
    pub tol: f64,
    /// Outer iteration cap.
    #[arg(long, default_value_t = CmOptions::default().max_iter)]
    pub max_iter: usize,
    /// Coordinate-change tolerance of each weighted-lasso solve.
    #[arg(long, default_value_t = CmOptions::default().inner_tol)]
    pub inner_tol: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Campaign JSON: SimConfig fields plus optional "ns" and "oracle" settings.
    #[arg(long, short)]
    pub config: PathBuf,
    /// Per-n summary table.
    #[command(flatten)]
    pub out: OutputArgs,
    /// Optional per-replicate table, same format as the summary.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Thresholds,
    Conjugacy,
    Limits,
    Descent,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: SuiteArg,
    /// Output CSV. Default: verify-<suite>.csv
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

/// `simulate` configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    #[serde(flatten)]
    pub sim: SimConfig,
    /// Sample sizes to run; defaults to `[n]`.
    #[serde(default)]
    pub ns: Option<Vec<usize>>,
    #[serde(default)]
    pub oracle: OracleSettings,
}

/// Reads a numeric CSV. The `target` column becomes `y`, all other columns
/// become `X` in header order.
pub fn ingest_csv(path: &Path, target: &str) -> Result<(Array2<f64>, Array1<f64>, Vec<String>)> {
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| fmt(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(fmt("empty file".into()));
    }
    let t = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: target.to_string(),
        })?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != t)
        .map(|(_, h)| h.clone())
        .collect();

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        for (j, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row: i + 1,
                column: header[j].clone(),
                value: cell.to_string(),
            })?;
            if j == t {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    if ys.len() < 2 {
        return Err(fmt(format!("need at least 2 data rows, found {}", ys.len())));
    }
    let x = Array2::from_shape_vec((ys.len(), names.len()), xs).map_err(|e| fmt(e.to_string()))?;
    Ok((x, Array1::from(ys), names))
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain { .. }
        | Error::Unsupported(_)
        | Error::ConditionViolated { .. }
        | Error::InvalidGrid(_)
        | Error::Bracket { .. } => EXIT_USAGE,
        Error::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
        Error::InvariantViolation(_) => EXIT_INTERNAL,
        Error::DimensionMismatch { .. }
        | Error::ZeroVariance { .. }
        | Error::NonFinite { .. }
        | Error::TooFewRows { .. }
        | Error::Io { .. }
        | Error::Format { .. }
        | Error::NonNumeric { .. }
        | Error::MissingColumn { .. } => EXIT_DATA,
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Messages go to stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bernsparse: {e}");
            if let Error::ZeroVariance { .. } = e {
                eprintln!("bernsparse: column indices count predictors only, in header order");
            }
            exit_code(&e)
        }
    }
}

fn execute(cmd: &Command) -> Result<i32> {
    match cmd {
        Command::Fit(a) => fit(a),
        Command::Path(a) => path(a),
        Command::Cm(a) => cm(a),
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
    }
}

struct Settings(BTreeMap<String, String>);

impl Settings {
    fn new(command: &str) -> Self {
        let mut m = BTreeMap::new();
        m.insert("command".into(), command.into());
        m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        Self(m)
    }

    fn set(&mut self, k: &str, v: impl ToString) -> &mut Self {
        self.0.insert(k.into(), v.to_string());
        self
    }

    fn data(&mut self, d: &DataArgs) -> &mut Self {
        self.set("input", d.input.display()).set("target", &d.target)
    }

    fn cd(&mut self, c: &CdArgs) -> &mut Self {
        self.set("tol", c.tol)
            .set("max_sweeps", c.max_sweeps)
            .set("allow_discontinuous", c.allow_discontinuous)
    }
}

fn load(d: &DataArgs) -> Result<(Dataset, Vec<String>)> {
    let (x, y, names) = ingest_csv(&d.input, &d.target)?;
    let data = Dataset::standardize(x.view(), y.view()).map_err(|e| match e {
        Error::ZeroVariance { column } => Error::Format {
            path: d.input.clone(),
            message: format!("column '{}' has zero variance after centering", names[column]),
        },
        Error::NonFinite { what: "design matrix", index } => Error::Format {
            path: d.input.clone(),
            message: format!(
                "non-finite value at row {}, column '{}'",
                index / names.len() + 1,
                names[index % names.len()]
            ),
        },
        other => other,
    })?;
    Ok((data, names))
}

/// One coefficient of a fitted model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub column: String,
    /// Coefficient on the raw scale of the input column.
    pub coefficient: f64,
    /// Coefficient on the standardized scale.
    pub standardized: f64,
}

fn coef_rows(data: &Dataset, names: &[String], b: &[f64]) -> (f64, Vec<CoefRow>) {
    let (icpt, slopes) = data.to_raw_scale(b);
    let rows = names
        .iter()
        .zip(slopes.iter().zip(b))
        .map(|(n, (s, bs))| CoefRow {
            column: n.clone(),
            coefficient: *s,
            standardized: *bs,
        })
        .collect();
    (icpt, rows)
}

fn fit(a: &FitArgs) -> Result<i32> {
    let spec = PenaltySpec::new(a.rho, a.alpha)?;
    let (data, names) = load(&a.data)?;
    let f = cd_fit(&data, &spec, a.eta, &vec![0.0; data.p()], &a.cd.options())?;
    let (icpt, rows) = coef_rows(&data, &names, &f.coefficients);
    let mut s = Settings::new("fit");
    s.data(&a.data)
        .cd(&a.cd)
        .set("rho", a.rho)
        .set("alpha", a.alpha)
        .set("eta", a.eta)
        .set("intercept", icpt)
        .set("sweeps", f.sweeps)
        .set("objective", f.objective)
        .set("converged", f.converged);
    export(&rows, a.out.format.into(), &a.out.output, &s.0)?;
    Ok(converged_code(f.converged, "fit", f.sweeps))
}

fn converged_code(ok: bool, what: &str, iterations: usize) -> i32 {
    if ok {
        EXIT_OK
    } else {
        eprintln!("bernsparse: {what} did not converge after {iterations} iterations; partial results written");
        EXIT_NO_CONVERGENCE
    }
}

/// One coefficient of one grid cell. Skipped cells have empty
/// `coefficient` and `objective`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub alpha: f64,
    pub eta: f64,
    pub j: usize,
    pub coefficient: Option<f64>,
    pub sweeps: usize,
    pub objective: Option<f64>,
    pub skipped: bool,
}

fn path(a: &PathArgs) -> Result<i32> {
    PenaltySpec::new(a.rho, 1.0)?;
    let (data, _) = load(&a.data)?;
    let grid = default_grid(&data, a.rho, a.etas, a.alphas)?;
    let sol = cd_path(&data, a.rho, &grid, &a.cd.options())?;
    let mut rows = Vec::new();
    for (k, &alpha) in grid.alphas().iter().enumerate() {
        for (l, &eta) in grid.etas().iter().enumerate() {
            match sol.cell(k, l) {
                Some(c) => rows.extend(c.coefficients.iter().enumerate().map(|(j, b)| PathRow {
                    alpha,
                    eta,
                    j,
                    coefficient: Some(*b),
                    sweeps: c.sweeps,
                    objective: Some(c.objective),
                    skipped: false,
                })),
                None => rows.extend((0..data.p()).map(|j| PathRow {
                    alpha,
                    eta,
                    j,
                    skipped: true,
                    ..Default::default()
                })),
            }
        }
    }
    let mut s = Settings::new("path");
    s.data(&a.data)
        .cd(&a.cd)
        .set("rho", a.rho)
        .set("n_etas", a.etas)
        .set("n_alphas", a.alphas)
        .set("skipped_cells", sol.skipped.len())
        .set("coefficients", "standardized scale");
    export(&rows, a.out.format.into(), &a.out.output, &s.0)?;
    let worst = sol.cells().map(|c| c.sweeps).max().unwrap_or(0);
    Ok(converged_code(sol.all_converged(), "path", worst))
}

/// One CM iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CmTraceRow {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub max_coef_change: Option<f64>,
    pub num_nonzero: Option<usize>,
}

/// Final CM model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmModel {
    pub coefficients: Vec<f64>,
    pub eta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn cm(a: &CmArgs) -> Result<i32> {
    let spec = PenaltySpec::new(a.rho, a.alpha)?;
    let (data, names) = load(&a.data)?;
    let w0 = match a.w0 {
        Some(l) if l > 0.0 && l.is_finite() => vec![l; data.p()],
        Some(l) => return Err(Error::domain("w0", l, "w0 > 0")),
        None => default_w0(&data),
    };
    let opts = CmOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        inner_tol: a.inner_tol,
        ..Default::default()
    };
    let st = cm_solve(&data, &spec, &w0, &opts)?;
    let rows: Vec<CmTraceRow> = st
        .j_trace
        .iter()
        .enumerate()
        .map(|(i, j)| CmTraceRow {
            iter: i,
            j: *j,
            max_coef_change: i.checked_sub(1).map(|k| st.max_change[k]),
            num_nonzero: i.checked_sub(1).map(|k| st.num_nonzero[k]),
        })
        .collect();
    let (icpt, coefs) = coef_rows(&data, &names, &st.b);
    let mut s = Settings::new("cm");
    s.data(&a.data)
        .set("rho", a.rho)
        .set("alpha", a.alpha)
        .set("w0", w0[0])
        .set("tol", a.tol)
        .set("max_iter", a.max_iter)
        .set("inner_tol", a.inner_tol)
        .set("iterations", st.iter)
        .set("converged", st.converged)
        .set("floored", format!("{:?}", st.floored()));
    export(&rows, a.out.format.into(), &a.out.output, &s.0)?;
    if let Some(p) = &a.model {
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            model: CmModel,
            intercept: f64,
            columns: &'a [CoefRow],
            settings: &'a BTreeMap<String, String>,
        }
        let out = Out {
            model: CmModel {
                coefficients: st.b.clone(),
                eta: st.eta.clone(),
                iterations: st.iter,
                converged: st.converged,
            },
            intercept: icpt,
            columns: &coefs,
            settings: &s.0,
        };
        let text = serde_json::to_string_pretty(&out).map_err(|e| Error::Format {
            path: p.clone(),
            message: e.to_string(),
        })?;
        std::fs::write(p, text + "\n").map_err(|source| Error::Io { path: p.clone(), source })?;
    }
    Ok(converged_code(st.converged, "cm", st.iter))
}

fn simulate(a: &SimulateArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&a.config).map_err(|source| Error::Io {
        path: a.config.clone(),
        source,
    })?;
    let campaign: Campaign = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: a.config.clone(),
        message: e.to_string(),
    })?;
    let ns = campaign.ns.clone().unwrap_or_else(|| vec![campaign.sim.n]);
    if ns.iter().any(|&n| n <= campaign.sim.p) {
        eprintln!("bernsparse: warning: some n <= p; the oracle comparison assumes n > p");
    }
    let report = oracle_experiment(&campaign.sim, &ns, &campaign.oracle)?;
    let mut s = Settings::new("simulate");
    s.set("config", a.config.display())
        .set("seed", campaign.sim.seed)
        .set("replicates", campaign.sim.replicates)
        .set("sigma", campaign.sim.sigma)
        .set("corr", campaign.sim.corr)
        .set("true_b", format!("{:?}", campaign.sim.true_b))
        .set("ns", format!("{ns:?}"))
        .set("method", format!("{:?}", campaign.oracle.method).to_lowercase())
        .set("rho", campaign.oracle.rho)
        .set("n_etas", campaign.oracle.n_etas)
        .set("n_alphas", campaign.oracle.n_alphas)
        .set("cm_alpha", campaign.oracle.cm_alpha)
        .set("selection", "validation mse, fresh draw of the same size");
    if let Some(slope) = report.error_rate_slope() {
        s.set("active_l2_loglog_slope", slope);
    }
    export(&report.summaries, a.out.format.into(), &a.out.output, &s.0)?;
    if let Some(p) = &a.records {
        export(&report.records, a.out.format.into(), p, &s.0)?;
    }
    Ok(EXIT_OK)
}

fn verify(a: &VerifyArgs) -> Result<i32> {
    let (suite, name) = match a.suite {
        SuiteArg::Thresholds => (Suite::Thresholds, "thresholds"),
        SuiteArg::Conjugacy => (Suite::Conjugacy, "conjugacy"),
        SuiteArg::Limits => (Suite::Limits, "limits"),
        SuiteArg::Descent => (Suite::Descent, "descent"),
    };
    let rows = run_suite(suite)?;
    let out = a
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("verify-{name}.csv")));
    let mut s = Settings::new("verify");
    s.set("suite", name);
    export(&rows, Format::Csv, &out, &s.0)?;
    let failed: Vec<_> = rows.iter().filter(|r| !r.pass).collect();
    for r in &failed {
        eprintln!(
            "bernsparse: FAIL {}: measured {} vs {} (deviation {:e} > {:e})",
            r.case,
            r.measured,
            r.reference,
            r.deviation,
            r.tolerance.unwrap_or(0.0)
        );
    }
    println!("{name}: {} checks, {} failed", rows.len(), failed.len());
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
