//! C ABI for `bernstein-sparse`.
//!
//! Every function returns a [`BsStatus`]. On failure a message for the calling
//! thread can be fetched with [`bs_last_error_message`]. Objects are opaque
//! handles created by `*_new`/`*_solve` functions and released by the matching
//! `*_free`. Panics never cross the boundary; they surface as
//! `BS_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bernstein_sparse::cdpath::{cd_fit, cd_path, default_grid, CdOptions, PathSolution};
use bernstein_sparse::cm::{cm_solve, default_w0, CmOptions, CmState};
use bernstein_sparse::data::Dataset;
use bernstein_sparse::divergence;
use bernstein_sparse::error::Error;
use bernstein_sparse::penalty::PenaltySpec;
use bernstein_sparse::threshold::{self, Method, Regime};
use ndarray::{ArrayView1, ArrayView2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BsStatus {
    Ok = 0,
    NullPointer = 1,
    /// A parameter is outside its domain or a length is too small.
    InvalidArgument = 2,
    /// The data could not be used (non-finite values, zero-variance column, ...).
    DataError = 3,
    /// The solver hit its iteration cap; outputs hold the last iterate.
    NoConvergence = 4,
    /// The requested path cell was skipped by the continuity guard.
    Skipped = 5,
    Internal = 6,
    Panic = 7,
}

/// Threshold operator output.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BsDecision {
    pub estimate: f64,
    /// Nonzero root of the stationarity equation, 0 if inactive.
    pub kappa: f64,
    /// Boundary of the discontinuous regime, 0 in the continuous regime.
    pub sstar: f64,
    pub active: bool,
    pub discontinuous: bool,
    /// 0 analytic, 1 bisection, 2 soft threshold.
    pub method: i32,
}

/// Standardized regression data.
pub struct BsDataset(Dataset);

/// Solved `(alpha, eta)` grid.
pub struct BsPath(PathSolution);

/// Final state of a CM run.
pub struct BsCmResult(CmState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> BsStatus {
    match err {
        Error::Domain { .. }
        | Error::Unsupported(_)
        | Error::ConditionViolated { .. }
        | Error::InvalidGrid(_)
        | Error::Bracket { .. }
        | Error::DimensionMismatch { .. } => BsStatus::InvalidArgument,
        Error::NoConvergence { .. } => BsStatus::NoConvergence,
        Error::InvariantViolation(_) => BsStatus::Internal,
        _ => BsStatus::DataError,
    }
}

struct Fail(BsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(BsStatus::NullPointer, format!("{what} is NULL"))
}

fn guard(f: impl FnOnce() -> Result<BsStatus, Fail>) -> BsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BsStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, need: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len < need {
        return Err(Fail(
            BsStatus::InvalidArgument,
            format!("{what} has room for {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, need))
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length including the NUL, or
/// 0 when there is no message.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn bs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n - 1) = 0;
        }
        bytes.len()
    })
}

unsafe fn write_scalar(out: *mut f64, value: impl FnOnce() -> bernstein_sparse::Result<f64>) -> BsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = value()?;
        Ok(BsStatus::Ok)
    })
}

/// Penalty value `Phi_rho(s)`, `rho <= 1`, `s >= 0`.
///
/// # Safety
/// `out` must be NULL or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bs_phi(rho: f64, s: f64, out: *mut f64) -> BsStatus {
    write_scalar(out, || PenaltySpec::new(rho, 1.0).and_then(|p| p.phi(s)))
}

/// First derivative `Phi'_rho(s)`.
///
/// # Safety
/// `out` must be NULL or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bs_phi_d1(rho: f64, s: f64, out: *mut f64) -> BsStatus {
    write_scalar(out, || PenaltySpec::new(rho, 1.0).and_then(|p| p.phi_d1(s)))
}

/// Second derivative `Phi''_rho(s)`.
///
/// # Safety
/// `out` must be NULL or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bs_phi_d2(rho: f64, s: f64, out: *mut f64) -> BsStatus {
    write_scalar(out, || PenaltySpec::new(rho, 1.0).and_then(|p| p.phi_d2(s)))
}

/// Divergence generator `phi_rho(z)`, `z >= 0`.
///
/// # Safety
/// `out` must be NULL or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bs_varphi(rho: f64, z: f64, out: *mut f64) -> BsStatus {
    write_scalar(out, || divergence::varphi(rho, z))
}

/// `min_w { w s + phi_rho(w) }` via the closed-form minimizer.
///
/// # Safety
/// `out` must be NULL or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bs_conjugate_phi(rho: f64, s: f64, out: *mut f64) -> BsStatus {
    write_scalar(out, || divergence::conjugate_phi(rho, s).map(|c| c.value))
}

/// MCP value `s - s^2/2` for `s < 1`, `1/2` beyond, obtained from its conjugate form.
///
/// # Safety
/// `out` must be NULL or point to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn bs_mcp_conjugate(s: f64, out: *mut f64) -> BsStatus {
    write_scalar(out, || divergence::mcp_conjugate(s))
}

/// Threshold operator `S_alpha(z, eta)` for penalty `rho`.
///
/// # Safety
/// `out` must be NULL or point to a writable `BsDecision`.
#[no_mangle]
pub unsafe extern "C" fn bs_threshold(rho: f64, alpha: f64, z: f64, eta: f64, out: *mut BsDecision) -> BsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let d = threshold::threshold(&PenaltySpec::new(rho, alpha)?, z, eta)?;
        *out = BsDecision {
            estimate: d.estimate,
            kappa: d.kappa,
            sstar: d.sstar,
            active: d.active,
            discontinuous: d.regime == Regime::Discontinuous,
            method: match d.method {
                Method::Analytic => 0,
                Method::Bisection => 1,
                Method::Soft => 2,
            },
        };
        Ok(BsStatus::Ok)
    })
}

/// Standardizes `x` (row-major `n x p`) and `y` (length `n`) into a new dataset.
///
/// # Safety
/// `x` must point to `n * p` doubles, `y` to `n` doubles, `out` to a writable
/// pointer. Release the handle with [`bs_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn bs_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut BsDataset,
) -> BsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if x.is_null() {
            return Err(null("x"));
        }
        if y.is_null() {
            return Err(null("y"));
        }
        let len = n
            .checked_mul(p)
            .ok_or_else(|| Fail(BsStatus::InvalidArgument, "n * p overflows".into()))?;
        let xs = std::slice::from_raw_parts(x, len);
        let xv = ArrayView2::from_shape((n, p), xs)
            .map_err(|e| Fail(BsStatus::InvalidArgument, e.to_string()))?;
        let yv = ArrayView1::from(std::slice::from_raw_parts(y, n));
        let d = Dataset::standardize(xv, yv)?;
        *out = Box::into_raw(Box::new(BsDataset(d)));
        Ok(BsStatus::Ok)
    })
}

/// # Safety
/// `ds` must be NULL or a handle from [`bs_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_dataset_free(ds: *mut BsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of observations, 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bs_dataset_n(ds: *const BsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n())
}

/// Number of predictors, 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn bs_dataset_p(ds: *const BsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.p())
}

/// Coordinate descent for one `(rho, alpha, eta)` from a zero start. Writes
/// `p` standardized coefficients. Returns `BS_STATUS_NO_CONVERGENCE` with the
/// last iterate written when the sweep cap is hit.
///
/// # Safety
/// `ds` must be a live dataset; `coef` must hold `len` doubles; `sweeps` and
/// `objective` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn bs_cd_fit(
    ds: *const BsDataset,
    rho: f64,
    alpha: f64,
    eta: f64,
    allow_discontinuous: bool,
    coef: *mut f64,
    len: usize,
    sweeps: *mut usize,
    objective: *mut f64,
) -> BsStatus {
    guard(|| {
        let data = &in_ref(ds, "ds")?.0;
        let out = out_slice(coef, len, data.p(), "coef")?;
        let spec = PenaltySpec::new(rho, alpha)?;
        let opts = CdOptions {
            allow_discontinuous,
            ..Default::default()
        };
        let fit = cd_fit(data, &spec, eta, &vec![0.0; data.p()], &opts)?;
        out.copy_from_slice(&fit.coefficients);
        if let Some(s) = sweeps.as_mut() {
            *s = fit.sweeps;
        }
        if let Some(o) = objective.as_mut() {
            *o = fit.objective;
        }
        Ok(if fit.converged { BsStatus::Ok } else { BsStatus::NoConvergence })
    })
}

/// Solves the default grid with `n_etas` eta values and `n_alphas` alpha
/// values. The handle is created even if some cells did not converge.
///
/// # Safety
/// `ds` must be a live dataset and `out` a writable pointer. Release the handle
/// with [`bs_path_free`].
#[no_mangle]
pub unsafe extern "C" fn bs_path_new(
    ds: *const BsDataset,
    rho: f64,
    n_etas: usize,
    n_alphas: usize,
    allow_discontinuous: bool,
    out: *mut *mut BsPath,
) -> BsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let data = &in_ref(ds, "ds")?.0;
        let grid = default_grid(data, rho, n_etas, n_alphas)?;
        let opts = CdOptions {
            allow_discontinuous,
            ..Default::default()
        };
        let sol = cd_path(data, rho, &grid, &opts)?;
        let ok = sol.all_converged();
        *out = Box::into_raw(Box::new(BsPath(sol)));
        Ok(if ok { BsStatus::Ok } else { BsStatus::NoConvergence })
    })
}

/// # Safety
/// `path` must be NULL or a handle from [`bs_path_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_path_free(path: *mut BsPath) {
    if !path.is_null() {
        drop(Box::from_raw(path));
    }
}

/// Number of eta values (L), 0 for NULL.
///
/// # Safety
/// `path` must be NULL or a live path handle.
#[no_mangle]
pub unsafe extern "C" fn bs_path_n_etas(path: *const BsPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.grid.etas().len())
}

/// Number of alpha values (K), 0 for NULL.
///
/// # Safety
/// `path` must be NULL or a live path handle.
#[no_mangle]
pub unsafe extern "C" fn bs_path_n_alphas(path: *const BsPath) -> usize {
    path.as_ref().map_or(0, |p| p.0.grid.alphas().len())
}

/// Grid values of cell `(k, l)`: `alpha_k` (descending in `k`) and `eta_l`
/// (ascending in `l`).
///
/// # Safety
/// `path` must be a live path handle; `alpha` and `eta` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn bs_path_grid(path: *const BsPath, k: usize, l: usize, alpha: *mut f64, eta: *mut f64) -> BsStatus {
    guard(|| {
        let g = &in_ref(path, "path")?.0.grid;
        let (a, e) = match (g.alphas().get(k), g.etas().get(l)) {
            (Some(a), Some(e)) => (*a, *e),
            _ => return Err(Fail(BsStatus::InvalidArgument, format!("cell ({k}, {l}) outside the grid"))),
        };
        if let Some(o) = alpha.as_mut() {
            *o = a;
        }
        if let Some(o) = eta.as_mut() {
            *o = e;
        }
        Ok(BsStatus::Ok)
    })
}

/// Standardized coefficients of cell `(k, l)`. Returns `BS_STATUS_SKIPPED`
/// for cells refused by the continuity guard.
///
/// # Safety
/// `path` must be a live path handle and `coef` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_path_coefficients(path: *const BsPath, k: usize, l: usize, coef: *mut f64, len: usize) -> BsStatus {
    guard(|| {
        let sol = &in_ref(path, "path")?.0;
        if k >= sol.grid.alphas().len() || l >= sol.grid.etas().len() {
            return Err(Fail(BsStatus::InvalidArgument, format!("cell ({k}, {l}) outside the grid")));
        }
        match sol.cell(k, l) {
            Some(c) => {
                out_slice(coef, len, c.coefficients.len(), "coef")?.copy_from_slice(&c.coefficients);
                Ok(BsStatus::Ok)
            }
            None => Err(Fail(BsStatus::Skipped, format!("cell ({k}, {l}) was skipped"))),
        }
    })
}

/// Runs CM. `w0` may be NULL for the default `0.5 * max_j |x_j^T y|` level;
/// otherwise it must hold `p` positive weights. `tol <= 0` and `max_iter == 0`
/// select the defaults.
///
/// # Safety
/// `ds` must be a live dataset, `w0` NULL or `p` doubles, `out` a writable
/// pointer. Release the handle with [`bs_cm_result_free`].
#[no_mangle]
pub unsafe extern "C" fn bs_cm_solve(
    ds: *const BsDataset,
    rho: f64,
    alpha: f64,
    w0: *const f64,
    tol: f64,
    max_iter: usize,
    out: *mut *mut BsCmResult,
) -> BsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let data = &in_ref(ds, "ds")?.0;
        let spec = PenaltySpec::new(rho, alpha)?;
        let w0 = if w0.is_null() {
            default_w0(data)
        } else {
            std::slice::from_raw_parts(w0, data.p()).to_vec()
        };
        let mut opts = CmOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        let st = cm_solve(data, &spec, &w0, &opts)?;
        let ok = st.converged;
        *out = Box::into_raw(Box::new(BsCmResult(st)));
        Ok(if ok { BsStatus::Ok } else { BsStatus::NoConvergence })
    })
}

/// # Safety
/// `res` must be NULL or a handle from [`bs_cm_solve`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bs_cm_result_free(res: *mut BsCmResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Number of CM iterations, 0 for NULL.
///
/// # Safety
/// `res` must be NULL or a live CM handle.
#[no_mangle]
pub unsafe extern "C" fn bs_cm_result_iterations(res: *const BsCmResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.iter)
}

/// Whether the run met its stopping rule; false for NULL.
///
/// # Safety
/// `res` must be NULL or a live CM handle.
#[no_mangle]
pub unsafe extern "C" fn bs_cm_result_converged(res: *const BsCmResult) -> bool {
    res.as_ref().is_some_and(|r| r.0.converged)
}

/// Final standardized coefficients (`p` values).
///
/// # Safety
/// `res` must be a live CM handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_cm_result_coefficients(res: *const BsCmResult, out: *mut f64, len: usize) -> BsStatus {
    guard(|| {
        let st = &in_ref(res, "res")?.0;
        out_slice(out, len, st.b.len(), "out")?.copy_from_slice(&st.b);
        Ok(BsStatus::Ok)
    })
}

/// Final weights `eta` (`p` values).
///
/// # Safety
/// `res` must be a live CM handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_cm_result_eta(res: *const BsCmResult, out: *mut f64, len: usize) -> BsStatus {
    guard(|| {
        let st = &in_ref(res, "res")?.0;
        out_slice(out, len, st.eta.len(), "out")?.copy_from_slice(&st.eta);
        Ok(BsStatus::Ok)
    })
}

/// Length of the objective trace (iterations + 1), 0 for NULL.
///
/// # Safety
/// `res` must be NULL or a live CM handle.
#[no_mangle]
pub unsafe extern "C" fn bs_cm_result_trace_len(res: *const BsCmResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.j_trace.len())
}

/// Objective values from the initial point through the last iteration.
///
/// # Safety
/// `res` must be a live CM handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bs_cm_result_trace(res: *const BsCmResult, out: *mut f64, len: usize) -> BsStatus {
    guard(|| {
        let st = &in_ref(res, "res")?.0;
        out_slice(out, len, st.j_trace.len(), "out")?.copy_from_slice(&st.j_trace);
        Ok(BsStatus::Ok)
    })
}
