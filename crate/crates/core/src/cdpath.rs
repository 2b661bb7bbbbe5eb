//! Cyclic coordinate descent for the Bernstein-penalized least-squares problem
//!
//! ```text
//! F(b) = ||y - X b||^2 / 2 + (eta / Phi(alpha)) * sum_j Phi(alpha |b_j|)
//! ```
//!
//! and the two-dimensional `(alpha, eta)` path built from it with warm starts.
//! Each coordinate update is `b_j <- S_alpha(x_j^T (y - X b) + b_j, eta)` on a
//! design with unit-length columns.

use std::collections::BTreeSet;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::penalty::{self, PenaltySpec};
use crate::threshold::{self, SOFT_LIMIT_ALPHA};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;
/// Smallest alpha of a default grid; acts as the lasso end of the path.
pub const LASSO_ALPHA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdOptions {
    /// Stop once the largest coordinate change in a sweep is below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Solve cells that violate the continuity condition with the
    /// discontinuous-regime operator instead of refusing them.
    pub allow_discontinuous: bool,
    /// Keep `F(b)` after every sweep in [`CdFit::trace`].
    pub record_trace: bool,
}

impl Default for CdOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            allow_discontinuous: false,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdFit {
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub objective: f64,
    pub converged: bool,
    /// Objective after each sweep, first entry is the initial point.
    pub trace: Vec<f64>,
}

/// `F(b)`. Below the soft-limit alpha the penalty is replaced by its limit
/// `eta * ||b||_1`, matching the operator used by the solver there.
pub fn objective(data: &Dataset, spec: &PenaltySpec, eta: f64, b: &[f64]) -> Result<f64> {
    data.check_len("coefficients", b.len())?;
    Ok(data.half_rss(b) + penalty_sum(spec, eta, b)?)
}

fn penalty_sum(spec: &PenaltySpec, eta: f64, b: &[f64]) -> Result<f64> {
    let alpha = spec.alpha();
    if alpha < SOFT_LIMIT_ALPHA && !spec.is_mcp() {
        return Ok(eta * b.iter().map(|v| v.abs()).sum::<f64>());
    }
    let lambda = threshold::lambda_for(spec, eta)?;
    let mut total = 0.0;
    for v in b {
        total += spec.phi(alpha * v.abs())?;
    }
    Ok(lambda * total)
}

/// Coordinate descent from `init` at a single `(alpha, eta)`.
///
/// Requires the continuity condition unless `opts.allow_discontinuous`. Hitting
/// the sweep cap is reported through `converged = false`.
pub fn cd_fit(
    data: &Dataset,
    spec: &PenaltySpec,
    eta: f64,
    init: &[f64],
    opts: &CdOptions,
) -> Result<CdFit> {
    data.check_len("initial coefficients", init.len())?;
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::domain("eta", eta, "eta > 0"));
    }
    if !opts.allow_discontinuous && !spec.continuity_holds(eta)? {
        return Err(Error::ConditionViolated {
            alpha: spec.alpha(),
            eta,
        });
    }

    let p = data.p();
    let gram = data.gram();
    let xty = data.xty();
    let mut b = Array1::from(init.to_vec());
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(objective(data, spec, eta, init)?);
    }

    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        // Refresh G b once per sweep to bound drift from incremental updates.
        let mut gb = gram.dot(&b);
        let mut max_change = 0.0_f64;
        for j in 0..p {
            let z = xty[j] - gb[j] + gram[[j, j]] * b[j];
            let new = threshold::threshold(spec, z, eta)?.estimate;
            let delta = new - b[j];
            if delta != 0.0 {
                b[j] = new;
                gb.scaled_add(delta, &gram.column(j));
                max_change = max_change.max(delta.abs());
            }
        }
        if opts.record_trace {
            trace.push(objective(data, spec, eta, b.as_slice().unwrap())?);
        }
        if max_change < opts.tol {
            converged = true;
            break;
        }
    }

    let coefficients = b.to_vec();
    let objective = objective(data, spec, eta, &coefficients)?;
    Ok(CdFit {
        coefficients,
        sweeps,
        objective,
        converged,
        trace,
    })
}

/// Largest `|S_alpha(z_j(b), eta) - b_j|` over coordinates, with `z_j` computed
/// from the residual rather than the cached Gram matrix.
pub fn fixed_point_residual(data: &Dataset, spec: &PenaltySpec, eta: f64, b: &[f64]) -> Result<f64> {
    data.check_len("coefficients", b.len())?;
    let r = data.residual(b);
    let x = data.x();
    let mut worst = 0.0_f64;
    for (j, col) in x.columns().into_iter().enumerate() {
        let z = col.dot(&r) + col.dot(&col) * b[j];
        let s = threshold::threshold(spec, z, eta)?.estimate;
        worst = worst.max((s - b[j]).abs());
    }
    Ok(worst)
}

/// Increasing `eta` values and decreasing `alpha` values; the last alpha is
/// small enough to act as the lasso.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathGrid {
    etas: Vec<f64>,
    alphas: Vec<f64>,
}

impl PathGrid {
    pub fn new(etas: Vec<f64>, alphas: Vec<f64>) -> Result<Self> {
        if etas.is_empty() || alphas.is_empty() {
            return Err(Error::InvalidGrid("grid axes must be non-empty".into()));
        }
        if etas.iter().any(|e| !(*e > 0.0) || !e.is_finite()) {
            return Err(Error::InvalidGrid("etas must be positive and finite".into()));
        }
        if alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidGrid("alphas must be positive and finite".into()));
        }
        if etas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid("etas must be strictly increasing".into()));
        }
        if alphas.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidGrid("alphas must be strictly decreasing".into()));
        }
        let last = *alphas.last().unwrap();
        if last > SOFT_LIMIT_ALPHA {
            return Err(Error::InvalidGrid(format!(
                "smallest alpha {last} must be <= {SOFT_LIMIT_ALPHA} to index the lasso"
            )));
        }
        Ok(Self { etas, alphas })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }
}

/// `eta_max = max_j |x_j^T y|`, the smallest lasso penalty that zeroes every
/// coefficient.
pub fn eta_max(data: &Dataset) -> f64 {
    data.xty().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Log-spaced grid: `L` etas on `[1e-3 eta_max, eta_max]` and `K` alphas from
/// the largest value still solvable at the smallest eta down to
/// [`LASSO_ALPHA`].
pub fn default_grid(data: &Dataset, rho: f64, n_etas: usize, n_alphas: usize) -> Result<PathGrid> {
    if n_etas == 0 || n_alphas == 0 {
        return Err(Error::InvalidGrid("grid sizes must be at least 1".into()));
    }
    let mut top = eta_max(data);
    if !(top > 0.0) {
        // y orthogonal to every column; any positive scale gives the same path
        top = 1.0;
    }
    let etas = if n_etas == 1 {
        vec![top]
    } else {
        log_space(1e-3 * top, top, n_etas)
    };
    let alphas = if n_alphas == 1 {
        vec![LASSO_ALPHA]
    } else {
        let first = largest_solvable_alpha(rho, etas[0])?.max(LASSO_ALPHA * 10.0);
        let mut a = log_space(LASSO_ALPHA, first, n_alphas);
        a.reverse();
        a
    };
    PathGrid::new(etas, alphas)
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// Largest alpha with `Phi(alpha)/alpha^2 >= eta`; the ratio is decreasing.
fn largest_solvable_alpha(rho: f64, eta: f64) -> Result<f64> {
    PenaltySpec::new(rho, 1.0)?;
    let ratio = |a: f64| penalty::value(rho, a) / (a * a);
    let (mut lo, mut hi) = (LASSO_ALPHA.ln(), 1e8_f64.ln());
    if ratio(hi.exp()) >= eta {
        return Ok(hi.exp());
    }
    if ratio(lo.exp()) < eta {
        return Ok(lo.exp());
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid.exp()) >= eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCell {
    pub k: usize,
    pub l: usize,
    pub alpha: f64,
    pub eta: f64,
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSolution {
    pub rho: f64,
    pub grid: PathGrid,
    /// Row-major over `(k, l)`: `cells[k * L + l]`.
    cells: Vec<Option<PathCell>>,
    /// Cells refused by the continuity condition.
    pub skipped: BTreeSet<(usize, usize)>,
    /// Starting point used for each eta index (the lasso-end solution of the
    /// next larger eta).
    pub warm_starts: Vec<Vec<f64>>,
}

impl PathSolution {
    pub fn cell(&self, k: usize, l: usize) -> Option<&PathCell> {
        self.cells.get(k * self.grid.etas.len() + l).and_then(Option::as_ref)
    }

    /// Solved cells in `(k, l)` order.
    pub fn cells(&self) -> impl Iterator<Item = &PathCell> {
        self.cells.iter().flatten()
    }

    pub fn all_converged(&self) -> bool {
        self.cells().all(|c| c.converged)
    }
}

/// Runs the path: eta from largest to smallest, and for each eta alpha from
/// the lasso end towards the most nonconvex value, warm-starting every cell
/// from the previously solved one.
pub fn cd_path(data: &Dataset, rho: f64, grid: &PathGrid, opts: &CdOptions) -> Result<PathSolution> {
    let (n_alphas, n_etas) = (grid.alphas.len(), grid.etas.len());
    let p = data.p();
    let mut cells = vec![None; n_alphas * n_etas];
    let mut skipped = BTreeSet::new();
    let mut warm_starts = vec![Vec::new(); n_etas];
    let mut lasso_prev = vec![0.0; p];

    for l in (0..n_etas).rev() {
        let eta = grid.etas[l];
        warm_starts[l] = lasso_prev.clone();
        let mut current = lasso_prev.clone();
        for k in (0..n_alphas).rev() {
            let alpha = grid.alphas[k];
            let spec = PenaltySpec::new(rho, alpha)?;
            if !opts.allow_discontinuous && !spec.continuity_holds(eta)? {
                skipped.insert((k, l));
                continue;
            }
            let fit = cd_fit(data, &spec, eta, &current, opts)?;
            current.clone_from(&fit.coefficients);
            if k == n_alphas - 1 {
                lasso_prev.clone_from(&fit.coefficients);
            }
            cells[k * n_etas + l] = Some(PathCell {
                k,
                l,
                alpha,
                eta,
                coefficients: fit.coefficients,
                sweeps: fit.sweeps,
                objective: fit.objective,
                converged: fit.converged,
            });
        }
    }

    Ok(PathSolution {
        rho,
        grid: grid.clone(),
        cells,
        skipped,
        warm_starts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn toy() -> Dataset {
        let x = array![
            [1.0, 0.2, -1.0],
            [2.0, -0.4, 0.5],
            [3.0, 1.1, 0.3],
            [0.5, 0.9, -0.7],
            [-1.0, 0.0, 2.0],
            [0.3, -1.5, 1.0]
        ];
        let y = array![1.0, 2.5, 4.1, 0.2, -1.5, 0.0];
        Dataset::standardize(x.view(), y.view()).unwrap()
    }

    #[test]
    fn zero_response_gives_zero() {
        let d = toy();
        let d0 = d.with_response(Array1::zeros(d.n()).view()).unwrap();
        let spec = PenaltySpec::new(0.0, 1.0).unwrap();
        let fit = cd_fit(&d0, &spec, 0.1, &[0.0; 3], &CdOptions::default()).unwrap();
        assert_eq!(fit.coefficients, vec![0.0; 3]);
        assert!(fit.converged);
    }

    #[test]
    fn condition_violation_is_refused() {
        let spec = PenaltySpec::new(0.0, 10.0).unwrap();
        let err = cd_fit(&toy(), &spec, 1.0, &[0.0; 3], &CdOptions::default());
        assert!(matches!(err, Err(Error::ConditionViolated { .. })));
        let opts = CdOptions { allow_discontinuous: true, ..Default::default() };
        assert!(cd_fit(&toy(), &spec, 1.0, &[0.0; 3], &opts).is_ok());
    }

    #[test]
    fn trace_is_monotone_and_fixed_point_holds() {
        let d = toy();
        for rho in [-1.0, 0.0, 0.5, 1.0] {
            let spec = PenaltySpec::new(rho, 1.0).unwrap();
            let eta = 0.5 * spec.continuity_limit();
            let opts = CdOptions { record_trace: true, ..Default::default() };
            let fit = cd_fit(&d, &spec, eta, &[0.0; 3], &opts).unwrap();
            assert!(fit.converged);
            for w in fit.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            assert!(fixed_point_residual(&d, &spec, eta, &fit.coefficients).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(PathGrid::new(vec![1.0, 2.0], vec![1.0, 1e-8]).is_ok());
        assert!(PathGrid::new(vec![2.0, 1.0], vec![1e-8]).is_err());
        assert!(PathGrid::new(vec![1.0], vec![1e-8, 1.0]).is_err());
        assert!(PathGrid::new(vec![1.0], vec![1e-3]).is_err());
        assert!(PathGrid::new(vec![], vec![1e-8]).is_err());
    }

    #[test]
    fn default_grid_shapes() {
        let d = toy();
        let g = default_grid(&d, 0.0, 1, 1).unwrap();
        assert_eq!(g.etas(), &[eta_max(&d)]);
        assert_eq!(g.alphas(), &[LASSO_ALPHA]);
        for (l, k) in [(2, 2), (5, 3), (50, 20)] {
            let g = default_grid(&d, -1.0, l, k).unwrap();
            assert_eq!((g.etas().len(), g.alphas().len()), (l, k));
            assert!(g.etas().windows(2).all(|w| w[0] < w[1]));
            assert!(g.alphas().windows(2).all(|w| w[0] > w[1]));
            let spec = PenaltySpec::new(-1.0, g.alphas()[0]).unwrap();
            assert!(spec.continuity_holds(g.etas()[0]).unwrap());
        }
    }

    #[test]
    fn eta_max_of_unit_column_response() {
        let x = Array2::from_shape_fn((5, 2), |(i, j)| ((i + 1) * (j + 2)) as f64 % 7.0);
        let d = Dataset::standardize(x.view(), Array1::zeros(5).view()).unwrap();
        let y = d.x().column(0).to_owned();
        let d = d.with_response(y.view()).unwrap();
        assert!((eta_max(&d) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_cells_skipped() {
        let d = toy();
        let grid = PathGrid::new(vec![1e6], vec![100.0, 1e-7]).unwrap();
        // alpha = 1e-7 is solvable only while eta <= ~1e7, so pick a huge eta.
        let grid2 = PathGrid::new(vec![1e9], vec![100.0, 1e-7]).unwrap();
        let sol = cd_path(&d, 0.0, &grid2, &CdOptions::default()).unwrap();
        assert_eq!(sol.cells().count(), 0);
        assert_eq!(sol.skipped.len(), 2);
        let sol = cd_path(&d, 0.0, &grid, &CdOptions::default()).unwrap();
        assert_eq!(sol.skipped.iter().copied().collect::<Vec<_>>(), vec![(0, 0)]);
    }

    #[test]
    fn warm_start_chain() {
        let d = toy();
        let grid = default_grid(&d, 0.0, 2, 3).unwrap();
        let sol = cd_path(&d, 0.0, &grid, &CdOptions::default()).unwrap();
        assert_eq!(sol.warm_starts[1], vec![0.0; 3]);
        assert_eq!(sol.warm_starts[0], sol.cell(2, 1).unwrap().coefficients);
        let again = cd_path(&d, 0.0, &grid, &CdOptions::default()).unwrap();
        assert_eq!(sol, again);
    }
}
