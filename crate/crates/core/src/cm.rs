//! Conjugate-maximization (CM) for
//!
//! ```text
//! J(b, eta) = ||y - X b||^2 / 2 + (1/alpha) sum_j eta_j Phi(alpha |b_j|)
//! ```
//!
//! through the augmented objective
//!
//! ```text
//! Q(b, w, eta) = ||y - X b||^2 / 2 + w^T |b| + (1/alpha) D_phi(w, eta).
//! ```
//!
//! The C-step sets `w = eta * Phi'(alpha |b|)` (the exact minimizer over `w`),
//! the M-step solves the weighted lasso in `b` and sets `eta = w`. Each full
//! iteration does not increase `J`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::divergence;
use crate::error::{Error, Result};
use crate::penalty::{self, PenaltySpec};
use crate::threshold::soft_threshold;

/// Lower clamp on C-step weights; keeps `eta` inside the divergence domain.
pub const WEIGHT_FLOOR: f64 = 1e-30;
/// Allowed increase of `J` between iterations before the run is declared broken.
pub const DESCENT_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmOptions {
    /// Bound on the relative objective change and on the largest coefficient
    /// change that ends the outer loop.
    pub tol: f64,
    pub max_iter: usize,
    /// Coordinate-change tolerance of the weighted-lasso solve.
    pub inner_tol: f64,
    pub inner_max_sweeps: usize,
}

impl Default for CmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            inner_tol: 1e-10,
            inner_max_sweeps: 10_000,
        }
    }
}

fn check_bernstein(spec: &PenaltySpec) -> Result<()> {
    if spec.is_mcp() {
        Err(Error::Unsupported("CM requires a Bernstein penalty (rho <= 1)".into()))
    } else {
        Ok(())
    }
}

fn check_positive(what: &'static str, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        Some(&bad) => Err(Error::domain(what, bad, "every component positive and finite")),
        None => Ok(()),
    }
}

/// `J(b, eta)`.
pub fn cm_objective(data: &Dataset, spec: &PenaltySpec, b: &[f64], eta: &[f64]) -> Result<f64> {
    check_bernstein(spec)?;
    data.check_len("coefficients", b.len())?;
    data.check_len("eta", eta.len())?;
    let alpha = spec.alpha();
    let pen: f64 = b
        .iter()
        .zip(eta)
        .map(|(bj, ej)| ej * penalty::value(spec.rho(), alpha * bj.abs()))
        .sum();
    Ok(data.half_rss(b) + pen / alpha)
}

/// `Q(b, w, eta)`.
pub fn augmented_objective(
    data: &Dataset,
    spec: &PenaltySpec,
    b: &[f64],
    w: &[f64],
    eta: &[f64],
) -> Result<f64> {
    check_bernstein(spec)?;
    data.check_len("coefficients", b.len())?;
    data.check_len("weights", w.len())?;
    check_positive("w", w)?;
    let l1: f64 = w.iter().zip(b).map(|(wj, bj)| wj * bj.abs()).sum();
    Ok(data.half_rss(b) + l1 + divergence::dphi(spec.rho(), w, eta)? / spec.alpha())
}

/// C-step: `w_j = eta_j * Phi'(alpha |b_j|)`, floored at [`WEIGHT_FLOOR`].
pub fn c_step(spec: &PenaltySpec, b: &[f64], eta: &[f64]) -> Result<Vec<f64>> {
    check_bernstein(spec)?;
    if b.len() != eta.len() {
        return Err(Error::DimensionMismatch {
            what: "eta",
            expected: b.len(),
            found: eta.len(),
        });
    }
    check_positive("eta", eta)?;
    let alpha = spec.alpha();
    Ok(b.iter()
        .zip(eta)
        .map(|(bj, ej)| (ej * penalty::d1(spec.rho(), alpha * bj.abs())).max(WEIGHT_FLOOR))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Cyclic coordinate descent for `||y - X b||^2 / 2 + sum_j w_j |b_j|`.
pub fn weighted_lasso(
    data: &Dataset,
    weights: &[f64],
    warm: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<LassoFit> {
    data.check_len("weights", weights.len())?;
    data.check_len("warm start", warm.len())?;
    if let Some(&bad) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::domain("w", bad, "nonnegative weights"));
    }
    let gram = data.gram();
    let xty = data.xty();
    let mut b = Array1::from(warm.to_vec());
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut gb = gram.dot(&b);
        let mut max_change = 0.0_f64;
        for j in 0..b.len() {
            let gjj = gram[[j, j]];
            let z = xty[j] - gb[j] + gjj * b[j];
            let new = soft_threshold(z, weights[j]) / gjj;
            let delta = new - b[j];
            if delta != 0.0 {
                b[j] = new;
                gb.scaled_add(delta, &gram.column(j));
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            converged = true;
            break;
        }
    }
    Ok(LassoFit {
        coefficients: b.to_vec(),
        sweeps,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    pub b: Vec<f64>,
    pub eta: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// M-step: weighted lasso warm-started at `warm`, and `eta = w`.
pub fn m_step(data: &Dataset, w: &[f64], warm: &[f64], opts: &CmOptions) -> Result<MStep> {
    check_positive("w", w)?;
    let fit = weighted_lasso(data, w, warm, opts.inner_tol, opts.inner_max_sweeps)?;
    Ok(MStep {
        b: fit.coefficients,
        eta: w.to_vec(),
        sweeps: fit.sweeps,
        converged: fit.converged,
    })
}

/// Iterate of the CM run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmState {
    pub b: Vec<f64>,
    /// Weights from the most recent C-step.
    pub w: Vec<f64>,
    pub eta: Vec<f64>,
    /// `J` at the initial point and after every iteration.
    pub j_trace: Vec<f64>,
    /// Largest `|b^{k+1} - b^k|` per iteration.
    pub max_change: Vec<f64>,
    pub num_nonzero: Vec<usize>,
    pub iter: usize,
    pub converged: bool,
    /// False if any weighted-lasso solve hit its sweep cap.
    pub inner_converged: bool,
}

impl CmState {
    /// `b = 0`, `eta = w0`.
    pub fn new(data: &Dataset, spec: &PenaltySpec, w0: &[f64]) -> Result<Self> {
        data.check_len("w0", w0.len())?;
        check_positive("w0", w0)?;
        let b = vec![0.0; data.p()];
        let j0 = cm_objective(data, spec, &b, w0)?;
        Ok(Self {
            b,
            w: w0.to_vec(),
            eta: w0.to_vec(),
            j_trace: vec![j0],
            max_change: Vec::new(),
            num_nonzero: Vec::new(),
            iter: 0,
            converged: false,
            inner_converged: true,
        })
    }

    /// Coordinates whose weight sits at the floor, i.e. effectively unpenalized.
    pub fn floored(&self) -> Vec<usize> {
        self.w
            .iter()
            .enumerate()
            .filter(|(_, w)| **w <= WEIGHT_FLOOR)
            .map(|(j, _)| j)
            .collect()
    }

    pub fn objective(&self) -> f64 {
        *self.j_trace.last().unwrap()
    }

    /// One C-step and M-step. Returns the largest coefficient change.
    pub fn step(&mut self, data: &Dataset, spec: &PenaltySpec, opts: &CmOptions) -> Result<f64> {
        self.step_observed(data, spec, opts, &mut |_: &CStepView<'_>| {})
    }

    fn step_observed(
        &mut self,
        data: &Dataset,
        spec: &PenaltySpec,
        opts: &CmOptions,
        observer: &mut dyn FnMut(&CStepView<'_>),
    ) -> Result<f64> {
        let w = c_step(spec, &self.b, &self.eta)?;
        observer(&CStepView {
            iter: self.iter,
            b: &self.b,
            w: &w,
            eta: &self.eta,
        });
        let m = m_step(data, &w, &self.b, opts)?;
        let change = self
            .b
            .iter()
            .zip(&m.b)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let j_prev = self.objective();
        let j_next = cm_objective(data, spec, &m.b, &m.eta)?;
        if j_next > j_prev + DESCENT_SLACK {
            return Err(Error::InvariantViolation(format!(
                "CM objective increased at iteration {}: {j_prev} -> {j_next}",
                self.iter + 1
            )));
        }
        self.inner_converged &= m.converged;
        self.num_nonzero.push(m.b.iter().filter(|v| **v != 0.0).count());
        self.b = m.b;
        self.w = w;
        self.eta = m.eta;
        self.j_trace.push(j_next);
        self.max_change.push(change);
        self.iter += 1;
        Ok(change)
    }
}

/// State right after a C-step, before the M-step uses it.
#[derive(Debug)]
pub struct CStepView<'a> {
    pub iter: usize,
    pub b: &'a [f64],
    pub w: &'a [f64],
    pub eta: &'a [f64],
}

/// Runs CM from `b = 0`, `eta = w0` until both the relative change of `J`
/// and the largest coefficient change of one iteration drop below
/// `opts.tol`, or `opts.max_iter` iterations.
pub fn cm_solve(data: &Dataset, spec: &PenaltySpec, w0: &[f64], opts: &CmOptions) -> Result<CmState> {
    cm_solve_observed(data, spec, w0, opts, |_| {})
}

/// [`cm_solve`] with a callback after every C-step.
pub fn cm_solve_observed(
    data: &Dataset,
    spec: &PenaltySpec,
    w0: &[f64],
    opts: &CmOptions,
    mut observer: impl FnMut(&CStepView<'_>),
) -> Result<CmState> {
    check_bernstein(spec)?;
    let mut state = CmState::new(data, spec, w0)?;
    while state.iter < opts.max_iter {
        let j_prev = state.objective();
        let change = state.step_observed(data, spec, opts, &mut observer)?;
        if (j_prev - state.objective()).abs() < opts.tol * (1.0 + j_prev.abs()) && change < opts.tol {
            state.converged = true;
            break;
        }
    }
    Ok(state)
}

/// Default initial weights `lambda * 1` with `lambda = 0.5 * max_j |x_j^T y|`.
pub fn default_w0(data: &Dataset) -> Vec<f64> {
    let lambda = 0.5 * crate::cdpath::eta_max(data);
    vec![if lambda > 0.0 { lambda } else { 1.0 }; data.p()]
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
    fn objective_at_zero() {
        let d = toy();
        let spec = PenaltySpec::new(0.0, 2.0).unwrap();
        let j = cm_objective(&d, &spec, &[0.0; 3], &[1.0; 3]).unwrap();
        assert!((j - 0.5 * d.yty()).abs() < 1e-12);
        let d0 = d.with_response(Array1::zeros(d.n()).view()).unwrap();
        assert_eq!(cm_objective(&d0, &spec, &[0.0; 3], &[1.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn c_step_examples() {
        let log = PenaltySpec::new(0.0, 2.0).unwrap();
        assert_eq!(c_step(&log, &[0.5], &[1.0]).unwrap(), vec![0.5]);
        assert_eq!(c_step(&log, &[0.0, 0.0], &[0.3, 2.0]).unwrap(), vec![0.3, 2.0]);
        let exp = PenaltySpec::new(1.0, 1.0).unwrap();
        assert!((c_step(&exp, &[2f64.ln()], &[2.0]).unwrap()[0] - 1.0).abs() < 1e-15);
        // underflow is clamped
        assert_eq!(c_step(&exp, &[1e4], &[1.0]).unwrap(), vec![WEIGHT_FLOOR]);
    }

    #[test]
    fn augmented_tight_at_c_step() {
        let d = toy();
        for rho in [-1.0, 0.0, 0.5, 1.0] {
            let spec = PenaltySpec::new(rho, 1.5).unwrap();
            let b = [0.7, -0.2, 0.0];
            let eta = [0.4, 1.3, 0.8];
            let w = c_step(&spec, &b, &eta).unwrap();
            let q = augmented_objective(&d, &spec, &b, &w, &eta).unwrap();
            let j = cm_objective(&d, &spec, &b, &eta).unwrap();
            assert!((q - j).abs() <= 1e-10, "rho={rho}");
            for j_idx in 0..3 {
                for delta in [-1e-2, 1e-2] {
                    let mut wp = w.clone();
                    wp[j_idx] += delta;
                    assert!(augmented_objective(&d, &spec, &b, &wp, &eta).unwrap() > q);
                }
            }
        }
        let spec = PenaltySpec::new(0.0, 1.0).unwrap();
        let eta = [0.4, 1.3, 0.8];
        let q = augmented_objective(&d, &spec, &[0.0; 3], &eta, &eta).unwrap();
        assert!((q - 0.5 * d.yty()).abs() < 1e-12);
    }

    #[test]
    fn huge_weights_zero_everything() {
        let d = toy();
        let m = m_step(&d, &[1e12; 3], &[0.3, 0.1, 0.0], &CmOptions::default()).unwrap();
        assert_eq!(m.b, vec![0.0; 3]);
        assert_eq!(m.eta, vec![1e12; 3]);
    }

    #[test]
    fn zero_response_converges_immediately() {
        let d = toy();
        let d0 = d.with_response(Array1::zeros(d.n()).view()).unwrap();
        let spec = PenaltySpec::new(0.0, 1.0).unwrap();
        let s = cm_solve(&d0, &spec, &[0.7; 3], &CmOptions::default()).unwrap();
        assert_eq!(s.iter, 1);
        assert!(s.converged);
        assert_eq!(s.b, vec![0.0; 3]);
        assert_eq!(s.eta, vec![0.7; 3]);
    }

    #[test]
    fn trace_descends_and_is_deterministic() {
        let d = toy();
        let spec = PenaltySpec::new(-1.0, 2.0).unwrap();
        let w0 = default_w0(&d);
        let a = cm_solve(&d, &spec, &w0, &CmOptions::default()).unwrap();
        let b = cm_solve(&d, &spec, &w0, &CmOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.converged);
        for w in a.j_trace.windows(2) {
            assert!(w[1] <= w[0] + DESCENT_SLACK);
        }
    }

    #[test]
    fn rejects_mcp_and_bad_weights() {
        let d = toy();
        let mcp = PenaltySpec::mcp(1.0).unwrap();
        assert!(matches!(cm_solve(&d, &mcp, &[1.0; 3], &CmOptions::default()), Err(Error::Unsupported(_))));
        let spec = PenaltySpec::new(0.0, 1.0).unwrap();
        assert!(cm_solve(&d, &spec, &[1.0, 0.0, 1.0], &CmOptions::default()).is_err());
        assert!(cm_solve(&d, &spec, &[1.0; 2], &CmOptions::default()).is_err());
    }

    #[test]
    fn uniform_weights_equal_penalty_path_objective() {
        // J with eta_j = alpha * eta / Phi(alpha) equals the path objective F at eta.
        let d = toy();
        let spec = PenaltySpec::new(0.5, 1.7).unwrap();
        let eta = 0.3;
        let eta_j = spec.alpha() * eta / spec.phi(spec.alpha()).unwrap();
        let b = [0.4, -1.1, 0.05];
        let j = cm_objective(&d, &spec, &b, &[eta_j; 3]).unwrap();
        let f = crate::cdpath::objective(&d, &spec, eta, &b).unwrap();
        assert!((j - f).abs() < 1e-12);
        let _ = Array2::<f64>::zeros((1, 1));
    }
}
