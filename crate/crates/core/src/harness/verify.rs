//! Self-checks behind `bernsparse verify`. Every suite is deterministic and
//! returns one [`CheckRow`] per measured quantity.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cdpath::{cd_fit, cd_path, eta_max, fixed_point_residual, CdOptions, PathGrid};
use crate::cm::{augmented_objective, cm_objective, cm_solve_observed, default_w0, weighted_lasso, CmOptions};
use crate::data::Dataset;
use crate::divergence::{conjugate_phi, conjugate_phi_numeric, mcp_conjugate};
use crate::error::{Error, Result};
use crate::harness::limits::{limit_experiment, LimitKind, NAMED_RHOS};
use crate::harness::sim::{generate_stream, SimConfig};
use crate::harness::CheckRow;
use crate::penalty::{self, PenaltySpec};
use crate::threshold::{kappa_analytic, kappa_bisection, lambda_for, shrink_boundary, threshold};

const SEED: u64 = 0x005e_edb5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Thresholds,
    Conjugacy,
    Limits,
    Descent,
}

pub fn run_suite(suite: Suite) -> Result<Vec<CheckRow>> {
    match suite {
        Suite::Thresholds => thresholds(500),
        Suite::Conjugacy => conjugacy(),
        Suite::Limits => {
            let mut rows = Vec::new();
            for kind in LimitKind::ALL {
                rows.extend(limit_experiment(kind)?);
            }
            Ok(rows)
        }
        Suite::Descent => descent(20, 50),
    }
}

/// Minimizer of `J1` over `b >= 0` for `|z|` in the continuous regime: best
/// point of a 2001-point grid on `[0, |z|]`, refined by bisection on the sign
/// of `J1'`. Carries the sign of `z`.
pub fn grid_argmin(spec: &PenaltySpec, z: f64, eta: f64) -> Result<f64> {
    let lambda = lambda_for(spec, eta)?;
    let (rho, alpha, az) = (spec.rho(), spec.alpha(), z.abs());
    if az == 0.0 {
        return Ok(0.0);
    }
    let j1 = |b: f64| 0.5 * (az - b).powi(2) + lambda * penalty::value(rho, alpha * b);
    let dj1 = |b: f64| b - az + lambda * alpha * penalty::d1(rho, alpha * b);
    const N: usize = 2000;
    let at = |i: usize| az * i as f64 / N as f64;
    let best = (0..=N)
        .min_by(|&a, &b| j1(at(a)).total_cmp(&j1(at(b))))
        .unwrap_or(0);
    let (mut lo, mut hi) = (at(best.saturating_sub(1)), at((best + 1).min(N)));
    if dj1(lo) >= 0.0 {
        return Ok(z.signum() * lo);
    }
    if dj1(hi) <= 0.0 {
        return Ok(z.signum() * hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dj1(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(z.signum() * 0.5 * (lo + hi))
}

fn random_rho(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        NAMED_RHOS[rng.random_range(0..4)]
    } else {
        rng.random_range(-1.5..1.0)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

struct Worst {
    value: f64,
    case: String,
}

impl Worst {
    fn new() -> Self {
        Self { value: 0.0, case: "none".into() }
    }

    fn update(&mut self, v: f64, case: impl FnOnce() -> String) {
        if !(v <= self.value) {
            self.value = v;
            self.case = case();
        }
    }
}

/// Random continuous-regime tuples: `threshold` against [`grid_argmin`], and
/// the analytic root against bisection where a closed form exists.
pub fn thresholds(tuples: usize) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut argmin = Worst::new();
    let mut roots = Worst::new();
    let mut n_roots = 0;
    for _ in 0..tuples {
        let rho = random_rho(&mut rng);
        let alpha = log_uniform(&mut rng, 1e-2, 1e2);
        let spec = PenaltySpec::new(rho, alpha)?;
        let eta = rng.random_range(0.0..1.0) * spec.continuity_limit();
        let eta = eta.max(1e-12);
        let z = rng.random_range(-4.0..4.0);
        let case = || format!("rho={rho} alpha={alpha} eta={eta} z={z}");

        let got = threshold(&spec, z, eta)?.estimate;
        let want = grid_argmin(&spec, z, eta)?;
        argmin.update((got - want).abs(), case);

        let lambda = lambda_for(&spec, eta)?;
        if z.abs() > shrink_boundary(&spec, eta)? {
            if let Some(k) = kappa_analytic(&spec, lambda, z.abs())? {
                let b = kappa_bisection(&spec, lambda, z.abs())?;
                n_roots += 1;
                roots.update((k - b).abs(), case);
            }
        }
    }
    Ok(vec![
        CheckRow::new(
            "thresholds",
            format!("threshold vs grid argmin, worst of {tuples}: {}", argmin.case),
            argmin.value,
            0.0,
            Some(1e-6),
        ),
        CheckRow::new(
            "thresholds",
            format!("analytic kappa vs bisection, worst of {n_roots}: {}", roots.case),
            roots.value,
            0.0,
            Some(1e-8),
        ),
    ])
}

/// Conjugate identity on 50 log-spaced `s` in `[1e-3, 1e2]` per named `rho`,
/// and the MCP piecewise identity on a 1000-point grid.
pub fn conjugacy() -> Result<Vec<CheckRow>> {
    let ss: Vec<f64> = (0..50).map(|i| 10f64.powf(-3.0 + 5.0 * i as f64 / 49.0)).collect();
    let mut rows = Vec::new();
    for &rho in &NAMED_RHOS {
        let mut closed = 0.0_f64;
        let mut numeric = 0.0_f64;
        for &s in &ss {
            let phi = penalty::value(rho, s);
            closed = closed.max((conjugate_phi(rho, s)?.value - phi).abs());
            numeric = numeric.max((conjugate_phi_numeric(rho, s)?.value - phi).abs());
        }
        rows.push(CheckRow::new("conjugacy", format!("rho={rho} closed-form minimizer"), closed, 0.0, Some(1e-8)));
        rows.push(CheckRow::new("conjugacy", format!("rho={rho} golden-section minimizer"), numeric, 0.0, Some(1e-6)));
    }
    let mismatches = (0..1000)
        .filter(|&i| {
            let s = 3.0 * i as f64 / 999.0;
            let piecewise = if s < 1.0 { s - s * s / 2.0 } else { 0.5 };
            mcp_conjugate(s).map_or(true, |v| v != piecewise)
        })
        .count();
    rows.push(CheckRow::new("conjugacy", "mcp piecewise mismatches on 1000 points".into(), mismatches as f64, 0.0, Some(0.0)));
    Ok(rows)
}

/// A random `n x p` problem with a sparse truth, standardized.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Result<Dataset> {
    let mut b = vec![0.0; p];
    for bj in b.iter_mut().take(p.div_ceil(4)) {
        *bj = rng.random_range(0.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    let config = SimConfig {
        n,
        p,
        true_b: b,
        sigma: 1.0,
        corr: rng.random_range(0.0..0.8),
        replicates: 1,
        seed: rng.random(),
    };
    let d = generate_stream(&config, n, 0)?;
    Dataset::standardize(d.x.view(), d.y.view())
}

/// Coordinate descent and CM certificates on random problems.
pub fn descent(cd_problems: usize, cm_problems: usize) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    let mut cd_increase = Worst::new();
    let mut cd_fixed = Worst::new();
    let mut lasso_end = Worst::new();
    let mut cd_unconverged = 0usize;
    for i in 0..cd_problems {
        let data = random_problem(&mut rng, 100, 20)?;
        let rho = NAMED_RHOS[rng.random_range(0..4)];
        let spec = PenaltySpec::new(rho, log_uniform(&mut rng, 0.1, 10.0))?;
        let eta = rng.random_range(0.01..1.0) * spec.continuity_limit().min(eta_max(&data));
        let opts = CdOptions { record_trace: true, ..Default::default() };
        let fit = cd_fit(&data, &spec, eta, &vec![0.0; data.p()], &opts)?;
        cd_unconverged += !fit.converged as usize;
        let inc = fit.trace.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        cd_increase.update(inc, || format!("problem {i}"));
        cd_fixed.update(fixed_point_residual(&data, &spec, eta, &fit.coefficients)?, || format!("problem {i}"));

        let top = eta_max(&data);
        let grid = PathGrid::new(vec![0.05 * top, 0.2 * top, 0.6 * top], vec![1.0, 1e-8])?;
        let path = cd_path(&data, rho, &grid, &CdOptions::default())?;
        for (l, &eta_l) in grid.etas().iter().enumerate() {
            let cell = path.cell(1, l).ok_or_else(|| Error::InvariantViolation("lasso cell skipped".into()))?;
            let reference = weighted_lasso(&data, &vec![eta_l; data.p()], &vec![0.0; data.p()], 1e-12, 100_000)?;
            let d = cell
                .coefficients
                .iter()
                .zip(&reference.coefficients)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            lasso_end.update(d, || format!("problem {i} eta={eta_l}"));
        }
    }

    let mut cm_increase = Worst::new();
    let mut sandwich = Worst::new();
    let mut extra_step = Worst::new();
    let mut cm_unconverged = 0usize;
    for i in 0..cm_problems {
        let data = random_problem(&mut rng, 100, 20)?;
        let rho = NAMED_RHOS[rng.random_range(0..4)];
        let spec = PenaltySpec::new(rho, log_uniform(&mut rng, 0.1, 10.0))?;
        let scale = rng.random_range(0.05..1.0);
        let w0: Vec<f64> = default_w0(&data).iter().map(|w| w * scale).collect();
        let opts = CmOptions::default();
        let mut gap = 0.0_f64;
        let mut observe_err = None;
        let state = cm_solve_observed(&data, &spec, &w0, &opts, |v| {
            let q = augmented_objective(&data, &spec, v.b, v.w, v.eta);
            let j = cm_objective(&data, &spec, v.b, v.eta);
            match (q, j) {
                (Ok(q), Ok(j)) => gap = gap.max((q - j).abs()),
                (Err(e), _) | (_, Err(e)) => observe_err = Some(e),
            }
        })?;
        if let Some(e) = observe_err {
            return Err(e);
        }
        cm_unconverged += !state.converged as usize;
        let inc = state.j_trace.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        cm_increase.update(inc, || format!("problem {i}"));
        sandwich.update(gap, || format!("problem {i}"));
        let mut next = state.clone();
        let change = next.step(&data, &spec, &opts)?;
        extra_step.update(change, || format!("problem {i}"));
    }

    Ok(vec![
        CheckRow::new("descent", format!("cd objective increase per sweep, worst: {}", cd_increase.case), cd_increase.value, 0.0, Some(1e-12)),
        CheckRow::new("descent", format!("cd fixed-point residual, worst: {}", cd_fixed.case), cd_fixed.value, 0.0, Some(1e-8)),
        CheckRow::new("descent", format!("cd unconverged fits of {cd_problems}"), cd_unconverged as f64, 0.0, Some(0.0)),
        CheckRow::new("descent", format!("lasso end vs weighted lasso, worst: {}", lasso_end.case), lasso_end.value, 0.0, Some(1e-6)),
        CheckRow::new("descent", format!("cm objective increase, worst: {}", cm_increase.case), cm_increase.value, 0.0, Some(1e-10)),
        CheckRow::new("descent", format!("cm sandwich gap after c-step, worst: {}", sandwich.case), sandwich.value, 0.0, Some(1e-10)),
        CheckRow::new("descent", format!("cm change under one extra iteration, worst: {}", extra_step.case), extra_step.value, 0.0, Some(1e-8)),
        CheckRow::new("descent", format!("cm unconverged runs of {cm_problems}"), cm_unconverged as f64, 0.0, Some(0.0)),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_argmin_matches_soft_in_lasso_limit() {
        let spec = PenaltySpec::new(0.0, 1e-7).unwrap();
        let b = grid_argmin(&spec, 2.5, 1.0).unwrap();
        assert!((b - 1.5).abs() < 1e-6);
        assert_eq!(grid_argmin(&spec, -0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn small_threshold_suite_passes() {
        assert!(thresholds(60).unwrap().iter().all(|r| r.pass));
    }

    #[test]
    fn conjugacy_suite_passes() {
        let rows = conjugacy().unwrap();
        assert!(rows.iter().all(|r| r.pass), "{rows:?}");
    }
}
