//! Scalar threshold operator for `J1(b) = (z - b)^2 / 2 + lambda * Phi(alpha |b|)`.
//!
//! With `lambda = eta / Phi(alpha)` the minimizer is `S_alpha(z, eta)`. A
//! nonzero minimizer is the root `kappa` of
//!
//! ```text
//! h(b) = b + lambda * alpha * Phi'(alpha b) - |z|
//! ```
//!
//! If `lambda * alpha^2 <= 1` (`Phi''(0) = -1`) the problem is strictly convex,
//! `h` is increasing on `(0, |z|)` and the operator is continuous in `z`.
//! Otherwise `h` decreases up to `s*` (where `h' = 0`) and increases after it;
//! only the root on `(s*, |z|)` can be a minimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::{self, PenaltySpec, LIMIT_BRANCH_EPS};

/// Absolute tolerance on `h(kappa)`, scaled by `max(1, |z|)`.
pub const ROOT_TOL: f64 = 1e-12;
pub const MAX_BISECTION_ITERS: usize = 200;
/// Below this `alpha` the operator is replaced by its soft-threshold limit.
pub const SOFT_LIMIT_ALPHA: f64 = 1e-6;
/// Slack when comparing `J1(kappa)` against `J1(0)` in the nonconvex regime.
pub const OBJECTIVE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Continuous,
    Discontinuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Analytic,
    Bisection,
    Soft,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Analytic => "analytic",
            Method::Bisection => "bisection",
            Method::Soft => "soft",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDecision {
    pub estimate: f64,
    pub active: bool,
    /// `kappa(|z|)` when active, else 0.
    pub kappa: f64,
    /// `s*` in the discontinuous regime, else 0.
    pub sstar: f64,
    pub regime: Regime,
    pub method: Method,
}

impl ThresholdDecision {
    fn zero(regime: Regime, sstar: f64, method: Method) -> Self {
        Self {
            estimate: 0.0,
            active: false,
            kappa: 0.0,
            sstar,
            regime,
            method,
        }
    }
}

/// `sgn(z) * max(|z| - t, 0)`.
#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Scaled coefficient `lambda = eta / Phi(alpha)`.
pub fn lambda_for(spec: &PenaltySpec, eta: f64) -> Result<f64> {
    check_positive("eta", eta)?;
    Ok(eta / spec.phi(spec.alpha())?)
}

/// Root `s* > 0` of `1 + lambda alpha^2 Phi''(alpha s) = 0`; 0 when
/// `lambda alpha^2 <= 1`.
pub fn sstar(spec: &PenaltySpec, lambda: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    reject_mcp(spec)?;
    let alpha = spec.alpha();
    let scale = lambda * alpha * alpha;
    if scale <= 1.0 {
        return Ok(0.0);
    }
    let rho = spec.rho();
    if (1.0 - rho).abs() < LIMIT_BRANCH_EPS {
        Ok(scale.ln() / alpha)
    } else {
        let c = 1.0 - rho;
        // (1 + c x)^{(2-rho)/c} = scale, x = alpha s
        Ok((c / (2.0 - rho) * scale.ln()).exp_m1() / (c * alpha))
    }
}

/// Boundary of the zero region of `S_alpha(., eta)`.
pub fn shrink_boundary(spec: &PenaltySpec, eta: f64) -> Result<f64> {
    let lambda = lambda_for(spec, eta)?;
    reject_mcp(spec)?;
    let alpha = spec.alpha();
    let s = sstar(spec, lambda)?;
    Ok(s + lambda * alpha * penalty::d1(spec.rho(), alpha * s))
}

fn h(rho: f64, alpha: f64, lambda: f64, abs_z: f64, b: f64) -> f64 {
    b + lambda * alpha * penalty::d1(rho, alpha * b) - abs_z
}

/// Root of `h` on `(0, |z|)` (convex regime) or `(s*, |z|)` by bisection.
pub fn kappa_bisection(spec: &PenaltySpec, lambda: f64, abs_z: f64) -> Result<f64> {
    check_positive("abs_z", abs_z)?;
    let lo = sstar(spec, lambda)?;
    bisect(spec, lambda, abs_z, lo, abs_z)
}

fn bisect(spec: &PenaltySpec, lambda: f64, abs_z: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (rho, alpha) = (spec.rho(), spec.alpha());
    let f = |b| h(rho, alpha, lambda, abs_z, b);
    let (h_lo, h_hi) = (f(lo), f(hi));
    if h_lo > 0.0 || h_hi < 0.0 {
        return Err(Error::Bracket { lo, hi, h_lo, h_hi });
    }
    if h_lo == 0.0 {
        return Ok(lo);
    }
    let tol = ROOT_TOL * abs_z.max(1.0);
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h_mid = f(mid);
        if h_mid == 0.0 {
            return Ok(mid);
        }
        if h_mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (r_lo, r_hi) = (f(lo).abs(), f(hi).abs());
    let best = if r_lo <= r_hi { lo } else { hi };
    if r_lo.min(r_hi) <= tol {
        Ok(best)
    } else {
        Err(Error::NoConvergence {
            what: "kappa bisection",
            iterations: MAX_BISECTION_ITERS,
        })
    }
}

/// Closed-form `kappa` for LOG, LFR and KEP.
///
/// Returns `Ok(None)` for other family members so the caller can fall back to
/// bisection. Each formula is the largest root of the polynomial that `h`
/// reduces to after clearing denominators.
pub fn kappa_analytic(spec: &PenaltySpec, lambda: f64, abs_z: f64) -> Result<Option<f64>> {
    check_positive("lambda", lambda)?;
    check_positive("abs_z", abs_z)?;
    reject_mcp(spec)?;
    let (rho, alpha) = (spec.rho(), spec.alpha());
    let az = alpha * abs_z;
    let la2 = lambda * alpha * alpha;
    if rho.abs() < LIMIT_BRANCH_EPS {
        // alpha b^2 + (1 - alpha|z|) b + (lambda alpha - |z|) = 0
        let disc = (1.0 + az) * (1.0 + az) - 4.0 * la2;
        if disc < 0.0 {
            return Err(Error::InvariantViolation(format!(
                "LOG discriminant {disc} < 0 at |z| = {abs_z}"
            )));
        }
        let bq = 1.0 - az;
        let cq = lambda * alpha - abs_z;
        let root = if bq <= 0.0 {
            (-bq + disc.sqrt()) / (2.0 * alpha)
        } else {
            // Avoid cancellation: the larger root is c / q with q = -(b + sqrt(disc)) / 2.
            cq / (-(bq + disc.sqrt()) / 2.0)
        };
        Ok(Some(root))
    } else if rho == 0.5 {
        // u = 2 + alpha b: u^3 - (alpha|z| + 2) u^2 + 4 lambda alpha^2 = 0
        let a = az + 2.0;
        let arg = acos_arg(1.0 - 54.0 * la2 / (a * a * a))?;
        let theta = arg.acos();
        Ok(Some(
            2.0 * a / (3.0 * alpha) * (theta / 3.0).cos() + a / (3.0 * alpha) - 2.0 / alpha,
        ))
    } else if rho == -1.0 {
        // t = sqrt(1 + 2 alpha b): t^3 - (2 alpha|z| + 1) t + 2 lambda alpha^2 = 0
        let a = 2.0 * az + 1.0;
        let arg = acos_arg(-la2 * (3.0 / a).powf(1.5))?;
        let c = (arg.acos() / 3.0).cos();
        Ok(Some((4.0 * a / 3.0 * c * c - 1.0) / (2.0 * alpha)))
    } else {
        Ok(None)
    }
}

fn acos_arg(x: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if !(-1.0 - SLACK..=1.0 + SLACK).contains(&x) {
        return Err(Error::InvariantViolation(format!(
            "arccos argument {x} outside [-1, 1]"
        )));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Evaluates `S_alpha(z, eta)`.
pub fn threshold(spec: &PenaltySpec, z: f64, eta: f64) -> Result<ThresholdDecision> {
    if !z.is_finite() {
        return Err(Error::domain("z", z, "finite"));
    }
    check_positive("eta", eta)?;
    reject_mcp(spec)?;
    let alpha = spec.alpha();
    if alpha < SOFT_LIMIT_ALPHA {
        let estimate = soft_threshold(z, eta);
        return Ok(ThresholdDecision {
            estimate,
            active: estimate != 0.0,
            kappa: estimate.abs(),
            sstar: 0.0,
            regime: Regime::Continuous,
            method: Method::Soft,
        });
    }
    let lambda = lambda_for(spec, eta)?;
    let rho = spec.rho();
    let regime = if lambda * alpha * alpha <= 1.0 {
        Regime::Continuous
    } else {
        Regime::Discontinuous
    };
    let s_star = sstar(spec, lambda)?;
    let boundary = s_star + lambda * alpha * penalty::d1(rho, alpha * s_star);
    let abs_z = z.abs();
    if abs_z <= boundary {
        return Ok(ThresholdDecision::zero(regime, s_star, Method::Analytic));
    }

    let tol = ROOT_TOL * abs_z.max(1.0);
    let analytic = kappa_analytic(spec, lambda, abs_z)
        .ok()
        .flatten()
        .filter(|&k| k > s_star && k < abs_z && h(rho, alpha, lambda, abs_z, k).abs() <= tol);
    let (kappa, method) = match analytic {
        Some(k) => (k, Method::Analytic),
        None => (bisect(spec, lambda, abs_z, s_star, abs_z)?, Method::Bisection),
    };

    if regime == Regime::Discontinuous {
        let j_kappa = 0.5 * (abs_z - kappa).powi(2) + lambda * penalty::value(rho, alpha * kappa);
        let j_zero = 0.5 * abs_z * abs_z;
        if j_kappa > j_zero + OBJECTIVE_SLACK {
            return Ok(ThresholdDecision::zero(regime, s_star, method));
        }
    }

    Ok(ThresholdDecision {
        estimate: kappa.copysign(z),
        active: true,
        kappa,
        sstar: s_star,
        regime,
        method,
    })
}

/// `J1(b) = (z - b)^2 / 2 + lambda Phi(alpha |b|)` with `lambda = eta / Phi(alpha)`.
pub fn univariate_objective(spec: &PenaltySpec, z: f64, eta: f64, b: f64) -> Result<f64> {
    let lambda = lambda_for(spec, eta)?;
    Ok(0.5 * (z - b).powi(2) + lambda * spec.phi(spec.alpha() * b.abs())?)
}

fn check_positive(what: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(what, x, "positive and finite"))
    }
}

fn reject_mcp(spec: &PenaltySpec) -> Result<()> {
    if spec.is_mcp() {
        Err(Error::Unsupported(
            "threshold operator is defined for Bernstein penalties (rho <= 1)".into(),
        ))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(rho: f64, alpha: f64) -> PenaltySpec {
        PenaltySpec::new(rho, alpha).unwrap()
    }

    /// Dense grid plus golden-section refinement of J1 on [-|z|-1, |z|+1].
    fn grid_argmin(sp: &PenaltySpec, z: f64, eta: f64) -> f64 {
        let j = |b: f64| univariate_objective(sp, z, eta, b).unwrap();
        let half = z.abs() + 1.0;
        let n = 4000;
        let step = 2.0 * half / n as f64;
        let (mut best, mut best_val) = (0.0, j(0.0));
        for i in 0..=n {
            let b = -half + i as f64 * step;
            if j(b) < best_val {
                best = b;
                best_val = j(b);
            }
        }
        let (mut lo, mut hi) = (best - step, best + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if j(m1) < j(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        let refined = 0.5 * (lo + hi);
        if j(0.0) <= j(refined) {
            0.0
        } else {
            refined
        }
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(2.0, 1.0), 1.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(0.0, 0.3), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
    }

    #[test]
    fn sstar_examples() {
        assert_relative_eq!(sstar(&spec(0.0, 1.0), 4.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(sstar(&spec(1.0, 1.0), std::f64::consts::E).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(sstar(&spec(0.0, 1.0), 1.0).unwrap(), 0.0);
        assert_eq!(sstar(&spec(-1.0, 0.5), 2.0).unwrap(), 0.0);
        assert!(sstar(&spec(0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn sstar_solves_its_equation() {
        for rho in [-2.0, -1.0, 0.0, 0.5, 0.8, 1.0] {
            for (alpha, lambda) in [(1.0, 4.0), (3.0, 0.5), (0.5, 20.0)] {
                let sp = spec(rho, alpha);
                let s = sstar(&sp, lambda).unwrap();
                assert!(s > 0.0);
                let resid = 1.0 + lambda * alpha * alpha * sp.phi_d2(alpha * s).unwrap();
                assert!(resid.abs() < 1e-12, "rho={rho}: {resid}");
            }
        }
    }

    #[test]
    fn shrink_boundary_examples() {
        let eta = 0.5;
        assert_relative_eq!(shrink_boundary(&spec(0.0, 1.0), eta).unwrap(), 0.5 / 2f64.ln(), epsilon = 1e-14);
        assert!(shrink_boundary(&spec(0.0, 1.0), 1e-300).unwrap() < 1e-299);

        // KEP, alpha = 4, eta = 1: Phi(4) = 2, lambda = 0.5, lambda alpha^2 = 8 > 1.
        let kep = spec(-1.0, 4.0);
        let lambda = 0.5;
        // Oracle: bisection on 1 + lambda alpha^2 Phi''(alpha s) = 0, Phi'' = -(1+2x)^{-3/2}.
        let g = |s: f64| 1.0 - 8.0 * (1.0 + 8.0 * s).powf(-1.5);
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if g(m) < 0.0 { lo = m } else { hi = m }
        }
        let s_star = 0.5 * (lo + hi);
        let expected = s_star + lambda * 4.0 / (1.0 + 8.0 * s_star).sqrt();
        assert_relative_eq!(shrink_boundary(&kep, 1.0).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn kappa_examples() {
        let log = spec(0.0, 1.0);
        let expect = (1.0 + 7f64.sqrt()) / 2.0;
        assert_relative_eq!(kappa_bisection(&log, 0.5, 2.0).unwrap(), expect, epsilon = 1e-12);
        assert_relative_eq!(kappa_analytic(&log, 0.5, 2.0).unwrap().unwrap(), expect, epsilon = 1e-14);

        let lfr = spec(0.5, 2.0);
        let z = 0.5 + 2.0 / 9.0;
        assert_relative_eq!(kappa_bisection(&lfr, 0.25, z).unwrap(), 0.5, epsilon = 1e-12);
        assert_relative_eq!(kappa_analytic(&lfr, 0.25, z).unwrap().unwrap(), 0.5, epsilon = 1e-12);

        let exp = spec(1.0, 1.0);
        let z = 2f64.ln() + 0.25;
        assert_relative_eq!(kappa_bisection(&exp, 0.5, z).unwrap(), 2f64.ln(), epsilon = 1e-12);
        assert_eq!(kappa_analytic(&exp, 0.5, z).unwrap(), None);

        // At the continuous boundary |z| = lambda alpha the root is 0.
        assert_relative_eq!(kappa_analytic(&log, 0.5, 0.5).unwrap().unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn analytic_matches_bisection() {
        for rho in [-1.0, 0.0, 0.5] {
            for alpha in [0.1, 1.0, 3.0, 7.0] {
                for lambda in [0.01, 0.09, 0.5, 2.0] {
                    let sp = spec(rho, alpha);
                    let eta = lambda * sp.phi(alpha).unwrap();
                    let boundary = shrink_boundary(&sp, eta).unwrap();
                    for k in 1..20 {
                        let z = boundary + 0.3 * k as f64;
                        let a = kappa_analytic(&sp, lambda, z).unwrap().unwrap();
                        let b = kappa_bisection(&sp, lambda, z).unwrap();
                        assert!((a - b).abs() <= 1e-8 * z.max(1.0), "rho={rho} alpha={alpha} lambda={lambda} z={z}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn bracket_error_on_precondition_breach() {
        let sp = spec(0.0, 1.0);
        assert!(matches!(kappa_bisection(&sp, 0.5, 0.1), Err(Error::Bracket { .. })));
    }

    #[test]
    fn threshold_examples() {
        let sp = spec(0.0, 1.0);
        let eta = 0.5 * 2f64.ln();
        let d = threshold(&sp, 0.4, eta).unwrap();
        assert_eq!(d.estimate, 0.0);
        assert!(!d.active);
        assert_eq!(grid_argmin(&sp, 0.4, eta), 0.0);

        let d = threshold(&sp, 2.0, eta).unwrap();
        assert_relative_eq!(d.estimate, (1.0 + 7f64.sqrt()) / 2.0, epsilon = 1e-12);
        assert_eq!(d.method, Method::Analytic);
        assert_eq!(d.regime, Regime::Continuous);
        let d = threshold(&sp, -2.0, eta).unwrap();
        assert_relative_eq!(d.estimate, -(1.0 + 7f64.sqrt()) / 2.0, epsilon = 1e-12);

        let d = threshold(&sp, 0.0, eta).unwrap();
        assert_eq!(d.estimate, 0.0);

        let tiny = spec(0.0, 1e-8);
        let d = threshold(&tiny, 2.0, 1.0).unwrap();
        assert_eq!(d.method, Method::Soft);
        assert_relative_eq!(d.estimate, 1.0, epsilon = 1e-12);
        // Just above the soft cutoff the exact operator agrees with the limit.
        let small = spec(0.0, 2e-6);
        let exact = threshold(&small, 2.0, 1.0).unwrap();
        assert_ne!(exact.method, Method::Soft);
        assert!((exact.estimate - 1.0).abs() < 1e-5);
    }

    #[test]
    fn continuity_at_boundary() {
        for rho in [-1.0, 0.0, 0.5, 1.0] {
            let sp = spec(rho, 1.5);
            let eta = 0.8 * sp.continuity_limit();
            let boundary = shrink_boundary(&sp, eta).unwrap();
            let d = threshold(&sp, boundary + 1e-8, eta).unwrap();
            assert!(d.estimate.abs() <= 1e-6, "rho={rho}: {}", d.estimate);
        }
    }

    #[test]
    fn discontinuous_regime_picks_global_minimizer() {
        for rho in [-1.0, 0.0, 0.5, 1.0] {
            let sp = spec(rho, 5.0);
            let eta = 4.0 * sp.continuity_limit();
            for k in 0..60 {
                let z = 0.05 * k as f64;
                let d = threshold(&sp, z, eta).unwrap();
                assert_eq!(d.regime, Regime::Discontinuous);
                let oracle = grid_argmin(&sp, z, eta);
                let j = |b| univariate_objective(&sp, z, eta, b).unwrap();
                assert!(j(d.estimate) <= j(oracle) + 1e-9, "rho={rho} z={z}: {} vs {}", d.estimate, oracle);
            }
        }
    }

    #[test]
    fn mcp_is_rejected() {
        let mcp = PenaltySpec::mcp(1.0).unwrap();
        assert!(matches!(threshold(&mcp, 1.0, 0.5), Err(Error::Unsupported(_))));
    }
}
