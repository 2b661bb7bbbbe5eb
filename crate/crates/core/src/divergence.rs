//! The `phi_rho` divergence family and its concave-conjugate link to the
//! penalties:
//!
//! ```text
//! phi_rho(z) = z - log z - 1                              rho = 0
//!            = (z^rho - rho z + rho - 1) / (rho (rho - 1)) rho != 0, 1
//!            = z log z - z + 1                            rho = 1
//!
//! Phi_rho(s) = min_{w > 0} { w s + phi_rho(w) },   argmin w* = Phi'_rho(s)
//! ```
//!
//! For `rho = 2` the same minimization yields the MCP function.

use crate::error::{Error, Result};
use crate::penalty::{self, LIMIT_BRANCH_EPS};

/// `phi_rho(z)` for `z >= 0`, with `0 log 0 = 0` and `phi_rho(0) = +inf` for
/// `rho <= 0`.
pub fn varphi(rho: f64, z: f64) -> Result<f64> {
    if !rho.is_finite() {
        return Err(Error::domain("rho", rho, "finite"));
    }
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::domain("z", z, "finite z >= 0"));
    }
    Ok(varphi_unchecked(rho, z))
}

pub(crate) fn varphi_unchecked(rho: f64, z: f64) -> f64 {
    if rho.abs() < LIMIT_BRANCH_EPS {
        if z == 0.0 {
            f64::INFINITY
        } else {
            z - z.ln() - 1.0
        }
    } else if (rho - 1.0).abs() < LIMIT_BRANCH_EPS {
        if z == 0.0 {
            1.0
        } else {
            z * z.ln() - z + 1.0
        }
    } else if z == 0.0 && rho < 0.0 {
        f64::INFINITY
    } else {
        (z.powf(rho) - rho * z + rho - 1.0) / (rho * (rho - 1.0))
    }
}

/// `D_phi(w, eta) = sum_j eta_j phi(w_j / eta_j)`.
pub fn dphi(rho: f64, w: &[f64], eta: &[f64]) -> Result<f64> {
    if w.len() != eta.len() {
        return Err(Error::DimensionMismatch {
            what: "divergence arguments",
            expected: w.len(),
            found: eta.len(),
        });
    }
    let mut total = 0.0;
    for (&wj, &ej) in w.iter().zip(eta) {
        if !(ej > 0.0) || !ej.is_finite() {
            return Err(Error::domain("eta_j", ej, "eta_j > 0"));
        }
        total += ej * varphi(rho, wj / ej)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conjugate {
    pub value: f64,
    pub minimizer: f64,
}

/// `min_{w>0} { w s + phi_rho(w) }` via the closed-form minimizer
/// `w* = Phi'_rho(s)`.
pub fn conjugate_phi(rho: f64, s: f64) -> Result<Conjugate> {
    check_bernstein(rho)?;
    check_s(s)?;
    let w = penalty::d1(rho, s);
    Ok(Conjugate {
        value: w * s + varphi_unchecked(rho, w),
        minimizer: w,
    })
}

/// The same minimum found numerically by golden-section search over `log w` on
/// `[1e-300, 1e3]`. Independent of the closed-form minimizer.
pub fn conjugate_phi_numeric(rho: f64, s: f64) -> Result<Conjugate> {
    if !rho.is_finite() {
        return Err(Error::domain("rho", rho, "finite"));
    }
    check_s(s)?;
    let f = |t: f64| {
        let w = t.exp();
        w * s + varphi_unchecked(rho, w)
    };
    let t = golden_section(f, 1e-300_f64.ln(), 1e3_f64.ln(), 1e-10);
    Ok(Conjugate {
        value: f(t),
        minimizer: t.exp(),
    })
}

/// Minimizes a unimodal function on `[lo, hi]` to interval width `tol`.
/// Ties move the bracket right, so a flat left plateau does not trap the search.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// `min_{w >= 0} { w s + phi_2(w) }`: the MCP function `s - s^2/2` for `s < 1`
/// and `1/2` beyond.
pub fn mcp_conjugate(s: f64) -> Result<f64> {
    check_s(s)?;
    // unconstrained minimizer 1 - s, clipped at the boundary w = 0
    let w = (1.0 - s).max(0.0);
    Ok(if w > 0.0 { s - s * s / 2.0 } else { varphi_unchecked(2.0, 0.0) })
}

/// The MCP conjugate evaluated literally as `w* s + phi_2(w*)`.
pub fn mcp_conjugate_by_minimizer(s: f64) -> Result<Conjugate> {
    check_s(s)?;
    let w = (1.0 - s).max(0.0);
    Ok(Conjugate {
        value: w * s + varphi_unchecked(2.0, w),
        minimizer: w,
    })
}

/// `(eta/alpha) Phi(alpha s)`, checked against
/// `min_{w>0} { w s + (eta/alpha) phi(w/eta) }` at `w* = eta Phi'(alpha s)`.
pub fn scaled_conjugate(rho: f64, alpha: f64, eta: f64, s: f64) -> Result<f64> {
    check_bernstein(rho)?;
    check_s(s)?;
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain("alpha", alpha, "alpha > 0"));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::domain("eta", eta, "eta > 0"));
    }
    let direct = eta / alpha * penalty::value(rho, alpha * s);
    let w = eta * penalty::d1(rho, alpha * s);
    let via_conjugate = w * s + eta / alpha * varphi_unchecked(rho, w / eta);
    let tol = 1e-9 * direct.abs().max(eta / alpha).max(1.0);
    if (direct - via_conjugate).abs() > tol {
        return Err(Error::InvariantViolation(format!(
            "conjugate identity fails at rho={rho}, alpha={alpha}, eta={eta}, s={s}: \
             {direct} vs {via_conjugate}"
        )));
    }
    Ok(direct)
}

fn check_bernstein(rho: f64) -> Result<()> {
    if rho.is_finite() && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain("rho", rho, "rho <= 1 (use mcp_conjugate for rho = 2)"))
    }
}

fn check_s(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("s", s, "finite s >= 0"))
    }
}
