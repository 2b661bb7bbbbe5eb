//! The generalized-Gamma family of Bernstein penalties.
//!
//! For `rho <= 1` the family is
//!
//! ```text
//! Phi_rho(s) = log(1 + s)                                     rho = 0
//!            = (1/rho) [1 - (1 + (1-rho) s)^(-rho/(1-rho))]   rho < 1, rho != 0
//!            = 1 - exp(-s)                                    rho = 1
//! ```
//!
//! with `Phi(0) = 0`, `Phi'(0) = 1` and `Phi''(0) = -1`. Named members are KEP
//! (`rho = -1`), LOG (`rho = 0`), LFR (`rho = 1/2`) and EXP (`rho = 1`). The
//! value `rho = 2` is admitted only as the truncated MCP function.
//!
//! All powers are evaluated as `exp(k * log1p((1-rho) s))` so that very
//! negative `rho` or large `s` do not overflow intermediate terms.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Distance from the poles `rho = 0` and `rho = 1` inside which the closed-form
/// limit branches are used.
pub const LIMIT_BRANCH_EPS: f64 = 1e-8;

/// One instance of the penalty family: index `rho` and sparseness scale `alpha`.
///
/// Serializes as `{ "rho": .., "alpha": .. }`; the MCP variant additionally
/// carries `"mcp": true` and requires `rho = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct PenaltySpec {
    rho: f64,
    alpha: f64,
    mcp: bool,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    rho: f64,
    alpha: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    mcp: bool,
}

impl TryFrom<RawSpec> for PenaltySpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        if raw.mcp {
            if raw.rho != 2.0 {
                return Err(Error::domain("rho", raw.rho, "MCP mode requires rho = 2"));
            }
            PenaltySpec::mcp(raw.alpha)
        } else {
            PenaltySpec::new(raw.rho, raw.alpha)
        }
    }
}

impl From<PenaltySpec> for RawSpec {
    fn from(spec: PenaltySpec) -> Self {
        RawSpec {
            rho: spec.rho,
            alpha: spec.alpha,
            mcp: spec.mcp,
        }
    }
}

impl PenaltySpec {
    /// A Bernstein penalty; requires `rho <= 1` and `alpha > 0`.
    pub fn new(rho: f64, alpha: f64) -> Result<Self> {
        if !rho.is_finite() || rho > 1.0 {
            return Err(Error::domain(
                "rho",
                rho,
                "rho <= 1 for Bernstein penalties (rho = 2 needs MCP mode)",
            ));
        }
        check_alpha(alpha)?;
        Ok(Self {
            rho,
            alpha,
            mcp: false,
        })
    }

    /// The MCP variant, i.e. `Phi_2` truncated at `1/2`.
    pub fn mcp(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            rho: 2.0,
            alpha,
            mcp: true,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_mcp(&self) -> bool {
        self.mcp
    }

    /// Same family index with a different `alpha`.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self { alpha, ..*self })
    }

    /// `Phi_rho(s)`; for MCP the truncated value `M(s)`.
    pub fn phi(&self, s: f64) -> Result<f64> {
        check_arg(s)?;
        Ok(if self.mcp { mcp_value(s) } else { value(self.rho, s) })
    }

    /// `Phi'_rho(s)`, in `(0, 1]` and strictly decreasing.
    pub fn phi_d1(&self, s: f64) -> Result<f64> {
        check_arg(s)?;
        self.require_bernstein("first derivative")?;
        Ok(d1(self.rho, s))
    }

    /// `Phi''_rho(s) = -(1 + (1-rho) s)^(-(2-rho)/(1-rho))`.
    pub fn phi_d2(&self, s: f64) -> Result<f64> {
        check_arg(s)?;
        self.require_bernstein("second derivative")?;
        Ok(d2(self.rho, s))
    }

    /// `eta * Phi(alpha |b|) / Phi(alpha)`, the penalty normalized to equal
    /// `eta` at `|b| = 1`.
    pub fn normalized_penalty(&self, b: f64, eta: f64) -> Result<f64> {
        if !b.is_finite() {
            return Err(Error::domain("b", b, "finite"));
        }
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::domain("eta", eta, "eta > 0"));
        }
        let scale = self.phi(self.alpha)?;
        if !(scale > 0.0) {
            return Err(Error::domain("alpha", self.alpha, "Phi(alpha) > 0"));
        }
        Ok(eta * self.phi(self.alpha * b.abs())? / scale)
    }

    /// Index of regular variation `gamma` of `Phi_rho` at infinity.
    pub fn rv_exponent(&self) -> Result<f64> {
        self.require_bernstein("regular-variation exponent")?;
        Ok(rv_exponent(self.rho))
    }

    /// True when `eta <= -Phi(alpha) / (alpha^2 Phi''(0))`, i.e. the scaled
    /// univariate problem is strictly convex and the threshold is continuous.
    pub fn continuity_holds(&self, eta: f64) -> Result<bool> {
        self.require_bernstein("continuity condition")?;
        Ok(eta <= self.continuity_limit())
    }

    /// `Phi(alpha) / alpha^2`, the largest `eta` admitting a continuous threshold.
    pub fn continuity_limit(&self) -> f64 {
        // Phi''(0) = -1 for every member of the family.
        value(self.rho, self.alpha) / (self.alpha * self.alpha)
    }

    fn require_bernstein(&self, what: &str) -> Result<()> {
        if self.mcp {
            Err(Error::Unsupported(format!(
                "{what} is not provided for the MCP variant"
            )))
        } else {
            Ok(())
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("alpha", alpha, "alpha > 0"))
    }
}

fn check_arg(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("s", s, "finite s >= 0"))
    }
}

#[derive(Clone, Copy)]
enum Branch {
    Log,
    Exp,
    Generic,
}

fn branch(rho: f64) -> Branch {
    if rho.abs() < LIMIT_BRANCH_EPS {
        Branch::Log
    } else if (1.0 - rho).abs() < LIMIT_BRANCH_EPS {
        Branch::Exp
    } else {
        Branch::Generic
    }
}

// The unchecked evaluators below assume rho <= 1 and s >= 0.

pub(crate) fn value(rho: f64, s: f64) -> f64 {
    match branch(rho) {
        Branch::Log => s.ln_1p(),
        Branch::Exp => -(-s).exp_m1(),
        Branch::Generic => {
            let c = 1.0 - rho;
            let l = (c * s).ln_1p();
            -(-rho / c * l).exp_m1() / rho
        }
    }
}

pub(crate) fn d1(rho: f64, s: f64) -> f64 {
    match branch(rho) {
        Branch::Log => 1.0 / (1.0 + s),
        Branch::Exp => (-s).exp(),
        Branch::Generic => {
            let c = 1.0 - rho;
            (-(c * s).ln_1p() / c).exp()
        }
    }
}

pub(crate) fn d2(rho: f64, s: f64) -> f64 {
    match branch(rho) {
        Branch::Log => -1.0 / ((1.0 + s) * (1.0 + s)),
        Branch::Exp => -(-s).exp(),
        Branch::Generic => {
            let c = 1.0 - rho;
            -(-(1.0 + c) / c * (c * s).ln_1p()).exp()
        }
    }
}

pub(crate) fn mcp_value(s: f64) -> f64 {
    if s >= 1.0 {
        0.5
    } else {
        s - s * s / 2.0
    }
}

pub(crate) fn rv_exponent(rho: f64) -> f64 {
    if rho >= 0.0 {
        0.0
    } else {
        rho / (rho - 1.0)
    }
}

/// The Lévy measure of `Phi_rho`: a generalized Gamma density for `rho < 1`,
/// the unit atom `delta_1` for `rho = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyMeasure {
    Density(LevyDensity),
    Atom { location: f64 },
}

impl LevyMeasure {
    pub fn for_rho(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho > 1.0 {
            return Err(Error::domain("rho", rho, "rho <= 1"));
        }
        if (1.0 - rho).abs() < LIMIT_BRANCH_EPS {
            Ok(LevyMeasure::Atom { location: 1.0 })
        } else {
            LevyDensity::new(rho).map(LevyMeasure::Density)
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, LevyMeasure::Atom { .. })
    }
}

/// Density of the generalized Gamma Lévy measure
///
/// ```text
/// nu(du) = (1-rho)^(-1/(1-rho)) / Gamma(1/(1-rho)) * u^(rho/(1-rho) - 1) * exp(-u/(1-rho)) du
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyDensity {
    rho: f64,
    log_norm: f64,
}

impl LevyDensity {
    pub fn new(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho >= 1.0 - LIMIT_BRANCH_EPS {
            return Err(Error::domain(
                "rho",
                rho,
                "rho < 1 (rho = 1 has the atomic measure delta_1)",
            ));
        }
        let c = 1.0 - rho;
        let shape = 1.0 / c;
        Ok(Self {
            rho,
            log_norm: -shape * c.ln() - ln_gamma(shape),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn density(&self, u: f64) -> Result<f64> {
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::domain("u", u, "u > 0"));
        }
        Ok(self.density_unchecked(u))
    }

    fn density_unchecked(&self, u: f64) -> f64 {
        let c = 1.0 - self.rho;
        (self.log_norm + (self.rho / c - 1.0) * u.ln() - u / c).exp()
    }

    /// Reconstructs `Phi(s) = int_0^inf (1 - e^{-su}) nu(du)` by double-exponential
    /// quadrature. The range is truncated where the density drops below
    /// `1e-14` and split at `u = 1` so the `u -> 0` singularity (present for
    /// `rho < 0`) sits at an endpoint.
    pub fn reconstruct_phi(&self, s: f64) -> Result<f64> {
        check_arg(s)?;
        Ok(self.integrate(|u| -(-s * u).exp_m1()))
    }

    /// `int_0^inf g(u) nu(du)` for `g` with `g(u) = O(u)` at the origin.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        use quadrature::double_exponential::integrate;
        let mut upper = 8.0_f64;
        while self.density_unchecked(upper) >= 1e-14 {
            upper *= 2.0;
        }
        let c = 1.0 - self.rho;
        // On [0, 1] substitute u = t^c when rho < 0: the integrand then stays
        // bounded at t = 0.
        let head = if c > 1.0 {
            integrate(
                |t: f64| {
                    if t <= 0.0 {
                        return 0.0;
                    }
                    let u = t.powf(c);
                    c * u / t * g(u) * self.density_unchecked(u)
                },
                0.0,
                1.0,
                1e-13,
            )
            .integral
        } else {
            integrate(|u: f64| if u <= 0.0 { 0.0 } else { g(u) * self.density_unchecked(u) }, 0.0, 1.0, 1e-13)
                .integral
        };
        let tail = |u: f64| g(u) * self.density_unchecked(u);
        head + integrate(tail, 1.0, 8.0, 1e-13).integral + integrate(tail, 8.0, upper, 1e-13).integral
    }
}

/// `levy_density(rho, u)` as a free function.
pub fn levy_density(rho: f64, u: f64) -> Result<f64> {
    LevyDensity::new(rho)?.density(u)
}
