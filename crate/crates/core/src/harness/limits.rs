//! Measured deviations from the limiting behavior of the penalty family and
//! its threshold operator.
//!
//! Grids:
//! - `SoftLimit`: `alpha = 1e-4`, `eta = 1`, `z` in `[-3, 3]` with step `0.01`.
//! - `LargeAlpha`: `rho = 0`, `eta = 0.5`, `z = 1`, `alpha` in `{1e2, 1e4, 1e6, 1e8}`.
//!   The bias of the log penalty decays like `eta / ln(alpha)`, so the
//!   convergence is only logarithmic.
//! - `RegularVariation`: `alpha` in `{1e4, 1e6, 1e8}`, `s` in `{0.25, 4}`.
//!   For `rho = 0` the ratio behaves like `1 + ln(s) / ln(alpha)`.
//! - `Nesting`: 121 log-spaced `alpha` in `[1e-6, 1e6]`. For `rho = 1`,
//!   `Phi(alpha)` rounds to 1 beyond `alpha` of about 37, so `1/Phi` is only
//!   checked for not increasing.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::CheckRow;
use crate::penalty::{self, PenaltySpec};
use crate::threshold::{soft_threshold, threshold};

pub const NAMED_RHOS: [f64; 4] = [-1.0, 0.0, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitKind {
    SoftLimit,
    LargeAlpha,
    RegularVariation,
    Nesting,
}

impl LimitKind {
    pub const ALL: [LimitKind; 4] = [
        LimitKind::SoftLimit,
        LimitKind::LargeAlpha,
        LimitKind::RegularVariation,
        LimitKind::Nesting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LimitKind::SoftLimit => "soft_limit",
            LimitKind::LargeAlpha => "large_alpha",
            LimitKind::RegularVariation => "regular_variation",
            LimitKind::Nesting => "nesting",
        }
    }
}

pub fn limit_experiment(kind: LimitKind) -> Result<Vec<CheckRow>> {
    match kind {
        LimitKind::SoftLimit => soft_limit(),
        LimitKind::LargeAlpha => large_alpha(),
        LimitKind::RegularVariation => regular_variation(),
        LimitKind::Nesting => nesting(),
    }
}

/// `sup_z |S_alpha(z, eta) - soft(z, eta)|` over the documented `z` grid.
pub fn soft_limit_deviation(rho: f64, alpha: f64, eta: f64) -> Result<f64> {
    let spec = PenaltySpec::new(rho, alpha)?;
    let mut sup = 0.0_f64;
    for i in 0..=600 {
        let z = -3.0 + 0.01 * i as f64;
        let s = threshold(&spec, z, eta)?.estimate;
        sup = sup.max((s - soft_threshold(z, eta)).abs());
    }
    Ok(sup)
}

fn soft_limit() -> Result<Vec<CheckRow>> {
    NAMED_RHOS
        .iter()
        .map(|&rho| {
            let dev = soft_limit_deviation(rho, 1e-4, 1.0)?;
            Ok(CheckRow::new(
                LimitKind::SoftLimit.name(),
                format!("rho={rho} alpha=1e-4 eta=1 sup_z"),
                dev,
                0.0,
                Some(1e-3),
            ))
        })
        .collect()
}

fn large_alpha() -> Result<Vec<CheckRow>> {
    [1e2, 1e4, 1e6, 1e8]
        .iter()
        .map(|&alpha| {
            let spec = PenaltySpec::new(0.0, alpha)?;
            let s = threshold(&spec, 1.0, 0.5)?.estimate;
            let tol = (alpha == 1e6).then_some(1e-2);
            Ok(CheckRow::new(
                LimitKind::LargeAlpha.name(),
                format!("rho=0 alpha={alpha:e} eta=0.5 z=1"),
                s,
                1.0,
                tol,
            ))
        })
        .collect()
}

fn regular_variation() -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    for &rho in &NAMED_RHOS {
        let gamma = penalty::rv_exponent(rho);
        for alpha in [1e4, 1e6, 1e8] {
            for s in [0.25, 4.0] {
                let ratio = penalty::value(rho, alpha * s) / penalty::value(rho, alpha);
                let tol = if alpha == 1e8 {
                    Some(if rho < 0.0 { 1e-3 } else { 1e-1 })
                } else {
                    None
                };
                rows.push(CheckRow::new(
                    LimitKind::RegularVariation.name(),
                    format!("rho={rho} alpha={alpha:e} s={s}"),
                    ratio,
                    s.powf(gamma),
                    tol,
                ));
            }
        }
    }
    Ok(rows)
}

fn nesting() -> Result<Vec<CheckRow>> {
    let alphas: Vec<f64> = (0..=120).map(|i| 10f64.powf(-6.0 + 0.1 * i as f64)).collect();
    let mut rows = Vec::new();
    for &rho in &NAMED_RHOS {
        let scaled: Vec<f64> = alphas.iter().map(|&a| a / penalty::value(rho, a)).collect();
        let not_increasing = scaled.windows(2).filter(|w| !(w[1] > w[0])).count();
        let not_above_one = scaled.iter().filter(|v| !(**v > 1.0)).count();
        let inv_not_decreasing = alphas
            .windows(2)
            .filter(|w| 1.0 / penalty::value(rho, w[1]) > 1.0 / penalty::value(rho, w[0]))
            .count();
        let name = LimitKind::Nesting.name();
        rows.push(CheckRow::new(
            name,
            format!("rho={rho} alpha/Phi(alpha) non-increasing steps"),
            not_increasing as f64,
            0.0,
            Some(0.0),
        ));
        rows.push(CheckRow::new(
            name,
            format!("rho={rho} alpha/Phi(alpha) <= 1 count"),
            not_above_one as f64,
            0.0,
            Some(0.0),
        ));
        rows.push(CheckRow::new(
            name,
            format!("rho={rho} 1/Phi(alpha) increasing steps"),
            inv_not_decreasing as f64,
            0.0,
            Some(0.0),
        ));
        rows.push(CheckRow::new(
            name,
            format!("rho={rho} alpha/Phi(alpha) at alpha=1e-8"),
            1e-8 / penalty::value(rho, 1e-8),
            1.0,
            Some(1e-6),
        ));
    }
    Ok(rows)
}
