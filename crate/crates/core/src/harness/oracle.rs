//! Support-recovery experiments across sample sizes.

use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdpath::{cd_path, default_grid, CdOptions};
use crate::cm::{cm_solve, CmOptions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::harness::sim::{generate_stream, stream_id, SimConfig};
use crate::penalty::PenaltySpec;

/// Coefficients with `|b_j|` above this count as selected.
pub const SUPPORT_TOL: f64 = 1e-6;
/// Environment variable capping the worker threads of an experiment.
pub const THREADS_ENV: &str = "BERNSPARSE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Path,
    Cm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleSettings {
    pub method: FitMethod,
    pub rho: f64,
    pub n_etas: usize,
    pub n_alphas: usize,
    /// Fixed alpha for CM runs; the CM candidates range over `w0 = eta * 1`.
    pub cm_alpha: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self {
            method: FitMethod::Path,
            rho: 0.0,
            n_etas: 50,
            n_alphas: 20,
            cm_alpha: 1.0,
        }
    }
}

/// Outcome of one replicate. Failed replicates carry `error` and zero metrics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub n: usize,
    pub replicate: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub exact_support: bool,
    /// `||b_hat - b*||_2` on the raw scale.
    pub l2_error: f64,
    /// Same norm restricted to the true support.
    pub active_l2_error: f64,
    pub alpha: f64,
    pub eta: f64,
    pub validation_mse: f64,
    pub error: Option<String>,
}

/// Aggregate over the replicates of one sample size.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub n: usize,
    pub replicates: usize,
    pub failures: usize,
    pub true_positive: usize,
    pub false_positive: usize,
    pub exact_support: usize,
    pub exact_support_rate: f64,
    pub mean_l2_error: f64,
    pub mean_active_l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub settings: OracleSettings,
    pub summaries: Vec<RecoveryMetrics>,
    pub records: Vec<ReplicateRecord>,
}

impl OracleReport {
    /// Least-squares slope of `ln(mean active l2 error)` on `ln n`; about
    /// `-0.5` under root-n consistency.
    pub fn error_rate_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .summaries
            .iter()
            .filter(|s| s.mean_active_l2_error > 0.0 && s.replicates > s.failures)
            .map(|s| ((s.n as f64).ln(), s.mean_active_l2_error.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let m = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        Some(sxy / sxx)
    }
}

/// Runs `f` on a pool limited by [`THREADS_ENV`] when that variable holds a
/// positive integer, otherwise on the global pool.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> Result<R> {
    match std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(k) if k > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

/// For every `n` in `ns` and every replicate: draws training and validation
/// sets, fits the candidate grid, keeps the candidate with the smallest
/// validation error and scores its support.
pub fn oracle_experiment(config: &SimConfig, ns: &[usize], settings: &OracleSettings) -> Result<OracleReport> {
    config.validate()?;
    if ns.is_empty() {
        return Err(Error::InvalidGrid("no sample sizes given".into()));
    }
    if let Some(&n) = ns.iter().find(|n| **n < 2) {
        return Err(Error::TooFewRows { required: 2, found: n });
    }
    if settings.n_etas == 0 || settings.n_alphas == 0 {
        return Err(Error::InvalidGrid("grid sizes must be at least 1".into()));
    }
    let jobs: Vec<(usize, usize, usize)> = ns
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..config.replicates).map(move |r| (i, n, r)))
        .collect();
    let records: Vec<ReplicateRecord> = with_thread_cap(|| {
        jobs.par_iter()
            .map(|&(i, n, r)| run_replicate(config, settings, i, n, r))
            .collect()
    })?;
    let summaries = ns
        .iter()
        .map(|&n| summarize(n, records.iter().filter(|r| r.n == n)))
        .collect();
    Ok(OracleReport {
        settings: *settings,
        summaries,
        records,
    })
}

fn summarize<'a>(n: usize, recs: impl Iterator<Item = &'a ReplicateRecord>) -> RecoveryMetrics {
    let mut m = RecoveryMetrics {
        n,
        replicates: 0,
        failures: 0,
        true_positive: 0,
        false_positive: 0,
        exact_support: 0,
        exact_support_rate: 0.0,
        mean_l2_error: 0.0,
        mean_active_l2_error: 0.0,
    };
    for r in recs {
        m.replicates += 1;
        if r.error.is_some() {
            m.failures += 1;
            continue;
        }
        m.true_positive += r.true_positive;
        m.false_positive += r.false_positive;
        m.exact_support += r.exact_support as usize;
        m.mean_l2_error += r.l2_error;
        m.mean_active_l2_error += r.active_l2_error;
    }
    let ok = (m.replicates - m.failures) as f64;
    if ok > 0.0 {
        m.exact_support_rate = m.exact_support as f64 / ok;
        m.mean_l2_error /= ok;
        m.mean_active_l2_error /= ok;
    }
    m
}

fn run_replicate(config: &SimConfig, settings: &OracleSettings, n_index: usize, n: usize, rep: usize) -> ReplicateRecord {
    match fit_replicate(config, settings, n_index, n, rep) {
        Ok(r) => r,
        Err(e) => ReplicateRecord {
            n,
            replicate: rep,
            true_positive: 0,
            false_positive: 0,
            exact_support: false,
            l2_error: 0.0,
            active_l2_error: 0.0,
            alpha: 0.0,
            eta: 0.0,
            validation_mse: 0.0,
            error: Some(e.to_string()),
        },
    }
}

struct Candidate {
    alpha: f64,
    eta: f64,
    b: Vec<f64>,
}

fn fit_replicate(
    config: &SimConfig,
    settings: &OracleSettings,
    n_index: usize,
    n: usize,
    rep: usize,
) -> Result<ReplicateRecord> {
    let train = generate_stream(config, n, stream_id(n_index, rep, false))?;
    let valid = generate_stream(config, n, stream_id(n_index, rep, true))?;
    let data = Dataset::standardize(train.x.view(), train.y.view())?;

    let candidates = match settings.method {
        FitMethod::Path => {
            let grid = default_grid(&data, settings.rho, settings.n_etas, settings.n_alphas)?;
            let sol = cd_path(&data, settings.rho, &grid, &CdOptions::default())?;
            sol.cells()
                .map(|c| Candidate {
                    alpha: c.alpha,
                    eta: c.eta,
                    b: c.coefficients.clone(),
                })
                .collect::<Vec<_>>()
        }
        FitMethod::Cm => {
            let spec = PenaltySpec::new(settings.rho, settings.cm_alpha)?;
            let grid = default_grid(&data, settings.rho, settings.n_etas, 1)?;
            let mut out = Vec::with_capacity(grid.etas().len());
            for &eta in grid.etas() {
                let state = cm_solve(&data, &spec, &vec![eta; data.p()], &CmOptions::default())?;
                out.push(Candidate {
                    alpha: settings.cm_alpha,
                    eta,
                    b: state.b,
                });
            }
            out
        }
    };

    let mut best: Option<(f64, &Candidate)> = None;
    for c in &candidates {
        let mse = validation_mse(&data, &c.b, valid.x.view(), &valid.y);
        if best.is_none_or(|(m, _)| mse < m) {
            best = Some((mse, c));
        }
    }
    let (mse, chosen) = best.ok_or_else(|| Error::InvalidGrid("no solvable grid cell".into()))?;

    let (_, slopes) = data.to_raw_scale(&chosen.b);
    let mut rec = ReplicateRecord {
        n,
        replicate: rep,
        true_positive: 0,
        false_positive: 0,
        exact_support: true,
        l2_error: 0.0,
        active_l2_error: 0.0,
        alpha: chosen.alpha,
        eta: chosen.eta,
        validation_mse: mse,
        error: None,
    };
    for (j, (&bh, &bt)) in chosen.b.iter().zip(&config.true_b).enumerate() {
        let selected = bh.abs() > SUPPORT_TOL;
        let truth = bt != 0.0;
        match (selected, truth) {
            (true, true) => rec.true_positive += 1,
            (true, false) => rec.false_positive += 1,
            _ => {}
        }
        rec.exact_support &= selected == truth;
        let d2 = (slopes[j] - bt).powi(2);
        rec.l2_error += d2;
        if truth {
            rec.active_l2_error += d2;
        }
    }
    rec.l2_error = rec.l2_error.sqrt();
    rec.active_l2_error = rec.active_l2_error.sqrt();
    Ok(rec)
}

fn validation_mse(data: &Dataset, b: &[f64], x: ArrayView2<'_, f64>, y: &Array1<f64>) -> f64 {
    let (icpt, slopes) = data.to_raw_scale(b);
    let pred = x.dot(&Array1::from(slopes)) + icpt;
    let r = y - &pred;
    r.dot(&r) / y.len() as f64
}
