//! Simulation and verification campaigns with plain-table output.

pub mod export;
pub mod limits;
pub mod oracle;
pub mod sim;
pub mod verify;

use serde::{Deserialize, Serialize};

pub use export::{export, import, Format, Table};
pub use limits::{limit_experiment, LimitKind};
pub use oracle::{oracle_experiment, FitMethod, OracleReport, OracleSettings, RecoveryMetrics, ReplicateRecord};
pub use sim::{generate, Draw, SimConfig};

/// One measured quantity next to its reference value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub suite: String,
    pub case: String,
    pub measured: f64,
    pub reference: f64,
    /// `|measured - reference|`.
    pub deviation: f64,
    /// Rows without a tolerance are informational and always pass.
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl CheckRow {
    pub fn new(suite: &str, case: String, measured: f64, reference: f64, tolerance: Option<f64>) -> Self {
        let deviation = (measured - reference).abs();
        Self {
            suite: suite.to_string(),
            case,
            measured,
            reference,
            deviation,
            tolerance,
            pass: tolerance.is_none_or(|t| deviation <= t),
        }
    }
}
