use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hybridnav_core::sim::{Metrics, Outcome, Scenario, SimTrace};

/// Summary of one run, written as `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: String,
    pub seed: u64,
    pub outcome: Outcome,
    pub fail_reason: Option<String>,
    pub metrics: Metrics<f64>,
    /// SHA-256 of the resolved scenario JSON.
    pub fingerprint: String,
}

impl RunReport {
    pub fn new(scenario: &Scenario<f64>, trace: &SimTrace<f64>) -> Self {
        Self {
            scenario: scenario.name.clone(),
            mode: scenario.nav.strategy.name().to_string(),
            seed: scenario.sim.seed,
            outcome: trace.outcome,
            fail_reason: trace.fail_reason.clone(),
            metrics: trace.metrics.clone(),
            fingerprint: fingerprint(scenario),
        }
    }
}

pub fn fingerprint(scenario: &Scenario<f64>) -> String {
    let json = serde_json::to_string(scenario).expect("scenarios serialize");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// The `compare` table. Column widths are fixed so output diffs cleanly.
pub fn format_table(reports: &[RunReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<11} {:<8} {:>10} {:>9} {:>8} {:>8} {:>11} {:>10}",
        "mode", "outcome", "run_time_s", "path_m", "replans", "avoid_%", "min_clear_m", "collisions"
    );
    for r in reports {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{:<11} {:<8} {:>10.2} {:>9.3} {:>8} {:>8.1} {:>11.3} {:>10}",
            r.mode,
            r.outcome.as_str(),
            m.run_time,
            m.path_length,
            m.replan_count,
            100.0 * m.avoid_tick_fraction,
            m.min_clearance,
            m.collisions
        );
    }
    out
}
