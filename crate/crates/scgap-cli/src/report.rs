//! Self-describing run reports: tool version, effective configuration,
//! per-check results, and the converse-gap block, serialized as JSON.
//! The `timestamp` and `wall_time_s` fields are the only ones allowed to
//! differ between reruns with the same configuration and seed.

use std::path::Path;

use serde::Serialize;

use scgap::bounds::ConverseGap;
use scgap::suite::CheckResult;

use crate::config::RunConfig;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool_version: &'static str,
    pub command: String,
    pub seed: u64,
    pub config: RunConfig,
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converse: Option<ConverseGap>,
    pub all_hold: bool,
    pub timestamp: u64,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn new(command: &str, config: RunConfig, checks: Vec<CheckResult>) -> Self {
        let all_hold = checks.iter().all(|c| c.holds);
        Self {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: config.optimizer.seed,
            config,
            checks,
            converse: None,
            all_hold,
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_time_s: 0.0,
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), String> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
        let path = out_dir.join("report.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| format!("cannot serialize report: {e}"))?;
        std::fs::write(&path, text + "\n")
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    }
}

pub fn write_csv(out_dir: &Path, name: &str, content: &str) -> Result<(), String> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let path = out_dir.join(name);
    std::fs::write(&path, content).map_err(|e| format!("cannot write {}: {e}", path.display()))
}
