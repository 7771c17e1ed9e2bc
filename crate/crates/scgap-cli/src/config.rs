//! Run configuration: one JSON document per run, with flag overrides applied
//! on top and the effective result echoed into the report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use scgap::optimize::OptimizerConfig;
use scgap::wyner_ziv::WzInstance;

/// Where the instance comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Builtin { builtin: String, crossover: f64 },
    Path { path: PathBuf },
    Inline { inline: WzInstance },
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec::Builtin { builtin: "binary-symmetric".into(), crossover: 0.25 }
    }
}

impl InstanceSpec {
    pub fn load(&self) -> Result<WzInstance, String> {
        match self {
            InstanceSpec::Builtin { builtin, crossover } => match builtin.as_str() {
                "binary-symmetric" => WzInstance::binary_symmetric(*crossover)
                    .map_err(|e| format!("bad builtin instance: {e}")),
                other => Err(format!("unknown builtin instance {other:?}")),
            },
            InstanceSpec::Path { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read instance {}: {e}", path.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| format!("bad instance file {}: {e}", path.display()))
            }
            InstanceSpec::Inline { inline } => Ok(inline.clone()),
        }
    }
}

/// The run configuration shared by every subcommand; unused fields are
/// ignored by commands that do not need them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceSpec,
    pub xi_grid: Vec<f64>,
    /// Weight for the one-dimensional penalty sweep.
    pub xi: f64,
    pub alpha: Vec<f64>,
    pub samples: u32,
    pub lambda_samples: usize,
    /// Blocklength for the converse-gap block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Error level for the converse-gap block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Override the minimization-side curvature constant in the converse gap.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Comparison constant for the alternative gap; never defaulted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_cmp: Option<f64>,
    pub optimizer: OptimizerConfig,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            instance: InstanceSpec::default(),
            xi_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            xi: 0.5,
            alpha: vec![6.0, 12.0, 24.0],
            samples: 60,
            lambda_samples: 9,
            n: None,
            epsilon: None,
            rho: None,
            c: None,
            c_cmp: None,
            optimizer: OptimizerConfig::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| format!("bad config {}: {e}", p.display()))
            }
        }
    }

    /// Parse a grid resolution written as `1/N` or bare `N`.
    pub fn parse_resolution(text: &str) -> Result<u32, String> {
        let t = text.trim();
        let denom = match t.strip_prefix("1/") {
            Some(d) => d,
            None => t,
        };
        denom
            .parse::<u32>()
            .map_err(|e| format!("bad resolution {text:?}: {e}"))
            .and_then(|n| if n >= 2 { Ok(n) } else { Err(format!("resolution 1/{n} too coarse")) })
    }
}
