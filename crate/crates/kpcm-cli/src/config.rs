//! Run configuration: a single JSON document with complex numbers as
//! two-element [re, im] arrays.

use kpcm::checks;
use kpcm::cm::PhaseState;
use kpcm::{cx, Complex64};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: [f64; 2],
    pub x0: Vec<[f64; 2]>,
    pub p0: Vec<[f64; 2]>,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub mus: Vec<[f64; 2]>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Per-row acceptance threshold of the `backlund` command.
    #[serde(default = "default_backlund_tolerance")]
    pub backlund_tolerance: f64,
}

fn default_seed() -> u64 {
    20190614
}

fn default_backlund_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub m: u32,
    pub t: f64,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
}

fn default_rtol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub name: String,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

/// Configuration problems map to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

pub struct LoadedConfig {
    pub config: RunConfig,
    pub digest: String,
    pub state: PhaseState,
}

pub fn to_complex(pair: [f64; 2]) -> Complex64 {
    cx(pair[0], pair[1])
}

/// FNV-1a 64 over the raw config bytes; stamped on every output table.
pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes =
        std::fs::read(path).map_err(|e| ConfigError(format!("cannot read {path:?}: {e}")))?;
    let config: RunConfig = serde_json::from_slice(&bytes)
        .map_err(|e| ConfigError(format!("cannot parse {path:?}: {e}")))?;
    let digest = digest_bytes(&bytes);
    validate(&config).map(|state| LoadedConfig {
        config,
        digest,
        state,
    })
}

fn validate(config: &RunConfig) -> Result<PhaseState, ConfigError> {
    if config.x0.is_empty() || config.x0.len() != config.p0.len() {
        return Err(ConfigError(
            "x0 and p0 must be nonempty lists of equal length".into(),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for flow in &config.flows {
        if flow.m == 0 {
            return Err(ConfigError("flow index m must be at least 1".into()));
        }
        if !seen.insert(flow.m) {
            return Err(ConfigError(format!("duplicate flow index m = {}", flow.m)));
        }
        if !(1e-13..=1e-6).contains(&flow.rtol) {
            return Err(ConfigError(format!(
                "flow m = {}: rtol must lie in [1e-13, 1e-6]",
                flow.m
            )));
        }
        if !flow.t.is_finite() {
            return Err(ConfigError(format!("flow m = {}: t must be finite", flow.m)));
        }
    }
    for check in &config.checks {
        if !checks::is_registered(&check.name) {
            return Err(ConfigError(format!(
                "unknown check '{}'; registered: {}",
                check.name,
                checks::CHECK_NAMES.join(", ")
            )));
        }
    }
    let x: Vec<Complex64> = config.x0.iter().map(|&p| to_complex(p)).collect();
    let p: Vec<Complex64> = config.p0.iter().map(|&p| to_complex(p)).collect();
    PhaseState::new(to_complex(config.gamma), x, p)
        .map_err(|e| ConfigError(format!("invalid initial state: {e}")))
}
