//! Run configuration: TOML file with `[grid]`, `[run]` and `[output]`
//! sections, plus built-in presets. Command-line flags override file values;
//! environment variables are never consulted.

use serde::Deserialize;
use std::path::Path;

use crate::qlearn::InitMode;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub deltas: Vec<f64>,
    pub rs: Vec<f64>,
    pub periods: u64,
    pub replications: u32,
    pub seed: u64,
    pub init: InitMode,
    pub workers: usize,
    pub out: String,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    grid: GridSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct GridSection {
    alphas: Option<Vec<f64>>,
    epsilons: Option<Vec<f64>>,
    deltas: Option<Vec<f64>>,
    rs: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RunSection {
    periods: Option<u64>,
    replications: Option<u32>,
    seed: Option<u64>,
    init: Option<String>,
    workers: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    out: Option<String>,
}

fn axis(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize + 1;
    (0..n).map(|i| start + step * i as f64).collect()
}

impl RunConfig {
    /// Full paper grid: 10×10×10×10 axis points, 15 s-values per (δ, r).
    pub fn paper_preset() -> RunConfig {
        RunConfig {
            alphas: axis(0.01, 0.1, 0.01),
            epsilons: axis(0.01, 0.1, 0.01),
            deltas: axis(0.525, 0.975, 0.05),
            rs: axis(0.525, 0.975, 0.05),
            periods: 1_000_000,
            replications: 100,
            seed: 1,
            init: InitMode::Optimistic,
            workers: 0,
            out: "results.csv".to_string(),
        }
    }

    /// Reduced grid runnable on a single desktop core in minutes: α = ε =
    /// 0.1, two (δ, r) tuples well away from the binding constraint
    /// (d^ic ≈ 0.64 and 0.67), 100 replications of 10^6 periods each.
    pub fn desk_preset() -> RunConfig {
        RunConfig {
            alphas: vec![0.1],
            epsilons: vec![0.1],
            deltas: vec![0.925, 0.975],
            rs: vec![0.975],
            ..RunConfig::paper_preset()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<RunConfig, ConfigError> {
        let file: FileConfig = toml::from_str(text)?;
        let mut cfg = RunConfig::paper_preset();
        if let Some(v) = file.grid.alphas {
            cfg.alphas = v;
        }
        if let Some(v) = file.grid.epsilons {
            cfg.epsilons = v;
        }
        if let Some(v) = file.grid.deltas {
            cfg.deltas = v;
        }
        if let Some(v) = file.grid.rs {
            cfg.rs = v;
        }
        if let Some(v) = file.run.periods {
            cfg.periods = v;
        }
        if let Some(v) = file.run.replications {
            cfg.replications = v;
        }
        if let Some(v) = file.run.seed {
            cfg.seed = v;
        }
        if let Some(v) = file.run.init {
            cfg.init = parse_init(&v)?;
        }
        if let Some(v) = file.run.workers {
            cfg.workers = v;
        }
        if let Some(v) = file.output.out {
            cfg.out = v;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(path.display().to_string(), e))?;
        RunConfig::from_toml_str(&text)
    }
}

pub fn parse_init(name: &str) -> Result<InitMode, ConfigError> {
    match name {
        "optimistic" => Ok(InitMode::Optimistic),
        "pessimistic" => Ok(InitMode::Pessimistic),
        other => Err(ConfigError::BadInitMode(other.to_string())),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown init mode {0:?} (expected optimistic|pessimistic)")]
    BadInitMode(String),
}
