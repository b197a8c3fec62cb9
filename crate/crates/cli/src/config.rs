use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{CliError, Result};

/// Flat key-value config file; every key can also be set (and overridden)
/// by the matching command-line flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub target: Option<String>,
    pub kernel: Option<String>,
    pub iters: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub epsilon_lo: Option<f64>,
    pub epsilon_hi: Option<f64>,
    pub steps_lo: Option<usize>,
    pub steps_hi: Option<usize>,
    pub window: Option<usize>,
    pub alpha_temp: Option<f64>,
    pub alpha_ref: Option<f64>,
    pub monitor: Option<Vec<usize>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved experiment configuration: file values with flag
/// overrides applied and defaults filled in.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub target: String,
    pub kernel: String,
    pub iters: usize,
    /// Iterations dropped before computing summaries; raw traces always
    /// keep them.
    pub burn_in: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub epsilon_lo: f64,
    pub epsilon_hi: f64,
    pub steps_lo: usize,
    pub steps_hi: usize,
    pub window: usize,
    pub alpha_temp: f64,
    pub alpha_ref: f64,
    /// Coordinates written to the trace; defaults to all of them.
    pub monitor: Option<Vec<usize>>,
}

pub const DEFAULT_ITERS: usize = 1000;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_STEPS: usize = 20;

impl ExperimentConfig {
    /// Merge `flags` over `file`; `flags` wins where both are set.
    pub fn resolve(file: FileConfig, flags: FileConfig) -> Result<Self> {
        let pick = |a: Option<String>, b: Option<String>| a.or(b);
        let target = pick(flags.target, file.target)
            .ok_or_else(|| CliError::Config("no target given (--target or config)".into()))?;
        let seed = flags
            .seed
            .or(file.seed)
            .ok_or_else(|| CliError::Config("no seed given (--seed or config); wall-clock seeding is not supported".into()))?;
        let iters = flags.iters.or(file.iters).unwrap_or(DEFAULT_ITERS);
        if iters == 0 {
            return Err(CliError::Config("iters must be at least 1".into()));
        }
        let burn_in = flags.burn_in.or(file.burn_in).unwrap_or(iters / 10);
        if burn_in >= iters {
            return Err(CliError::Config(format!(
                "burn-in {burn_in} must be smaller than iters {iters}"
            )));
        }
        let epsilon_lo = flags
            .epsilon_lo
            .or(file.epsilon_lo)
            .unwrap_or(DEFAULT_EPSILON);
        let epsilon_hi = flags.epsilon_hi.or(file.epsilon_hi).unwrap_or(epsilon_lo);
        let steps_lo = flags.steps_lo.or(file.steps_lo).unwrap_or(DEFAULT_STEPS);
        let steps_hi = flags.steps_hi.or(file.steps_hi).unwrap_or(steps_lo);
        Ok(Self {
            target,
            kernel: pick(flags.kernel, file.kernel).unwrap_or_else(|| "hmc".into()),
            iters,
            burn_in,
            seed,
            out: PathBuf::from(pick(flags.out, file.out).unwrap_or_else(|| ".".into())),
            epsilon_lo,
            epsilon_hi,
            steps_lo,
            steps_hi,
            window: flags.window.or(file.window).unwrap_or(1),
            alpha_temp: flags.alpha_temp.or(file.alpha_temp).unwrap_or(1.0),
            alpha_ref: flags.alpha_ref.or(file.alpha_ref).unwrap_or(0.0),
            monitor: flags.monitor.or(file.monitor),
        })
    }
}
