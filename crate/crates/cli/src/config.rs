//! Experiment configuration: defaults, JSON config files, CLI overrides,
//! and validation.

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sample,
    GlobalVerify,
    LocalVerify,
    Coupling,
    OracleSuite,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Sample => "sample",
            ExperimentKind::GlobalVerify => "global-verify",
            ExperimentKind::LocalVerify => "local-verify",
            ExperimentKind::Coupling => "coupling",
            ExperimentKind::OracleSuite => "oracle-suite",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Full description of one experiment run. A JSON file with these fields
/// is accepted via `--config`; individual CLI flags override file values.
/// The config is echoed into every JSON report for exact replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub n: usize,
    /// bias parameter for static sampling
    pub q: f64,
    /// time horizon: trajectory half-width for global-verify, process
    /// horizon (must be < 1) for local-verify and coupling
    pub t_max: f64,
    /// interior trim for global-verify: elements with i/n in
    /// (alpha, 1 − alpha) enter the deviation statistic
    pub alpha: f64,
    pub replicas: u64,
    /// time-grid resolution for deviation sweeps and trajectory dumps
    pub grid_size: usize,
    /// rectangle-grid resolution for discrepancy statistics
    pub grid_k: usize,
    /// permuton family parameter (0 = uniform)
    pub beta: f64,
    pub window_lo: i64,
    pub window_hi: i64,
    /// recentring index for coupling; defaults to n/2
    pub k_n: Option<i64>,
    /// elements whose trajectories `sample` dumps instead of summarizing
    #[serde(default)]
    pub trajectory_elements: Vec<usize>,
    pub format: OutputFormat,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            seed: 0,
            n: 100,
            q: 1.0,
            t_max: match experiment {
                ExperimentKind::GlobalVerify => 2.0,
                _ => 0.8,
            },
            alpha: 0.1,
            replicas: 10,
            grid_size: 512,
            grid_k: 50,
            beta: 0.0,
            window_lo: -5,
            window_hi: 5,
            k_n: None,
            trajectory_elements: Vec::new(),
            format: OutputFormat::Csv,
            out: None,
        }
    }

    pub fn effective_k_n(&self) -> i64 {
        self.k_n.unwrap_or(self.n as i64 / 2)
    }

    /// Field-level validation; the message names the offending field.
    pub fn validate(&self) -> Result<(), String> {
        if self.n == 0 && self.experiment != ExperimentKind::LocalVerify {
            return Err("n: must be ≥ 1".into());
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(format!("q: must be a finite value ≥ 0, got {}", self.q));
        }
        match self.experiment {
            ExperimentKind::LocalVerify | ExperimentKind::Coupling => {
                if !(0.0..1.0).contains(&self.t_max) {
                    return Err(format!(
                        "t_max: local experiments need 0 ≤ t_max < 1, got {}",
                        self.t_max
                    ));
                }
            }
            _ => {
                if !(self.t_max > 0.0 && self.t_max.is_finite()) {
                    return Err(format!("t_max: must be > 0, got {}", self.t_max));
                }
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(format!("alpha: must be in (0, 1/2), got {}", self.alpha));
        }
        if self.grid_size < 2 {
            return Err(format!("grid_size: must be ≥ 2, got {}", self.grid_size));
        }
        if self.grid_k < 1 {
            return Err(format!("grid_k: must be ≥ 1, got {}", self.grid_k));
        }
        if self.window_lo > self.window_hi {
            return Err(format!(
                "window_lo/window_hi: empty window [{}, {}]",
                self.window_lo, self.window_hi
            ));
        }
        for &i in &self.trajectory_elements {
            if i < 1 || i > self.n {
                return Err(format!("trajectory_elements: {i} outside 1..={}", self.n));
            }
        }
        Ok(())
    }
}

/// One flag per config field; present flags override the config file (or
/// the defaults when no file is given).
#[derive(Args, Clone, Debug, Default)]
pub struct ParamArgs {
    /// JSON config file with ExperimentConfig fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// 64-bit master seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long = "t-max", alias = "T")]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub replicas: Option<u64>,
    #[arg(long = "grid-size")]
    pub grid_size: Option<usize>,
    #[arg(long = "grid-k")]
    pub grid_k: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "window-lo", allow_hyphen_values = true)]
    pub window_lo: Option<i64>,
    #[arg(long = "window-hi", allow_hyphen_values = true)]
    pub window_hi: Option<i64>,
    #[arg(long = "k-n")]
    pub k_n: Option<i64>,
    /// comma-separated element indices for trajectory dumps
    #[arg(long = "trajectory-elements", value_delimiter = ',')]
    pub trajectory_elements: Option<Vec<usize>>,
    /// output file (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

impl ParamArgs {
    /// Resolve the final config: defaults ← config file ← explicit flags.
    pub fn resolve(&self, experiment: ExperimentKind) -> Result<ExperimentConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("config: cannot read {}: {e}", path.display()))?;
                let mut file_cfg: ExperimentConfig = serde_json::from_str(&text)
                    .map_err(|e| format!("config: invalid JSON in {}: {e}", path.display()))?;
                file_cfg.experiment = experiment;
                file_cfg
            }
            None => ExperimentConfig::defaults(experiment),
        };
        macro_rules! over {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        over!(seed, n, q, t_max, alpha, replicas, grid_size, grid_k, beta, window_lo, window_hi);
        if let Some(v) = self.k_n {
            cfg.k_n = Some(v);
        }
        if let Some(v) = &self.trajectory_elements {
            cfg.trajectory_elements = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.format {
            cfg.format = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
