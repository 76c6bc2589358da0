//! Experiment configuration and named presets.

use std::path::Path;

use edgewalk_core::controller::{LevyScale, LmcrwParams};
use edgewalk_core::evolution::GaConfig;
use edgewalk_core::sim::ArenaConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentBlock,
    pub arena: ArenaConfig,
    pub evaluation: EvaluationBlock,
    pub lmcrw: LmcrwBlock,
    pub rbn: RbnBlock,
    pub chaos: ChaosBlock,
    pub evolve: EvolveBlock,
    /// Not part of the config hash.
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentBlock {
    pub name: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationBlock {
    /// Independent evaluations per configuration.
    pub evaluations: usize,
    /// Trials pooled into one first-passage estimate.
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmcrwBlock {
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub levy: LevyScale,
    /// Reference walk the networks are compared with.
    pub baseline_rho: f64,
    pub baseline_alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbnBlock {
    pub sizes: Vec<usize>,
    pub networks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosBlock {
    pub runs: usize,
    pub horizon: u64,
    pub tolerance: f64,
    /// Steps recorded in activation rasters.
    pub trace_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveBlock {
    pub runs: usize,
    /// Generations between checkpoints; 0 disables them.
    pub checkpoint_every: usize,
    pub ga: GaConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: Option<String>,
}

impl Default for ExperimentBlock {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 1,
        }
    }
}

impl Default for EvaluationBlock {
    fn default() -> Self {
        Self {
            evaluations: 20,
            trials: 100,
        }
    }
}

impl Default for LmcrwBlock {
    fn default() -> Self {
        Self {
            rho: vec![0.0, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9],
            alpha: vec![1.2, 1.4, 1.6, 1.8, 2.0],
            levy: LevyScale::default(),
            baseline_rho: 0.75,
            baseline_alpha: 1.8,
        }
    }
}

impl Default for RbnBlock {
    fn default() -> Self {
        Self {
            sizes: vec![18, 20, 22, 24, 26, 28, 30],
            networks: 100,
        }
    }
}

impl Default for ChaosBlock {
    fn default() -> Self {
        Self {
            runs: edgewalk_core::chaos::DEFAULT_RUNS,
            horizon: edgewalk_core::chaos::DEFAULT_HORIZON,
            tolerance: edgewalk_core::chaos::DEFAULT_REGIME_TOLERANCE,
            trace_steps: 200,
        }
    }
}

impl Default for EvolveBlock {
    fn default() -> Self {
        Self {
            runs: 6,
            checkpoint_every: 10,
            ga: GaConfig::default(),
        }
    }
}

pub const PRESETS: &[&str] = &[
    "paper-lmcrw-grid",
    "paper-rbn-cohort",
    "paper-evolve-N20",
    "paper-evolve-N30",
    "desk-lmcrw-grid",
    "desk-rbn-cohort",
    "desk-evolve-N20",
    "desk-evolve-N30",
];

fn desk(mut c: ExperimentConfig) -> ExperimentConfig {
    c.evaluation = EvaluationBlock {
        evaluations: 5,
        trials: 30,
    };
    c.rbn = RbnBlock {
        sizes: vec![18, 20, 30],
        networks: 30,
    };
    c.evolve.runs = 2;
    c.evolve.ga.generations = 100;
    c.evolve.ga.post_eval_trials = 30;
    c
}

fn evolve_preset(size: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.evolve.ga.network_size = size;
    c
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let mut c = match name {
        "paper-lmcrw-grid" | "paper-rbn-cohort" => ExperimentConfig::default(),
        "paper-evolve-N20" => evolve_preset(20),
        "paper-evolve-N30" => evolve_preset(30),
        "desk-lmcrw-grid" | "desk-rbn-cohort" => desk(ExperimentConfig::default()),
        "desk-evolve-N20" => desk(evolve_preset(20)),
        "desk-evolve-N30" => desk(evolve_preset(30)),
        _ => return None,
    };
    c.experiment.name = name.to_string();
    Some(c)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical form, output block excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputBlock::default();
        hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(LabError::Config(m));
        self.arena.validate().map_err(|e| LabError::Config(e.to_string()))?;
        if self.evaluation.evaluations == 0 || self.evaluation.trials == 0 {
            return fail("evaluation.evaluations and evaluation.trials must be positive".into());
        }
        if self.lmcrw.rho.is_empty() || self.lmcrw.alpha.is_empty() {
            return fail("lmcrw grid must not be empty".into());
        }
        for &rho in self.lmcrw.rho.iter().chain([&self.lmcrw.baseline_rho]) {
            for &alpha in self.lmcrw.alpha.iter().chain([&self.lmcrw.baseline_alpha]) {
                LmcrwParams::new(rho, alpha).map_err(|e| LabError::Config(format!("lmcrw: {e}")))?;
            }
        }
        if self.lmcrw.levy.max_ticks == 0 || !(self.lmcrw.levy.ticks_per_unit > 0.0) {
            return fail("lmcrw.levy scale must be positive".into());
        }
        if let Some(&n) = self
            .rbn
            .sizes
            .iter()
            .find(|&&n| n < 4 || n % 2 != 0 || n > edgewalk_core::network::MAX_NODES)
        {
            return fail(format!("rbn size {n} must be even and in [4, 64]"));
        }
        if self.chaos.runs == 0 || !(self.chaos.tolerance >= 0.0) {
            return fail("chaos.runs must be positive and chaos.tolerance non-negative".into());
        }
        if self.evolve.runs == 0 {
            return fail("evolve.runs must be positive".into());
        }
        self.evolve
            .ga
            .validate()
            .map_err(|e| LabError::Config(format!("evolve.ga: {e}")))
    }

    pub fn baseline_params(&self) -> LmcrwParams {
        LmcrwParams {
            rho: self.lmcrw.baseline_rho,
            alpha: self.lmcrw.baseline_alpha,
        }
    }
}
