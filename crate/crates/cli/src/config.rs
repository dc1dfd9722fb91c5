//! Experiment configuration files. Every subcommand reads an optional TOML
//! file, applies command-line overrides, validates, and writes the resolved
//! configuration next to its outputs.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sgfl_core::fedsim::{self, SamplerConfig, Strategy};
use sgfl_core::gflownet::{AdjacencyMode, Budget, Conditioning, RewardSpec, RolloutConfig, DEFAULT_BUDGET};
use sgfl_core::gnn::{DEFAULT_HIDDEN, NUM_LAYERS};
use sgfl_core::graph::SplitRatios;
use sgfl_core::partition::{ScenarioKind, ScenarioSpec, DEFAULT_BALANCE_SLACK};

use crate::error::{CliError, Result};

pub const RESOLVED_CONFIG: &str = "config.toml";

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
}

pub fn save<T: Serialize>(value: &T, dir: &Path) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| CliError::Runtime(format!("cannot serialize config: {e}")))?;
    let path = dir.join(RESOLVED_CONFIG);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn require_path(p: &Path, what: &str) -> Result<()> {
    if p.as_os_str().is_empty() {
        return Err(CliError::Config(format!("{what} is required")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Planetoid `.content` file, optionally gzipped.
    pub content: PathBuf,
    /// Planetoid `.cites` file, optionally gzipped.
    pub cites: PathBuf,
    pub out: PathBuf,
    pub name: String,
    pub largest_component: bool,
    /// Scale every feature row to sum to one.
    pub normalize_features: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            content: PathBuf::new(),
            cites: PathBuf::new(),
            out: PathBuf::new(),
            name: String::new(),
            largest_component: true,
            normalize_features: true,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        require_path(&self.content, "content file")?;
        require_path(&self.cites, "cites file")?;
        require_path(&self.out, "output directory")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub dataset: PathBuf,
    pub out: PathBuf,
    pub mode: ScenarioKind,
    /// Total number of clients. Overlapping scenarios draw
    /// `samples_per_part` clients from each of `clients / samples_per_part`
    /// parts.
    pub clients: usize,
    pub samples_per_part: usize,
    pub sample_fraction: f64,
    pub seed: u64,
    pub balance_slack: f64,
    pub split: SplitRatios,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            out: PathBuf::new(),
            mode: ScenarioKind::Disjoint,
            clients: 10,
            samples_per_part: 5,
            sample_fraction: 0.5,
            seed: 0,
            balance_slack: DEFAULT_BALANCE_SLACK,
            split: SplitRatios::STANDARD,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        require_path(&self.dataset, "dataset directory")?;
        require_path(&self.out, "output directory")?;
        self.spec()?.validate().map_err(CliError::config)?;
        if !(self.balance_slack >= 0.0 && self.balance_slack.is_finite()) {
            return Err(CliError::Config(format!("balance slack must be non-negative, got {}", self.balance_slack)));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<ScenarioSpec> {
        if self.clients == 0 {
            return Err(CliError::Config("need at least one client".into()));
        }
        let num_parts = match self.mode {
            ScenarioKind::Disjoint => self.clients,
            ScenarioKind::Overlapping => {
                if self.samples_per_part == 0 || self.clients % self.samples_per_part != 0 {
                    return Err(CliError::Config(format!(
                        "overlapping mode needs a client count divisible by samples_per_part ({} vs {})",
                        self.clients, self.samples_per_part
                    )));
                }
                self.clients / self.samples_per_part
            }
        };
        Ok(ScenarioSpec {
            kind: self.mode,
            num_parts,
            samples_per_part: self.samples_per_part,
            sample_fraction: self.sample_fraction,
            seed: self.seed,
            ratios: self.split,
            balance_slack: self.balance_slack,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetKind {
    PerLayer,
    PerRoot,
    Unlimited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub budget: BudgetKind,
    /// Nodes added per layer (or per root with `budget = "per-root"`).
    pub k: i64,
    pub alpha: f64,
    pub log_z: f64,
    pub gfn_lr: f64,
    pub hidden: usize,
    pub conditioning: Conditioning,
    pub adjacency: AdjacencyMode,
    pub reward_coupling: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let core = SamplerConfig::default();
        Self {
            budget: BudgetKind::PerLayer,
            k: DEFAULT_BUDGET as i64,
            alpha: core.reward.alpha,
            log_z: core.reward.log_z,
            gfn_lr: core.lr,
            hidden: core.hidden,
            conditioning: core.rollout.conditioning,
            adjacency: core.rollout.adjacency,
            reward_coupling: core.reward_coupling,
        }
    }
}

impl SamplerSection {
    pub fn budget(&self) -> Result<Budget> {
        if self.k < 1 {
            return Err(CliError::Config(format!("k must be at least 1, got {}", self.k)));
        }
        let k = self.k as usize;
        Ok(match self.budget {
            BudgetKind::PerLayer => Budget::PerLayer(k),
            BudgetKind::PerRoot => Budget::PerRoot(k),
            BudgetKind::Unlimited => Budget::Unlimited,
        })
    }

    pub fn to_core(&self) -> Result<SamplerConfig> {
        Ok(SamplerConfig {
            rollout: RolloutConfig {
                budget: self.budget()?,
                num_layers: NUM_LAYERS,
                conditioning: self.conditioning,
                adjacency: self.adjacency,
            },
            reward: RewardSpec {
                alpha: self.alpha,
                log_z: self.log_z,
            },
            lr: self.gfn_lr,
            hidden: self.hidden,
            reward_coupling: self.reward_coupling,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub strategy: Strategy,
    pub fedgrains: bool,
    pub rounds: usize,
    pub local_epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    /// Omitted means full-batch training.
    pub batch_size: Option<usize>,
    pub eval_sampled: bool,
    pub seeds: Vec<u64>,
    pub sampler: SamplerSection,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            scenario: PathBuf::new(),
            out: PathBuf::new(),
            strategy: Strategy::FedAvg,
            fedgrains: false,
            rounds: fedsim::DEFAULT_ROUNDS,
            local_epochs: 1,
            lr: fedsim::DEFAULT_LR,
            hidden: DEFAULT_HIDDEN,
            batch_size: None,
            eval_sampled: false,
            seeds: vec![0],
            sampler: SamplerSection::default(),
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        require_path(&self.scenario, "scenario directory")?;
        require_path(&self.out, "output directory")?;
        if self.seeds.is_empty() {
            return Err(CliError::Config("need at least one seed".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("seeds must be distinct".into()));
        }
        if self.local_epochs == 0 {
            return Err(CliError::Config("local_epochs must be at least 1".into()));
        }
        // sampler settings are checked even when the sampler is off
        let probe = TrainSettings {
            fedgrains: true,
            ..self.clone()
        };
        probe.core(self.seeds[0], None)?.validate().map_err(CliError::config)?;
        self.core(self.seeds[0], None)?.validate().map_err(CliError::config)
    }

    /// Core training configuration for one seed.
    pub fn core(&self, seed: u64, threads: Option<usize>) -> Result<fedsim::TrainConfig> {
        Ok(fedsim::TrainConfig {
            strategy: self.strategy,
            rounds: self.rounds,
            local_epochs: self.local_epochs,
            lr: self.lr,
            hidden: self.hidden,
            batch_size: self.batch_size,
            sampler: if self.fedgrains { Some(self.sampler.to_core()?) } else { None },
            eval_sampled: self.eval_sampled,
            seed,
            threads,
        })
    }

    /// Short method label, e.g. `fedavg+fedgrains`.
    pub fn method(&self) -> String {
        if self.fedgrains {
            format!("{}+fedgrains", self.strategy)
        } else {
            self.strategy.to_string()
        }
    }
}

/// Worker-thread cap from `FEDGRAINS_THREADS`.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("FEDGRAINS_THREADS") {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("FEDGRAINS_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}
