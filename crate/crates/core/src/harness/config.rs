//! Experiment configuration: one TOML document with the sections
//! `topology`, `channel`, `tasks`, `episode`, `train` and `experiment`.
//! Every section but `experiment` may be omitted; `experiment.seed` is
//! required.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ddpg::TrainConfig;
use crate::env::EpisodeConfig;
use crate::net::{ChannelParams, TaskConfig, TaskKind, TopologyConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub tasks: TaskConfig,
    #[serde(default)]
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Greedy episodes per policy in evaluations.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Write wall-clock seconds into the metrics; off keeps metrics files
    /// byte-identical across runs.
    #[serde(default)]
    pub record_wall_clock: bool,
    #[serde(default = "yes")]
    pub write_checkpoint: bool,
    #[serde(default)]
    pub baselines: BaselineToggles,
    /// Largest number of mode assignments the oracle may enumerate.
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: u64,
    #[serde(default)]
    pub sweep: SweepGrid,
    #[serde(default)]
    pub compare: CompareGrid,
    #[serde(default)]
    pub bandwidth_switch: SwitchConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_eval_episodes() -> usize {
    20
}

fn default_oracle_cap() -> u64 {
    1_000_000
}

fn yes() -> bool {
    true
}

impl ExperimentSection {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            output_dir: default_output_dir(),
            eval_episodes: default_eval_episodes(),
            record_wall_clock: false,
            write_checkpoint: true,
            baselines: BaselineToggles::default(),
            oracle_cap: default_oracle_cap(),
            sweep: SweepGrid::default(),
            compare: CompareGrid::default(),
            bandwidth_switch: SwitchConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineToggles {
    pub local: bool,
    pub full_offload: bool,
    pub random: bool,
    /// Only used where the instance is small enough for the cap.
    pub oracle: bool,
}

impl Default for BaselineToggles {
    fn default() -> Self {
        Self {
            local: true,
            full_offload: true,
            random: true,
            oracle: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub learning_rates: Vec<f64>,
    pub discounts: Vec<f64>,
    pub devices: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            learning_rates: vec![1e-2, 1e-3, 1e-4, 1e-5],
            discounts: vec![0.5, 0.6, 0.65, 0.7],
            devices: vec![20, 60, 100],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareGrid {
    pub devices: Vec<usize>,
    pub task_kinds: Vec<TaskKind>,
}

impl Default for CompareGrid {
    fn default() -> Self {
        Self {
            devices: vec![20, 60, 100],
            task_kinds: vec![TaskKind::Mixed, TaskKind::Type1, TaskKind::Type2, TaskKind::Type3],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchConfig {
    /// Episode at which the bandwidth changes; unset means half-way.
    pub switch_episode: Option<usize>,
    pub factor: f64,
    pub mbs_bandwidth_hz: f64,
    pub sbs_bandwidth_hz: f64,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self {
            switch_episode: None,
            factor: 10.0,
            mbs_bandwidth_hz: 2e6,
            sbs_bandwidth_hz: 1e6,
        }
    }
}

impl ExperimentConfig {
    /// Full-scale setup: 100 devices, 10 small cells, 6000 episodes.
    pub fn full(seed: u64) -> Self {
        Self {
            topology: TopologyConfig::default(),
            channel: ChannelParams::default(),
            tasks: TaskConfig::default(),
            episode: EpisodeConfig::default(),
            train: TrainConfig::default(),
            experiment: ExperimentSection::new(seed),
        }
    }

    /// Desk-scale setup: 10 devices, 5 small cells, 2000 episodes, mixed
    /// task profiles.
    pub fn desk(seed: u64) -> Self {
        let mut cfg = Self::full(seed);
        cfg.topology.num_devices = 10;
        cfg.topology.num_sbs = 5;
        cfg.tasks.kind = TaskKind::Mixed;
        cfg.train.episodes = 2000;
        cfg.train.hidden = vec![64, 64];
        cfg.experiment.compare.devices = vec![10];
        cfg.experiment.sweep.devices = vec![10, 20];
        cfg
    }

    pub fn profile(name: &str, seed: u64) -> Result<Self> {
        match name {
            "full" => Ok(Self::full(seed)),
            "desk" => Ok(Self::desk(seed)),
            other => Err(Error::InvalidConfig(format!("unknown profile `{other}` (expected full or desk)"))),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.channel.validate()?;
        self.tasks.validate()?;
        self.episode.validate()?;
        self.train.validate()?;
        let sw = &self.experiment.bandwidth_switch;
        if !(sw.factor > 0.0 && sw.mbs_bandwidth_hz > 0.0 && sw.sbs_bandwidth_hz > 0.0) {
            return Err(Error::InvalidConfig(
                "experiment.bandwidth_switch needs positive factor and bandwidths".into(),
            ));
        }
        Ok(())
    }

    /// Largest input size, work and deadline the task distribution
    /// produces.
    pub fn task_bounds(&self) -> (f64, f64, f64) {
        let (b, c) = self.tasks.max_bits_and_cycles();
        (b, c, self.tasks.deadline_s)
    }
}
