use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::seeding;
use crate::{Error, Result};

pub const BITS_PER_MB: f64 = 8e6;
pub const CYCLES_PER_GCYCLE: f64 = 1e9;

/// One device's task: input size, required work and latency bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub input_bits: f64,
    pub cycles: f64,
    /// Seconds.
    pub deadline: f64,
}

impl TaskSpec {
    pub fn new(input_bits: f64, cycles: f64, deadline: f64) -> Result<Self> {
        if !(input_bits >= 0.0 && cycles > 0.0 && deadline > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "task ({input_bits} bits, {cycles} cycles, {deadline} s) violates d >= 0, c > 0, tau > 0"
            )));
        }
        Ok(Self {
            input_bits,
            cycles,
            deadline,
        })
    }
}

/// Fixed task profiles: large/compute-heavy, large/light, small/compute-heavy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskType {
    Type1,
    Type2,
    Type3,
}

impl TaskType {
    pub const ALL: [TaskType; 3] = [TaskType::Type1, TaskType::Type2, TaskType::Type3];

    /// (MB, Gcycles).
    pub fn size(self) -> (f64, f64) {
        match self {
            TaskType::Type1 => (50.0, 5.0),
            TaskType::Type2 => (50.0, 0.5),
            TaskType::Type3 => (5.0, 5.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskType::Type1 => "type1",
            TaskType::Type2 => "type2",
            TaskType::Type3 => "type3",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Data size and work drawn uniformly from the configured ranges.
    Uniform,
    Type1,
    Type2,
    Type3,
    /// Each device draws one of the three fixed profiles uniformly.
    Mixed,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Uniform => "uniform",
            TaskKind::Type1 => "type1",
            TaskKind::Type2 => "type2",
            TaskKind::Type3 => "type3",
            TaskKind::Mixed => "mixed",
        }
    }

    fn fixed(self) -> Option<TaskType> {
        match self {
            TaskKind::Type1 => Some(TaskType::Type1),
            TaskKind::Type2 => Some(TaskType::Type2),
            TaskKind::Type3 => Some(TaskType::Type3),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Inclusive range in MB (1 MB = 8e6 bits).
    pub data_mb: [f64; 2],
    /// Inclusive range in Gcycles (1e9 cycles).
    pub gcycles: [f64; 2],
    pub deadline_s: f64,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Uniform,
            data_mb: [5.0, 50.0],
            gcycles: [0.5, 5.0],
            deadline_s: 1.0,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        let [dlo, dhi] = self.data_mb;
        let [clo, chi] = self.gcycles;
        if !(dlo >= 0.0 && dlo <= dhi) {
            return Err(Error::InvalidConfig(format!("tasks.data_mb range [{dlo}, {dhi}] is invalid")));
        }
        if !(clo > 0.0 && clo <= chi) {
            return Err(Error::InvalidConfig(format!("tasks.gcycles range [{clo}, {chi}] is invalid")));
        }
        if !(self.deadline_s > 0.0) {
            return Err(Error::InvalidConfig("tasks.deadline_s must be > 0".into()));
        }
        Ok(())
    }

    /// Largest input size and work any task can have, used for state scaling.
    pub fn max_bits_and_cycles(&self) -> (f64, f64) {
        match self.kind {
            TaskKind::Uniform => (self.data_mb[1] * BITS_PER_MB, self.gcycles[1] * CYCLES_PER_GCYCLE),
            kind => {
                let fixed = kind.fixed();
                let types: &[TaskType] = match &fixed {
                    Some(t) => std::slice::from_ref(t),
                    None => &TaskType::ALL,
                };
                types.iter().fold((0.0f64, 0.0f64), |(b, c), t| {
                    let (mb, gc) = t.size();
                    (b.max(mb * BITS_PER_MB), c.max(gc * CYCLES_PER_GCYCLE))
                })
            }
        }
    }
}

fn uniform(rng: &mut seeding::Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Draws `n` tasks from `cfg` using a dedicated stream of `seed`.
pub fn sample_tasks(n: usize, cfg: &TaskConfig, seed: u64) -> Result<Vec<TaskSpec>> {
    cfg.validate()?;
    let mut rng = seeding::stream(seed, 0);
    (0..n)
        .map(|_| {
            let (mb, gc) = match cfg.kind {
                TaskKind::Uniform => (uniform(&mut rng, cfg.data_mb), uniform(&mut rng, cfg.gcycles)),
                TaskKind::Mixed => TaskType::ALL[rng.random_range(0..3)].size(),
                kind => kind.fixed().expect("fixed kind").size(),
            };
            TaskSpec::new(mb * BITS_PER_MB, gc * CYCLES_PER_GCYCLE, cfg.deadline_s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ranges() {
        let tasks = sample_tasks(500, &TaskConfig::default(), 3).unwrap();
        for t in &tasks {
            assert!((5.0 * BITS_PER_MB..=50.0 * BITS_PER_MB).contains(&t.input_bits));
            assert!((0.5e9..=5e9).contains(&t.cycles));
            assert_eq!(t.deadline, 1.0);
        }
    }

    #[test]
    fn degenerate_range() {
        let cfg = TaskConfig {
            data_mb: [5.0, 5.0],
            ..TaskConfig::default()
        };
        for t in sample_tasks(20, &cfg, 1).unwrap() {
            assert_eq!(t.input_bits, 4e7);
        }
    }

    #[test]
    fn preset_types() {
        let expect = [(4e8, 5e9), (4e8, 0.5e9), (4e7, 5e9)];
        for (kind, (bits, cycles)) in [TaskKind::Type1, TaskKind::Type2, TaskKind::Type3]
            .into_iter()
            .zip(expect)
        {
            let cfg = TaskConfig {
                kind,
                ..TaskConfig::default()
            };
            let t = sample_tasks(3, &cfg, 0).unwrap();
            assert!(t.iter().all(|t| t.input_bits == bits && t.cycles == cycles));
        }
    }

    #[test]
    fn inverted_range_rejected() {
        let cfg = TaskConfig {
            gcycles: [5.0, 0.5],
            ..TaskConfig::default()
        };
        assert!(sample_tasks(1, &cfg, 0).is_err());
    }
}
