//! Seeded training runs, evaluations, sweeps and the bandwidth-switch
//! experiment.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::metrics::{convergence, normalize_rewards, plateau, write_metrics_csv, Convergence, MetricsRow};
use crate::baselines::{exhaustive_oracle, full_offload_action, local_action, random_policy};
use crate::ddpg::{evaluate, rollout, save_checkpoint, Agent, EpisodeStats, Trainer};
use crate::env::{EnvAction, Env};
use crate::exec::map_slice;
use crate::net::{build_topology, sample_tasks, TaskSpec};
use crate::refine::refine;
use crate::seeding::{child_seed, stream, streams};
use crate::{Error, Result};

pub fn build_env(cfg: &ExperimentConfig) -> Result<Env> {
    cfg.validate()?;
    let topology = build_topology(&cfg.topology, &cfg.channel, cfg.experiment.seed)?;
    let (bits, cycles, deadline) = cfg.task_bounds();
    Env::new(topology, &cfg.channel, cfg.episode.clone(), bits, cycles, deadline)
}

/// Tasks of training episode `episode`.
pub fn train_tasks(cfg: &ExperimentConfig, episode: usize) -> Result<Vec<TaskSpec>> {
    let base = child_seed(cfg.experiment.seed, streams::TRAIN_TASKS);
    sample_tasks(cfg.topology.num_devices, &cfg.tasks, child_seed(base, episode as u64))
}

/// Tasks of evaluation episode `episode`, disjoint from the training draws.
pub fn eval_tasks(cfg: &ExperimentConfig, episode: usize) -> Result<Vec<TaskSpec>> {
    let base = child_seed(cfg.experiment.seed, streams::EVAL_TASKS);
    sample_tasks(cfg.topology.num_devices, &cfg.tasks, child_seed(base, episode as u64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyScore {
    pub policy: String,
    /// Mean over episodes of the episode energy per device. Only the
    /// oracle row can lack one, when no evaluation instance is feasible.
    pub mean_energy_j: Option<f64>,
    /// Fraction of tasks that missed their deadline.
    pub violation_rate: f64,
    pub mean_return: f64,
    pub episodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub num_devices: usize,
    pub num_sbs: usize,
    pub task_kind: String,
    pub episodes: usize,
    pub convergence: Option<Convergence>,
    pub evaluation: Vec<PolicyScore>,
}

impl RunSummary {
    pub fn score(&self, policy: &str) -> Option<&PolicyScore> {
        self.evaluation.iter().find(|s| s.policy == policy)
    }
}

pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub trace: Vec<f64>,
    pub summary: RunSummary,
    pub agent: Agent,
}

/// Scores one episode-level policy over the evaluation episodes.
fn score(
    cfg: &ExperimentConfig,
    env: &mut Env,
    name: &str,
    mut play: impl FnMut(&mut Env, &[TaskSpec]) -> Result<EpisodeStats>,
) -> Result<PolicyScore> {
    let k = cfg.experiment.eval_episodes;
    let n = env.num_devices() as f64;
    let (mut energy, mut violations, mut ret) = (0.0, 0.0, 0.0);
    for e in 0..k {
        let stats = play(env, &eval_tasks(cfg, e)?)?;
        energy += stats.energy / n;
        violations += stats.violations as f64 / n;
        ret += stats.ret;
    }
    let k_f = k.max(1) as f64;
    Ok(PolicyScore {
        policy: name.to_string(),
        mean_energy_j: Some(energy / k_f),
        violation_rate: violations / k_f,
        mean_return: ret / k_f,
        episodes: k,
    })
}

/// Greedy evaluation of `agent` (if given) and of the enabled baselines
/// on the same evaluation tasks. The oracle row, when the instance is small
/// enough, solves each evaluation instance in continuous time; its return
/// column is zero and infeasible instances count as violations.
pub fn evaluate_policies(cfg: &ExperimentConfig, env: &mut Env, agent: Option<&Agent>) -> Result<Vec<PolicyScore>> {
    let discount = cfg.train.discount;
    let (n, m) = (env.num_devices(), env.num_sbs());
    let toggles = &cfg.experiment.baselines;
    let mut out = Vec::new();
    if let Some(agent) = agent {
        out.push(score(cfg, env, "proposed", |env, t| evaluate(env, agent, t, discount))?);
    }
    if toggles.local {
        out.push(score(cfg, env, "local", |env, t| {
            rollout(env, t, discount, |_| Ok(local_action(n, m)))
        })?);
    }
    if toggles.full_offload {
        out.push(score(cfg, env, "full-offload", |env, t| {
            rollout(env, t, discount, |env| Ok(full_offload_action(env.state())))
        })?);
    }
    if toggles.random {
        let mut rng = stream(cfg.experiment.seed, streams::POLICY);
        let len = EnvAction::len_for(n, m);
        out.push(score(cfg, env, "random", |env, t| {
            rollout(env, t, discount, |env| {
                refine(&random_policy(len, &mut rng), env.state(), env.topology())
            })
        })?);
    }
    if toggles.oracle {
        let k = cfg.experiment.eval_episodes;
        let cap = cfg.experiment.oracle_cap as u128;
        let mut energies = Vec::new();
        let mut infeasible = 0usize;
        let mut refused = false;
        for e in 0..k {
            let tasks = eval_tasks(cfg, e)?;
            match exhaustive_oracle(&tasks, env.topology(), env.links(), cap, cfg.train.execution) {
                Ok(r) => match r.energy {
                    Some(j) => energies.push(j / n as f64),
                    None => infeasible += 1,
                },
                Err(Error::EnumerationCap { .. }) => {
                    refused = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if !refused && k > 0 {
            let mean = (!energies.is_empty()).then(|| energies.iter().sum::<f64>() / energies.len() as f64);
            out.push(PolicyScore {
                policy: "oracle".into(),
                mean_energy_j: mean,
                violation_rate: infeasible as f64 / k as f64,
                mean_return: 0.0,
                episodes: k,
            });
        }
    }
    Ok(out)
}

/// Trains per `cfg`, calling `between` after every episode with the index
/// of the next one (to let callers alter the environment), then evaluates.
pub fn run_with(
    cfg: &ExperimentConfig,
    env: &mut Env,
    mut between: impl FnMut(usize, &mut Env) -> Result<()>,
) -> Result<RunOutput> {
    let n = env.num_devices() as f64;
    let mut trainer = Trainer::new(env, cfg.train.clone(), cfg.experiment.seed)?;
    let start = Instant::now();
    let mut rows = Vec::with_capacity(cfg.train.episodes);
    let mut trace = Vec::with_capacity(cfg.train.episodes);
    between(0, env)?;
    for e in 0..cfg.train.episodes {
        let stats = trainer.run_episode(env, &train_tasks(cfg, e)?)?;
        trace.push(stats.ret);
        rows.push(MetricsRow {
            episode: e,
            ret: stats.ret,
            norm_ret: 0.0,
            mean_energy_j: stats.energy / n,
            violations: stats.violations,
            wall_s: if cfg.experiment.record_wall_clock {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        between(e + 1, env)?;
    }
    let (norm, conv) = if trace.is_empty() {
        (Vec::new(), None)
    } else {
        let norm = normalize_rewards(&trace)?;
        let conv = convergence(&norm)?;
        (norm, Some(conv))
    };
    for (r, v) in rows.iter_mut().zip(&norm) {
        r.norm_ret = *v;
    }
    let agent = trainer.agent;
    let evaluation = evaluate_policies(cfg, env, Some(&agent))?;
    Ok(RunOutput {
        rows,
        trace,
        summary: RunSummary {
            seed: cfg.experiment.seed,
            num_devices: env.num_devices(),
            num_sbs: env.num_sbs(),
            task_kind: cfg.tasks.kind.name().into(),
            episodes: cfg.train.episodes,
            convergence: conv,
            evaluation,
        },
        agent,
    })
}

/// One seeded training run followed by the baseline comparison.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut env = build_env(cfg)?;
    run_with(cfg, &mut env, |_, _| Ok(()))
}

/// Writes `metrics.csv`, `summary.json`, `config.toml` and (if enabled)
/// `checkpoint.bin` into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_metrics_csv(&dir.join("metrics.csv"), &out.rows)?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)?)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml_string()?)?;
    if cfg.experiment.write_checkpoint {
        save_checkpoint(&dir.join("checkpoint.bin"), &out.agent, &cfg.train)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub devices: usize,
    pub task_kind: String,
    pub policy: String,
    pub mean_energy_j: Option<f64>,
    pub violation_rate: f64,
}

/// Trains and evaluates one run per (device count, task kind) pair of the
/// compare grid.
pub fn compare_baselines(cfg: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    let grid = &cfg.experiment.compare;
    let members: Vec<ExperimentConfig> = grid
        .devices
        .iter()
        .flat_map(|&n| {
            grid.task_kinds.iter().map(move |&kind| {
                let mut c = cfg.clone();
                c.topology.num_devices = n;
                c.tasks.kind = kind;
                c
            })
        })
        .collect();
    let runs = map_slice(cfg.train.execution, &members, run);
    let mut rows = Vec::new();
    for (c, r) in members.iter().zip(runs) {
        for s in r?.summary.evaluation {
            rows.push(CompareRow {
                devices: c.topology.num_devices,
                task_kind: c.tasks.kind.name().into(),
                policy: s.policy,
                mean_energy_j: s.mean_energy_j,
                violation_rate: s.violation_rate,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Sets both the actor and the critic rate.
    LearningRate,
    Discount,
    Devices,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::LearningRate => "learning-rate",
            SweepAxis::Discount => "discount",
            SweepAxis::Devices => "devices",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "learning-rate" | "lr" => Ok(SweepAxis::LearningRate),
            "discount" => Ok(SweepAxis::Discount),
            "devices" => Ok(SweepAxis::Devices),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep axis `{other}` (expected learning-rate, discount or devices)"
            ))),
        }
    }

    /// The configured grid for this axis.
    pub fn grid(self, cfg: &ExperimentConfig) -> Vec<f64> {
        let g = &cfg.experiment.sweep;
        match self {
            SweepAxis::LearningRate => g.learning_rates.clone(),
            SweepAxis::Discount => g.discounts.clone(),
            SweepAxis::Devices => g.devices.iter().map(|&n| n as f64).collect(),
        }
    }

    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepAxis::LearningRate => {
                cfg.train.actor_lr = value;
                cfg.train.critic_lr = value;
            }
            SweepAxis::Discount => cfg.train.discount = value,
            SweepAxis::Devices => cfg.topology.num_devices = value as usize,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepMember {
    pub axis: SweepAxis,
    pub value: f64,
    pub summary: RunSummary,
    /// Per-episode discounted returns.
    pub trace: Vec<f64>,
}

/// One run per value along `axis`. Members may run concurrently; each
/// is seeded identically, so results do not depend on scheduling.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepMember>> {
    let members: Vec<ExperimentConfig> = values
        .iter()
        .map(|&v| {
            let mut c = cfg.clone();
            axis.apply(&mut c, v);
            c
        })
        .collect();
    let runs = map_slice(cfg.train.execution, &members, run);
    values
        .iter()
        .zip(runs)
        .map(|(&value, r)| {
            let r = r?;
            Ok(SweepMember {
                axis,
                value,
                summary: r.summary,
                trace: r.trace,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchReport {
    pub switch_episode: usize,
    pub factor: f64,
    /// Mean normalized return over the last tenth of each phase; `None`
    /// for an empty first phase.
    pub phase1_plateau: Option<f64>,
    pub phase2_plateau: Option<f64>,
    pub summary: RunSummary,
    #[serde(skip)]
    pub rows: Vec<MetricsRow>,
}

/// Trains with the configured narrow bandwidths, multiplying both by the
/// switch factor at the switch episode. State normalization uses the
/// widened rates throughout so the observation range is fixed.
pub fn bandwidth_switch_experiment(cfg: &ExperimentConfig) -> Result<SwitchReport> {
    let sw = &cfg.experiment.bandwidth_switch;
    let mut c = cfg.clone();
    c.channel.mbs_bandwidth_hz = sw.mbs_bandwidth_hz;
    c.channel.sbs_bandwidth_hz = sw.sbs_bandwidth_hz;
    let wide = c.channel.scaled_bandwidth(sw.factor);
    let switch = sw.switch_episode.unwrap_or(c.train.episodes / 2).min(c.train.episodes);
    let mut env = build_env(&c)?;
    env.set_channel(&wide)?;
    let wide_scale = env.quiet_max_rate();
    env.set_channel(&c.channel)?;
    env.set_rate_scale(wide_scale);
    let out = run_with(&c, &mut env, |next, env| {
        if next == switch {
            env.set_channel(&wide)?;
        }
        Ok(())
    })?;
    let norm: Vec<f64> = out.rows.iter().map(|r| r.norm_ret).collect();
    let (p1, p2) = norm.split_at(switch);
    Ok(SwitchReport {
        switch_episode: switch,
        factor: sw.factor,
        phase1_plateau: plateau(p1).ok(),
        phase2_plateau: plateau(p2).ok(),
        summary: out.summary,
        rows: out.rows,
    })
}
