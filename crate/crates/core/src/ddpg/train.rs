//! The training loop: explore, refine, step, store, learn, track.

use serde::{Deserialize, Serialize};

use super::agent::Agent;
use super::noise::OuProcess;
use super::replay::{ReplayMemory, Transition};
use crate::env::{episode_return, Env, SlotLog};
use crate::exec::Execution;
use crate::net::TaskSpec;
use crate::refine::{refine, RefinedAction};
use crate::seeding::{self, streams, Rng};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Reward discount.
    pub discount: f64,
    /// Target tracking rate.
    pub soft_update: f64,
    pub batch_size: usize,
    pub episodes: usize,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
    /// Multiplier on rewards entering the replay memory. Unset means ten
    /// over the deadline penalty, so a missed deadline costs about 10.
    pub reward_scale: Option<f64>,
    pub ou_theta: f64,
    pub ou_mu: f64,
    /// Noise scale, decayed linearly from start to end over the episodes.
    pub ou_sigma_start: f64,
    pub ou_sigma_end: f64,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            discount: 0.6,
            soft_update: 0.01,
            batch_size: 32,
            episodes: 6000,
            replay_capacity: 100_000,
            hidden: vec![128, 128],
            reward_scale: None,
            ou_theta: 0.15,
            ou_mu: 0.0,
            ou_sigma_start: 0.2,
            ou_sigma_end: 0.02,
            execution: Execution::Parallel,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("train.{msg}")));
        if !(0.0..=1.0).contains(&self.discount) {
            return bad("discount must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.soft_update) {
            return bad("soft_update must lie in [0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if self.replay_capacity < self.batch_size {
            return bad("replay_capacity must hold at least one batch");
        }
        if !(self.actor_lr >= 0.0 && self.critic_lr >= 0.0) {
            return bad("learning rates must be >= 0");
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be >= 1");
        }
        if !(self.ou_theta > 0.0 && self.ou_sigma_start >= 0.0 && self.ou_sigma_end >= 0.0) {
            return bad("ou_theta must be > 0 and noise scales >= 0");
        }
        if let Some(s) = self.reward_scale {
            if !(s > 0.0 && s.is_finite()) {
                return bad("reward_scale must be positive");
            }
        }
        Ok(())
    }

    /// Noise scale for a 0-based episode index.
    pub fn sigma_at(&self, episode: usize) -> f64 {
        let span = self.episodes.saturating_sub(1).max(1) as f64;
        let frac = (episode as f64 / span).min(1.0);
        self.ou_sigma_start + (self.ou_sigma_end - self.ou_sigma_start) * frac
    }
}

/// Summary of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    /// Discounted return of the unscaled rewards.
    pub ret: f64,
    pub rewards: Vec<f64>,
    /// Joules spent over the episode.
    pub energy: f64,
    /// Tasks that missed their deadline.
    pub violations: usize,
    pub steps: usize,
    /// Mean critic loss over the updates made, if any.
    pub critic_loss: Option<f64>,
    pub logs: Vec<SlotLog>,
}

/// Plays one episode with `policy` choosing each slot's refined action.
pub fn rollout(
    env: &mut Env,
    tasks: &[TaskSpec],
    discount: f64,
    mut policy: impl FnMut(&Env) -> Result<RefinedAction>,
) -> Result<EpisodeStats> {
    env.reset(tasks)?;
    let mut rewards = Vec::with_capacity(env.config().max_steps);
    let mut logs = Vec::with_capacity(env.config().max_steps);
    loop {
        let action = policy(env)?;
        let out = env.step(&action)?;
        rewards.push(out.reward);
        logs.push(out.log);
        if out.done {
            break;
        }
    }
    Ok(EpisodeStats {
        ret: episode_return(&rewards, discount),
        energy: logs.iter().map(|l| l.energy).sum(),
        violations: env.violations(),
        steps: rewards.len(),
        critic_loss: None,
        rewards,
        logs,
    })
}

/// Greedy (noise-free) episode of a trained agent.
pub fn evaluate(env: &mut Env, agent: &Agent, tasks: &[TaskSpec], discount: f64) -> Result<EpisodeStats> {
    rollout(env, tasks, discount, |env| {
        let raw = agent.act(&env.observe())?;
        refine(&raw, env.state(), env.topology())
    })
}

/// Learner state carried across episodes.
pub struct Trainer {
    pub agent: Agent,
    pub memory: ReplayMemory,
    cfg: TrainConfig,
    noise: OuProcess,
    sampling: Rng,
    episode: usize,
}

impl Trainer {
    /// Fresh agent sized for `env`, initialized from the run seed.
    pub fn new(env: &Env, cfg: TrainConfig, seed: u64) -> Result<Self> {
        let mut init = seeding::stream(seed, streams::INIT);
        let agent = Agent::new(env.state_len(), env.action_len(), &cfg.hidden, &mut init);
        Self::with_agent(agent, cfg, seed)
    }

    pub fn with_agent(agent: Agent, cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let noise = OuProcess::new(
            agent.action_len(),
            cfg.ou_theta,
            cfg.ou_mu,
            cfg.ou_sigma_start,
            seeding::stream(seed, streams::NOISE),
        );
        Ok(Self {
            memory: ReplayMemory::new(cfg.replay_capacity),
            sampling: seeding::stream(seed, streams::SAMPLING),
            agent,
            cfg,
            noise,
            episode: 0,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Episodes completed so far.
    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn reward_scale(&self, env: &Env) -> f64 {
        self.cfg.reward_scale.unwrap_or_else(|| {
            let p = env.config().penalty(env.num_devices());
            if p > 0.0 {
                10.0 / p
            } else {
                1.0
            }
        })
    }

    /// One exploring episode with learning after every slot.
    pub fn run_episode(&mut self, env: &mut Env, tasks: &[TaskSpec]) -> Result<EpisodeStats> {
        if env.state_len() != self.agent.state_len() || env.action_len() != self.agent.action_len() {
            return Err(Error::Dimension {
                what: "agent vs environment",
                expected: env.state_len(),
                got: self.agent.state_len(),
            });
        }
        let scale = self.reward_scale(env);
        self.noise.sigma = self.cfg.sigma_at(self.episode);
        self.noise.reset();
        env.reset(tasks)?;
        let mut state = env.observe();
        let mut rewards = Vec::with_capacity(env.config().max_steps);
        let mut logs = Vec::with_capacity(env.config().max_steps);
        let (mut loss_sum, mut updates) = (0.0, 0usize);
        loop {
            let noise = self.noise.step().to_vec();
            let raw = self.agent.select_action(&state, &noise)?;
            let action = refine(&raw, env.state(), env.topology())?;
            let out = env.step(&action)?;
            let next = env.observe();
            self.memory.push(Transition {
                state: std::mem::replace(&mut state, next.clone()),
                action: raw,
                reward: out.reward * scale,
                next_state: next,
                done: out.done,
            });
            if let Some(loss) = self.learn()? {
                loss_sum += loss;
                updates += 1;
            }
            rewards.push(out.reward);
            logs.push(out.log);
            if out.done {
                break;
            }
        }
        self.episode += 1;
        Ok(EpisodeStats {
            ret: episode_return(&rewards, self.cfg.discount),
            energy: logs.iter().map(|l| l.energy).sum(),
            violations: env.violations(),
            steps: rewards.len(),
            critic_loss: (updates > 0).then(|| loss_sum / updates as f64),
            rewards,
            logs,
        })
    }

    /// Critic step, actor step and target tracking on one sampled batch.
    /// `None` while the memory is smaller than a batch.
    fn learn(&mut self) -> Result<Option<f64>> {
        let Some(batch) = self.memory.sample(self.cfg.batch_size, &mut self.sampling) else {
            return Ok(None);
        };
        let exec = self.cfg.execution;
        let loss = self.agent.critic_update(&batch, self.cfg.discount, self.cfg.critic_lr, exec)?;
        self.agent.actor_update(&batch, self.cfg.actor_lr, exec)?;
        self.agent.soft_update(self.cfg.soft_update);
        Ok(Some(loss))
    }
}

/// Trains for `cfg.episodes` episodes, drawing each episode's tasks from
/// `tasks` and reporting to `on_episode` (which may also adjust the
/// environment between episodes). Returns the agent and the per-episode
/// discounted returns.
pub fn train(
    env: &mut Env,
    cfg: TrainConfig,
    seed: u64,
    mut tasks: impl FnMut(usize) -> Result<Vec<TaskSpec>>,
    mut on_episode: impl FnMut(usize, &EpisodeStats, &mut Env) -> Result<()>,
) -> Result<(Agent, Vec<f64>)> {
    let episodes = cfg.episodes;
    let mut trainer = Trainer::new(env, cfg, seed)?;
    let mut trace = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let t = tasks(e)?;
        let stats = trainer.run_episode(env, &t)?;
        trace.push(stats.ret);
        on_episode(e, &stats, env)?;
    }
    Ok((trainer.agent, trace))
}
