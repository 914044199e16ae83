//! Slotted episodic environment: residual task state, per-slot energy
//! accounting, deadline penalties and the flat encodings the learner sees.

use serde::{Deserialize, Serialize};

use crate::compute::{Assignment, Decision, Mode};
use crate::net::{ChannelParams, Links, RateTable, TaskSpec, Topology, MBS};
use crate::refine::RefinedAction;
use crate::{Error, Result};

/// Remaining deadline below which an unfinished task counts as breached.
pub const DEADLINE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyMode {
    /// Charged once per task, in the slot its deadline runs out.
    #[default]
    PerTask,
    /// Charged once, at the end of an episode that left any task unfinished.
    EpisodeEnd,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityMode {
    /// Every slot may use the full station capacity.
    #[default]
    Fresh,
    /// Allocations are subtracted from the station for the rest of the
    /// episode.
    Cumulative,
}

/// What happens to the pending input of a task executed locally.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocalInput {
    /// Shrinks in proportion to the remaining cycles.
    #[default]
    Proportional,
    /// Dropped in the first local slot.
    Discard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Seconds per slot.
    pub slot_s: f64,
    pub max_steps: usize,
    /// Penalty is this times the number of devices.
    pub penalty_per_device: f64,
    pub penalty_mode: PenaltyMode,
    pub capacity_mode: CapacityMode,
    pub local_input: LocalInput,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            slot_s: 0.05,
            max_steps: 20,
            penalty_per_device: 100.0,
            penalty_mode: PenaltyMode::PerTask,
            capacity_mode: CapacityMode::Fresh,
            local_input: LocalInput::Proportional,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.slot_s > 0.0) || self.max_steps == 0 {
            return Err(Error::InvalidConfig("episode needs slot_s > 0 and max_steps >= 1".into()));
        }
        if !(self.penalty_per_device >= 0.0) {
            return Err(Error::InvalidConfig("episode.penalty_per_device must be >= 0".into()));
        }
        Ok(())
    }

    pub fn penalty(&self, num_devices: usize) -> f64 {
        self.penalty_per_device * num_devices as f64
    }
}

/// Residual work, remaining time, current link rates and available
/// station capacity.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub input_bits: Vec<f64>,
    pub cycles: Vec<f64>,
    pub time_left: Vec<f64>,
    /// `N x M` row-major.
    pub sbs_rates: Vec<f64>,
    pub mbs_rates: Vec<f64>,
    /// Macro cell first, then the small cells.
    pub capacity: Vec<f64>,
}

impl EnvState {
    pub fn num_devices(&self) -> usize {
        self.cycles.len()
    }

    pub fn num_sbs(&self) -> usize {
        self.capacity.len() - 1
    }

    pub fn rate(&self, device: usize, station: usize) -> f64 {
        if station == MBS {
            self.mbs_rates[device]
        } else {
            self.sbs_rates[device * self.num_sbs() + station - 1]
        }
    }

    pub fn is_done(&self, device: usize) -> bool {
        self.cycles[device] <= 0.0 && self.input_bits[device] <= 0.0
    }

    pub fn all_done(&self) -> bool {
        (0..self.num_devices()).all(|i| self.is_done(i))
    }

    /// Remaining work of each device as a task with the remaining time as
    /// its deadline.
    pub fn residual_tasks(&self) -> Vec<TaskSpec> {
        (0..self.num_devices())
            .map(|i| TaskSpec {
                input_bits: self.input_bits[i],
                cycles: self.cycles[i],
                deadline: self.time_left[i],
            })
            .collect()
    }

    fn set_rates(&mut self, table: &RateTable) {
        let m = self.num_sbs();
        for i in 0..self.num_devices() {
            self.mbs_rates[i] = table.get(i, MBS);
            for j in 1..=m {
                self.sbs_rates[i * m + j - 1] = table.get(i, j);
            }
        }
    }
}

/// Action in the learner's layout: decision weights `x` (N), `y` (N x M),
/// `z` (N) and requested allocations `f_s` (N x M), `f_m` (N) in cycles/s.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvAction {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub f_s: Vec<f64>,
    pub f_m: Vec<f64>,
}

impl EnvAction {
    pub fn len_for(num_devices: usize, num_sbs: usize) -> usize {
        3 * num_devices + 2 * num_devices * num_sbs
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            x: vec![0.0; n],
            y: vec![0.0; n * m],
            z: vec![0.0; n],
            f_s: vec![0.0; n * m],
            f_m: vec![0.0; n],
        }
    }

    /// Slices a raw vector into its parts, scaling allocation entries by
    /// the owning station's capacity (`capacities` macro cell first).
    pub fn from_raw(raw: &[f64], n: usize, m: usize, capacities: &[f64]) -> Result<Self> {
        let expected = Self::len_for(n, m);
        if raw.len() != expected {
            return Err(Error::Dimension {
                what: "raw action",
                expected,
                got: raw.len(),
            });
        }
        if capacities.len() != m + 1 {
            return Err(Error::Dimension {
                what: "capacities",
                expected: m + 1,
                got: capacities.len(),
            });
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("raw action"));
        }
        let (x, rest) = raw.split_at(n);
        let (y, rest) = rest.split_at(n * m);
        let (z, rest) = rest.split_at(n);
        let (f_s, f_m) = rest.split_at(n * m);
        let f_s = f_s
            .iter()
            .enumerate()
            .map(|(k, v)| v * capacities[k % m.max(1) + 1])
            .collect();
        let f_m = f_m.iter().map(|v| v * capacities[MBS]).collect();
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            z: z.to_vec(),
            f_s,
            f_m,
        })
    }

    /// Inverse of [`EnvAction::from_raw`].
    pub fn to_raw(&self, capacities: &[f64]) -> Vec<f64> {
        let m = capacities.len() - 1;
        let mut raw = Vec::with_capacity(Self::len_for(self.x.len(), m));
        raw.extend(&self.x);
        raw.extend(&self.y);
        raw.extend(&self.z);
        raw.extend(self.f_s.iter().enumerate().map(|(k, v)| v / capacities[k % m + 1]));
        raw.extend(self.f_m.iter().map(|v| v / capacities[MBS]));
        raw
    }

    pub fn num_devices(&self) -> usize {
        self.x.len()
    }

    pub fn num_sbs(&self) -> usize {
        self.y.len().checked_div(self.x.len()).unwrap_or(0)
    }

    /// `N x (M+2)` row-major decision matrix: local, small cells, macro.
    pub fn decision_rows(&self) -> Vec<f64> {
        let (n, m) = (self.num_devices(), self.num_sbs());
        let mut rows = Vec::with_capacity(n * (m + 2));
        for i in 0..n {
            rows.push(self.x[i]);
            rows.extend(&self.y[i * m..(i + 1) * m]);
            rows.push(self.z[i]);
        }
        rows
    }
}

/// Work done in one slot. `assignment` holds the modes, grants and rates
/// used; `work` the bits sent and cycles executed per device, so that
/// `system_energy(assignment, topology, work)` reproduces `energy`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotLog {
    pub assignment: Assignment,
    pub work: Vec<TaskSpec>,
    pub energy: f64,
    /// Tasks whose deadline ran out this slot with work left.
    pub breaches: usize,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
    pub log: SlotLog,
}

/// Scale factors mapping each state entry into `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateScale {
    pub bits: f64,
    pub cycles: f64,
    pub time: f64,
    pub rate: f64,
    pub capacity: Vec<f64>,
}

pub fn state_len(num_devices: usize, num_sbs: usize) -> usize {
    4 * num_devices + num_devices * num_sbs + num_sbs + 1
}

pub struct Env {
    topology: Topology,
    links: Links,
    cfg: EpisodeConfig,
    scale: StateScale,
    state: EnvState,
    steps: usize,
    breached: Vec<bool>,
}

impl Env {
    /// `max_bits`, `max_cycles` and `max_deadline` bound the task
    /// distribution and normalize the state.
    pub fn new(
        topology: Topology,
        channel: &ChannelParams,
        cfg: EpisodeConfig,
        max_bits: f64,
        max_cycles: f64,
        max_deadline: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        let links = Links::new(&topology, channel)?;
        let rate = max_rate(&links.quiet_rates()).max(f64::MIN_POSITIVE);
        let scale = StateScale {
            bits: max_bits,
            cycles: max_cycles,
            time: max_deadline,
            rate,
            capacity: topology.capacities(),
        };
        let (n, m) = (topology.num_devices(), topology.num_sbs());
        let state = EnvState {
            input_bits: vec![0.0; n],
            cycles: vec![0.0; n],
            time_left: vec![0.0; n],
            sbs_rates: vec![0.0; n * m],
            mbs_rates: vec![0.0; n],
            capacity: topology.capacities(),
        };
        Ok(Self {
            topology,
            links,
            cfg,
            scale,
            state,
            steps: 0,
            breached: vec![false; n],
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn scale(&self) -> &StateScale {
        &self.scale
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.links.channel
    }

    pub fn links(&self) -> &Links {
        &self.links
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn num_devices(&self) -> usize {
        self.topology.num_devices()
    }

    pub fn num_sbs(&self) -> usize {
        self.topology.num_sbs()
    }

    pub fn state_len(&self) -> usize {
        state_len(self.num_devices(), self.num_sbs())
    }

    pub fn action_len(&self) -> usize {
        EnvAction::len_for(self.num_devices(), self.num_sbs())
    }

    /// Swaps the channel (e.g. a bandwidth change) keeping the state
    /// normalization.
    pub fn set_channel(&mut self, channel: &ChannelParams) -> Result<()> {
        self.links = Links::new(&self.topology, channel)?;
        Ok(())
    }

    pub fn set_rate_scale(&mut self, rate: f64) {
        self.scale.rate = rate;
    }

    /// Largest interference-free rate under the current channel.
    pub fn quiet_max_rate(&self) -> f64 {
        max_rate(&self.links.quiet_rates())
    }

    /// Starts an episode: full tasks, full capacities, interference-free
    /// rates.
    pub fn reset(&mut self, tasks: &[TaskSpec]) -> Result<&EnvState> {
        let n = self.num_devices();
        if tasks.len() != n {
            return Err(Error::Dimension {
                what: "tasks",
                expected: n,
                got: tasks.len(),
            });
        }
        let s = &mut self.state;
        for (i, t) in tasks.iter().enumerate() {
            s.input_bits[i] = t.input_bits;
            s.cycles[i] = t.cycles;
            s.time_left[i] = t.deadline;
        }
        s.capacity = self.topology.capacities();
        s.set_rates(&self.links.quiet_rates());
        self.steps = 0;
        self.breached.iter_mut().for_each(|b| *b = false);
        Ok(&self.state)
    }

    /// Flat state: `d, c, tau, R^s (row-major), R^m, F`, each in `[0, 1]`.
    pub fn flatten_state(&self, state: &EnvState) -> Vec<f64> {
        let sc = &self.scale;
        let unit = |v: f64, max: f64| if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
        let mut out = Vec::with_capacity(self.state_len());
        out.extend(state.input_bits.iter().map(|&v| unit(v, sc.bits)));
        out.extend(state.cycles.iter().map(|&v| unit(v, sc.cycles)));
        out.extend(state.time_left.iter().map(|&v| unit(v, sc.time)));
        out.extend(state.sbs_rates.iter().map(|&v| unit(v, sc.rate)));
        out.extend(state.mbs_rates.iter().map(|&v| unit(v, sc.rate)));
        out.extend(state.capacity.iter().zip(&sc.capacity).map(|(&v, &max)| unit(v, max)));
        out
    }

    pub fn observe(&self) -> Vec<f64> {
        self.flatten_state(&self.state)
    }

    /// Reward the action would earn from the current state, without
    /// advancing.
    pub fn immediate_reward(&self, action: &RefinedAction) -> Result<f64> {
        let (_, log) = self.transition(action)?;
        Ok(-log.energy - log.penalty)
    }

    pub fn step(&mut self, action: &RefinedAction) -> Result<StepOutcome> {
        let (next, log) = self.transition(action)?;
        for (i, b) in self.breached.iter_mut().enumerate() {
            if !*b && next.time_left[i] <= DEADLINE_TOL && !next.is_done(i) {
                *b = true;
            }
        }
        self.state = next;
        self.steps += 1;
        let done = self.state.all_done() || self.steps >= self.cfg.max_steps;
        Ok(StepOutcome {
            reward: -log.energy - log.penalty,
            done,
            log,
        })
    }

    /// Number of tasks whose deadline has run out unfinished so far.
    pub fn violations(&self) -> usize {
        self.breached.iter().filter(|b| **b).count()
    }

    fn transition(&self, action: &RefinedAction) -> Result<(EnvState, SlotLog)> {
        let n = self.num_devices();
        let m = self.num_sbs();
        if action.num_devices() != n || action.num_sbs() != m {
            return Err(Error::Dimension {
                what: "refined action",
                expected: n,
                got: action.num_devices(),
            });
        }
        let cur = &self.state;
        let dt = self.cfg.slot_s;

        let uploading: Vec<Option<usize>> = (0..n)
            .map(|i| action.modes[i].station().filter(|_| cur.input_bits[i] > 0.0))
            .collect();
        let rates = self.links.rates(&uploading);

        let mut next = cur.clone();
        let mut decisions = Vec::with_capacity(n);
        let mut work = Vec::with_capacity(n);
        let mut energy = 0.0;
        let mut granted = vec![0.0; m + 1];
        for i in 0..n {
            let dev = &self.topology.devices[i];
            let live = !cur.is_done(i);
            let (decision, sent, executed) = match action.modes[i].station() {
                None => {
                    let f = dev.local_capacity;
                    let executed = cur.cycles[i].min(f * dt);
                    let c_new = cur.cycles[i] - executed;
                    next.cycles[i] = c_new;
                    next.input_bits[i] = match self.cfg.local_input {
                        LocalInput::Discard => 0.0,
                        LocalInput::Proportional if cur.cycles[i] > 0.0 => {
                            cur.input_bits[i] * (c_new / cur.cycles[i])
                        }
                        LocalInput::Proportional => 0.0,
                    };
                    energy += dev.switched_capacitance * executed * f * f;
                    (Decision::local(), 0.0, executed)
                }
                Some(s) => {
                    let rate = rates.get(i, s);
                    let f = action.alloc[i];
                    granted[s] += f;
                    let sent = cur.input_bits[i].min(rate * dt);
                    let executed = cur.cycles[i].min(f * dt);
                    next.input_bits[i] = cur.input_bits[i] - sent;
                    next.cycles[i] = cur.cycles[i] - executed;
                    if sent > 0.0 {
                        energy += dev.transmit_power * sent / rate;
                    }
                    energy += self.topology.stations[s].energy_per_cycle * executed;
                    let decision = Decision {
                        mode: action.modes[i],
                        alloc: f,
                        rate,
                    };
                    (decision, sent, executed)
                }
            };
            if live {
                next.time_left[i] = (cur.time_left[i] - dt).max(0.0);
            }
            decisions.push(decision);
            work.push(TaskSpec {
                input_bits: sent,
                cycles: executed,
                deadline: dt,
            });
        }

        if self.cfg.capacity_mode == CapacityMode::Cumulative {
            for (c, g) in next.capacity.iter_mut().zip(&granted) {
                *c = (*c - g).max(0.0);
            }
        }
        let still_uploading: Vec<Option<usize>> = (0..n)
            .map(|i| action.modes[i].station().filter(|_| next.input_bits[i] > 0.0))
            .collect();
        next.set_rates(&self.links.rates(&still_uploading));

        let breaches = (0..n)
            .filter(|&i| !self.breached[i] && next.time_left[i] <= DEADLINE_TOL && !next.is_done(i))
            .count();
        let full = self.cfg.penalty(n);
        let penalty = match self.cfg.penalty_mode {
            PenaltyMode::PerTask => full * breaches as f64,
            PenaltyMode::EpisodeEnd => {
                let last = self.steps + 1 >= self.cfg.max_steps || next.all_done();
                if last && !next.all_done() {
                    full
                } else {
                    0.0
                }
            }
        };
        Ok((
            next,
            SlotLog {
                assignment: Assignment { decisions },
                work,
                energy,
                breaches,
                penalty,
            },
        ))
    }
}

fn max_rate(table: &RateTable) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..table.num_devices() {
        for s in 0..table.num_stations() {
            best = best.max(table.get(i, s));
        }
    }
    best
}

/// Discounted return `sum_t discount^t r_t`.
pub fn episode_return(rewards: &[f64], discount: f64) -> f64 {
    let mut g = 0.0;
    for r in rewards.iter().rev() {
        g = r + discount * g;
    }
    g
}

/// The same mode and grant for every device.
pub fn all_mode(n: usize, num_sbs: usize, mode: Mode, alloc: f64) -> Result<RefinedAction> {
    RefinedAction::new(vec![mode; n], vec![alloc; n], num_sbs)
}
