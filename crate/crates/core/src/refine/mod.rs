//! Turns a raw continuous action into a binary offloading decision with
//! capacity-respecting allocations: row normalization, rounding graph,
//! maximum-weight complete matching, then allocation projection.

mod hungarian;
mod rounding;

pub use hungarian::{max_weight_complete_matching, solve_assignment, Matching};
pub use rounding::{
    build_rounding_graph, normalize_rows, slot_count, Edge, FractionalDecision, RoundingGraph,
    VirtualNode, SLOT_TOL,
};

use crate::compute::{min_feasible_alloc, Assignment, Decision, FeasibilityReport, Mode};
use crate::env::{EnvAction, EnvState};
use crate::net::{TaskSpec, Topology};
use crate::{Error, Result};

/// Binary decision per device plus the cycles/s granted by its chosen
/// station (zero for local execution).
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedAction {
    pub modes: Vec<Mode>,
    pub alloc: Vec<f64>,
    num_sbs: usize,
}

impl RefinedAction {
    pub fn new(modes: Vec<Mode>, alloc: Vec<f64>, num_sbs: usize) -> Result<Self> {
        if alloc.len() != modes.len() {
            return Err(Error::Dimension {
                what: "allocations",
                expected: modes.len(),
                got: alloc.len(),
            });
        }
        for (i, m) in modes.iter().enumerate() {
            if let Mode::Sbs(j) = *m {
                if j == 0 || j > num_sbs {
                    return Err(Error::Unrefined { device: i });
                }
            }
        }
        Ok(Self { modes, alloc, num_sbs })
    }

    /// Reads a binary action in the flat `x, y, z, f_s, f_m` layout.
    pub fn from_binary(action: &EnvAction) -> Result<Self> {
        let (n, m) = (action.num_devices(), action.num_sbs());
        let mut modes = Vec::with_capacity(n);
        let mut alloc = Vec::with_capacity(n);
        for i in 0..n {
            let row: Vec<f64> = std::iter::once(action.x[i])
                .chain(action.y[i * m..(i + 1) * m].iter().copied())
                .chain(std::iter::once(action.z[i]))
                .collect();
            let ones: Vec<usize> = (0..row.len()).filter(|&j| row[j] == 1.0).collect();
            if ones.len() != 1 || row.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::Unrefined { device: i });
            }
            let mode = Mode::from_strategy(ones[0], m);
            alloc.push(match mode {
                Mode::Local => 0.0,
                Mode::Sbs(j) => action.f_s[i * m + j - 1],
                Mode::Mbs => action.f_m[i],
            });
            modes.push(mode);
        }
        Self::new(modes, alloc, m)
    }

    pub fn num_devices(&self) -> usize {
        self.modes.len()
    }

    pub fn num_sbs(&self) -> usize {
        self.num_sbs
    }

    /// Flat binary form, zero allocations off the chosen station.
    pub fn to_action(&self) -> EnvAction {
        let (n, m) = (self.modes.len(), self.num_sbs);
        let mut a = EnvAction::zeros(n, m);
        for (i, (&mode, &f)) in self.modes.iter().zip(&self.alloc).enumerate() {
            match mode {
                Mode::Local => a.x[i] = 1.0,
                Mode::Sbs(j) => {
                    a.y[i * m + j - 1] = 1.0;
                    a.f_s[i * m + j - 1] = f;
                }
                Mode::Mbs => {
                    a.z[i] = 1.0;
                    a.f_m[i] = f;
                }
            }
        }
        a
    }

    /// Choice and capacity checks against `capacities` (macro cell first).
    pub fn structural_report(&self, capacities: &[f64]) -> FeasibilityReport {
        let a = self.to_action();
        FeasibilityReport::for_binary_action(&a.x, &a.y, &a.z, &a.f_s, &a.f_m, capacities)
    }

    /// Assignment view with the rate each device sees on its station.
    pub fn to_assignment(&self, rate_of: impl Fn(usize, usize) -> f64) -> Assignment {
        let decisions = self
            .modes
            .iter()
            .zip(&self.alloc)
            .enumerate()
            .map(|(i, (&mode, &alloc))| match mode.station() {
                None => Decision::local(),
                Some(s) => Decision {
                    mode,
                    alloc,
                    rate: rate_of(i, s),
                },
            })
            .collect();
        Assignment { decisions }
    }
}

/// Strategy chosen for each device by the matching.
pub fn extract_decisions(matching: &Matching, graph: &RoundingGraph, num_sbs: usize) -> Result<Vec<Mode>> {
    let mut modes = vec![None; graph.num_devices];
    for &(device, node, _) in &matching.pairs {
        let strategy = graph.nodes[node].strategy;
        if strategy > num_sbs + 1 {
            return Err(Error::Dimension {
                what: "strategy",
                expected: num_sbs + 2,
                got: strategy + 1,
            });
        }
        modes[device] = Some(Mode::from_strategy(strategy, num_sbs));
    }
    modes
        .into_iter()
        .enumerate()
        .map(|(i, m)| m.ok_or(Error::MissingDecision(i)))
        .collect()
}

/// Per-device allocation on the chosen station. Requests are capped at
/// the station capacity and raised to the smallest deadline-meeting
/// allocation when one exists; stations asked for more than they hold
/// scale every grant down proportionally. `requested`, `tasks` and `rates`
/// are per device, the rate being the one on the chosen station.
pub fn project_allocations(
    requested: &[f64],
    modes: &[Mode],
    capacities: &[f64],
    tasks: &[TaskSpec],
    rates: &[f64],
) -> Vec<f64> {
    let mut alloc = vec![0.0; modes.len()];
    let mut load = vec![0.0; capacities.len()];
    for (i, mode) in modes.iter().enumerate() {
        let Some(s) = mode.station() else { continue };
        let task = &tasks[i];
        if task.cycles <= 0.0 {
            continue;
        }
        let cap = capacities[s].max(0.0);
        let mut f = requested[i].max(0.0);
        if let Some(floor) = min_feasible_alloc(task, rates[i], task.deadline) {
            f = f.max(floor.min(cap));
        }
        alloc[i] = f;
        load[s] += f;
    }
    for (i, mode) in modes.iter().enumerate() {
        if let Some(s) = mode.station() {
            let cap = capacities[s].max(0.0);
            if load[s] > cap {
                alloc[i] *= cap / load[s];
            }
        }
    }
    alloc
}

/// `true` where device `i` may use strategy column `j`: local and the macro
/// cell always, small cells only inside their coverage.
pub fn strategy_mask(topology: &Topology) -> Vec<bool> {
    let (n, m) = (topology.num_devices(), topology.num_sbs());
    let mut mask = Vec::with_capacity(n * (m + 2));
    for i in 0..n {
        mask.push(true);
        mask.extend((1..=m).map(|j| topology.covers(i, j)));
        mask.push(true);
    }
    mask
}

/// Full refinement of a raw actor output against the current state.
pub fn refine(raw: &[f64], state: &EnvState, topology: &Topology) -> Result<RefinedAction> {
    let (n, m) = (state.num_devices(), state.num_sbs());
    if topology.num_devices() != n || topology.num_sbs() != m {
        return Err(Error::Dimension {
            what: "topology",
            expected: n,
            got: topology.num_devices(),
        });
    }
    let action = EnvAction::from_raw(raw, n, m, &topology.capacities())?;
    let w = normalize_rows(&action.decision_rows(), m + 2, Some(&strategy_mask(topology)))?;
    let graph = build_rounding_graph(&w);
    let matching = max_weight_complete_matching(&graph)?;
    let modes = extract_decisions(&matching, &graph, m)?;

    let tasks = state.residual_tasks();
    let mut requested = vec![0.0; n];
    let mut rates = vec![0.0; n];
    for (i, mode) in modes.iter().enumerate() {
        match *mode {
            Mode::Local => {}
            Mode::Sbs(j) => {
                requested[i] = action.f_s[i * m + j - 1];
                rates[i] = state.rate(i, j);
            }
            Mode::Mbs => {
                requested[i] = action.f_m[i];
                rates[i] = state.rate(i, crate::net::MBS);
            }
        }
    }
    let alloc = project_allocations(&requested, &modes, &state.capacity, &tasks, &rates);
    RefinedAction::new(modes, alloc, m)
}
