//! Delay and energy of executing a task locally or on a station, the
//! system-wide objective, and constraint checking.
//!
//! Infeasible quantities (zero rate, no time left) come back as `None`
//! rather than as infinities.

use serde::{Deserialize, Serialize};

use crate::net::{TaskSpec, Topology, MBS};
use crate::{Error, Result};

/// Relative slack applied when comparing delays and allocations against
/// their bounds.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Where a device runs its task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Local,
    /// Small cell id in `1..=M`.
    Sbs(usize),
    Mbs,
}

impl Mode {
    /// Station the task is uploaded to, if any.
    pub fn station(self) -> Option<usize> {
        match self {
            Mode::Local => None,
            Mode::Sbs(j) => Some(j),
            Mode::Mbs => Some(MBS),
        }
    }

    /// Column in the `N x (M+2)` strategy layout: 0 local, `1..=M` small
    /// cells, `M+1` macro cell.
    pub fn strategy(self, num_sbs: usize) -> usize {
        match self {
            Mode::Local => 0,
            Mode::Sbs(j) => j,
            Mode::Mbs => num_sbs + 1,
        }
    }

    pub fn from_strategy(column: usize, num_sbs: usize) -> Mode {
        match column {
            0 => Mode::Local,
            c if c == num_sbs + 1 => Mode::Mbs,
            c => Mode::Sbs(c),
        }
    }

    pub fn from_station(station: usize) -> Mode {
        if station == MBS {
            Mode::Mbs
        } else {
            Mode::Sbs(station)
        }
    }
}

/// One device's decision: mode, server cycles per second granted (unused
/// for local execution) and the uplink rate it sees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub mode: Mode,
    pub alloc: f64,
    pub rate: f64,
}

impl Decision {
    pub fn local() -> Self {
        Self {
            mode: Mode::Local,
            alloc: 0.0,
            rate: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub decisions: Vec<Decision>,
}

pub fn local_delay(task: &TaskSpec, local_capacity: f64) -> f64 {
    task.cycles / local_capacity
}

pub fn local_energy(task: &TaskSpec, local_capacity: f64, capacitance: f64) -> f64 {
    capacitance * task.cycles * local_capacity * local_capacity
}

fn transmit_time(task: &TaskSpec, rate: f64) -> Option<f64> {
    if task.input_bits == 0.0 {
        Some(0.0)
    } else if rate > 0.0 {
        Some(task.input_bits / rate)
    } else {
        None
    }
}

/// Upload time plus remote compute time.
pub fn offload_delay(task: &TaskSpec, rate: f64, alloc: f64) -> Option<f64> {
    let tx = transmit_time(task, rate)?;
    let compute = if task.cycles == 0.0 {
        0.0
    } else if alloc > 0.0 {
        task.cycles / alloc
    } else {
        return None;
    };
    Some(tx + compute)
}

/// Transmit energy plus remote compute energy. Independent of the
/// allocation.
pub fn offload_energy(task: &TaskSpec, rate: f64, power: f64, energy_per_cycle: f64) -> Option<f64> {
    Some(power * transmit_time(task, rate)? + task.cycles * energy_per_cycle)
}

/// Smallest allocation meeting `deadline`, `c / (deadline - d / rate)`.
pub fn min_feasible_alloc(task: &TaskSpec, rate: f64, deadline: f64) -> Option<f64> {
    let slack = deadline - transmit_time(task, rate)?;
    if slack > 0.0 {
        Some(task.cycles / slack)
    } else {
        None
    }
}

fn check_lengths(assignment: &Assignment, topology: &Topology, tasks: &[TaskSpec]) -> Result<()> {
    let n = topology.num_devices();
    if tasks.len() != n {
        return Err(Error::Dimension {
            what: "tasks",
            expected: n,
            got: tasks.len(),
        });
    }
    if assignment.decisions.len() < n {
        return Err(Error::MissingDecision(assignment.decisions.len()));
    }
    if assignment.decisions.len() > n {
        return Err(Error::Dimension {
            what: "assignment",
            expected: n,
            got: assignment.decisions.len(),
        });
    }
    Ok(())
}

/// Energy of one device's decision.
pub fn decision_energy(
    decision: &Decision,
    device: usize,
    topology: &Topology,
    task: &TaskSpec,
) -> Result<f64> {
    let dev = &topology.devices[device];
    match decision.mode.station() {
        None => Ok(local_energy(task, dev.local_capacity, dev.switched_capacitance)),
        Some(s) => {
            let station = topology.stations.get(s).ok_or(Error::UnknownStation(s))?;
            offload_energy(task, decision.rate, dev.transmit_power, station.energy_per_cycle).ok_or(
                Error::ZeroRate {
                    device,
                    bits: task.input_bits,
                },
            )
        }
    }
}

/// Total energy of an assignment.
pub fn system_energy(assignment: &Assignment, topology: &Topology, tasks: &[TaskSpec]) -> Result<f64> {
    check_lengths(assignment, topology, tasks)?;
    assignment
        .decisions
        .iter()
        .zip(tasks)
        .enumerate()
        .map(|(i, (d, t))| decision_energy(d, i, topology, t))
        .sum()
}

/// Offending indices per constraint family. Empty lists mean satisfied.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    /// Devices whose completion delay exceeds the deadline.
    pub deadline: Vec<usize>,
    /// Devices without exactly one valid binary choice.
    pub choice: Vec<usize>,
    /// Stations whose summed allocation exceeds capacity.
    pub capacity: Vec<usize>,
    /// Devices whose allocation is negative or above the station capacity.
    pub bounds: Vec<usize>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.structural_ok() && self.deadline.is_empty()
    }

    /// Everything except deadlines.
    pub fn structural_ok(&self) -> bool {
        self.choice.is_empty() && self.capacity.is_empty() && self.bounds.is_empty()
    }

    /// Checks a binary action in the flat layout: `x`, `z`, `f_m` of length
    /// `N`; `y`, `f_s` of length `N*M` row-major. `capacities` lists the
    /// macro cell first.
    pub fn for_binary_action(
        x: &[f64],
        y: &[f64],
        z: &[f64],
        f_s: &[f64],
        f_m: &[f64],
        capacities: &[f64],
    ) -> Self {
        let n = x.len();
        let m = capacities.len() - 1;
        let mut report = Self::default();
        let mut load = vec![0.0; m + 1];
        let binary = |v: f64| v == 0.0 || v == 1.0;
        for i in 0..n {
            let row = std::iter::once(x[i])
                .chain(y[i * m..(i + 1) * m].iter().copied())
                .chain(std::iter::once(z[i]));
            let (mut ones, mut ok) = (0, true);
            for v in row {
                ok &= binary(v);
                ones += (v == 1.0) as usize;
            }
            if !ok || ones != 1 {
                report.choice.push(i);
            }
            let mut out_of_bounds = false;
            for j in 0..m {
                let f = f_s[i * m + j];
                out_of_bounds |= !(f >= 0.0 && f <= capacities[j + 1] * (1.0 + FEASIBILITY_TOL));
                load[j + 1] += y[i * m + j] * f;
            }
            out_of_bounds |= !(f_m[i] >= 0.0 && f_m[i] <= capacities[MBS] * (1.0 + FEASIBILITY_TOL));
            load[MBS] += z[i] * f_m[i];
            if out_of_bounds {
                report.bounds.push(i);
            }
        }
        for (s, (&l, &c)) in load.iter().zip(capacities).enumerate() {
            if l > c * (1.0 + FEASIBILITY_TOL) {
                report.capacity.push(s);
            }
        }
        report
    }
}

/// Evaluates every constraint of the offloading problem for `assignment`.
pub fn check_feasible(assignment: &Assignment, topology: &Topology, tasks: &[TaskSpec]) -> FeasibilityReport {
    let n = topology.num_devices();
    let mut report = FeasibilityReport::default();
    let mut load = vec![0.0; topology.num_stations()];
    for i in 0..n {
        let (Some(d), Some(task)) = (assignment.decisions.get(i), tasks.get(i)) else {
            report.choice.push(i);
            continue;
        };
        let dev = &topology.devices[i];
        let delay = match d.mode {
            Mode::Local => Some(local_delay(task, dev.local_capacity)),
            mode => {
                let s = mode.station().expect("offloading mode");
                let valid = match mode {
                    Mode::Sbs(j) => j >= 1 && j <= topology.num_sbs() && topology.covers(i, j),
                    _ => true,
                };
                if !valid {
                    report.choice.push(i);
                    continue;
                }
                let cap = topology.stations[s].capacity;
                if !(d.alloc >= 0.0 && d.alloc <= cap * (1.0 + FEASIBILITY_TOL)) {
                    report.bounds.push(i);
                }
                load[s] += d.alloc;
                offload_delay(task, d.rate, d.alloc)
            }
        };
        match delay {
            Some(t) if t <= task.deadline * (1.0 + FEASIBILITY_TOL) => {}
            _ => report.deadline.push(i),
        }
    }
    for (s, station) in topology.stations.iter().enumerate() {
        if load[s] > station.capacity * (1.0 + FEASIBILITY_TOL) {
            report.capacity.push(s);
        }
    }
    report
}
