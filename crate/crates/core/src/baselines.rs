//! Reference policies: all-local, all-to-cloud, uniform random, and an
//! exhaustive optimum for small instances.

use rand::Rng as _;

use crate::compute::{
    decision_energy, local_delay, min_feasible_alloc, Assignment, Decision, Mode, FEASIBILITY_TOL,
};
use crate::env::EnvState;
use crate::exec::{map_range, Execution};
use crate::net::{Links, TaskSpec, Topology, MBS};
use crate::refine::RefinedAction;
use crate::seeding::Rng;
use crate::{Error, Result};

/// Default ceiling on the number of assignments the oracle enumerates.
pub const DEFAULT_ORACLE_CAP: u128 = 1_000_000;

/// Every device computes locally at full speed.
pub fn local_policy(tasks: &[TaskSpec]) -> Assignment {
    Assignment {
        decisions: vec![Decision::local(); tasks.len()],
    }
}

/// Macro-cell capacity split in proportion to the work of each task.
fn proportional_shares(cycles: &[f64], capacity: f64) -> Vec<f64> {
    let total: f64 = cycles.iter().sum();
    cycles
        .iter()
        .map(|&c| if total > 0.0 { capacity * c / total } else { 0.0 })
        .collect()
}

/// Every device uploads to the macro cell, which splits its capacity in
/// proportion to the required cycles. Rates account for all devices
/// uploading at once.
pub fn full_offload_policy(tasks: &[TaskSpec], topology: &Topology, links: &Links) -> Assignment {
    let uploading: Vec<Option<usize>> = tasks
        .iter()
        .map(|t| (t.input_bits > 0.0).then_some(MBS))
        .collect();
    let rates = links.rates(&uploading);
    let cycles: Vec<f64> = tasks.iter().map(|t| t.cycles).collect();
    let shares = proportional_shares(&cycles, topology.stations[MBS].capacity);
    Assignment {
        decisions: shares
            .into_iter()
            .enumerate()
            .map(|(i, alloc)| Decision {
                mode: Mode::Mbs,
                alloc,
                rate: rates.get(i, MBS),
            })
            .collect(),
    }
}

/// Uniform raw action in `[0, 1]^len`, refined downstream like an actor
/// output.
pub fn random_policy(len: usize, rng: &mut Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random::<f64>()).collect()
}

/// Slot-level all-local action.
pub fn local_action(num_devices: usize, num_sbs: usize) -> RefinedAction {
    RefinedAction::new(vec![Mode::Local; num_devices], vec![0.0; num_devices], num_sbs)
        .expect("local modes are always valid")
}

/// Slot-level all-to-cloud action sharing the available macro capacity in
/// proportion to the remaining cycles.
pub fn full_offload_action(state: &EnvState) -> RefinedAction {
    let n = state.num_devices();
    let alloc = proportional_shares(&state.cycles, state.capacity[MBS]);
    RefinedAction::new(vec![Mode::Mbs; n], alloc, state.num_sbs()).expect("macro modes are always valid")
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResult {
    /// Cheapest feasible assignment, if any, with minimal allocations.
    pub assignment: Option<Assignment>,
    /// Its energy in joules.
    pub energy: Option<f64>,
    pub feasible: bool,
    pub enumerated: u128,
}

/// Strategies open to each device: local, covering small cells, macro.
fn device_options(topology: &Topology) -> Vec<Vec<Mode>> {
    (0..topology.num_devices())
        .map(|i| {
            std::iter::once(Mode::Local)
                .chain((1..=topology.num_sbs()).filter(|&j| topology.covers(i, j)).map(Mode::Sbs))
                .chain(std::iter::once(Mode::Mbs))
                .collect()
        })
        .collect()
}

/// Energy and minimal allocations of one mode assignment, or `None` if it
/// misses a deadline or overloads a station.
pub fn evaluate_modes(
    modes: &[Mode],
    tasks: &[TaskSpec],
    topology: &Topology,
    links: &Links,
) -> Result<Option<(f64, Assignment)>> {
    let uploading: Vec<Option<usize>> = modes
        .iter()
        .zip(tasks)
        .map(|(m, t)| m.station().filter(|_| t.input_bits > 0.0))
        .collect();
    let rates = links.rates(&uploading);
    let mut load = vec![0.0; topology.num_stations()];
    let mut decisions = Vec::with_capacity(modes.len());
    let mut energy = 0.0;
    for (i, (&mode, task)) in modes.iter().zip(tasks).enumerate() {
        let decision = match mode.station() {
            None => {
                let dev = &topology.devices[i];
                if local_delay(task, dev.local_capacity) > task.deadline * (1.0 + FEASIBILITY_TOL) {
                    return Ok(None);
                }
                Decision::local()
            }
            Some(s) => {
                let rate = rates.get(i, s);
                let Some(alloc) = min_feasible_alloc(task, rate, task.deadline) else {
                    return Ok(None);
                };
                load[s] += alloc;
                Decision { mode, alloc, rate }
            }
        };
        energy += decision_energy(&decision, i, topology, task)?;
        decisions.push(decision);
    }
    let fits = load
        .iter()
        .zip(&topology.stations)
        .all(|(&l, st)| l <= st.capacity * (1.0 + FEASIBILITY_TOL));
    Ok(fits.then_some((energy, Assignment { decisions })))
}

const ORACLE_CHUNK: u128 = 4096;

/// Minimum-energy feasible assignment by full enumeration. Energy does not
/// depend on the allocation, so each mode assignment is tried with its
/// smallest deadline-meeting allocations. Ties go to the first assignment
/// in enumeration order.
pub fn exhaustive_oracle(
    tasks: &[TaskSpec],
    topology: &Topology,
    links: &Links,
    cap: u128,
    exec: Execution,
) -> Result<OracleResult> {
    let n = topology.num_devices();
    if tasks.len() != n {
        return Err(Error::Dimension {
            what: "tasks",
            expected: n,
            got: tasks.len(),
        });
    }
    let options = device_options(topology);
    let mut total: u128 = 1;
    for o in &options {
        total = total.saturating_mul(o.len() as u128);
    }
    if total > cap {
        return Err(Error::EnumerationCap { required: total, cap });
    }
    let decode = |mut index: u128| -> Vec<Mode> {
        options
            .iter()
            .map(|o| {
                let k = o.len() as u128;
                let m = o[(index % k) as usize];
                index /= k;
                m
            })
            .collect()
    };
    let chunks = total.div_ceil(ORACLE_CHUNK) as usize;
    let best = map_range(exec, chunks, |c| -> Result<Option<(f64, u128)>> {
        let start = c as u128 * ORACLE_CHUNK;
        let end = (start + ORACLE_CHUNK).min(total);
        let mut best: Option<(f64, u128)> = None;
        for idx in start..end {
            if let Some((e, _)) = evaluate_modes(&decode(idx), tasks, topology, links)? {
                if best.is_none_or(|(b, _)| e < b) {
                    best = Some((e, idx));
                }
            }
        }
        Ok(best)
    });
    let mut winner: Option<(f64, u128)> = None;
    for b in best {
        if let Some((e, idx)) = b? {
            if winner.is_none_or(|(w, _)| e < w) {
                winner = Some((e, idx));
            }
        }
    }
    Ok(match winner {
        Some((_, idx)) => {
            let (energy, assignment) =
                evaluate_modes(&decode(idx), tasks, topology, links)?.expect("winner was feasible");
            OracleResult {
                assignment: Some(assignment),
                energy: Some(energy),
                feasible: true,
                enumerated: total,
            }
        }
        None => OracleResult {
            assignment: None,
            energy: None,
            feasible: false,
            enumerated: total,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compute::{check_feasible, system_energy};
    use crate::net::topology::tests::{device, station};
    use crate::net::ChannelParams;

    fn setup(devices: Vec<[f64; 2]>) -> (Topology, Links) {
        let topo = Topology::from_parts(
            vec![
                station(0, [0.0, 0.0], f64::INFINITY, 50e9),
                station(1, [100.0, 0.0], 50.0, 10e9),
            ],
            devices.into_iter().enumerate().map(|(i, p)| device(i, p)).collect(),
            None,
        )
        .unwrap();
        let links = Links::new(&topo, &ChannelParams::default()).unwrap();
        (topo, links)
    }

    fn task(d: f64, c: f64) -> TaskSpec {
        TaskSpec {
            input_bits: d,
            cycles: c,
            deadline: 1.0,
        }
    }

    #[test]
    fn local_energy_hand_value() {
        let (topo, _) = setup(vec![[10.0, 0.0]]);
        let tasks = [task(1e6, 0.4e9)];
        let a = local_policy(&tasks);
        assert!(check_feasible(&a, &topo, &tasks).is_feasible());
        let e = system_energy(&a, &topo, &tasks).unwrap();
        assert!((e - 1e-27 * 0.4e9 * 0.25e18).abs() < 1e-15);
        let slow = [task(1e6, 1e9)];
        assert_eq!(check_feasible(&local_policy(&slow), &topo, &slow).deadline, vec![0]);
        assert!(local_policy(&[]).decisions.is_empty());
    }

    #[test]
    fn full_offload_shares() {
        let (topo, links) = setup(vec![[10.0, 0.0], [20.0, 0.0]]);
        let a = full_offload_policy(&[task(1e6, 1e9), task(1e6, 3e9)], &topo, &links);
        assert_eq!(a.decisions[0].alloc, 12.5e9);
        assert_eq!(a.decisions[1].alloc, 37.5e9);
        assert!(a.decisions.iter().all(|d| d.mode == Mode::Mbs));
        let (topo1, links1) = setup(vec![[10.0, 0.0]]);
        assert_eq!(full_offload_policy(&[task(1e6, 1e9)], &topo1, &links1).decisions[0].alloc, 50e9);
    }

    #[test]
    fn oracle_prefers_cheap_local() {
        let (topo, links) = setup(vec![[10.0, 0.0]]);
        let r = exhaustive_oracle(&[task(1e6, 0.4e9)], &topo, &links, DEFAULT_ORACLE_CAP, Execution::Sequential)
            .unwrap();
        assert_eq!(r.assignment.unwrap().decisions[0].mode, Mode::Local);
        assert_eq!(r.enumerated, 2);
    }

    #[test]
    fn oracle_offloads_when_local_too_slow() {
        // inside the small cell, close to it
        let (topo, links) = setup(vec![[95.0, 0.0]]);
        let r = exhaustive_oracle(&[task(1e6, 2e9)], &topo, &links, DEFAULT_ORACLE_CAP, Execution::Sequential)
            .unwrap();
        let d = r.assignment.unwrap().decisions[0];
        assert_ne!(d.mode, Mode::Local);
        assert!(r.feasible);
    }

    #[test]
    fn oracle_reports_infeasible_and_cap() {
        let (topo, links) = setup(vec![[200.0, 0.0]]);
        let r = exhaustive_oracle(&[task(1e10, 1e12)], &topo, &links, 10, Execution::Sequential).unwrap();
        assert!(!r.feasible && r.energy.is_none());
        let (topo, links) = setup(vec![[95.0, 0.0]; 3]);
        let err = exhaustive_oracle(&[task(1.0, 1.0); 3], &topo, &links, 5, Execution::Sequential).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { required: 27, cap: 5 }));
    }

    #[test]
    fn oracle_modes_agree() {
        let (topo, links) = setup(vec![[95.0, 0.0], [105.0, 10.0], [-50.0, 30.0], [90.0, -20.0]]);
        let tasks = [task(8e6, 0.6e9), task(4e7, 1e9), task(1e6, 0.2e9), task(2e7, 3e9)];
        let a = exhaustive_oracle(&tasks, &topo, &links, DEFAULT_ORACLE_CAP, Execution::Sequential).unwrap();
        let b = exhaustive_oracle(&tasks, &topo, &links, DEFAULT_ORACLE_CAP, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}
