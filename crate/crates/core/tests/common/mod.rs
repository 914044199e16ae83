#![allow(dead_code)]

use rand::Rng as _;

use edgeoff::compute::{check_feasible, min_feasible_alloc, system_energy, Assignment, Decision, Mode};
use edgeoff::ddpg::{Agent, Transition};
use edgeoff::exec::Execution;
use edgeoff::net::{Links, TaskSpec, Topology};
use edgeoff::refine::{Edge, RoundingGraph};
use edgeoff::seeding::Rng;

/// Random row-stochastic matrix with some exact zeros, flattened row-major.
pub fn stochastic_rows(rng: &mut Rng, rows: usize, cols: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let mut row: Vec<f64> = (0..cols)
            .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
            .collect();
        if row.iter().all(|&v| v == 0.0) {
            let k = rng.random_range(0..cols);
            row[k] = 1.0;
        }
        let s: f64 = row.iter().sum();
        out.extend(row.iter().map(|v| v / s));
    }
    out
}

/// Maximum total weight over complete matchings of `graph`, by trying every
/// injective device-to-node map. Parallel edges between the same pair add.
pub fn brute_force_matching(graph: &RoundingGraph) -> Option<f64> {
    let (n, k) = (graph.num_devices, graph.nodes.len());
    let mut w = vec![None::<f64>; n * k];
    for &Edge { device, node, weight } in &graph.edges {
        let cell = &mut w[device * k + node];
        *cell = Some(cell.unwrap_or(0.0) + weight);
    }
    fn go(i: usize, n: usize, k: usize, w: &[Option<f64>], used: &mut Vec<bool>) -> Option<f64> {
        if i == n {
            return Some(0.0);
        }
        let mut best: Option<f64> = None;
        for v in 0..k {
            if used[v] {
                continue;
            }
            if let Some(x) = w[i * k + v] {
                used[v] = true;
                if let Some(rest) = go(i + 1, n, k, w, used) {
                    best = Some(best.map_or(x + rest, |b: f64| b.max(x + rest)));
                }
                used[v] = false;
            }
        }
        best
    }
    go(0, n, k, &w, &mut vec![false; k])
}

/// Relative error with the denominator floored at `GRAD_FLOOR`, so that
/// gradients near zero are compared on the scale of the round-off a
/// central difference at `h = 1e-6` carries (about 1e-10 here).
pub const GRAD_FLOOR: f64 = 1e-4;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(GRAD_FLOOR)
}

fn random_transition(rng: &mut Rng, sl: usize, al: usize) -> Transition {
    let mut v = |n: usize| (0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
    Transition {
        state: v(sl),
        action: v(al),
        reward: -v(1)[0],
        next_state: v(sl),
        done: false,
    }
}

/// Largest relative disagreement between the analytic gradients of one
/// random small agent (critic loss, actor objective, critic action
/// gradient) and central differences with step `h`.
pub fn gradient_check(seed: u64, h: f64) -> f64 {
    let mut rng = edgeoff::seeding::stream(seed, 99);
    let sl = rng.random_range(1..=5);
    let al = rng.random_range(1..=4);
    let hidden: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(2..=16)).collect();
    let agent = Agent::new(sl, al, &hidden, &mut rng);
    let data: Vec<Transition> = (0..4).map(|_| random_transition(&mut rng, sl, al)).collect();
    let batch: Vec<&Transition> = data.iter().collect();
    let targets: Vec<f64> = (0..batch.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut worst: f64 = 0.0;

    let critic_loss = |a: &Agent| -> f64 {
        batch
            .iter()
            .zip(&targets)
            .map(|(t, y)| (y - a.q_value(&t.state, &t.action).unwrap()).powi(2))
            .sum::<f64>()
            / batch.len() as f64
    };
    let (g, _) = agent.critic_gradient(&batch, &targets, Execution::Sequential).unwrap();
    let analytic = g.flatten();
    let base = agent.critic.params();
    for (k, &a) in analytic.iter().enumerate() {
        let mut probe = agent.clone();
        let mut p = base.clone();
        p[k] = base[k] + h;
        probe.critic.set_params(&p).unwrap();
        let up = critic_loss(&probe);
        p[k] = base[k] - h;
        probe.critic.set_params(&p).unwrap();
        let down = critic_loss(&probe);
        worst = worst.max(rel_err(a, (up - down) / (2.0 * h)));
    }

    let actor_obj = |a: &Agent| -> f64 {
        -batch
            .iter()
            .map(|t| a.q_value(&t.state, &a.act(&t.state).unwrap()).unwrap())
            .sum::<f64>()
            / batch.len() as f64
    };
    let analytic = agent.actor_gradient(&batch, Execution::Sequential).unwrap().flatten();
    let base = agent.actor.params();
    for (k, &a) in analytic.iter().enumerate() {
        let mut probe = agent.clone();
        let mut p = base.clone();
        p[k] = base[k] + h;
        probe.actor.set_params(&p).unwrap();
        let up = actor_obj(&probe);
        p[k] = base[k] - h;
        probe.actor.set_params(&p).unwrap();
        let down = actor_obj(&probe);
        worst = worst.max(rel_err(a, (up - down) / (2.0 * h)));
    }

    // dQ/da at one input through the critic's own backward pass.
    let t = batch[0];
    let input: Vec<f64> = t.state.iter().chain(&t.action).copied().collect();
    let x = ndarray::Array2::from_shape_vec((1, input.len()), input.clone()).unwrap();
    let trace = agent.critic.forward_trace(x.view()).unwrap();
    let ones = ndarray::Array2::from_elem((1, 1), 1.0);
    let (_, dx) = agent.critic.backward(&trace, ones.view(), false);
    for j in 0..al {
        let mut a = t.action.clone();
        a[j] += h;
        let up = agent.q_value(&t.state, &a).unwrap();
        a[j] -= 2.0 * h;
        let down = agent.q_value(&t.state, &a).unwrap();
        worst = worst.max(rel_err(dx[[0, sl + j]], (up - down) / (2.0 * h)));
    }
    worst
}

/// Best feasible energy by plain recursion over every mode vector, checked
/// with `check_feasible` rather than the oracle's own pruning.
pub fn reference_optimum(tasks: &[TaskSpec], topology: &Topology, links: &Links) -> Option<f64> {
    let n = topology.num_devices();
    let mut options: Vec<Vec<Mode>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut o = vec![Mode::Local, Mode::Mbs];
        o.extend((1..=topology.num_sbs()).filter(|&j| topology.covers(i, j)).map(Mode::Sbs));
        options.push(o);
    }
    let mut best: Option<f64> = None;
    let mut modes = vec![Mode::Local; n];
    fn go(
        i: usize,
        modes: &mut Vec<Mode>,
        options: &[Vec<Mode>],
        tasks: &[TaskSpec],
        topology: &Topology,
        links: &Links,
        best: &mut Option<f64>,
    ) {
        if i == modes.len() {
            let uploading: Vec<Option<usize>> = modes
                .iter()
                .zip(tasks)
                .map(|(m, t)| m.station().filter(|_| t.input_bits > 0.0))
                .collect();
            let rates = links.rates(&uploading);
            let mut decisions = Vec::new();
            for (k, &mode) in modes.iter().enumerate() {
                match mode.station() {
                    None => decisions.push(Decision::local()),
                    Some(s) => {
                        let rate = rates.get(k, s);
                        let Some(alloc) = min_feasible_alloc(&tasks[k], rate, tasks[k].deadline) else {
                            return;
                        };
                        decisions.push(Decision { mode, alloc, rate });
                    }
                }
            }
            let a = Assignment { decisions };
            if check_feasible(&a, topology, tasks).is_feasible() {
                let e = system_energy(&a, topology, tasks).unwrap();
                if best.is_none_or(|b| e < b) {
                    *best = Some(e);
                }
            }
            return;
        }
        for &m in &options[i] {
            modes[i] = m;
            go(i + 1, modes, options, tasks, topology, links, best);
        }
    }
    go(0, &mut modes, &options, tasks, topology, links, &mut best);
    best
}

/// Tasks spread widely enough that some instances admit feasible plans.
pub fn varied_tasks(rng: &mut Rng, n: usize) -> Vec<TaskSpec> {
    (0..n)
        .map(|_| {
            TaskSpec::new(
                rng.random_range(0.05..4.0) * 8e6,
                rng.random_range(0.05..1.5) * 1e9,
                rng.random_range(0.5..4.0),
            )
            .unwrap()
        })
        .collect()
}
