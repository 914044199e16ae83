use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng as _;

use edgeoff::baselines::exhaustive_oracle;
use edgeoff::ddpg::{Agent, Transition};
use edgeoff::exec::Execution;
use edgeoff::harness::{build_env, eval_tasks, ExperimentConfig};
use edgeoff::seeding;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn oracle(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::desk(3);
    cfg.topology.num_devices = 7;
    cfg.topology.num_sbs = 2;
    let env = build_env(&cfg).unwrap();
    let tasks = eval_tasks(&cfg, 0).unwrap();
    let mut group = c.benchmark_group("exhaustive_oracle_n7_m2");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exhaustive_oracle(&tasks, env.topology(), env.links(), 1e7 as u128, exec).unwrap())
        });
    }
    group.finish();
}

fn critic_gradient(c: &mut Criterion) {
    let (state_len, action_len) = (96, 130);
    let mut rng = seeding::stream(5, seeding::streams::INIT);
    let agent = Agent::new(state_len, action_len, &[128, 128], &mut rng);
    let mut draw = |n: usize| (0..n).map(|_| rng.random::<f64>()).collect::<Vec<_>>();
    let transitions: Vec<Transition> = (0..256)
        .map(|_| Transition {
            state: draw(state_len),
            action: draw(action_len),
            reward: -draw(1)[0],
            next_state: draw(state_len),
            done: false,
        })
        .collect();
    let batch: Vec<&Transition> = transitions.iter().collect();
    let targets = agent.target_values(&batch, 0.6).unwrap();
    let mut group = c.benchmark_group("critic_gradient_batch256");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| agent.critic_gradient(&batch, &targets, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, oracle, critic_gradient);
criterion_main!(benches);
