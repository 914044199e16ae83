mod common;

use proptest::prelude::*;

use edgeoff::baselines::{exhaustive_oracle, full_offload_policy, local_policy};
use edgeoff::compute::{check_feasible, system_energy};
use edgeoff::exec::Execution;
use edgeoff::harness::{build_env, run, write_run, ExperimentConfig, METRICS_HEADER};
use edgeoff::net::{build_topology, Links};
use edgeoff::seeding;

fn tiny(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk(seed);
    cfg.topology.num_devices = 3;
    cfg.topology.num_sbs = 2;
    cfg.train.episodes = 12;
    cfg.train.hidden = vec![16];
    cfg.train.batch_size = 8;
    cfg.experiment.eval_episodes = 3;
    cfg
}

#[test]
fn runs_are_deterministic_and_artifacts_consistent() {
    let cfg = tiny(21);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.summary, b.summary);

    let dir = tempfile::tempdir().unwrap();
    write_run(dir.path(), &cfg, &a).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(METRICS_HEADER));
    assert_eq!(lines.count(), cfg.train.episodes);
    for r in &a.rows {
        assert!((0.0..=1.0).contains(&r.norm_ret));
    }
    let saved = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(saved, cfg);
    let (agent, _) = edgeoff::ddpg::load_checkpoint(&dir.path().join("checkpoint.bin")).unwrap();
    assert_eq!(agent, a.agent);
}

#[test]
fn logged_energy_matches_recomputation() {
    let cfg = tiny(22);
    let out = run(&cfg).unwrap();
    let mut env = build_env(&cfg).unwrap();
    let tasks = edgeoff::harness::eval_tasks(&cfg, 0).unwrap();
    let stats = edgeoff::ddpg::evaluate(&mut env, &out.agent, &tasks, cfg.train.discount).unwrap();
    let mut total = 0.0;
    for log in &stats.logs {
        total += system_energy(&log.assignment, env.topology(), &log.work).unwrap();
    }
    assert!((total - stats.energy).abs() <= 1e-12 * stats.energy.max(1.0));
}

#[test]
fn config_round_trips_through_toml() {
    for cfg in [ExperimentConfig::desk(5), ExperimentConfig::full(6)] {
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn oracle_agrees_with_independent_enumeration(seed in any::<u64>(), n in 1usize..=4, m in 0usize..=2) {
        let mut cfg = ExperimentConfig::desk(seed);
        cfg.topology.num_devices = n;
        cfg.topology.num_sbs = m;
        cfg.topology.sbs_radius_m = 80.0;
        let topo = build_topology(&cfg.topology, &cfg.channel, seed).unwrap();
        let links = Links::new(&topo, &cfg.channel).unwrap();
        let mut rng = seeding::stream(seed, 1);
        let tasks = common::varied_tasks(&mut rng, n);
        let r = exhaustive_oracle(&tasks, &topo, &links, 1 << 20, Execution::Sequential).unwrap();
        let reference = common::reference_optimum(&tasks, &topo, &links);
        match (r.energy, reference) {
            (None, None) => prop_assert!(!r.feasible),
            (Some(a), Some(b)) => {
                prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0), "{} vs {}", a, b);
                let assignment = r.assignment.unwrap();
                prop_assert!(check_feasible(&assignment, &topo, &tasks).is_feasible());
            }
            other => prop_assert!(false, "oracle and reference disagree: {:?}", other),
        }
    }

    #[test]
    fn baselines_are_structurally_feasible(seed in any::<u64>(), n in 1usize..=12, m in 0usize..=4) {
        let mut cfg = ExperimentConfig::desk(seed);
        cfg.topology.num_devices = n;
        cfg.topology.num_sbs = m;
        let topo = build_topology(&cfg.topology, &cfg.channel, seed).unwrap();
        let links = Links::new(&topo, &cfg.channel).unwrap();
        let tasks = edgeoff::net::sample_tasks(n, &cfg.tasks, seed).unwrap();
        for a in [local_policy(&tasks), full_offload_policy(&tasks, &topo, &links)] {
            prop_assert!(check_feasible(&a, &topo, &tasks).structural_ok());
        }
    }
}

#[test]
fn shipped_config_is_the_desk_profile() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let mut expected = ExperimentConfig::desk(1);
    expected.experiment.output_dir = "runs/desk".into();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), expected);
}
