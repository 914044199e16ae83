//! Experiment driver: configuration, runs, sweeps, comparisons and
//! metrics output.

mod config;
mod metrics;
mod run;

pub use config::{
    BaselineToggles, CompareGrid, ExperimentConfig, ExperimentSection, SweepGrid, SwitchConfig,
};
pub use metrics::{
    convergence, normalize_rewards, plateau, tenth, write_metrics_csv, Convergence, MetricsRow,
    CONVERGENCE_THRESHOLD, METRICS_HEADER,
};
pub use run::{
    bandwidth_switch_experiment, build_env, compare_baselines, eval_tasks, evaluate_policies, run,
    run_with, sweep, train_tasks, write_run, CompareRow, PolicyScore, RunOutput, RunSummary,
    SweepAxis, SweepMember, SwitchReport,
};
