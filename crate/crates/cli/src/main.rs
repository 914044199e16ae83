use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use edgeoff::baselines::{exhaustive_oracle, full_offload_policy, local_policy};
use edgeoff::compute::{check_feasible, system_energy};
use edgeoff::harness::{
    bandwidth_switch_experiment, build_env, compare_baselines, eval_tasks, run, sweep, write_metrics_csv,
    write_run, ExperimentConfig, SweepAxis,
};

#[derive(Parser)]
#[command(name = "edgeoff", version, about = "Train and evaluate offloading policies for end-edge-cloud networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment config. Without it a built-in profile is used.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Built-in profile when no config file is given: desk or full.
    #[arg(long, default_value = "desk")]
    profile: String,
    #[arg(short, long)]
    seed: Option<u64>,
    /// Output directory (overrides experiment.output_dir).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Training episodes (overrides train.episodes).
    #[arg(short, long)]
    episodes: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::profile(&self.profile, 0)?,
        };
        if let Some(seed) = self.seed {
            cfg.experiment.seed = seed;
        }
        if let Some(dir) = &self.output {
            cfg.experiment.output_dir = dir.clone();
        }
        if let Some(e) = self.episodes {
            cfg.train.episodes = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and compare it with the baselines.
    Run(Common),
    /// One run per value along a parameter axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// learning-rate, discount or devices.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; defaults to the configured grid.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Baseline comparison over the configured device counts and task kinds.
    Compare(Common),
    /// Two-phase run with a bandwidth increase part-way through.
    BandwidthSwitch(Common),
    /// Exhaustive optimum on the evaluation instances versus the baselines.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Number of evaluation instances to solve.
        #[arg(long, default_value_t = 1)]
        instances: usize,
    },
}

fn write_json(path: &std::path::Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let out = run(&cfg)?;
            write_run(&cfg.experiment.output_dir, &cfg, &out)?;
            println!("{}", serde_json::to_string_pretty(&out.summary)?);
        }
        Command::Sweep { common, axis, values } => {
            let cfg = common.load()?;
            let axis = SweepAxis::parse(&axis)?;
            let values = values.unwrap_or_else(|| axis.grid(&cfg));
            let members = sweep(&cfg, axis, &values)?;
            let dir = cfg.experiment.output_dir.join(axis.name());
            std::fs::create_dir_all(&dir)?;
            let manifest: Vec<_> = members
                .iter()
                .map(|m| {
                    serde_json::json!({
                        "value": m.value,
                        "convergence": m.summary.convergence,
                        "evaluation": m.summary.evaluation,
                    })
                })
                .collect();
            for m in &members {
                let trace: Vec<String> = m.trace.iter().map(f64::to_string).collect();
                std::fs::write(dir.join(format!("returns_{}.txt", m.value)), trace.join("\n") + "\n")?;
            }
            write_json(&dir.join("sweep.json"), &manifest)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        Command::Compare(common) => {
            let cfg = common.load()?;
            let rows = compare_baselines(&cfg)?;
            std::fs::create_dir_all(&cfg.experiment.output_dir)?;
            write_json(&cfg.experiment.output_dir.join("compare.json"), &rows)?;
            println!("{:>7}  {:<7}  {:<13}  {:>14}  {:>10}", "devices", "tasks", "policy", "energy_J/dev", "viol_rate");
            for r in &rows {
                let energy = r.mean_energy_j.map_or("-".to_string(), |e| format!("{e:.6}"));
                println!(
                    "{:>7}  {:<7}  {:<13}  {:>14}  {:>10.3}",
                    r.devices, r.task_kind, r.policy, energy, r.violation_rate
                );
            }
        }
        Command::BandwidthSwitch(common) => {
            let cfg = common.load()?;
            let report = bandwidth_switch_experiment(&cfg)?;
            let dir = &cfg.experiment.output_dir;
            std::fs::create_dir_all(dir)?;
            write_metrics_csv(&dir.join("metrics.csv"), &report.rows)?;
            write_json(&dir.join("summary.json"), &report)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Oracle { common, instances } => {
            let cfg = common.load()?;
            let env = build_env(&cfg)?;
            let topo = env.topology();
            let mut results = Vec::new();
            for k in 0..instances {
                let tasks = eval_tasks(&cfg, k)?;
                let r = exhaustive_oracle(
                    &tasks,
                    topo,
                    env.links(),
                    cfg.experiment.oracle_cap as u128,
                    cfg.train.execution,
                )?;
                let local = local_policy(&tasks);
                let full = full_offload_policy(&tasks, topo, env.links());
                let baseline = |a: &edgeoff::compute::Assignment| -> Result<serde_json::Value> {
                    Ok(serde_json::json!({
                        "energy_J": system_energy(a, topo, &tasks)?,
                        "feasible": check_feasible(a, topo, &tasks).is_feasible(),
                    }))
                };
                results.push(serde_json::json!({
                    "instance": k,
                    "oracle": {
                        "energy_J": r.energy,
                        "feasible": r.feasible,
                        "enumerated": r.enumerated.to_string(),
                        "modes": r.assignment.map(|a| a.decisions.iter().map(|d| format!("{:?}", d.mode)).collect::<Vec<_>>()),
                    },
                    "local": baseline(&local)?,
                    "full_offload": baseline(&full)?,
                }));
            }
            std::fs::create_dir_all(&cfg.experiment.output_dir)?;
            write_json(&cfg.experiment.output_dir.join("oracle.json"), &results)?;
            println!("{}", serde_json::to_string_pretty(&results)?);
        }
    }
    Ok(())
}
