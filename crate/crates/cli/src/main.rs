use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use netloc_core::async_solver::{async_solve, ActivationModel, EdgeWeight};
use netloc_core::config::{ExperimentConfig, LossKind, SolverKind};
use netloc_core::cost::Problem;
use netloc_core::geometry::NetworkInstance;
use netloc_core::harness::{
    bounds_experiment_1d, build_instance, positioning_error, prepare_trial, run_monte_carlo, sweep_outlier_probability,
    sync_vs_async_comm_matched, Bounds1dConfig,
};
use netloc_core::io::write_rows_to_file;
use netloc_core::linalg::Points;
use netloc_core::rng::activation_rng;
use netloc_core::sync_solver::strong_solve;
use serde_json::json;

/// Robust network localization simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a network instance and write instance.json.
    Gen(Common),
    /// Solve one trial with the synchronous solver and write its trajectory.
    SolveSync(Common),
    /// Solve one trial with the asynchronous solver and write its trajectory.
    SolveAsync {
        #[command(flatten)]
        common: Common,
        /// Evaluate the expected improvement every N activations.
        #[arg(long)]
        phi_every: Option<usize>,
    },
    /// Monte Carlo trials; writes trials.csv and cdf.csv.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
    },
    /// Mean error against outlier probability for Huber and L2 radii.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6,0.8,1")]
        probabilities: Vec<f64>,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
    },
    /// Single-node 1D optimality-gap experiment; writes bounds.csv.
    Bounds1d(Common),
    /// Synchronous vs asynchronous solver at equal broadcast counts.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "10,20,40")]
        sigmas: Vec<f64>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config file (for bounds1d, a 1D experiment config).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    radius_m: Option<f64>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum)]
    edge_weight: Option<EdgeWeightArg>,
    /// Asynchronous activation budget.
    #[arg(long)]
    activations: Option<usize>,
    /// Synchronous round budget.
    #[arg(long)]
    iters: Option<usize>,
    /// Synchronous stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Network instance JSON to use instead of generating one.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Huber,
    L2,
}

#[derive(Clone, Copy, ValueEnum)]
enum EdgeWeightArg {
    Split,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Sync,
    Async,
}

impl Common {
    fn experiment_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.experiment.master_seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.experiment.trials = trials;
        }
        if let Some(r) = self.radius_m {
            cfg.radii.radius_m = r;
        }
        if let Some(loss) = self.loss {
            cfg.radii.loss = match loss {
                LossArg::Huber => LossKind::Huber,
                LossArg::L2 => LossKind::L2,
            };
        }
        if let Some(w) = self.edge_weight {
            cfg.solver.asynchronous.edge_weight = match w {
                EdgeWeightArg::Split => EdgeWeight::Split,
                EdgeWeightArg::Exact => EdgeWeight::Exact,
            };
        }
        if let Some(a) = self.activations {
            cfg.solver.asynchronous.num_activations = a;
        }
        if let Some(i) = self.iters {
            cfg.solver.sync.max_iters = i;
        }
        if let Some(t) = self.tol {
            cfg.solver.sync.stop_tol = t;
        }
        if let Some(path) = &self.instance {
            cfg.network.instance = Some(path.clone());
        }
        cfg.experiment.out_dir = self.out.clone();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn apply_solver(cfg: &mut ExperimentConfig, solver: Option<SolverArg>) {
    match solver {
        Some(SolverArg::Sync) => cfg.solver.kind = SolverKind::Sync,
        Some(SolverArg::Async) => cfg.solver.kind = SolverKind::Async,
        None => {}
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_instance(dir: &Path, instance: &NetworkInstance) -> Result<()> {
    fs::write(dir.join("instance.json"), instance.to_json()? + "\n")?;
    Ok(())
}

fn estimate_json(
    x: &Points,
    instance: &NetworkInstance,
    broadcast_count: usize,
    iterations: usize,
) -> Result<serde_json::Value> {
    Ok(json!({
        "positions": x.to_rows(),
        "positioning_error": positioning_error(x, &instance.true_positions)?,
        "iterations": iterations,
        "broadcast_count": broadcast_count,
    }))
}

fn solve_one(cfg: &ExperimentConfig, phi_every: Option<usize>) -> Result<()> {
    let dir = &cfg.experiment.out_dir;
    prepare_out(dir)?;
    let instance = build_instance(cfg)?;
    write_instance(dir, &instance)?;
    let (measurements, init) = prepare_trial(cfg, &instance, 0)?;
    measurements.write_csv(&instance.topology, fs::File::create(dir.join("measurements.csv"))?)?;
    let radii = cfg.radii.radii(&instance.topology, cfg.scene_size());
    let problem = Problem::new(&instance.topology, &instance.anchor_positions, &measurements, &radii)?;
    let estimate = match cfg.solver.kind {
        SolverKind::Sync => {
            let out = strong_solve(&problem, &init, &cfg.solver.sync)?;
            write_rows_to_file(&out.trajectory, &dir.join("trajectory.csv"))?;
            estimate_json(&out.x, &instance, out.broadcast_count, out.iterations)?
        }
        SolverKind::Async => {
            let mut acfg = cfg.solver.asynchronous;
            acfg.phi_every = phi_every.or(acfg.phi_every);
            let model = ActivationModel::uniform(instance.topology.n())?;
            let mut rng = activation_rng(cfg.experiment.master_seed, 0);
            let out = async_solve(&problem, &init, &model, &acfg, &mut rng)?;
            write_rows_to_file(&out.trajectory, &dir.join("trajectory.csv"))?;
            estimate_json(&out.x, &instance, out.broadcast_count, out.activations)?
        }
    };
    if let Some(err) = estimate["positioning_error"].as_f64() {
        println!("positioning error {err:.4} m");
    }
    write_json(&dir.join("estimate.json"), &estimate)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(common) => {
            let cfg = common.experiment_config()?;
            prepare_out(&cfg.experiment.out_dir)?;
            let instance = build_instance(&cfg)?;
            write_instance(&cfg.experiment.out_dir, &instance)?;
            println!(
                "{} sensors, {} anchors, {} edges, {} anchor links, mean degree {:.2}",
                instance.topology.n(),
                instance.topology.m(),
                instance.topology.edges().len(),
                instance.topology.anchor_links().len(),
                instance.topology.average_degree()
            );
        }
        Command::SolveSync(common) => {
            let mut cfg = common.experiment_config()?;
            cfg.solver.kind = SolverKind::Sync;
            solve_one(&cfg, None)?;
        }
        Command::SolveAsync { common, phi_every } => {
            let mut cfg = common.experiment_config()?;
            cfg.solver.kind = SolverKind::Async;
            solve_one(&cfg, phi_every)?;
        }
        Command::Mc { common, solver } => {
            let mut cfg = common.experiment_config()?;
            apply_solver(&mut cfg, solver);
            let dir = cfg.experiment.out_dir.clone();
            prepare_out(&dir)?;
            let instance = build_instance(&cfg)?;
            write_instance(&dir, &instance)?;
            let report = run_monte_carlo(&cfg, &instance)?;
            write_rows_to_file(&report.trials, &dir.join("trials.csv"))?;
            write_rows_to_file(&report.summary.cdf, &dir.join("cdf.csv"))?;
            println!(
                "{} trials, {} failed, mean positioning error {:.4} m (95% CI +/- {:.4})",
                report.summary.trials, report.summary.failures, report.summary.mean_error, report.summary.ci95
            );
        }
        Command::Sweep {
            common,
            probabilities,
            solver,
        } => {
            let mut cfg = common.experiment_config()?;
            apply_solver(&mut cfg, solver);
            let dir = cfg.experiment.out_dir.clone();
            prepare_out(&dir)?;
            let instance = build_instance(&cfg)?;
            let points = sweep_outlier_probability(&cfg, &instance, &probabilities)?;
            write_rows_to_file(&points, &dir.join("sweep.csv"))?;
            for p in &points {
                println!("p={} {}: {:.4} m", p.probability, p.loss, p.mean_error);
            }
        }
        Command::Bounds1d(common) => {
            let mut cfg = match &common.config {
                Some(path) => Bounds1dConfig::from_json(&fs::read_to_string(path)?)
                    .with_context(|| format!("parsing {}", path.display()))?,
                None => Bounds1dConfig::default(),
            };
            if let Some(seed) = common.seed {
                cfg.master_seed = seed;
            }
            if let Some(trials) = common.trials {
                cfg.trials = trials;
            }
            if let Some(r) = common.radius_m {
                cfg.huber_radius = r;
            }
            prepare_out(&common.out)?;
            let report = bounds_experiment_1d(&cfg)?;
            write_rows_to_file(&report.summary, &common.out.join("bounds.csv"))?;
            write_rows_to_file(&report.rows, &common.out.join("bounds_trials.csv"))?;
            for s in &report.summary {
                println!(
                    "{}: true gap {:.4}, posterior bound {:.4}, a-priori bound {:.4}",
                    s.loss.label(),
                    s.true_gap,
                    s.posterior_bound,
                    s.apriori_bound
                );
            }
        }
        Command::Compare { common, sigmas } => {
            let cfg = common.experiment_config()?;
            if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
                bail!("noise deviations must be non-negative");
            }
            let dir = cfg.experiment.out_dir.clone();
            prepare_out(&dir)?;
            let instance = build_instance(&cfg)?;
            let iters = common.iters.unwrap_or(200);
            let report = sync_vs_async_comm_matched(&cfg, &instance, &sigmas, iters)?;
            write_rows_to_file(&report.points, &dir.join("compare.csv"))?;
            for p in &report.points {
                println!(
                    "sigma={} {}: {:.4} m with {} broadcasts",
                    p.sigma, p.solver, p.mean_error, p.broadcast_count
                );
            }
        }
    }
    Ok(())
}
