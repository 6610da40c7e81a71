//! Experiment driver: Monte Carlo trials, error statistics, sweeps, the 1D
//! gap-bound experiment and the communication-matched solver comparison.

use std::fs;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::async_solver::{async_solve, ActivationModel};
use crate::config::{ExperimentConfig, InitPolicy, LossKind, SolverKind};
use crate::cost::{
    apriori_gap_bound_1d, convex_minimizer_1d, nonconvex_oracle_1d, posterior_gap_bound_1d, Loss, Problem,
};
use crate::error::{Error, Result};
use crate::geometry::{generate_geometric_network, NetworkInstance};
use crate::linalg::Points;
use crate::noise::{sample_measurements, Measurements, NoiseModel};
use crate::rng::{activation_rng, stream, trial_rng};
use crate::sync_solver::strong_solve;

/// `|x_hat - x_true| / n` over the stacked coordinates.
pub fn positioning_error(x_hat: &Points, x_true: &Points) -> Result<f64> {
    if x_hat.len() != x_true.len() || x_hat.dim() != x_true.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} positions in R^{}", x_true.len(), x_true.dim()),
            found: format!("{} in R^{}", x_hat.len(), x_hat.dim()),
        });
    }
    if x_true.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = x_hat
        .as_flat()
        .iter()
        .zip(x_true.as_flat())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq.sqrt() / x_true.len() as f64)
}

/// Loads the configured instance file or generates one from the master seed.
pub fn build_instance(config: &ExperimentConfig) -> Result<NetworkInstance> {
    let instance = match &config.network.instance {
        Some(path) => NetworkInstance::from_json(&fs::read_to_string(path)?)?,
        None => generate_geometric_network(
            &config.network.geometric_spec(),
            config.network.retry_limit,
            &mut crate::rng::instance_rng(config.experiment.master_seed),
        )?,
    };
    config.noise.faults.validate(instance.topology.n())?;
    Ok(instance)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialStatus {
    Ok,
    Failed,
}

/// One Monte Carlo trial. `final_cost` is the lifted cost for the
/// synchronous solver and the duplicated-variable cost for the asynchronous
/// one; `convex_cost` is the convex underestimator at the estimate for both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub status: TrialStatus,
    pub positioning_error: Option<f64>,
    pub final_cost: Option<f64>,
    pub convex_cost: Option<f64>,
    /// Rounds for the synchronous solver, activations for the asynchronous one.
    pub iterations: usize,
    pub broadcast_count: usize,
    pub message: Option<String>,
}

impl TrialResult {
    pub(crate) fn check(&self) -> Result<()> {
        let complete = self.positioning_error.is_some() && self.final_cost.is_some() && self.convex_cost.is_some();
        match self.status {
            TrialStatus::Ok if !complete => Err(Error::Parse(format!(
                "trial {} is ok but has missing values",
                self.trial
            ))),
            TrialStatus::Failed if self.positioning_error.is_some() => Err(Error::Parse(format!(
                "failed trial {} reports an error value",
                self.trial
            ))),
            _ if self.positioning_error.is_some_and(|e| !(e >= 0.0)) => Err(Error::Parse(format!(
                "trial {} has a negative positioning error",
                self.trial
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub error: f64,
    pub fraction: f64,
}

/// Empirical CDF evaluated at every distinct observed value.
pub fn empirical_cdf(values: &[f64]) -> Vec<CdfPoint> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (k, v) in sorted.iter().enumerate() {
        let fraction = (k + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.error == *v => last.fraction = fraction,
            _ => out.push(CdfPoint { error: *v, fraction }),
        }
    }
    out
}

/// Mean and 95% normal-approximation half-width.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
    (mean, 1.96 * (var / k).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub ci95: f64,
    pub cdf: Vec<CdfPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub trials: Vec<TrialResult>,
    pub summary: MonteCarloSummary,
}

fn initial_positions<R: Rng + ?Sized>(config: &ExperimentConfig, instance: &NetworkInstance, rng: &mut R) -> Points {
    match config.experiment.init {
        InitPolicy::Truth => instance.true_positions.clone(),
        InitPolicy::Uniform => {
            let side = config.network.side_length;
            let n = instance.true_positions.len() * instance.true_positions.dim();
            let data = (0..n).map(|_| rng.random::<f64>() * side).collect();
            Points::from_flat(instance.true_positions.dim(), data).expect("dimension is positive")
        }
    }
}

/// Measurements and initialization of trial `trial`, drawn from its stream.
pub fn prepare_trial(
    config: &ExperimentConfig,
    instance: &NetworkInstance,
    trial: usize,
) -> Result<(Measurements, Points)> {
    let mut rng = trial_rng(config.experiment.master_seed, trial);
    let measurements = sample_measurements(instance, &config.noise.regular, &config.noise.faults, &mut rng)?;
    let init = initial_positions(config, instance, &mut rng);
    Ok((measurements, init))
}

/// Runs trial `trial` with the configured solver.
pub fn run_trial(config: &ExperimentConfig, instance: &NetworkInstance, trial: usize) -> TrialResult {
    let seed = config.experiment.master_seed;
    let attempt = || -> Result<TrialResult> {
        let (measurements, init) = prepare_trial(config, instance, trial)?;
        let radii = config.radii.radii(&instance.topology, config.scene_size());
        let problem = Problem::new(&instance.topology, &instance.anchor_positions, &measurements, &radii)?;
        let (x, final_cost, iterations, broadcast_count) = match config.solver.kind {
            SolverKind::Sync => {
                let out = strong_solve(&problem, &init, &config.solver.sync)?;
                let cost = out.trajectory.last().map_or(f64::NAN, |r| r.cost);
                (out.x, cost, out.iterations, out.broadcast_count)
            }
            SolverKind::Async => {
                let model = ActivationModel::uniform(instance.topology.n())?;
                let mut act = activation_rng(seed, trial);
                let out = async_solve(&problem, &init, &model, &config.solver.asynchronous, &mut act)?;
                let cost = out.trajectory.last().map_or(f64::NAN, |r| r.cost);
                (out.x, cost, out.activations, out.broadcast_count)
            }
        };
        Ok(TrialResult {
            trial,
            status: TrialStatus::Ok,
            positioning_error: Some(positioning_error(&x, &instance.true_positions)?),
            final_cost: Some(final_cost),
            convex_cost: Some(problem.convex_cost_fr(&x)?),
            iterations,
            broadcast_count,
            message: None,
        })
    };
    attempt().unwrap_or_else(|e| {
        let iterations = match e {
            Error::Divergence { iteration } => iteration,
            _ => 0,
        };
        let broadcast_count = match config.solver.kind {
            SolverKind::Sync => iterations * instance.topology.n(),
            SolverKind::Async => iterations,
        };
        TrialResult {
            trial,
            status: TrialStatus::Failed,
            positioning_error: None,
            final_cost: None,
            convex_cost: None,
            iterations,
            broadcast_count,
            message: Some(e.to_string()),
        }
    })
}

pub fn summarize(trials: &[TrialResult]) -> MonteCarloSummary {
    let errors: Vec<f64> = trials.iter().filter_map(|t| t.positioning_error).collect();
    let (mean_error, ci95) = mean_ci95(&errors);
    MonteCarloSummary {
        trials: trials.len(),
        failures: trials.iter().filter(|t| t.status == TrialStatus::Failed).count(),
        mean_error,
        ci95,
        cdf: empirical_cdf(&errors),
    }
}

/// Runs `config.experiment.trials` independent trials in parallel. Results
/// are ordered by trial index and do not depend on the thread count.
pub fn run_monte_carlo(config: &ExperimentConfig, instance: &NetworkInstance) -> Result<MonteCarloReport> {
    config.validate()?;
    config.noise.faults.validate(instance.topology.n())?;
    let trials: Vec<TrialResult> = (0..config.experiment.trials)
        .into_par_iter()
        .map(|t| run_trial(config, instance, t))
        .collect();
    let summary = summarize(&trials);
    Ok(MonteCarloReport { trials, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub probability: f64,
    pub loss: String,
    pub mean_error: f64,
    pub ci95: f64,
    pub failures: usize,
}

/// Mean error of the configured solver with Huber and quadratic radii for
/// each outlier probability.
pub fn sweep_outlier_probability(
    config: &ExperimentConfig,
    instance: &NetworkInstance,
    probabilities: &[f64],
) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for &p in probabilities {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("outlier probability {p} outside [0, 1]")));
        }
        for loss in [LossKind::Huber, LossKind::L2] {
            let mut cfg = config.clone();
            cfg.noise.faults.outlier_probability = p;
            cfg.radii.loss = loss;
            let report = run_monte_carlo(&cfg, instance)?;
            out.push(SweepPoint {
                probability: p,
                loss: loss.label().to_string(),
                mean_error: report.summary.mean_error,
                ci95: report.summary.ci95,
                failures: report.summary.failures,
            });
        }
    }
    Ok(out)
}

/// True when every step of a `(mean, ci95)` sequence either does not
/// decrease or has overlapping confidence intervals.
pub fn non_decreasing_within_ci(points: &[(f64, f64)]) -> bool {
    points
        .windows(2)
        .all(|w| w[1].0 >= w[0].0 || w[1].0 + w[1].1 >= w[0].0 - w[0].1)
}

/// Setup of the single-node 1D gap experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bounds1dConfig {
    pub anchors: Vec<f64>,
    pub node: f64,
    pub huber_radius: f64,
    pub sigma_regular: f64,
    pub sigma_outlier: f64,
    /// Index of the anchor whose measurement receives the outlier noise.
    pub outlier_anchor: Option<usize>,
    pub trials: usize,
    pub master_seed: u64,
}

impl Default for Bounds1dConfig {
    fn default() -> Self {
        Self {
            anchors: vec![0.0, 3.0],
            node: 0.4,
            huber_radius: 0.08,
            sigma_regular: 0.04,
            sigma_outlier: 4.0,
            outlier_anchor: Some(0),
            trials: 500,
            master_seed: 0,
        }
    }
}

impl Bounds1dConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.anchors.is_empty() || self.trials == 0 {
            return Err(Error::Config("need at least one anchor and one trial".into()));
        }
        if !self.node.is_finite() || self.anchors.iter().any(|a| !a.is_finite()) {
            return Err(Error::Config("positions must be finite".into()));
        }
        let finite_pos = |v: f64| v > 0.0 && v.is_finite();
        let finite_nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !finite_pos(self.huber_radius) || !finite_nonneg(self.sigma_regular) || !finite_nonneg(self.sigma_outlier) {
            return Err(Error::Config(
                "radius must be positive and deviations non-negative".into(),
            ));
        }
        if self.outlier_anchor.is_some_and(|k| k >= self.anchors.len()) {
            return Err(Error::Config("outlier anchor out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds1dRow {
    pub trial: usize,
    pub loss: Loss,
    pub true_gap: f64,
    pub posterior_bound: f64,
    pub apriori_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds1dSummary {
    pub loss: Loss,
    pub trials: usize,
    pub true_gap: f64,
    pub posterior_bound: f64,
    pub apriori_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds1dReport {
    pub rows: Vec<Bounds1dRow>,
    pub summary: Vec<Bounds1dSummary>,
}

/// Draws `r_k = | |x - a_k| + nu_k |` with Gaussian `nu_k`, adds outlier noise
/// to one measurement, and for each loss computes the true gap `g* - f*`
/// together with the posterior and a-priori bounds.
pub fn bounds_experiment_1d(config: &Bounds1dConfig) -> Result<Bounds1dReport> {
    config.validate()?;
    let regular = NoiseModel::Gaussian {
        sigma: config.sigma_regular,
    };
    let outlier = Normal::new(0.0, config.sigma_outlier).map_err(|e| Error::Config(e.to_string()))?;
    let radii = vec![config.huber_radius; config.anchors.len()];

    let per_trial: Vec<Vec<Bounds1dRow>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = stream(config.master_seed, trial as u64);
            let ranges: Vec<f64> = config
                .anchors
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let mut noise = regular.sample(&mut rng);
                    if config.outlier_anchor == Some(k) {
                        noise += outlier.sample(&mut rng);
                    }
                    ((config.node - a).abs() + noise).abs()
                })
                .collect();
            Loss::ALL
                .iter()
                .map(|&loss| {
                    let (f_star, x_star) = convex_minimizer_1d(&config.anchors, &ranges, &radii, loss);
                    let (g_star, _) = nonconvex_oracle_1d(&config.anchors, &ranges, &radii, loss);
                    Bounds1dRow {
                        trial,
                        loss,
                        true_gap: g_star - f_star,
                        posterior_bound: posterior_gap_bound_1d(x_star, &config.anchors, &ranges, &radii, loss),
                        apriori_bound: apriori_gap_bound_1d(&ranges, &radii, loss),
                    }
                })
                .collect()
        })
        .collect();
    let rows: Vec<Bounds1dRow> = per_trial.into_iter().flatten().collect();

    let summary = Loss::ALL
        .iter()
        .map(|&loss| {
            let sel: Vec<&Bounds1dRow> = rows.iter().filter(|r| r.loss == loss).collect();
            let k = sel.len() as f64;
            Bounds1dSummary {
                loss,
                trials: sel.len(),
                true_gap: sel.iter().map(|r| r.true_gap).sum::<f64>() / k,
                posterior_bound: sel.iter().map(|r| r.posterior_bound).sum::<f64>() / k,
                apriori_bound: sel.iter().map(|r| r.apriori_bound).sum::<f64>() / k,
            }
        })
        .collect();
    Ok(Bounds1dReport { rows, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparePoint {
    pub sigma: f64,
    pub solver: String,
    pub mean_error: f64,
    pub ci95: f64,
    pub broadcast_count: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub points: Vec<ComparePoint>,
    /// Per-sigma trial results, synchronous then asynchronous.
    pub trials: Vec<(f64, Vec<TrialResult>, Vec<TrialResult>)>,
}

/// For each regular-noise deviation, runs the synchronous solver for
/// `sync_iters` rounds and the asynchronous solver for `n * sync_iters`
/// activations on the same measurements, so both broadcast the same number
/// of position vectors.
pub fn sync_vs_async_comm_matched(
    config: &ExperimentConfig,
    instance: &NetworkInstance,
    sigmas: &[f64],
    sync_iters: usize,
) -> Result<CompareReport> {
    let n = instance.topology.n();
    let mut points = Vec::new();
    let mut trials = Vec::new();
    for &sigma in sigmas {
        let mut sync_cfg = config.clone();
        sync_cfg.noise.regular = NoiseModel::Gaussian { sigma };
        sync_cfg.solver.kind = SolverKind::Sync;
        sync_cfg.solver.sync.max_iters = sync_iters;
        sync_cfg.solver.sync.stop_tol = 0.0;
        let mut async_cfg = sync_cfg.clone();
        async_cfg.solver.kind = SolverKind::Async;
        async_cfg.solver.asynchronous.num_activations = n * sync_iters;

        let sync = run_monte_carlo(&sync_cfg, instance)?;
        let asynchronous = run_monte_carlo(&async_cfg, instance)?;
        for (label, report) in [("sync", &sync), ("async", &asynchronous)] {
            let budget = report
                .trials
                .iter()
                .find(|t| t.status == TrialStatus::Ok)
                .map_or(n * sync_iters, |t| t.broadcast_count);
            points.push(ComparePoint {
                sigma,
                solver: label.to_string(),
                mean_error: report.summary.mean_error,
                ci95: report.summary.ci95,
                broadcast_count: budget,
                failures: report.summary.failures,
            });
        }
        trials.push((sigma, sync.trials, asynchronous.trials));
    }
    Ok(CompareReport { points, trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positioning_error_examples() {
        let truth = Points::from_rows(2, &[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(positioning_error(&truth, &truth).unwrap(), 0.0);
        let off = Points::from_rows(2, &[vec![3.0, 4.0], vec![4.0, 5.0]]).unwrap();
        assert!((positioning_error(&off, &truth).unwrap() - 50f64.sqrt() / 2.0).abs() < 1e-15);
        let wrong = Points::zeros(3, 2);
        assert!(positioning_error(&wrong, &truth).is_err());
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one() {
        let cdf = empirical_cdf(&[3.0, 1.0, 2.0, 2.0]);
        assert_eq!(
            cdf,
            vec![
                CdfPoint {
                    error: 1.0,
                    fraction: 0.25
                },
                CdfPoint {
                    error: 2.0,
                    fraction: 0.75
                },
                CdfPoint {
                    error: 3.0,
                    fraction: 1.0
                },
            ]
        );
    }

    #[test]
    fn trend_check() {
        assert!(non_decreasing_within_ci(&[(1.0, 0.1), (2.0, 0.1), (2.0, 0.1)]));
        assert!(non_decreasing_within_ci(&[(2.0, 0.5), (1.8, 0.5)]));
        assert!(!non_decreasing_within_ci(&[(2.0, 0.1), (1.0, 0.1)]));
    }

    #[test]
    fn noiseless_truth_initialized_trial_has_zero_error() {
        let mut cfg = ExperimentConfig::default();
        cfg.noise.regular = NoiseModel::Gaussian { sigma: 0.0 };
        cfg.noise.faults = crate::noise::FaultSpec::none();
        cfg.experiment.init = InitPolicy::Truth;
        cfg.experiment.trials = 1;
        let inst = build_instance(&cfg).unwrap();
        let report = run_monte_carlo(&cfg, &inst).unwrap();
        assert_eq!(report.trials[0].positioning_error, Some(0.0));
        assert_eq!(report.summary.cdf.last().unwrap().fraction, 1.0);
    }

    #[test]
    fn noiseless_1d_has_no_gap() {
        let cfg = Bounds1dConfig {
            sigma_regular: 0.0,
            sigma_outlier: 0.0,
            trials: 3,
            ..Bounds1dConfig::default()
        };
        let report = bounds_experiment_1d(&cfg).unwrap();
        for row in &report.rows {
            assert!(row.true_gap.abs() < 1e-9, "{row:?}");
            assert!(row.posterior_bound.abs() < 1e-9, "{row:?}");
        }
    }

    #[test]
    fn divergence_is_recorded_per_trial() {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.trials = 3;
        cfg.radii.loss = LossKind::L2;
        cfg.solver.sync.lipschitz_override = Some(1e-300);
        cfg.solver.sync.max_iters = 50;
        let inst = build_instance(&cfg).unwrap();
        let report = run_monte_carlo(&cfg, &inst).unwrap();
        assert_eq!(report.summary.failures, 3);
        assert!(report
            .trials
            .iter()
            .all(|t| t.message.as_deref().is_some_and(|m| m.contains("diverge"))));
    }
}
