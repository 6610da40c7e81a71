//! Experiment configuration.
//!
//! A config is one JSON object with the groups `network`, `noise`, `radii`,
//! `solver` and `experiment`. Every key has a default, so `{}` is a valid
//! config describing the ten-sensor, four-anchor outlier scenario.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::async_solver::AsyncConfig;
use crate::cost::HuberRadii;
use crate::error::{Error, Result};
use crate::geometry::{GeometricSpec, NetworkTopology, DEFAULT_RETRY_LIMIT};
use crate::noise::{FaultSpec, NoiseModel, OutlierDraw};
use crate::sync_solver::SyncConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n: usize,
    pub m: usize,
    pub side_length: f64,
    pub comm_radius: f64,
    pub dim: usize,
    pub retry_limit: usize,
    /// Load the instance from this JSON file instead of generating it.
    pub instance: Option<PathBuf>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n: 10,
            m: 4,
            side_length: 1000.0,
            // Mean degree of valid generated instances is about 4.3 at this radius.
            comm_radius: 480.0,
            dim: 2,
            retry_limit: DEFAULT_RETRY_LIMIT,
            instance: None,
        }
    }
}

impl NetworkConfig {
    pub fn geometric_spec(&self) -> GeometricSpec {
        GeometricSpec {
            n: self.n,
            m: self.m,
            side_length: self.side_length,
            comm_radius: self.comm_radius,
            dim: self.dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub regular: NoiseModel,
    pub faults: FaultSpec,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            regular: NoiseModel::Gaussian { sigma: 40.0 },
            faults: FaultSpec {
                outlier_node: Some(6),
                outlier_probability: 1.0,
                outlier_model: NoiseModel::Laplace { scale: 4000.0 },
                outlier_draw: OutlierDraw::PerTrial,
                miscalibrated_node: Some(7),
                gain: 0.2,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Huber,
    /// Quadratic baseline: the same solvers with radii far beyond any residual.
    L2,
}

impl LossKind {
    pub fn label(self) -> &'static str {
        match self {
            LossKind::Huber => "huber",
            LossKind::L2 => "L2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadiiConfig {
    pub loss: LossKind,
    /// Huber radius in meters, shared by every edge and anchor link.
    pub radius_m: f64,
}

impl Default for RadiiConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::Huber,
            radius_m: 80.0,
        }
    }
}

impl RadiiConfig {
    pub fn radii(&self, topology: &NetworkTopology, scene_size: f64) -> HuberRadii {
        match self.loss {
            LossKind::Huber => HuberRadii::uniform(topology, self.radius_m),
            LossKind::L2 => HuberRadii::quadratic(topology, scene_size),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Sync,
    Async,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub sync: SyncConfig,
    #[serde(rename = "async")]
    pub asynchronous: AsyncConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: SolverKind::Sync,
            sync: SyncConfig::default(),
            asynchronous: AsyncConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPolicy {
    /// Uniform in the deployment square, drawn from the trial stream.
    #[default]
    Uniform,
    /// Ground truth (useful for fixed-point checks).
    Truth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: usize,
    pub master_seed: u64,
    pub init: InitPolicy,
    pub out_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            trials: 50,
            master_seed: 0,
            init: InitPolicy::Uniform,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub noise: NoiseConfig,
    pub radii: RadiiConfig,
    pub solver: SolverConfig,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.network.instance.is_none() {
            let spec = self.network.geometric_spec();
            if spec.n == 0 || spec.m == 0 || !(1..=3).contains(&spec.dim) {
                return Err(Error::Config(
                    "network needs n >= 1, m >= 1 and dimension 1 to 3".into(),
                ));
            }
            if !(spec.side_length > 0.0 && spec.side_length.is_finite()) {
                return Err(Error::Config("side_length must be positive".into()));
            }
            if !(spec.comm_radius > 0.0 && spec.comm_radius.is_finite()) {
                return Err(Error::Config("comm_radius must be positive".into()));
            }
            self.noise.faults.validate(spec.n)?;
        }
        if self.network.retry_limit == 0 {
            return Err(Error::Config("retry_limit must be at least 1".into()));
        }
        self.noise.regular.validate()?;
        if !(self.radii.radius_m > 0.0 && self.radii.radius_m.is_finite()) {
            return Err(Error::Config("radius_m must be positive".into()));
        }
        self.solver.sync.validate()?;
        self.solver.asynchronous.validate()?;
        Ok(())
    }

    /// Scale used for the quadratic baseline's sentinel radii.
    pub fn scene_size(&self) -> f64 {
        self.network.side_length
    }
}
