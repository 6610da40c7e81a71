#![allow(dead_code)]

use netloc_core::cost::{HuberRadii, Problem, StackedPoint};
use netloc_core::geometry::{generate_geometric_network, GeometricSpec, NetworkInstance};
use netloc_core::linalg::Points;
use netloc_core::noise::{sample_measurements, FaultSpec, Measurements, NoiseModel, OutlierDraw};
use netloc_core::rng::{instance_rng, stream};
use rand::Rng;

pub struct Scenario {
    pub instance: NetworkInstance,
    pub measurements: Measurements,
    pub radii: HuberRadii,
}

impl Scenario {
    pub fn problem(&self) -> Problem<'_> {
        Problem::new(
            &self.instance.topology,
            &self.instance.anchor_positions,
            &self.measurements,
            &self.radii,
        )
        .unwrap()
    }

    pub fn n(&self) -> usize {
        self.instance.topology.n()
    }
}

pub fn default_faults() -> FaultSpec {
    FaultSpec {
        outlier_node: Some(6),
        outlier_probability: 1.0,
        outlier_model: NoiseModel::Laplace { scale: 4000.0 },
        outlier_draw: OutlierDraw::PerTrial,
        miscalibrated_node: Some(7),
        gain: 0.2,
    }
}

/// A generated network with noisy ranges. `n` sensors, 4 corner anchors in a
/// 1 km square, Huber radius `radius`.
pub fn scenario(seed: u64, n: usize, sigma: f64, radius: f64) -> Scenario {
    let spec = GeometricSpec {
        n,
        m: 4,
        side_length: 1000.0,
        comm_radius: 480.0,
        dim: 2,
    };
    let instance = generate_geometric_network(&spec, 1000, &mut instance_rng(seed)).unwrap();
    let faults = if n >= 8 { default_faults() } else { FaultSpec::none() };
    let measurements = sample_measurements(
        &instance,
        &NoiseModel::Gaussian { sigma },
        &faults,
        &mut stream(seed, 1),
    )
    .unwrap();
    let radii = HuberRadii::uniform(&instance.topology, radius);
    Scenario {
        instance,
        measurements,
        radii,
    }
}

pub fn uniform_points<R: Rng>(rng: &mut R, len: usize, dim: usize, lo: f64, hi: f64) -> Points {
    Points::from_flat(dim, (0..len * dim).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-300)
}

/// Random feasible point whose edge and link variables sit strictly inside
/// their balls.
pub fn interior_point<R: Rng>(rng: &mut R, sc: &Scenario) -> StackedPoint {
    let t = &sc.instance.topology;
    let x = uniform_points(rng, t.n(), 2, -200.0, 1200.0);
    let mut y = uniform_points(rng, t.edges().len(), 2, -1.0, 1.0);
    let mut w = uniform_points(rng, t.anchor_links().len(), 2, -1.0, 1.0);
    let shrink = |v: &mut [f64], rho: f64, s: f64| {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        v.iter_mut().for_each(|a| *a *= s * rho / n);
    };
    for (e, d) in sc.measurements.d.iter().enumerate() {
        let s = rng.random_range(0.0..0.9);
        shrink(y.get_mut(e), *d, s);
    }
    for (l, r) in sc.measurements.r.iter().enumerate() {
        let s = rng.random_range(0.0..0.9);
        shrink(w.get_mut(l), *r, s);
    }
    StackedPoint { x, y, w }
}
