//! Range measurement synthesis: regular noise, heavy-tailed outliers on a
//! faulty sensor, and a miscalibrated sensor with a multiplicative gain.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NetworkInstance, NetworkTopology};
use crate::linalg::dist;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseModel {
    /// Zero-mean normal. `sigma = 0` is accepted and yields no noise.
    Gaussian {
        sigma: f64,
    },
    Laplace {
        scale: f64,
    },
    Cauchy {
        scale: f64,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::Gaussian { sigma } => sigma >= 0.0 && sigma.is_finite(),
            NoiseModel::Laplace { scale } | NoiseModel::Cauchy { scale } => scale > 0.0 && scale.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid noise parameters {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            NoiseModel::Gaussian { sigma } => {
                if sigma == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, sigma).expect("validated sigma").sample(rng)
                }
            }
            NoiseModel::Laplace { scale } => {
                // Inverse CDF on u in (-1/2, 1/2).
                let u: f64 = rng.random::<f64>() - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            NoiseModel::Cauchy { scale } => {
                let u: f64 = rng.random();
                scale * (PI * (u - 0.5)).tan()
            }
        }
    }
}

/// When the outlier indicator is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierDraw {
    /// One Bernoulli draw per call decides whether the faulty node corrupts
    /// all of its measurements.
    #[default]
    PerTrial,
    /// Each incident measurement is corrupted independently.
    PerMeasurement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub outlier_node: Option<usize>,
    pub outlier_probability: f64,
    pub outlier_model: NoiseModel,
    #[serde(default)]
    pub outlier_draw: OutlierDraw,
    pub miscalibrated_node: Option<usize>,
    pub gain: f64,
}

impl FaultSpec {
    pub fn none() -> Self {
        Self {
            outlier_node: None,
            outlier_probability: 0.0,
            outlier_model: NoiseModel::Gaussian { sigma: 0.0 },
            outlier_draw: OutlierDraw::PerTrial,
            miscalibrated_node: None,
            gain: 1.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (what, node) in [
            ("outlier", self.outlier_node),
            ("miscalibrated", self.miscalibrated_node),
        ] {
            if let Some(id) = node {
                if id >= n {
                    return Err(Error::Config(format!(
                        "{what} node {id} does not exist (network has {n} sensors)"
                    )));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.outlier_probability) {
            return Err(Error::Config("outlier probability must lie in [0, 1]".into()));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::Config("gain must be positive".into()));
        }
        self.outlier_model.validate()
    }
}

/// Noisy ranges aligned with the topology: `d[e]` for edge `e`, `r[l]` for
/// anchor link `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub d: Vec<f64>,
    pub r: Vec<f64>,
}

impl Measurements {
    /// Exact ranges from the ground truth.
    pub fn noiseless(instance: &NetworkInstance) -> Self {
        let t = &instance.topology;
        let x = &instance.true_positions;
        let a = &instance.anchor_positions;
        Self {
            d: t.edges().iter().map(|&(i, j)| dist(x.get(i), x.get(j))).collect(),
            r: t.anchor_links()
                .iter()
                .map(|&(i, k)| dist(x.get(i), a.get(k)))
                .collect(),
        }
    }

    pub fn check_shape(&self, topology: &NetworkTopology) -> Result<()> {
        if self.d.len() != topology.edges().len() || self.r.len() != topology.anchor_links().len() {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "{} edge and {} anchor ranges",
                    topology.edges().len(),
                    topology.anchor_links().len()
                ),
                found: format!("{} and {}", self.d.len(), self.r.len()),
            });
        }
        if self.d.iter().chain(&self.r).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parse("ranges must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Writes `type,i,j_or_k,range_m` rows in topology order.
    pub fn write_csv<W: Write>(&self, topology: &NetworkTopology, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["type", "i", "j_or_k", "range_m"])?;
        for (&(i, j), d) in topology.edges().iter().zip(&self.d) {
            w.write_record(["edge", &i.to_string(), &j.to_string(), &d.to_string()])?;
        }
        for (&(i, k), r) in topology.anchor_links().iter().zip(&self.r) {
            w.write_record(["anchor", &i.to_string(), &k.to_string(), &r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a measurement CSV and aligns it with `topology`. Every edge and
    /// anchor link must appear exactly once and nothing else may appear.
    pub fn read_csv<R: Read>(topology: &NetworkTopology, input: R) -> Result<Self> {
        let rows = parse_measurement_rows(input)?;
        let mut d = vec![None; topology.edges().len()];
        let mut r = vec![None; topology.anchor_links().len()];
        for row in rows {
            let (slot, key) = match row.kind {
                RangeKind::Edge => (
                    topology
                        .edges()
                        .iter()
                        .position(|&e| e == (row.i, row.other))
                        .map(|e| &mut d[e]),
                    "edge",
                ),
                RangeKind::Anchor => (
                    topology
                        .anchor_links()
                        .iter()
                        .position(|&l| l == (row.i, row.other))
                        .map(|l| &mut r[l]),
                    "anchor link",
                ),
            };
            match slot {
                None => {
                    return Err(Error::Parse(format!(
                        "{key} ({},{}) is not in the topology",
                        row.i, row.other
                    )))
                }
                Some(Some(_)) => return Err(Error::Parse(format!("{key} ({},{}) appears twice", row.i, row.other))),
                Some(s) => *s = Some(row.range_m),
            }
        }
        let collect = |v: Vec<Option<f64>>, what: &str| -> Result<Vec<f64>> {
            v.into_iter()
                .enumerate()
                .map(|(idx, x)| x.ok_or_else(|| Error::Parse(format!("missing {what} #{idx}"))))
                .collect()
        };
        let m = Self {
            d: collect(d, "edge")?,
            r: collect(r, "anchor link")?,
        };
        m.check_shape(topology)?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeKind {
    Edge,
    Anchor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeRow {
    pub kind: RangeKind,
    pub i: usize,
    pub other: usize,
    pub range_m: f64,
}

/// Topology-free parse of a measurement CSV.
pub fn parse_measurement_rows<R: Read>(input: R) -> Result<Vec<RangeRow>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["type", "i", "j_or_k", "range_m"] {
        return Err(Error::Parse(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::Parse(format!("expected 4 fields, got {}", rec.len())));
        }
        let kind = match &rec[0] {
            "edge" => RangeKind::Edge,
            "anchor" => RangeKind::Anchor,
            other => return Err(Error::Parse(format!("unknown measurement type {other:?}"))),
        };
        let idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Parse(format!("index {s:?}: {e}")))
        };
        let range_m: f64 = rec[3]
            .parse()
            .map_err(|e| Error::Parse(format!("range {:?}: {e}", &rec[3])))?;
        if !(range_m.is_finite() && range_m >= 0.0) {
            return Err(Error::Parse(format!("range {range_m} must be finite and non-negative")));
        }
        rows.push(RangeRow {
            kind,
            i: idx(&rec[1])?,
            other: idx(&rec[2])?,
            range_m,
        });
    }
    Ok(rows)
}

/// Draws one set of ranges for `instance`.
///
/// For every edge and anchor link the true distance is scaled by the gain
/// when an endpoint is the miscalibrated sensor, regular noise is added, an
/// outlier draw is added when the faulty sensor is an endpoint and its fault
/// is active, and the absolute value is taken last.
pub fn sample_measurements<R: Rng + ?Sized>(
    instance: &NetworkInstance,
    regular: &NoiseModel,
    faults: &FaultSpec,
    rng: &mut R,
) -> Result<Measurements> {
    let t = &instance.topology;
    regular.validate()?;
    faults.validate(t.n())?;
    let x = &instance.true_positions;
    let a = &instance.anchor_positions;

    let trial_fault = match (faults.outlier_node, faults.outlier_draw) {
        (Some(_), OutlierDraw::PerTrial) => rng.random::<f64>() < faults.outlier_probability,
        _ => false,
    };

    let range = |base: f64, touches_faulty: bool, touches_miscal: bool, rng: &mut R| {
        let base = if touches_miscal { faults.gain * base } else { base };
        let mut value = base + regular.sample(rng);
        if touches_faulty {
            let active = match faults.outlier_draw {
                OutlierDraw::PerTrial => trial_fault,
                OutlierDraw::PerMeasurement => rng.random::<f64>() < faults.outlier_probability,
            };
            if active {
                value += faults.outlier_model.sample(rng);
            }
        }
        value.abs()
    };

    let is = |node: Option<usize>, i: usize| node == Some(i);
    let d = t
        .edges()
        .iter()
        .map(|&(i, j)| {
            range(
                dist(x.get(i), x.get(j)),
                is(faults.outlier_node, i) || is(faults.outlier_node, j),
                is(faults.miscalibrated_node, i) || is(faults.miscalibrated_node, j),
                rng,
            )
        })
        .collect();
    let r = t
        .anchor_links()
        .iter()
        .map(|&(i, k)| {
            range(
                dist(x.get(i), a.get(k)),
                is(faults.outlier_node, i),
                is(faults.miscalibrated_node, i),
                rng,
            )
        })
        .collect();
    Ok(Measurements { d, r })
}
