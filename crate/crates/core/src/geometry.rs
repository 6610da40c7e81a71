//! Network topology, ground-truth geometry and random geometric generation.
//!
//! Sensors and anchors are indexed from zero. Edges are stored with the lower
//! sensor index first; that orientation fixes the sign convention used by the
//! incidence matrix and by every edge variable in the solvers.

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, Points};

/// One edge as seen from an endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incidence {
    pub edge: usize,
    pub neighbor: usize,
    /// `+1` when this endpoint is the lower index of the edge, `-1` otherwise.
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    n: usize,
    m: usize,
    dim: usize,
    edges: Vec<(usize, usize)>,
    anchor_links: Vec<(usize, usize)>,
    incident: Vec<Vec<Incidence>>,
    links_of: Vec<Vec<usize>>,
}

impl NetworkTopology {
    /// Builds a topology after checking the structural invariants (index
    /// ranges, orientation, no self-edges, no duplicates). Connectivity is
    /// checked separately by [`NetworkTopology::validate`].
    pub fn new(
        n: usize,
        m: usize,
        dim: usize,
        edges: Vec<(usize, usize)>,
        anchor_links: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("at least one sensor is required".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidTopology("dimension must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for &(i, j) in &edges {
            if i == j {
                return Err(Error::InvalidTopology(format!("self-edge at sensor {i}")));
            }
            if i > j {
                return Err(Error::InvalidTopology(format!(
                    "edge ({i},{j}) must list the lower index first"
                )));
            }
            if j >= n {
                return Err(Error::InvalidTopology(format!(
                    "edge ({i},{j}) references a sensor outside 0..{n}"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(Error::InvalidTopology(format!("duplicate edge ({i},{j})")));
            }
        }
        let mut seen = HashSet::with_capacity(anchor_links.len());
        for &(i, k) in &anchor_links {
            if i >= n || k >= m {
                return Err(Error::InvalidTopology(format!("anchor link ({i},{k}) is out of range")));
            }
            if !seen.insert((i, k)) {
                return Err(Error::InvalidTopology(format!("duplicate anchor link ({i},{k})")));
            }
        }

        let mut incident = vec![Vec::new(); n];
        for (e, &(i, j)) in edges.iter().enumerate() {
            incident[i].push(Incidence {
                edge: e,
                neighbor: j,
                sign: 1.0,
            });
            incident[j].push(Incidence {
                edge: e,
                neighbor: i,
                sign: -1.0,
            });
        }
        let mut links_of = vec![Vec::new(); n];
        for (l, &(i, _)) in anchor_links.iter().enumerate() {
            links_of[i].push(l);
        }

        Ok(Self {
            n,
            m,
            dim,
            edges,
            anchor_links,
            incident,
            links_of,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn anchor_links(&self) -> &[(usize, usize)] {
        &self.anchor_links
    }

    pub fn incident(&self, i: usize) -> &[Incidence] {
        &self.incident[i]
    }

    /// Indices into [`NetworkTopology::anchor_links`] owned by sensor `i`.
    pub fn links_of(&self, i: usize) -> &[usize] {
        &self.links_of[i]
    }

    pub fn max_degree(&self) -> usize {
        self.incident.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_anchor_links(&self) -> usize {
        self.links_of.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn average_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for inc in &self.incident[i] {
                if !seen[inc.neighbor] {
                    seen[inc.neighbor] = true;
                    count += 1;
                    queue.push_back(inc.neighbor);
                }
            }
        }
        count == self.n
    }

    /// The sensor graph must be connected and at least one sensor must
    /// measure its range to an anchor.
    pub fn validate(&self) -> Result<()> {
        if !self.is_connected() {
            return Err(Error::InvalidTopology("sensor graph is not connected".into()));
        }
        if self.anchor_links.is_empty() {
            return Err(Error::InvalidTopology("no sensor has an anchor link".into()));
        }
        Ok(())
    }

    /// Signed arc-node incidence matrix, `|E| x n`. Row `e = (i, j)` holds
    /// `+1` at column `i` and `-1` at column `j`.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.edges.len(), self.n);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            c[(e, i)] = 1.0;
            c[(e, j)] = -1.0;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInstance {
    pub topology: NetworkTopology,
    pub true_positions: Points,
    pub anchor_positions: Points,
    /// Seed that produced the instance, when it was generated.
    pub seed: Option<u64>,
}

impl NetworkInstance {
    pub fn new(
        topology: NetworkTopology,
        true_positions: Points,
        anchor_positions: Points,
        seed: Option<u64>,
    ) -> Result<Self> {
        let dim = topology.dim();
        if true_positions.len() != topology.n() || true_positions.dim() != dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{} sensor positions in R^{dim}", topology.n()),
                found: format!("{} in R^{}", true_positions.len(), true_positions.dim()),
            });
        }
        if anchor_positions.len() != topology.m() || (topology.m() > 0 && anchor_positions.dim() != dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} anchor positions in R^{dim}", topology.m()),
                found: format!("{} in R^{}", anchor_positions.len(), anchor_positions.dim()),
            });
        }
        if !true_positions.all_finite() || !anchor_positions.all_finite() {
            return Err(Error::InvalidTopology("non-finite coordinates".into()));
        }
        Ok(Self {
            topology,
            true_positions,
            anchor_positions,
            seed,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceDoc::from(self))?)
    }

    /// Parses and validates an instance document, including the
    /// connectivity requirement.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        let instance = doc.into_instance()?;
        instance.topology.validate()?;
        Ok(instance)
    }
}

/// On-disk layout of an instance.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    p: usize,
    n: usize,
    m: usize,
    positions: Vec<Vec<f64>>,
    anchors: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
    anchor_links: Vec<(usize, usize)>,
    #[serde(default)]
    seed: Option<u64>,
}

impl From<&NetworkInstance> for InstanceDoc {
    fn from(inst: &NetworkInstance) -> Self {
        let t = &inst.topology;
        Self {
            p: t.dim(),
            n: t.n(),
            m: t.m(),
            positions: inst.true_positions.to_rows(),
            anchors: inst.anchor_positions.to_rows(),
            edges: t.edges().to_vec(),
            anchor_links: t.anchor_links().to_vec(),
            seed: inst.seed,
        }
    }
}

impl InstanceDoc {
    fn into_instance(self) -> Result<NetworkInstance> {
        if !(1..=3).contains(&self.p) {
            return Err(Error::InvalidTopology(format!("unsupported dimension {}", self.p)));
        }
        let topology = NetworkTopology::new(self.n, self.m, self.p, self.edges, self.anchor_links)?;
        let positions = Points::from_rows(self.p, &self.positions)?;
        let anchors = Points::from_rows(self.p, &self.anchors)?;
        NetworkInstance::new(topology, positions, anchors, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricSpec {
    pub n: usize,
    pub m: usize,
    pub side_length: f64,
    pub comm_radius: f64,
    pub dim: usize,
}

impl GeometricSpec {
    fn check(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Config("need at least one sensor and one anchor".into()));
        }
        if !(self.side_length > 0.0 && self.side_length.is_finite()) {
            return Err(Error::Config("side length must be positive".into()));
        }
        if !(self.comm_radius > 0.0 && self.comm_radius.is_finite()) {
            return Err(Error::Config("communication radius must be positive".into()));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Config(format!("unsupported dimension {}", self.dim)));
        }
        Ok(())
    }
}

pub const DEFAULT_RETRY_LIMIT: usize = 1000;

/// Samples sensors uniformly in `[0, side]^dim` and connects every pair
/// (and every sensor-anchor pair) closer than the communication radius.
/// Anchors sit at the corners when `m` equals the number of corners and are
/// uniform otherwise. Draws are repeated until the instance passes
/// [`NetworkTopology::validate`] or `retry_limit` is exhausted.
pub fn generate_geometric_network<R: Rng + ?Sized>(
    spec: &GeometricSpec,
    retry_limit: usize,
    rng: &mut R,
) -> Result<NetworkInstance> {
    spec.check()?;
    let corners = 1usize << spec.dim;
    let mut last_failure = String::from("no attempt made");

    for _ in 0..retry_limit {
        let anchors = if spec.m == corners {
            corner_points(spec.dim, spec.side_length)
        } else {
            uniform_points(spec.m, spec.dim, spec.side_length, rng)
        };
        let sensors = uniform_points(spec.n, spec.dim, spec.side_length, rng);

        let mut edges = Vec::new();
        for i in 0..spec.n {
            for j in i + 1..spec.n {
                if dist(sensors.get(i), sensors.get(j)) <= spec.comm_radius {
                    edges.push((i, j));
                }
            }
        }
        let mut links = Vec::new();
        for i in 0..spec.n {
            for k in 0..spec.m {
                if dist(sensors.get(i), anchors.get(k)) <= spec.comm_radius {
                    links.push((i, k));
                }
            }
        }

        let topology = NetworkTopology::new(spec.n, spec.m, spec.dim, edges, links)?;
        match topology.validate() {
            Ok(()) => return NetworkInstance::new(topology, sensors, anchors, None),
            Err(Error::InvalidTopology(why)) => last_failure = why,
            Err(e) => return Err(e),
        }
    }

    Err(Error::GenerationFailed {
        attempts: retry_limit,
        predicate: last_failure,
    })
}

fn uniform_points<R: Rng + ?Sized>(count: usize, dim: usize, side: f64, rng: &mut R) -> Points {
    let data = (0..count * dim).map(|_| rng.random::<f64>() * side).collect();
    Points::from_flat(dim, data).expect("dim is positive")
}

fn corner_points(dim: usize, side: f64) -> Points {
    let count = 1usize << dim;
    let mut data = Vec::with_capacity(count * dim);
    for c in 0..count {
        for axis in 0..dim {
            data.push(if (c >> axis) & 1 == 1 { side } else { 0.0 });
        }
    }
    Points::from_flat(dim, data).expect("dim is positive")
}
