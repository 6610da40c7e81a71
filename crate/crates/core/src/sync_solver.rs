//! Synchronous distributed solver.
//!
//! Every node keeps its position, one copy of each incident edge variable and
//! its anchor-link variables, together with their previous values. A round
//! has two phases: each node computes its extrapolated point `xi` and
//! broadcasts it, then the broadcasts are delivered to neighbor inboxes and
//! every node performs a projected gradient step using only its own state,
//! its inbox and its anchor data. The iteration is the accelerated projected
//! gradient method on the lifted cost with step `1 / L`.

use serde::{Deserialize, Serialize};

use crate::cost::{lipschitz_constant, project_ball_in_place, Problem, StackedPoint};
use crate::error::{Error, Result};
use crate::linalg::{dist, extrapolate_into, momentum, norm, sub_into, Points};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyncConfig {
    /// Number of rounds; zero returns the initialization.
    pub max_iters: usize,
    /// Stop once `max_i |x_i[t] - x_i[t-1]| / (1 + |x_i[t]|)` falls below
    /// this value. Zero disables the test.
    pub stop_tol: f64,
    #[serde(default)]
    pub lipschitz_override: Option<f64>,
    /// Keep every position iterate in the outcome.
    #[serde(default)]
    pub record_iterates: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            stop_tol: 1e-7,
            lipschitz_override: None,
            record_iterates: false,
        }
    }
}

impl SyncConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.stop_tol >= 0.0) {
            return Err(Error::Config("stop_tol must be non-negative".into()));
        }
        if let Some(l) = self.lipschitz_override {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config("Lipschitz override must be positive".into()));
            }
        }
        Ok(())
    }

    pub(crate) fn lipschitz(&self, problem: &Problem<'_>) -> f64 {
        self.lipschitz_override
            .unwrap_or_else(|| lipschitz_constant(problem.topology))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncRecord {
    pub iteration: usize,
    /// Lifted cost of the current iterate.
    pub cost: f64,
    pub max_x_change: f64,
    pub broadcast_count: usize,
}

#[derive(Debug, Clone)]
pub struct SyncOutcome {
    pub x: Points,
    pub z: StackedPoint,
    /// Record 0 is the initialization.
    pub trajectory: Vec<SyncRecord>,
    pub iterations: usize,
    pub broadcast_count: usize,
    pub lipschitz: f64,
    /// Position iterates `x[0], x[1], ...` when requested.
    pub iterates: Vec<Points>,
}

#[derive(Debug, Clone)]
struct EdgeSlot {
    edge: usize,
    neighbor: usize,
    lower: bool,
    range: f64,
    radius: f64,
    y_cur: Vec<f64>,
    y_prev: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LinkSlot {
    link: usize,
    anchor: Vec<f64>,
    range: f64,
    radius: f64,
    w_cur: Vec<f64>,
    w_prev: Vec<f64>,
}

/// Everything a node owns.
#[derive(Debug, Clone)]
pub struct NodeState {
    id: usize,
    x_cur: Vec<f64>,
    x_prev: Vec<f64>,
    xi: Vec<f64>,
    edges: Vec<EdgeSlot>,
    links: Vec<LinkSlot>,
}

/// Messages received by one node in one round, in incident-edge order.
/// Reads are logged so the simulator can check that a node only consumed
/// messages from its neighbors.
#[derive(Debug, Clone, Default)]
pub struct Inbox {
    senders: Vec<usize>,
    payload: Vec<f64>,
    dim: usize,
    accessed: Vec<usize>,
}

impl Inbox {
    fn clear(&mut self, dim: usize) {
        self.senders.clear();
        self.payload.clear();
        self.accessed.clear();
        self.dim = dim;
    }

    fn push(&mut self, sender: usize, v: &[f64]) {
        self.senders.push(sender);
        self.payload.extend_from_slice(v);
    }

    fn read(&mut self, slot: usize) -> &[f64] {
        self.accessed.push(self.senders[slot]);
        &self.payload[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn senders(&self) -> &[usize] {
        &self.senders
    }

    pub fn accessed(&self) -> &[usize] {
        &self.accessed
    }
}

impl NodeState {
    fn new(problem: &Problem<'_>, id: usize, x0: &Points) -> Self {
        let t = problem.topology;
        let p = problem.dim();
        let xi0 = x0.get(id);
        let edges = t
            .incident(id)
            .iter()
            .map(|inc| {
                let mut y = vec![0.0; p];
                sub_into(xi0, x0.get(inc.neighbor), &mut y);
                let range = problem.measurements.d[inc.edge];
                project_ball_in_place(&mut y, range);
                EdgeSlot {
                    edge: inc.edge,
                    neighbor: inc.neighbor,
                    lower: inc.sign > 0.0,
                    range,
                    radius: problem.radii.edge[inc.edge],
                    y_prev: y.clone(),
                    y_cur: y,
                }
            })
            .collect();
        let links = t
            .links_of(id)
            .iter()
            .map(|&l| {
                let anchor = problem.anchors.get(t.anchor_links()[l].1).to_vec();
                let mut w = vec![0.0; p];
                sub_into(xi0, &anchor, &mut w);
                let range = problem.measurements.r[l];
                project_ball_in_place(&mut w, range);
                LinkSlot {
                    link: l,
                    anchor,
                    range,
                    radius: problem.radii.anchor[l],
                    w_prev: w.clone(),
                    w_cur: w,
                }
            })
            .collect();
        Self {
            id,
            x_cur: xi0.to_vec(),
            x_prev: xi0.to_vec(),
            xi: xi0.to_vec(),
            edges,
            links,
        }
    }

    /// Phase one: the extrapolated point this node broadcasts.
    fn extrapolate(&mut self, beta: f64) -> &[f64] {
        extrapolate_into(&self.x_cur, &self.x_prev, beta, &mut self.xi);
        &self.xi
    }

    /// Phase two: projected gradient step from the extrapolated point.
    fn update(&mut self, beta: f64, step: f64, inbox: &mut Inbox) {
        let p = self.xi.len();
        let mut grad = vec![0.0; p];
        let mut ups = vec![0.0; p];
        let mut u = vec![0.0; p];
        for (slot, e) in self.edges.iter_mut().enumerate() {
            let xi_j = inbox.read(slot);
            extrapolate_into(&e.y_cur, &e.y_prev, beta, &mut ups);
            for c in 0..p {
                u[c] = self.xi[c] - xi_j[c] - ups[c];
            }
            project_ball_in_place(&mut u, e.radius);
            for c in 0..p {
                grad[c] += u[c];
                ups[c] += step * u[c];
            }
            project_ball_in_place(&mut ups, e.range);
            std::mem::swap(&mut e.y_prev, &mut e.y_cur);
            e.y_cur.copy_from_slice(&ups);
        }
        for l in &mut self.links {
            extrapolate_into(&l.w_cur, &l.w_prev, beta, &mut ups);
            for c in 0..p {
                u[c] = self.xi[c] - l.anchor[c] - ups[c];
            }
            project_ball_in_place(&mut u, l.radius);
            for c in 0..p {
                grad[c] += u[c];
                ups[c] += step * u[c];
            }
            project_ball_in_place(&mut ups, l.range);
            std::mem::swap(&mut l.w_prev, &mut l.w_cur);
            l.w_cur.copy_from_slice(&ups);
        }
        std::mem::swap(&mut self.x_prev, &mut self.x_cur);
        for c in 0..p {
            self.x_cur[c] = self.xi[c] - step * grad[c];
        }
    }

    fn relative_change(&self) -> f64 {
        dist(&self.x_cur, &self.x_prev) / (1.0 + norm(&self.x_cur))
    }
}

/// The lockstep network: node states plus their inboxes.
pub struct SyncSimulation<'p, 'a> {
    problem: &'p Problem<'a>,
    nodes: Vec<NodeState>,
    inboxes: Vec<Inbox>,
    step: f64,
    t: usize,
    broadcasts: usize,
}

impl<'p, 'a> SyncSimulation<'p, 'a> {
    pub fn new(problem: &'p Problem<'a>, init_x: &Points, lipschitz: f64) -> Result<Self> {
        let n = problem.topology.n();
        if init_x.len() != n || init_x.dim() != problem.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{n} initial positions in R^{}", problem.dim()),
                found: format!("{} in R^{}", init_x.len(), init_x.dim()),
            });
        }
        Ok(Self {
            problem,
            nodes: (0..n).map(|i| NodeState::new(problem, i, init_x)).collect(),
            inboxes: vec![Inbox::default(); n],
            step: 1.0 / lipschitz,
            t: 0,
            broadcasts: 0,
        })
    }

    /// One synchronous round. Returns the largest relative position change.
    pub fn round(&mut self) -> Result<f64> {
        self.t += 1;
        let beta = momentum(self.t);
        let p = self.problem.dim();

        let broadcasts: Vec<Vec<f64>> = self
            .nodes
            .iter_mut()
            .map(|node| node.extrapolate(beta).to_vec())
            .collect();
        self.broadcasts += broadcasts.len();

        for (node, inbox) in self.nodes.iter().zip(&mut self.inboxes) {
            inbox.clear(p);
            for e in &node.edges {
                inbox.push(e.neighbor, &broadcasts[e.neighbor]);
            }
        }

        let step = self.step;
        for (node, inbox) in self.nodes.iter_mut().zip(&mut self.inboxes) {
            node.update(beta, step, inbox);
            debug_assert!(
                inbox
                    .accessed()
                    .iter()
                    .all(|s| node.edges.iter().any(|e| e.neighbor == *s)),
                "node {} read a message from a non-neighbor",
                node.id
            );
        }
        if self.nodes.iter().any(|node| node.x_cur.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence { iteration: self.t });
        }
        self.debug_check_edge_copies();
        Ok(self.nodes.iter().map(NodeState::relative_change).fold(0.0, f64::max))
    }

    fn debug_check_edge_copies(&self) {
        if cfg!(debug_assertions) {
            for node in &self.nodes {
                for e in node.edges.iter().filter(|e| e.lower) {
                    let other = &self.nodes[e.neighbor];
                    let mirror = other
                        .edges
                        .iter()
                        .find(|s| s.edge == e.edge)
                        .expect("edge on both ends");
                    debug_assert!(
                        e.y_cur.iter().zip(&mirror.y_cur).all(|(a, b)| *a == -*b),
                        "edge {} copies disagree",
                        e.edge
                    );
                }
            }
        }
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn broadcast_count(&self) -> usize {
        self.broadcasts
    }

    pub fn inbox(&self, node: usize) -> &Inbox {
        &self.inboxes[node]
    }

    pub fn positions(&self) -> Points {
        let p = self.problem.dim();
        let mut x = Points::zeros(self.nodes.len(), p);
        for node in &self.nodes {
            x.set(node.id, &node.x_cur);
        }
        x
    }

    /// Network-wide lifted point, taking each edge variable from the lower
    /// endpoint's copy.
    pub fn stacked(&self) -> StackedPoint {
        let t = self.problem.topology;
        let p = self.problem.dim();
        let mut y = Points::zeros(t.edges().len(), p);
        let mut w = Points::zeros(t.anchor_links().len(), p);
        for node in &self.nodes {
            for e in node.edges.iter().filter(|e| e.lower) {
                y.set(e.edge, &e.y_cur);
            }
            for l in &node.links {
                w.set(l.link, &l.w_cur);
            }
        }
        StackedPoint {
            x: self.positions(),
            y,
            w,
        }
    }
}

/// Runs the synchronous solver from `init_x`.
pub fn strong_solve(problem: &Problem<'_>, init_x: &Points, config: &SyncConfig) -> Result<SyncOutcome> {
    config.validate()?;
    let lipschitz = config.lipschitz(problem);
    let mut sim = SyncSimulation::new(problem, init_x, lipschitz)?;

    let mut iterates = Vec::new();
    if config.record_iterates {
        iterates.push(init_x.clone());
    }
    let mut trajectory = vec![SyncRecord {
        iteration: 0,
        cost: problem.stacked_cost_unchecked(&sim.stacked()),
        max_x_change: 0.0,
        broadcast_count: 0,
    }];

    while sim.iteration() < config.max_iters {
        let change = sim.round()?;
        let z = sim.stacked();
        trajectory.push(SyncRecord {
            iteration: sim.iteration(),
            cost: problem.stacked_cost_unchecked(&z),
            max_x_change: change,
            broadcast_count: sim.broadcast_count(),
        });
        if config.record_iterates {
            iterates.push(z.x);
        }
        if change < config.stop_tol {
            break;
        }
    }

    let z = sim.stacked();
    Ok(SyncOutcome {
        x: z.x.clone(),
        z,
        trajectory,
        iterations: sim.iteration(),
        broadcast_count: sim.broadcast_count(),
        lipschitz,
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::HuberRadii;
    use crate::geometry::{generate_geometric_network, GeometricSpec, NetworkInstance, DEFAULT_RETRY_LIMIT};
    use crate::noise::{sample_measurements, FaultSpec, Measurements, NoiseModel};
    use crate::rng::stream;

    fn instance(seed: u64) -> NetworkInstance {
        let spec = GeometricSpec {
            n: 10,
            m: 4,
            side_length: 1000.0,
            comm_radius: 500.0,
            dim: 2,
        };
        generate_geometric_network(&spec, DEFAULT_RETRY_LIMIT, &mut stream(seed, 0)).unwrap()
    }

    #[test]
    fn truth_is_a_fixed_point_without_noise() {
        let inst = instance(4);
        let m = Measurements::noiseless(&inst);
        let radii = HuberRadii::uniform(&inst.topology, 80.0);
        let problem = Problem::new(&inst.topology, &inst.anchor_positions, &m, &radii).unwrap();
        let cfg = SyncConfig {
            max_iters: 50,
            stop_tol: 0.0,
            ..SyncConfig::default()
        };
        let out = strong_solve(&problem, &inst.true_positions, &cfg).unwrap();
        for (a, b) in out.x.as_flat().iter().zip(inst.true_positions.as_flat()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(out.trajectory.iter().all(|r| r.cost < 1e-12));
    }

    #[test]
    fn zero_iterations_return_init_and_counts_broadcasts() {
        let inst = instance(5);
        let m = Measurements::noiseless(&inst);
        let radii = HuberRadii::uniform(&inst.topology, 80.0);
        let problem = Problem::new(&inst.topology, &inst.anchor_positions, &m, &radii).unwrap();
        let init = Points::zeros(10, 2);
        let out = strong_solve(
            &problem,
            &init,
            &SyncConfig {
                max_iters: 0,
                ..SyncConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out.x, init);
        assert_eq!(out.broadcast_count, 0);
        let out = strong_solve(
            &problem,
            &init,
            &SyncConfig {
                max_iters: 7,
                stop_tol: 0.0,
                ..SyncConfig::default()
            },
        )
        .unwrap();
        assert_eq!(out.broadcast_count, 70);
        assert_eq!(out.trajectory.len(), 8);
    }

    #[test]
    fn nodes_read_only_neighbor_messages_and_stay_feasible() {
        let inst = instance(6);
        let regular = NoiseModel::Gaussian { sigma: 40.0 };
        let m = sample_measurements(&inst, &regular, &FaultSpec::none(), &mut stream(6, 1)).unwrap();
        let radii = HuberRadii::uniform(&inst.topology, 80.0);
        let problem = Problem::new(&inst.topology, &inst.anchor_positions, &m, &radii).unwrap();
        let init = Points::zeros(10, 2);
        let mut sim = SyncSimulation::new(&problem, &init, lipschitz_constant(&inst.topology)).unwrap();
        for _ in 0..200 {
            sim.round().unwrap();
            for i in 0..10 {
                let mut expected: Vec<usize> = inst.topology.incident(i).iter().map(|e| e.neighbor).collect();
                let mut senders = sim.inbox(i).senders().to_vec();
                let mut read = sim.inbox(i).accessed().to_vec();
                expected.sort_unstable();
                senders.sort_unstable();
                read.sort_unstable();
                assert_eq!(senders, expected);
                assert_eq!(read, expected);
            }
            assert!(sim.stacked().is_feasible(&m));
        }
    }

    #[test]
    fn cost_decreases_overall() {
        let inst = instance(8);
        let regular = NoiseModel::Gaussian { sigma: 40.0 };
        let m = sample_measurements(&inst, &regular, &FaultSpec::none(), &mut stream(8, 1)).unwrap();
        let radii = HuberRadii::uniform(&inst.topology, 80.0);
        let problem = Problem::new(&inst.topology, &inst.anchor_positions, &m, &radii).unwrap();
        let init = Points::zeros(10, 2);
        let out = strong_solve(&problem, &init, &SyncConfig::default()).unwrap();
        let first = out.trajectory.first().unwrap().cost;
        let last = out.trajectory.last().unwrap().cost;
        assert!(last < first);
        let long = SyncConfig {
            max_iters: 20_000,
            stop_tol: 0.0,
            ..SyncConfig::default()
        };
        let best = strong_solve(&problem, &init, &long)
            .unwrap()
            .trajectory
            .last()
            .unwrap()
            .cost;
        assert!(last - best <= 1e-4 * (1.0 + best), "{last} vs {best}");
    }

    #[test]
    fn divergence_is_reported() {
        let inst = instance(9);
        let m = Measurements::noiseless(&inst);
        let radii = HuberRadii::quadratic(&inst.topology, 1000.0);
        let problem = Problem::new(&inst.topology, &inst.anchor_positions, &m, &radii).unwrap();
        let init = Points::zeros(10, 2);
        // A step of 1e300 overflows the positions within a few rounds.
        let cfg = SyncConfig {
            max_iters: 50,
            stop_tol: 0.0,
            lipschitz_override: Some(1e-300),
            record_iterates: false,
        };
        let res = strong_solve(&problem, &init, &cfg);
        assert!(
            matches!(res, Err(Error::Divergence { .. })),
            "{:?}",
            res.map(|o| o.iterations)
        );
    }
}
