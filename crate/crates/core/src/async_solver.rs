//! Asynchronous randomized solver.
//!
//! At each tick one node, drawn i.i.d. from an activation distribution, wakes
//! up, minimizes its local cost with its neighbors' last broadcast positions
//! held fixed, and broadcasts its new position. Each node keeps a private
//! copy of every incident edge variable, so the monitored objective is the
//! duplicated-variable cost
//!
//! ```text
//! sum_i [ sum_{j in N_i} 1/4 psi_D(x_i - x_j - y_ij^(i)) + sum_{k in A_i} 1/2 psi_R(x_i - a_k - w_ik) ]
//! ```
//!
//! Two weightings of the edge terms in the local problem are supported.
//! [`EdgeWeight::Split`] uses `1/4`, the per-node share of each duplicated
//! edge term. [`EdgeWeight::Exact`] uses `1/2`: together with the receivers
//! refreshing their copy of the shared edge variable on each broadcast, an
//! activation is then an exact minimization of the duplicated cost over the
//! awakened node's block, and the cost never increases.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::{lipschitz_constant, project_ball_in_place, psi, Problem, StackedPoint};
use crate::error::{Error, Result};
use crate::linalg::{sub_into, Points};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeWeight {
    #[default]
    Split,
    Exact,
}

impl EdgeWeight {
    pub fn value(self) -> f64 {
        match self {
            EdgeWeight::Split => 0.25,
            EdgeWeight::Exact => 0.5,
        }
    }
}

/// I.i.d. node activation with strictly positive probabilities.
#[derive(Debug, Clone)]
pub struct ActivationModel {
    probabilities: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl ActivationModel {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::Config("activation model needs at least one node".into()));
        }
        if probabilities.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::Config("every activation probability must be positive".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("activation probabilities sum to {total}, not 1")));
        }
        let index = WeightedIndex::new(&probabilities).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self { probabilities, index })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsyncConfig {
    pub num_activations: usize,
    /// Inner solves stop once the relative cost decrease of one step drops
    /// below this value.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub edge_weight: EdgeWeight,
    #[serde(default)]
    pub lipschitz_override: Option<f64>,
    /// Evaluate the expected improvement every this many activations (and at
    /// the start and end). `None` disables it.
    #[serde(default)]
    pub phi_every: Option<usize>,
}

impl Default for AsyncConfig {
    fn default() -> Self {
        Self {
            num_activations: 20_000,
            inner_tol: 1e-9,
            inner_max_iters: 2000,
            edge_weight: EdgeWeight::Split,
            lipschitz_override: None,
            phi_every: None,
        }
    }
}

impl AsyncConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inner_tol >= 0.0) {
            return Err(Error::Config("inner_tol must be non-negative".into()));
        }
        if self.inner_max_iters == 0 {
            return Err(Error::Config("inner_max_iters must be at least 1".into()));
        }
        if let Some(l) = self.lipschitz_override {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config("Lipschitz override must be positive".into()));
            }
        }
        if self.phi_every == Some(0) {
            return Err(Error::Config("phi_every must be positive".into()));
        }
        Ok(())
    }

    fn local_options(&self, problem: &Problem<'_>, edge_weight: EdgeWeight) -> LocalOptions {
        LocalOptions {
            inner_tol: self.inner_tol,
            max_iters: self.inner_max_iters,
            edge_weight,
            lipschitz: self
                .lipschitz_override
                .unwrap_or_else(|| lipschitz_constant(problem.topology)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    pub inner_tol: f64,
    pub max_iters: usize,
    pub edge_weight: EdgeWeight,
    pub lipschitz: f64,
}

/// Node `i`'s share of the variables: its position, its copies of incident
/// edge variables (incident order, oriented `x_i - x_j - y`), and its
/// anchor-link variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBlock {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

/// The single-node problem solved on activation.
#[derive(Debug, Clone)]
pub struct LocalProblem {
    dim: usize,
    neighbors: Vec<f64>,
    edge_ranges: Vec<f64>,
    edge_radii: Vec<f64>,
    anchors: Vec<f64>,
    anchor_ranges: Vec<f64>,
    anchor_radii: Vec<f64>,
    edge_weight: f64,
}

#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub block: LocalBlock,
    pub cost: f64,
    pub iterations: usize,
}

impl LocalProblem {
    /// Local problem of node `i` with neighbor positions `neighbor_x` given in
    /// incident-edge order.
    pub fn new(problem: &Problem<'_>, i: usize, neighbor_x: &[f64], edge_weight: EdgeWeight) -> Result<Self> {
        let t = problem.topology;
        let p = problem.dim();
        let inc = t.incident(i);
        if neighbor_x.len() != inc.len() * p {
            return Err(Error::ShapeMismatch {
                expected: format!("{} neighbor coordinates", inc.len() * p),
                found: neighbor_x.len().to_string(),
            });
        }
        let links = t.links_of(i);
        Ok(Self {
            dim: p,
            neighbors: neighbor_x.to_vec(),
            edge_ranges: inc.iter().map(|e| problem.measurements.d[e.edge]).collect(),
            edge_radii: inc.iter().map(|e| problem.radii.edge[e.edge]).collect(),
            anchors: links
                .iter()
                .flat_map(|&l| problem.anchors.get(t.anchor_links()[l].1).iter().copied())
                .collect(),
            anchor_ranges: links.iter().map(|&l| problem.measurements.r[l]).collect(),
            anchor_radii: links.iter().map(|&l| problem.radii.anchor[l]).collect(),
            edge_weight: edge_weight.value(),
        })
    }

    fn degree(&self) -> usize {
        self.edge_ranges.len()
    }

    fn link_count(&self) -> usize {
        self.anchor_ranges.len()
    }

    pub fn cost(&self, b: &LocalBlock) -> f64 {
        let p = self.dim;
        let mut u = vec![0.0; p];
        let mut total = 0.0;
        for s in 0..self.degree() {
            for c in 0..p {
                u[c] = b.x[c] - self.neighbors[s * p + c] - b.y[s * p + c];
            }
            total += self.edge_weight * psi(self.edge_radii[s], &u);
        }
        for s in 0..self.link_count() {
            for c in 0..p {
                u[c] = b.x[c] - self.anchors[s * p + c] - b.w[s * p + c];
            }
            total += 0.5 * psi(self.anchor_radii[s], &u);
        }
        total
    }

    fn gradient(&self, b: &LocalBlock, g: &mut LocalBlock) {
        let p = self.dim;
        let mut u = vec![0.0; p];
        g.x.iter_mut().for_each(|v| *v = 0.0);
        let scale = 2.0 * self.edge_weight;
        for s in 0..self.degree() {
            for c in 0..p {
                u[c] = b.x[c] - self.neighbors[s * p + c] - b.y[s * p + c];
            }
            project_ball_in_place(&mut u, self.edge_radii[s]);
            for c in 0..p {
                g.x[c] += scale * u[c];
                g.y[s * p + c] = -scale * u[c];
            }
        }
        for s in 0..self.link_count() {
            for c in 0..p {
                u[c] = b.x[c] - self.anchors[s * p + c] - b.w[s * p + c];
            }
            project_ball_in_place(&mut u, self.anchor_radii[s]);
            for c in 0..p {
                g.x[c] += u[c];
                g.w[s * p + c] = -u[c];
            }
        }
    }

    fn project(&self, b: &mut LocalBlock) {
        let p = self.dim;
        for (blk, d) in b.y.chunks_exact_mut(p).zip(&self.edge_ranges) {
            project_ball_in_place(blk, *d);
        }
        for (blk, r) in b.w.chunks_exact_mut(p).zip(&self.anchor_ranges) {
            project_ball_in_place(blk, *r);
        }
    }

    /// Sets every edge copy to its optimal value for the current position.
    fn reset_edge_copies(&self, b: &mut LocalBlock) {
        let p = self.dim;
        for s in 0..self.degree() {
            let y = &mut b.y[s * p..(s + 1) * p];
            sub_into(&b.x, &self.neighbors[s * p..(s + 1) * p], y);
            project_ball_in_place(y, self.edge_ranges[s]);
        }
    }

    /// Accelerated projected gradient from `warm`, step `1 / L`. Returns the
    /// best iterate seen, so the result never costs more than the (projected)
    /// warm start.
    pub fn solve(&self, warm: LocalBlock, opts: &LocalOptions) -> Result<LocalSolution> {
        let p = self.dim;
        if warm.x.len() != p || warm.y.len() != self.degree() * p || warm.w.len() != self.link_count() * p {
            return Err(Error::ShapeMismatch {
                expected: "warm start matching the local problem".into(),
                found: format!("x {}, y {}, w {}", warm.x.len(), warm.y.len(), warm.w.len()),
            });
        }
        let step = 1.0 / opts.lipschitz;
        let mut cur = warm;
        self.project(&mut cur);
        let mut prev = cur.clone();
        let mut grad = cur.clone();
        let mut zeta = cur.clone();
        let mut cost = self.cost(&cur);
        let mut best = (cost, cur.clone());

        let mut iterations = 0;
        while iterations < opts.max_iters {
            iterations += 1;
            let beta = crate::linalg::momentum(iterations);
            for (dst, (c, q)) in [
                (&mut zeta.x, (&cur.x, &prev.x)),
                (&mut zeta.y, (&cur.y, &prev.y)),
                (&mut zeta.w, (&cur.w, &prev.w)),
            ] {
                crate::linalg::extrapolate_into(c, q, beta, dst);
            }
            self.gradient(&zeta, &mut grad);
            std::mem::swap(&mut prev, &mut cur);
            for (dst, (z, g)) in [
                (&mut cur.x, (&zeta.x, &grad.x)),
                (&mut cur.y, (&zeta.y, &grad.y)),
                (&mut cur.w, (&zeta.w, &grad.w)),
            ] {
                for ((d, zv), gv) in dst.iter_mut().zip(z.iter()).zip(g.iter()) {
                    *d = zv - step * gv;
                }
            }
            self.project(&mut cur);

            let next_cost = self.cost(&cur);
            if !next_cost.is_finite() {
                return Err(Error::Divergence { iteration: iterations });
            }
            if next_cost < best.0 {
                best = (next_cost, cur.clone());
            }
            let decrease = cost - next_cost;
            cost = next_cost;
            if decrease >= 0.0 && decrease <= opts.inner_tol * cost.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        Ok(LocalSolution {
            cost: best.0,
            block: best.1,
            iterations,
        })
    }
}

/// Convenience wrapper: solve node `i`'s local problem from a warm start.
pub fn local_solve(
    problem: &Problem<'_>,
    i: usize,
    neighbor_x: &[f64],
    warm: LocalBlock,
    opts: &LocalOptions,
) -> Result<LocalSolution> {
    LocalProblem::new(problem, i, neighbor_x, opts.edge_weight)?.solve(warm, opts)
}

/// Per-node variables of the asynchronous network.
#[derive(Debug, Clone, PartialEq)]
pub struct AsyncState {
    pub x: Points,
    /// Node `i`'s edge copies, incident order, flattened.
    pub y: Vec<Vec<f64>>,
    /// Anchor-link variables, indexed like the topology's links.
    pub w: Points,
    /// Last position heard from each neighbor, incident order, flattened.
    pub heard: Vec<Vec<f64>>,
}

impl AsyncState {
    /// Every node picks its initial position and broadcasts it; edge and
    /// anchor variables start at the projections of the initial differences.
    pub fn initial(problem: &Problem<'_>, x0: &Points) -> Result<Self> {
        let t = problem.topology;
        let p = problem.dim();
        if x0.len() != t.n() || x0.dim() != p {
            return Err(Error::ShapeMismatch {
                expected: format!("{} initial positions in R^{p}", t.n()),
                found: format!("{} in R^{}", x0.len(), x0.dim()),
            });
        }
        let heard: Vec<Vec<f64>> = (0..t.n())
            .map(|i| {
                t.incident(i)
                    .iter()
                    .flat_map(|e| x0.get(e.neighbor).iter().copied())
                    .collect()
            })
            .collect();
        let mut y = Vec::with_capacity(t.n());
        for i in 0..t.n() {
            let mut yi = vec![0.0; t.incident(i).len() * p];
            for (s, e) in t.incident(i).iter().enumerate() {
                let blk = &mut yi[s * p..(s + 1) * p];
                sub_into(x0.get(i), x0.get(e.neighbor), blk);
                project_ball_in_place(blk, problem.measurements.d[e.edge]);
            }
            y.push(yi);
        }
        let lifted = problem.lift(x0)?;
        Ok(Self {
            x: x0.clone(),
            y,
            w: lifted.w,
            heard,
        })
    }

    /// Duplicated-variable cost.
    pub fn cost(&self, problem: &Problem<'_>) -> f64 {
        let t = problem.topology;
        let p = problem.dim();
        let mut u = vec![0.0; p];
        let mut total = 0.0;
        for i in 0..t.n() {
            let xi = self.x.get(i);
            for (s, e) in t.incident(i).iter().enumerate() {
                let xj = self.x.get(e.neighbor);
                for c in 0..p {
                    u[c] = xi[c] - xj[c] - self.y[i][s * p + c];
                }
                total += 0.25 * psi(problem.radii.edge[e.edge], &u);
            }
        }
        for (l, &(i, k)) in t.anchor_links().iter().enumerate() {
            crate::linalg::sub3_into(self.x.get(i), problem.anchors.get(k), self.w.get(l), &mut u);
            total += 0.5 * psi(problem.radii.anchor[l], &u);
        }
        total
    }

    pub fn is_feasible(&self, problem: &Problem<'_>) -> bool {
        let t = problem.topology;
        let p = problem.dim();
        let tol = 1.0 + crate::cost::FEASIBILITY_RTOL;
        let edges_ok = (0..t.n()).all(|i| {
            t.incident(i).iter().enumerate().all(|(s, e)| {
                crate::linalg::norm(&self.y[i][s * p..(s + 1) * p]) <= problem.measurements.d[e.edge] * tol
            })
        });
        let links_ok = self
            .w
            .iter()
            .zip(&problem.measurements.r)
            .all(|(v, r)| crate::linalg::norm(v) <= r * tol);
        edges_ok && links_ok
    }

    /// Lifted point using the lower endpoint's copy of each edge variable.
    pub fn to_stacked(&self, problem: &Problem<'_>) -> StackedPoint {
        let t = problem.topology;
        let p = problem.dim();
        let mut y = Points::zeros(t.edges().len(), p);
        for i in 0..t.n() {
            for (s, e) in t.incident(i).iter().enumerate() {
                if e.sign > 0.0 {
                    y.set(e.edge, &self.y[i][s * p..(s + 1) * p]);
                }
            }
        }
        StackedPoint {
            x: self.x.clone(),
            y,
            w: self.w.clone(),
        }
    }

    fn block(&self, problem: &Problem<'_>, i: usize) -> LocalBlock {
        LocalBlock {
            x: self.x.get(i).to_vec(),
            y: self.y[i].clone(),
            w: problem
                .topology
                .links_of(i)
                .iter()
                .flat_map(|&l| self.w.get(l).iter().copied())
                .collect(),
        }
    }

    /// Wakes node `i`: local solve, write back its block, broadcast. With
    /// exact weighting the receivers also refresh their copy of the shared
    /// edge variable from the broadcast position.
    pub fn activate(&mut self, problem: &Problem<'_>, i: usize, opts: &LocalOptions) -> Result<LocalSolution> {
        let t = problem.topology;
        let p = problem.dim();
        let local = LocalProblem::new(problem, i, &self.heard[i], opts.edge_weight)?;
        let mut warm = self.block(problem, i);
        if opts.edge_weight == EdgeWeight::Exact {
            local.reset_edge_copies(&mut warm);
        }
        let sol = local.solve(warm, opts)?;

        self.x.set(i, &sol.block.x);
        self.y[i].copy_from_slice(&sol.block.y);
        for (s, &l) in t.links_of(i).iter().enumerate() {
            self.w.set(l, &sol.block.w[s * p..(s + 1) * p]);
        }

        for inc in t.incident(i) {
            let j = inc.neighbor;
            let slot = t
                .incident(j)
                .iter()
                .position(|e| e.edge == inc.edge)
                .expect("edge listed at both endpoints");
            self.heard[j][slot * p..(slot + 1) * p].copy_from_slice(&sol.block.x);
            if opts.edge_weight == EdgeWeight::Exact {
                let blk = &mut self.y[j][slot * p..(slot + 1) * p];
                sub_into(self.x.get(j), &sol.block.x, blk);
                project_ball_in_place(blk, problem.measurements.d[inc.edge]);
            }
        }
        Ok(sol)
    }
}

/// Expected one-activation decrease of the duplicated cost when the woken
/// node performs an exact block minimization:
/// `sum_i P_i (F(state) - F(state after activating i))`.
pub fn expected_improvement(
    problem: &Problem<'_>,
    state: &AsyncState,
    model: &ActivationModel,
    inner_tol: f64,
    inner_max_iters: usize,
) -> Result<f64> {
    let base = state.cost(problem);
    let opts = LocalOptions {
        inner_tol,
        max_iters: inner_max_iters,
        edge_weight: EdgeWeight::Exact,
        lipschitz: lipschitz_constant(problem.topology),
    };
    let mut phi = 0.0;
    for (i, p_i) in model.probabilities().iter().enumerate() {
        let mut trial = state.clone();
        trial.activate(problem, i, &opts)?;
        phi += p_i * (base - trial.cost(problem));
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsyncRecord {
    pub activation: usize,
    /// `None` for the initial record.
    pub node: Option<usize>,
    pub cost: f64,
    pub phi: Option<f64>,
    pub broadcast_count: usize,
}

#[derive(Debug, Clone)]
pub struct AsyncOutcome {
    pub x: Points,
    pub state: AsyncState,
    pub trajectory: Vec<AsyncRecord>,
    pub activations: usize,
    pub broadcast_count: usize,
}

/// Runs `config.num_activations` random activations from `init_x`.
pub fn async_solve<R: Rng + ?Sized>(
    problem: &Problem<'_>,
    init_x: &Points,
    model: &ActivationModel,
    config: &AsyncConfig,
    rng: &mut R,
) -> Result<AsyncOutcome> {
    config.validate()?;
    if model.probabilities().len() != problem.topology.n() {
        return Err(Error::Config("activation model size does not match the network".into()));
    }
    let opts = config.local_options(problem, config.edge_weight);
    let mut state = AsyncState::initial(problem, init_x)?;
    let phi_at = |t: usize, state: &AsyncState| -> Result<Option<f64>> {
        match config.phi_every {
            Some(every) if t.is_multiple_of(every) || t == config.num_activations => {
                expected_improvement(problem, state, model, config.inner_tol, config.inner_max_iters).map(Some)
            }
            _ => Ok(None),
        }
    };

    let mut trajectory = Vec::with_capacity(config.num_activations + 1);
    trajectory.push(AsyncRecord {
        activation: 0,
        node: None,
        cost: state.cost(problem),
        phi: phi_at(0, &state)?,
        broadcast_count: 0,
    });
    for t in 1..=config.num_activations {
        let i = model.sample(rng);
        state.activate(problem, i, &opts).map_err(|e| match e {
            Error::Divergence { .. } => Error::Divergence { iteration: t },
            other => other,
        })?;
        trajectory.push(AsyncRecord {
            activation: t,
            node: Some(i),
            cost: state.cost(problem),
            phi: phi_at(t, &state)?,
            broadcast_count: t,
        });
    }

    Ok(AsyncOutcome {
        x: state.x.clone(),
        state,
        trajectory,
        activations: config.num_activations,
        broadcast_count: config.num_activations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::HuberRadii;
    use crate::geometry::NetworkTopology;
    use crate::noise::Measurements;
    use crate::rng::stream;

    #[test]
    fn activation_model_validation() {
        assert!(ActivationModel::new(vec![1.0, 0.0, 0.0]).is_err());
        assert!(ActivationModel::new(vec![0.5, 0.6]).is_err());
        assert!(ActivationModel::new(vec![]).is_err());
        let single = ActivationModel::uniform(1).unwrap();
        let mut rng = stream(0, 0);
        assert!((0..100).all(|_| single.sample(&mut rng) == 0));
    }

    #[test]
    fn activation_frequencies_are_uniform() {
        let model = ActivationModel::uniform(10).unwrap();
        let mut rng = stream(17, 0);
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..draws {
            counts[model.sample(&mut rng)] += 1;
        }
        let sd = (draws as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    fn one_neighbor_one_anchor() -> (NetworkTopology, Points, Measurements, HuberRadii, Points) {
        let t = NetworkTopology::new(2, 1, 2, vec![(0, 1)], vec![(0, 0)]).unwrap();
        let a = Points::from_rows(2, &[vec![0.0, 0.0]]).unwrap();
        let truth = Points::from_rows(2, &[vec![3.0, 4.0], vec![3.0, 10.0]]).unwrap();
        let m = Measurements {
            d: vec![6.0],
            r: vec![5.0],
        };
        let radii = HuberRadii::uniform(&t, 1.0);
        (t, a, m, radii, truth)
    }

    #[test]
    fn consistent_local_problem_reaches_zero() {
        let (t, a, m, radii, truth) = one_neighbor_one_anchor();
        let problem = Problem::new(&t, &a, &m, &radii).unwrap();
        let opts = LocalOptions {
            inner_tol: 1e-12,
            max_iters: 5000,
            edge_weight: EdgeWeight::Split,
            lipschitz: 5.0,
        };
        let warm = LocalBlock {
            x: vec![20.0, -7.0],
            y: vec![0.0, 0.0],
            w: vec![0.0, 0.0],
        };
        let sol = local_solve(&problem, 0, truth.get(1), warm, &opts).unwrap();
        assert!(sol.cost < 1e-10, "{}", sol.cost);
        // Zero cost means x is within range of both the neighbor and the anchor.
        assert!(crate::linalg::dist(&sol.block.x, truth.get(1)) <= 6.0 + 1e-5);
        assert!(crate::linalg::norm(&sol.block.x) <= 5.0 + 1e-5);
    }

    #[test]
    fn single_step_configuration() {
        let (t, a, m, radii, truth) = one_neighbor_one_anchor();
        let problem = Problem::new(&t, &a, &m, &radii).unwrap();
        let local = LocalProblem::new(&problem, 0, truth.get(1), EdgeWeight::Exact).unwrap();
        let opts = LocalOptions {
            inner_tol: 0.0,
            max_iters: 1,
            edge_weight: EdgeWeight::Exact,
            lipschitz: 5.0,
        };
        let warm = LocalBlock {
            x: vec![20.0, -7.0],
            y: vec![0.0, 0.0],
            w: vec![0.0, 0.0],
        };
        let sol = local.solve(warm.clone(), &opts).unwrap();
        assert_eq!(sol.iterations, 1);
        let mut g = warm.clone();
        local.gradient(&warm, &mut g);
        let mut expected = warm.clone();
        for (e, gv) in expected.x.iter_mut().zip(&g.x) {
            *e -= gv / 5.0;
        }
        for (e, gv) in expected.y.iter_mut().zip(&g.y) {
            *e -= gv / 5.0;
        }
        for (e, gv) in expected.w.iter_mut().zip(&g.w) {
            *e -= gv / 5.0;
        }
        local.project(&mut expected);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(u, v)| (u - v).abs() <= 1e-12 * (1.0 + v.abs()));
        assert!(close(&sol.block.x, &expected.x));
        assert!(close(&sol.block.y, &expected.y));
        assert!(close(&sol.block.w, &expected.w));
    }

    #[test]
    fn zero_activations_return_init() {
        let (t, a, m, radii, truth) = one_neighbor_one_anchor();
        let problem = Problem::new(&t, &a, &m, &radii).unwrap();
        let model = ActivationModel::uniform(2).unwrap();
        let cfg = AsyncConfig {
            num_activations: 0,
            ..AsyncConfig::default()
        };
        let out = async_solve(&problem, &truth, &model, &cfg, &mut stream(1, 1)).unwrap();
        assert_eq!(out.x, truth);
        assert_eq!(out.broadcast_count, 0);
        assert_eq!(out.trajectory.len(), 1);
    }
}
