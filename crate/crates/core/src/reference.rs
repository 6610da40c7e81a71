//! Centralized matrix-form reference solver.
//!
//! Materializes `B = [A -I 0]` and `E = [M 0 -I]`, where `A` is the incidence
//! matrix expanded to coordinates and `M` selects the sensor of each anchor
//! link, and runs the accelerated projected gradient iteration on the stacked
//! vector `z = (x, y, w)` with gradient `B' P_D(B z) + E' P_R(E z - alpha)`.
//! It shares no assembly code with the per-node solver and serves as its
//! equivalence oracle and as the source of reference optima.

use nalgebra::{DMatrix, DVector};

use crate::cost::{project_ball_in_place, psi, Problem, StackedPoint};
use crate::error::{Error, Result};
use crate::linalg::{dist, norm, Points};
use crate::sync_solver::SyncConfig;

#[derive(Debug, Clone)]
pub struct ReferenceOutcome {
    pub z: StackedPoint,
    /// `F(z[t])` for `t = 0..=iterations`.
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    /// Position iterates when requested by the config.
    pub iterates: Vec<Points>,
}

struct Operators {
    b: DMatrix<f64>,
    e: DMatrix<f64>,
    alpha: DVector<f64>,
    edge_radii: Vec<f64>,
    anchor_radii: Vec<f64>,
    edge_ranges: Vec<f64>,
    anchor_ranges: Vec<f64>,
    p: usize,
    nx: usize,
    ny: usize,
}

impl Operators {
    fn build(problem: &Problem<'_>) -> Self {
        let t = problem.topology;
        let p = problem.dim();
        let n = t.n();
        let ne = t.edges().len();
        let nl = t.anchor_links().len();
        let (nx, ny, nw) = (n * p, ne * p, nl * p);
        let dimz = nx + ny + nw;

        let c = t.incidence_matrix();
        let a = c.kronecker(&DMatrix::<f64>::identity(p, p));
        let mut b = DMatrix::zeros(ny, dimz);
        b.view_mut((0, 0), (ny, nx)).copy_from(&a);
        b.view_mut((0, nx), (ny, ny)).fill_with_identity();
        b.view_mut((0, nx), (ny, ny)).neg_mut();

        let mut sel = DMatrix::zeros(nl, n);
        let mut alpha = DVector::zeros(nw);
        for (l, &(i, k)) in t.anchor_links().iter().enumerate() {
            sel[(l, i)] = 1.0;
            alpha.rows_mut(l * p, p).copy_from_slice(problem.anchors.get(k));
        }
        let m = sel.kronecker(&DMatrix::<f64>::identity(p, p));
        let mut e = DMatrix::zeros(nw, dimz);
        e.view_mut((0, 0), (nw, nx)).copy_from(&m);
        e.view_mut((0, nx + ny), (nw, nw)).fill_with_identity();
        e.view_mut((0, nx + ny), (nw, nw)).neg_mut();

        Self {
            b,
            e,
            alpha,
            edge_radii: problem.radii.edge.clone(),
            anchor_radii: problem.radii.anchor.clone(),
            edge_ranges: problem.measurements.d.clone(),
            anchor_ranges: problem.measurements.r.clone(),
            p,
            nx,
            ny,
        }
    }

    fn project_blocks(v: &mut DVector<f64>, p: usize, radii: &[f64]) {
        for (blk, r) in v.as_mut_slice().chunks_exact_mut(p).zip(radii) {
            project_ball_in_place(blk, *r);
        }
    }

    fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut bz = &self.b * z;
        Self::project_blocks(&mut bz, self.p, &self.edge_radii);
        let mut ez = &self.e * z - &self.alpha;
        Self::project_blocks(&mut ez, self.p, &self.anchor_radii);
        self.b.tr_mul(&bz) + self.e.tr_mul(&ez)
    }

    fn cost(&self, z: &DVector<f64>) -> f64 {
        let bz = &self.b * z;
        let ez = &self.e * z - &self.alpha;
        let edges: f64 = bz
            .as_slice()
            .chunks_exact(self.p)
            .zip(&self.edge_radii)
            .map(|(u, r)| 0.5 * psi(*r, u))
            .sum();
        let links: f64 = ez
            .as_slice()
            .chunks_exact(self.p)
            .zip(&self.anchor_radii)
            .map(|(u, r)| 0.5 * psi(*r, u))
            .sum();
        edges + links
    }

    /// Projection onto the constraint set: `x` is free, `y` and `w` blocks
    /// go onto balls of the measured ranges.
    fn project_feasible(&self, z: &mut DVector<f64>) {
        let (nx, ny) = (self.nx, self.ny);
        let s = z.as_mut_slice();
        for (blk, d) in s[nx..nx + ny].chunks_exact_mut(self.p).zip(&self.edge_ranges) {
            project_ball_in_place(blk, *d);
        }
        for (blk, r) in s[nx + ny..].chunks_exact_mut(self.p).zip(&self.anchor_ranges) {
            project_ball_in_place(blk, *r);
        }
    }

    fn initial(&self, x0: &Points) -> DVector<f64> {
        let dimz = self.b.ncols();
        let mut z = DVector::zeros(dimz);
        z.rows_mut(0, self.nx).copy_from_slice(x0.as_flat());
        // y = P(A x), w = P(M x - alpha): start from z with zero auxiliaries.
        let ax = &self.b * &z;
        let mx = &self.e * &z - &self.alpha;
        z.rows_mut(self.nx, self.ny).copy_from(&ax);
        z.rows_mut(self.nx + self.ny, mx.len()).copy_from(&mx);
        self.project_feasible(&mut z);
        z
    }

    fn positions(&self, z: &DVector<f64>) -> Points {
        Points::from_flat(self.p, z.as_slice()[..self.nx].to_vec()).expect("dim")
    }

    fn max_relative_change(&self, cur: &DVector<f64>, prev: &DVector<f64>) -> f64 {
        let a = &cur.as_slice()[..self.nx];
        let b = &prev.as_slice()[..self.nx];
        a.chunks_exact(self.p)
            .zip(b.chunks_exact(self.p))
            .map(|(c, q)| dist(c, q) / (1.0 + norm(c)))
            .fold(0.0, f64::max)
    }
}

/// Centralized accelerated projected gradient on the lifted problem, with the
/// same extrapolation, step and stopping rule as the distributed solver.
pub fn reference_fista_solve(problem: &Problem<'_>, init_x: &Points, config: &SyncConfig) -> Result<ReferenceOutcome> {
    config.validate()?;
    let n = problem.topology.n();
    if init_x.len() != n || init_x.dim() != problem.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} initial positions in R^{}", problem.dim()),
            found: format!("{} in R^{}", init_x.len(), init_x.dim()),
        });
    }
    let ops = Operators::build(problem);
    let step = 1.0 / config.lipschitz(problem);

    let mut z = ops.initial(init_x);
    let mut z_prev = z.clone();
    let mut trajectory = vec![ops.cost(&z)];
    let mut iterates = Vec::new();
    if config.record_iterates {
        iterates.push(ops.positions(&z));
    }

    let mut t = 0;
    while t < config.max_iters {
        t += 1;
        let beta = crate::linalg::momentum(t);
        let zeta = &z + (&z - &z_prev) * beta;
        let mut next = &zeta - ops.gradient(&zeta) * step;
        ops.project_feasible(&mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: t });
        }
        z_prev = std::mem::replace(&mut z, next);
        trajectory.push(ops.cost(&z));
        if config.record_iterates {
            iterates.push(ops.positions(&z));
        }
        if ops.max_relative_change(&z, &z_prev) < config.stop_tol {
            break;
        }
    }

    let shape = StackedPoint {
        x: Points::zeros(n, ops.p),
        y: Points::zeros(problem.topology.edges().len(), ops.p),
        w: Points::zeros(problem.topology.anchor_links().len(), ops.p),
    };
    Ok(ReferenceOutcome {
        z: StackedPoint::from_flat_like(&shape, z.as_slice()),
        trajectory,
        iterations: t,
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::HuberRadii;
    use crate::geometry::NetworkTopology;
    use crate::noise::Measurements;

    #[test]
    fn zero_iterations_return_init() {
        let t = NetworkTopology::new(2, 1, 2, vec![(0, 1)], vec![(0, 0)]).unwrap();
        let a = Points::from_rows(2, &[vec![0.0, 0.0]]).unwrap();
        let m = Measurements {
            d: vec![1.0],
            r: vec![1.0],
        };
        let radii = HuberRadii::uniform(&t, 0.5);
        let problem = Problem::new(&t, &a, &m, &radii).unwrap();
        let x0 = Points::from_rows(2, &[vec![3.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let cfg = SyncConfig {
            max_iters: 0,
            ..SyncConfig::default()
        };
        let out = reference_fista_solve(&problem, &x0, &cfg).unwrap();
        assert_eq!(out.z.x, x0);
        assert_eq!(out.z, problem.lift(&x0).unwrap());
        assert_eq!(out.trajectory.len(), 1);
    }

    #[test]
    fn gradient_matches_per_node_assembly() {
        let t = NetworkTopology::new(3, 2, 2, vec![(0, 1), (1, 2), (0, 2)], vec![(0, 0), (2, 1)]).unwrap();
        let a = Points::from_rows(2, &[vec![0.0, 0.0], vec![5.0, 1.0]]).unwrap();
        let m = Measurements {
            d: vec![1.0, 2.0, 0.5],
            r: vec![1.5, 0.7],
        };
        let radii = HuberRadii {
            edge: vec![0.3, 1.0, 2.0],
            anchor: vec![0.4, 0.9],
        };
        let problem = Problem::new(&t, &a, &m, &radii).unwrap();
        let x = Points::from_rows(2, &[vec![1.0, 2.0], vec![-1.0, 0.5], vec![3.0, 3.0]]).unwrap();
        let z = problem.lift(&x).unwrap();
        let ops = Operators::build(&problem);
        let g = ops.gradient(&DVector::from_vec(z.flat()));
        let h = problem.stacked_gradient(&z).flat();
        for (a, b) in g.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((ops.cost(&DVector::from_vec(z.flat())) - problem.stacked_cost(&z).unwrap()).abs() < 1e-12);
    }
}
