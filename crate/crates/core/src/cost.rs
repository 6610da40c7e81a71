//! Cost-function mathematics.
//!
//! Three layers live here:
//!
//! * scalar and vector primitives: the Huber loss, projection onto a
//!   centered ball, the squared distance to that ball, and the
//!   "Huber of a norm" function `psi(delta, v) = |v|^2 - dist^2(v, B_delta)`;
//! * the nonconvex discrepancy `g`, its convex underestimator `f` (each
//!   discrepancy clamped at zero), and the lifted cost `F(x, y, w)` whose
//!   gradient is Lipschitz with a constant that depends only on local degrees;
//! * optimality-gap bounds and a brute-force 1D oracle for the nonconvex
//!   problem.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::NetworkTopology;
use crate::linalg::{dist, norm, norm_sq, sub3_into, Points};
use crate::noise::Measurements;

/// Relative slack accepted by feasibility checks on ball constraints.
pub const FEASIBILITY_RTOL: f64 = 1e-12;

/// Huber loss: `u^2` on `|u| <= delta`, `2 delta |u| - delta^2` beyond.
pub fn huber(delta: f64, u: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("Huber radius must be positive, got {delta}")));
    }
    Ok(huber_value(delta, u))
}

#[inline]
pub(crate) fn huber_value(delta: f64, u: f64) -> f64 {
    let a = u.abs();
    if a <= delta {
        a * a
    } else {
        delta * (2.0 * a - delta)
    }
}

/// Orthogonal projection of `v` onto the ball of radius `rho` at the origin.
pub fn project_ball(v: &[f64], rho: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    project_ball_in_place(&mut out, rho);
    out
}

#[inline]
pub fn project_ball_in_place(v: &mut [f64], rho: f64) {
    let n = norm(v);
    if n > rho {
        let s = rho / n;
        v.iter_mut().for_each(|c| *c *= s);
    }
}

/// Squared Euclidean distance from `v` to the ball of radius `rho`.
pub fn dist_sq_ball(v: &[f64], rho: f64) -> f64 {
    let excess = (norm(v) - rho).max(0.0);
    excess * excess
}

/// `|v|^2 - dist^2(v, B_delta)`, which equals `huber(delta, |v|)`.
#[inline]
pub fn psi(delta: f64, v: &[f64]) -> f64 {
    let n = norm(v);
    if n <= delta {
        norm_sq(v)
    } else {
        // |v|^2 - (|v| - delta)^2 factored as a difference of squares.
        delta * (2.0 * n - delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Quadratic,
    AbsoluteValue,
    Huber,
}

impl Loss {
    pub const ALL: [Loss; 3] = [Loss::Quadratic, Loss::AbsoluteValue, Loss::Huber];

    /// `delta` is only used by the Huber loss.
    #[inline]
    pub fn eval(self, u: f64, delta: f64) -> f64 {
        match self {
            Loss::Quadratic => u * u,
            Loss::AbsoluteValue => u.abs(),
            Loss::Huber => huber_value(delta, u),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Loss::Quadratic => "quadratic",
            Loss::AbsoluteValue => "absolute",
            Loss::Huber => "huber",
        }
    }
}

/// Per-edge and per-anchor-link Huber radii, aligned with the topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuberRadii {
    pub edge: Vec<f64>,
    pub anchor: Vec<f64>,
}

/// Multiplier on the scene size used for the radius that turns the Huber
/// relaxation into the quadratic one.
pub const QUADRATIC_SENTINEL_FACTOR: f64 = 1e6;

impl HuberRadii {
    pub fn uniform(topology: &NetworkTopology, radius: f64) -> Self {
        Self {
            edge: vec![radius; topology.edges().len()],
            anchor: vec![radius; topology.anchor_links().len()],
        }
    }

    /// Radii so large that no residual reaches the linear branch: the lifted
    /// cost becomes the plain squared-norm relaxation.
    pub fn quadratic(topology: &NetworkTopology, scene_size: f64) -> Self {
        Self::uniform(topology, QUADRATIC_SENTINEL_FACTOR * scene_size)
    }

    fn validate(&self, topology: &NetworkTopology) -> Result<()> {
        if self.edge.len() != topology.edges().len() || self.anchor.len() != topology.anchor_links().len() {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "{} edge and {} anchor radii",
                    topology.edges().len(),
                    topology.anchor_links().len()
                ),
                found: format!("{} and {}", self.edge.len(), self.anchor.len()),
            });
        }
        if self.edge.iter().chain(&self.anchor).any(|r| !(*r > 0.0)) {
            return Err(Error::Domain("Huber radii must be positive".into()));
        }
        Ok(())
    }
}

/// Lipschitz constant of the lifted gradient: `2 + 2 * max degree + max
/// anchor links per sensor`.
pub fn lipschitz_constant(topology: &NetworkTopology) -> f64 {
    2.0 + 2.0 * topology.max_degree() as f64 + topology.max_anchor_links() as f64
}

/// The data a cost is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub topology: &'a NetworkTopology,
    pub anchors: &'a Points,
    pub measurements: &'a Measurements,
    pub radii: &'a HuberRadii,
}

impl<'a> Problem<'a> {
    pub fn new(
        topology: &'a NetworkTopology,
        anchors: &'a Points,
        measurements: &'a Measurements,
        radii: &'a HuberRadii,
    ) -> Result<Self> {
        measurements.check_shape(topology)?;
        radii.validate(topology)?;
        if anchors.len() != topology.m() || (topology.m() > 0 && anchors.dim() != topology.dim()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} anchors in R^{}", topology.m(), topology.dim()),
                found: format!("{} in R^{}", anchors.len(), anchors.dim()),
            });
        }
        Ok(Self {
            topology,
            anchors,
            measurements,
            radii,
        })
    }

    pub fn dim(&self) -> usize {
        self.topology.dim()
    }

    fn check_positions(&self, x: &Points) -> Result<()> {
        if x.len() != self.topology.n() || x.dim() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} positions in R^{}", self.topology.n(), self.dim()),
                found: format!("{} in R^{}", x.len(), x.dim()),
            });
        }
        Ok(())
    }

    /// Edge and anchor discrepancies `|x_i - x_j| - d_ij`, `|x_i - a_k| - r_ik`.
    fn discrepancies<'s>(&'s self, x: &'s Points) -> impl Iterator<Item = (f64, f64)> + 's {
        let m = self.measurements;
        let edges = self
            .topology
            .edges()
            .iter()
            .enumerate()
            .map(move |(e, &(i, j))| (dist(x.get(i), x.get(j)) - m.d[e], self.radii.edge[e]));
        let links = self
            .topology
            .anchor_links()
            .iter()
            .enumerate()
            .map(move |(l, &(i, k))| (dist(x.get(i), self.anchors.get(k)) - m.r[l], self.radii.anchor[l]));
        edges.chain(links)
    }

    /// Nonconvex discrepancy `g` under `loss`.
    pub fn nonconvex_cost(&self, x: &Points, loss: Loss) -> Result<f64> {
        self.check_positions(x)?;
        Ok(self.discrepancies(x).map(|(u, r)| 0.5 * loss.eval(u, r)).sum())
    }

    /// Convex underestimator `f`: each discrepancy clamped at zero.
    pub fn convex_cost(&self, x: &Points, loss: Loss) -> Result<f64> {
        self.check_positions(x)?;
        Ok(self.discrepancies(x).map(|(u, r)| 0.5 * loss.eval(u.max(0.0), r)).sum())
    }

    pub fn nonconvex_cost_gr(&self, x: &Points) -> Result<f64> {
        self.nonconvex_cost(x, Loss::Huber)
    }

    pub fn convex_cost_fr(&self, x: &Points) -> Result<f64> {
        self.convex_cost(x, Loss::Huber)
    }

    /// Lifted cost `F(z)`; `z` must satisfy the ball constraints.
    pub fn stacked_cost(&self, z: &StackedPoint) -> Result<f64> {
        self.check_stacked(z)?;
        if !z.is_feasible(self.measurements) {
            return Err(Error::Infeasible(
                "an edge or anchor variable lies outside its ball".into(),
            ));
        }
        Ok(self.stacked_cost_unchecked(z))
    }

    pub(crate) fn stacked_cost_unchecked(&self, z: &StackedPoint) -> f64 {
        let p = self.dim();
        let mut u = vec![0.0; p];
        let mut total = 0.0;
        for (e, &(i, j)) in self.topology.edges().iter().enumerate() {
            sub3_into(z.x.get(i), z.x.get(j), z.y.get(e), &mut u);
            total += 0.5 * psi(self.radii.edge[e], &u);
        }
        for (l, &(i, k)) in self.topology.anchor_links().iter().enumerate() {
            sub3_into(z.x.get(i), self.anchors.get(k), z.w.get(l), &mut u);
            total += 0.5 * psi(self.radii.anchor[l], &u);
        }
        total
    }

    /// Gradient of `F`, assembled node by node from incident edges and
    /// anchor links. Node `i` sees edge `(i, j)` through its own copy
    /// `sign * y_e` of the edge variable.
    pub fn stacked_gradient(&self, z: &StackedPoint) -> StackedPoint {
        let p = self.dim();
        let t = self.topology;
        let mut g = StackedPoint::zeros_like(z);
        let mut u = vec![0.0; p];
        for i in 0..t.n() {
            let xi = z.x.get(i);
            let mut acc = vec![0.0; p];
            for inc in t.incident(i) {
                let xj = z.x.get(inc.neighbor);
                let ye = z.y.get(inc.edge);
                for c in 0..p {
                    u[c] = xi[c] - xj[c] - inc.sign * ye[c];
                }
                project_ball_in_place(&mut u, self.radii.edge[inc.edge]);
                acc.iter_mut().zip(&u).for_each(|(a, v)| *a += v);
                if inc.sign > 0.0 {
                    g.y.get_mut(inc.edge).iter_mut().zip(&u).for_each(|(gy, v)| *gy = -v);
                }
            }
            for &l in t.links_of(i) {
                let k = t.anchor_links()[l].1;
                sub3_into(xi, self.anchors.get(k), z.w.get(l), &mut u);
                project_ball_in_place(&mut u, self.radii.anchor[l]);
                acc.iter_mut().zip(&u).for_each(|(a, v)| *a += v);
                g.w.get_mut(l).iter_mut().zip(&u).for_each(|(gw, v)| *gw = -v);
            }
            g.x.set(i, &acc);
        }
        g
    }

    fn check_stacked(&self, z: &StackedPoint) -> Result<()> {
        self.check_positions(&z.x)?;
        if z.y.len() != self.topology.edges().len() || z.w.len() != self.topology.anchor_links().len() {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "{} edge and {} anchor variables",
                    self.topology.edges().len(),
                    self.topology.anchor_links().len()
                ),
                found: format!("{} and {}", z.y.len(), z.w.len()),
            });
        }
        Ok(())
    }

    /// Minimizer of `F` over `(y, w)` at fixed `x`: each edge variable is the
    /// projection of the matching position difference onto its range ball.
    pub fn lift(&self, x: &Points) -> Result<StackedPoint> {
        self.check_positions(x)?;
        let p = self.dim();
        let t = self.topology;
        let mut y = Points::zeros(t.edges().len(), p);
        let mut w = Points::zeros(t.anchor_links().len(), p);
        for (e, &(i, j)) in t.edges().iter().enumerate() {
            let ye = y.get_mut(e);
            crate::linalg::sub_into(x.get(i), x.get(j), ye);
            project_ball_in_place(ye, self.measurements.d[e]);
        }
        for (l, &(i, k)) in t.anchor_links().iter().enumerate() {
            let wl = w.get_mut(l);
            crate::linalg::sub_into(x.get(i), self.anchors.get(k), wl);
            project_ball_in_place(wl, self.measurements.r[l]);
        }
        Ok(StackedPoint { x: x.clone(), y, w })
    }
}

/// The lifted variable `z = (x, y, w)`: sensor positions, one vector per
/// edge (oriented lower index first) and one per anchor link.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedPoint {
    pub x: Points,
    pub y: Points,
    pub w: Points,
}

impl StackedPoint {
    pub fn zeros_like(z: &StackedPoint) -> Self {
        let p = z.x.dim();
        Self {
            x: Points::zeros(z.x.len(), p),
            y: Points::zeros(z.y.len(), p),
            w: Points::zeros(z.w.len(), p),
        }
    }

    /// Builds a point from raw data and projects `y`, `w` onto their balls.
    pub fn projected(x: Points, mut y: Points, mut w: Points, measurements: &Measurements) -> Result<Self> {
        if y.len() != measurements.d.len() || w.len() != measurements.r.len() {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "{} edge and {} anchor variables",
                    measurements.d.len(),
                    measurements.r.len()
                ),
                found: format!("{} and {}", y.len(), w.len()),
            });
        }
        for (e, d) in measurements.d.iter().enumerate() {
            project_ball_in_place(y.get_mut(e), *d);
        }
        for (l, r) in measurements.r.iter().enumerate() {
            project_ball_in_place(w.get_mut(l), *r);
        }
        Ok(Self { x, y, w })
    }

    pub fn is_feasible(&self, measurements: &Measurements) -> bool {
        let inside = |v: &[f64], rho: f64| norm(v) <= rho * (1.0 + FEASIBILITY_RTOL) + f64::MIN_POSITIVE;
        self.y.iter().zip(&measurements.d).all(|(v, d)| inside(v, *d))
            && self.w.iter().zip(&measurements.r).all(|(v, r)| inside(v, *r))
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.x.as_flat().len() + self.y.as_flat().len() + self.w.as_flat().len());
        out.extend_from_slice(self.x.as_flat());
        out.extend_from_slice(self.y.as_flat());
        out.extend_from_slice(self.w.as_flat());
        out
    }

    /// Inverse of [`StackedPoint::flat`] using `shape` for the block sizes.
    pub fn from_flat_like(shape: &StackedPoint, data: &[f64]) -> Self {
        let p = shape.x.dim();
        let nx = shape.x.as_flat().len();
        let ny = shape.y.as_flat().len();
        let nw = shape.w.as_flat().len();
        assert_eq!(data.len(), nx + ny + nw, "flat length mismatch");
        Self {
            x: Points::from_flat(p, data[..nx].to_vec()).expect("dim"),
            y: Points::from_flat(p, data[nx..nx + ny].to_vec()).expect("dim"),
            w: Points::from_flat(p, data[nx + ny..].to_vec()).expect("dim"),
        }
    }

    pub fn distance(&self, other: &StackedPoint) -> f64 {
        dist(&self.flat(), &other.flat())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.flat())
    }
}

/// Which loss a gap bound is reported for, with both bounds and, when an
/// oracle was run, the true gap `g* - f*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBoundReport {
    pub loss: Loss,
    pub posterior_bound: f64,
    pub apriori_bound: f64,
    pub true_gap: Option<f64>,
}

/// Bound available after solving the convex problem: the nonconvex terms
/// dropped by clamping at `x_star` (discrepancies that are not positive).
pub fn posterior_gap_bound(problem: &Problem<'_>, x_star: &Points, loss: Loss) -> Result<f64> {
    problem.check_positions(x_star)?;
    Ok(problem
        .discrepancies(x_star)
        .filter(|(u, _)| u.max(0.0) == 0.0)
        .map(|(u, r)| 0.5 * loss.eval(u, r))
        .sum())
}

/// Bound available before solving: every term evaluated at its measured
/// range.
pub fn apriori_gap_bound(measurements: &Measurements, radii: &HuberRadii, loss: Loss) -> f64 {
    let edges = measurements.d.iter().zip(&radii.edge);
    let links = measurements.r.iter().zip(&radii.anchor);
    edges.chain(links).map(|(v, r)| 0.5 * loss.eval(*v, *r)).sum()
}

/// 1D counterpart of [`posterior_gap_bound`] for one unknown node.
pub fn posterior_gap_bound_1d(x_star: f64, anchors: &[f64], ranges: &[f64], radii: &[f64], loss: Loss) -> f64 {
    anchors
        .iter()
        .zip(ranges)
        .map(|(a, r)| (x_star - a).abs() - r)
        .zip(radii)
        .filter(|(u, _)| *u <= 0.0)
        .map(|(u, delta)| 0.5 * loss.eval(u, *delta))
        .sum()
}

/// 1D counterpart of [`apriori_gap_bound`].
pub fn apriori_gap_bound_1d(ranges: &[f64], radii: &[f64], loss: Loss) -> f64 {
    ranges
        .iter()
        .zip(radii)
        .map(|(r, delta)| 0.5 * loss.eval(*r, *delta))
        .sum()
}

/// Single-node 1D cost `sum_k 1/2 loss(|x - a_k| - r_k)`, optionally with the
/// discrepancy clamped at zero.
pub fn cost_1d(x: f64, anchors: &[f64], ranges: &[f64], radii: &[f64], loss: Loss, clamp: bool) -> f64 {
    anchors
        .iter()
        .zip(ranges)
        .zip(radii)
        .map(|((a, r), delta)| {
            let u = (x - a).abs() - r;
            0.5 * loss.eval(if clamp { u.max(0.0) } else { u }, *delta)
        })
        .sum()
}

fn search_interval(anchors: &[f64], ranges: &[f64]) -> (f64, f64) {
    let lo = anchors.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = anchors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = ranges.iter().copied().fold(0.0, f64::max) + 1.0;
    (lo - span, hi + span)
}

/// Golden-section search; exact for unimodal functions up to `x_tol`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, x_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > x_tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mut best = (c, fc);
    for x in [a, b, d] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimizer of the convex 1D underestimator `f` for one unknown node.
/// Returns `(f*, x*)`.
pub fn convex_minimizer_1d(anchors: &[f64], ranges: &[f64], radii: &[f64], loss: Loss) -> (f64, f64) {
    let (lo, hi) = search_interval(anchors, ranges);
    let (x, fx) = golden_section(
        |x| cost_1d(x, anchors, ranges, radii, loss, true),
        lo,
        hi,
        1e-13 * (hi - lo),
    );
    (fx, x)
}

/// Global minimum of the nonconvex 1D cost `g` by dense grid search over
/// `[min a - span, max a + span]` followed by golden-section refinement of
/// every grid-local minimum. The grid is doubled until the refined optimum
/// moves by less than `1e-6` between consecutive resolutions. Returns
/// `(g*, x*)`.
pub fn nonconvex_oracle_1d(anchors: &[f64], ranges: &[f64], radii: &[f64], loss: Loss) -> (f64, f64) {
    let g = |x: f64| cost_1d(x, anchors, ranges, radii, loss, false);
    let (lo, hi) = search_interval(anchors, ranges);

    let refine = |points: usize| -> (f64, f64) {
        let h = (hi - lo) / (points - 1) as f64;
        let values: Vec<f64> = (0..points).map(|k| g(lo + h * k as f64)).collect();
        let mut best = (f64::INFINITY, lo);
        for k in 0..points {
            let left = if k == 0 { f64::INFINITY } else { values[k - 1] };
            let right = if k + 1 == points { f64::INFINITY } else { values[k + 1] };
            if values[k] <= left && values[k] <= right {
                let a = lo + h * k.saturating_sub(1) as f64;
                let b = lo + h * (k + 1).min(points - 1) as f64;
                let (x, gx) = golden_section(g, a, b, 1e-14 * (hi - lo).max(1.0));
                if gx < best.0 {
                    best = (gx, x);
                }
            }
        }
        best
    };

    let mut points = 2001;
    let mut prev = refine(points);
    for _ in 0..8 {
        points = 2 * points - 1;
        let next = refine(points);
        let settled = (next.0 - prev.0).abs() < 1e-6;
        prev = if next.0 < prev.0 { next } else { prev };
        if settled {
            break;
        }
    }
    prev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NetworkTopology;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber(1.0, 0.5).unwrap(), 0.25);
        assert_eq!(huber(1.0, 2.0).unwrap(), 3.0);
        assert_eq!(huber(1.0, -2.0).unwrap(), 3.0);
        let d = 0.37;
        assert!(close(huber(d, d).unwrap(), d * d, 1e-15));
        assert!(close(2.0 * d * d - d * d, d * d, 1e-15));
        assert!(matches!(huber(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(huber(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_ball(&[3.0, 4.0], 10.0), vec![3.0, 4.0]);
        let p = project_ball(&[3.0, 4.0], 1.0);
        assert!(close(p[0], 0.6, 1e-15) && close(p[1], 0.8, 1e-15));
        assert_eq!(project_ball(&[0.0, 0.0], 0.0), vec![0.0, 0.0]);
    }

    #[test]
    fn distance_to_ball_examples() {
        assert_eq!(dist_sq_ball(&[1.0, 0.0], 2.0), 0.0);
        assert_eq!(dist_sq_ball(&[3.0, 0.0], 1.0), 4.0);
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(1.0, &[0.5, 0.0]), 0.25);
        assert_eq!(psi(1.0, &[2.0, 0.0]), 3.0);
    }

    #[test]
    fn lipschitz_examples() {
        // Star center of degree 5 with a leaf holding two anchor links.
        let t = NetworkTopology::new(
            6,
            2,
            2,
            vec![(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)],
            vec![(1, 0), (1, 1)],
        )
        .unwrap();
        assert_eq!(lipschitz_constant(&t), 14.0);
        let pair = NetworkTopology::new(2, 1, 2, vec![(0, 1)], vec![(0, 0)]).unwrap();
        assert_eq!(lipschitz_constant(&pair), 5.0);
    }

    fn one_anchor_problem() -> (NetworkTopology, Points, Measurements, HuberRadii) {
        let t = NetworkTopology::new(1, 1, 1, vec![], vec![(0, 0)]).unwrap();
        let a = Points::from_rows(1, &[vec![0.0]]).unwrap();
        let m = Measurements {
            d: vec![],
            r: vec![0.4],
        };
        let radii = HuberRadii::uniform(&t, 0.8);
        (t, a, m, radii)
    }

    #[test]
    fn one_dimensional_hand_values() {
        let (t, a, m, radii) = one_anchor_problem();
        let p = Problem::new(&t, &a, &m, &radii).unwrap();
        let x0 = Points::from_rows(1, &[vec![0.0]]).unwrap();
        assert!(close(p.nonconvex_cost_gr(&x0).unwrap(), 0.08, 1e-15));
        assert_eq!(p.convex_cost_fr(&x0).unwrap(), 0.0);
        assert!(close(apriori_gap_bound(&m, &radii, Loss::Huber), 0.08, 1e-15));
        // At x = 0 the only term is clamped, so the posterior bound is the
        // whole nonconvex cost.
        assert!(close(posterior_gap_bound(&p, &x0, Loss::Huber).unwrap(), 0.08, 1e-15));
        let x1 = Points::from_rows(1, &[vec![1.0]]).unwrap();
        assert_eq!(posterior_gap_bound(&p, &x1, Loss::Huber).unwrap(), 0.0);
    }

    #[test]
    fn single_edge_lifted_cost() {
        let t = NetworkTopology::new(2, 1, 2, vec![(0, 1)], vec![(0, 0)]).unwrap();
        let a = Points::from_rows(2, &[vec![0.0, 0.0]]).unwrap();
        let big_d = 1.5;
        let m = Measurements {
            d: vec![0.0],
            r: vec![0.0],
        };
        let radii = HuberRadii {
            edge: vec![big_d],
            anchor: vec![1.0],
        };
        let p = Problem::new(&t, &a, &m, &radii).unwrap();
        let z = StackedPoint {
            x: Points::from_rows(2, &[vec![0.0, 0.0], vec![-2.0 * big_d, 0.0]]).unwrap(),
            y: Points::zeros(1, 2),
            w: Points::zeros(1, 2),
        };
        assert!(close(p.stacked_cost(&z).unwrap(), 1.5 * big_d * big_d, 1e-15));
    }

    #[test]
    fn infeasible_point_is_rejected() {
        let (t, a, m, radii) = one_anchor_problem();
        let p = Problem::new(&t, &a, &m, &radii).unwrap();
        let z = StackedPoint {
            x: Points::from_rows(1, &[vec![0.0]]).unwrap(),
            y: Points::zeros(0, 1),
            w: Points::from_rows(1, &[vec![0.5]]).unwrap(),
        };
        assert!(matches!(p.stacked_cost(&z), Err(Error::Infeasible(_))));
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let t = NetworkTopology::new(2, 1, 2, vec![(0, 1)], vec![(0, 0)]).unwrap();
        let a = Points::from_rows(2, &[vec![5.0, 5.0]]).unwrap();
        let m = Measurements {
            d: vec![10.0],
            r: vec![10.0],
        };
        let radii = HuberRadii::uniform(&t, 1.0);
        let p = Problem::new(&t, &a, &m, &radii).unwrap();
        let x = Points::from_rows(2, &[vec![1.0, 2.0], vec![3.0, -1.0]]).unwrap();
        let z = p.lift(&x).unwrap();
        let g = p.stacked_gradient(&z);
        assert!(g.flat().iter().all(|v| *v == 0.0));
        assert_eq!(p.stacked_cost(&z).unwrap(), 0.0);
    }

    #[test]
    fn oracle_one_anchor_noiseless() {
        let (g, x) = nonconvex_oracle_1d(&[0.0], &[0.4], &[0.8], Loss::Huber);
        assert!(g < 1e-12);
        assert!((x.abs() - 0.4).abs() < 1e-6, "{x}");
    }

    #[test]
    fn oracle_two_anchors_consistent() {
        for loss in Loss::ALL {
            let (g, x) = nonconvex_oracle_1d(&[0.0, 3.0], &[0.4, 2.6], &[0.08, 0.08], loss);
            assert!(g < 1e-9, "{loss:?} {g}");
            assert!((x - 0.4).abs() < 1e-6, "{loss:?} {x}");
        }
    }

    proptest! {
        #[test]
        fn projection_is_odd_and_inside(v in prop::collection::vec(-50.0..50.0f64, 3), rho in 0.0..20.0f64) {
            let p = project_ball(&v, rho);
            let neg: Vec<f64> = v.iter().map(|c| -c).collect();
            let q = project_ball(&neg, rho);
            prop_assert!(p.iter().zip(&q).all(|(a, b)| *a == -*b));
            prop_assert!(norm(&p) <= rho * (1.0 + 1e-15) + 1e-300);
            let d: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
            prop_assert!(close(dist_sq_ball(&v, rho), norm_sq(&d), 1e-12));
        }

        #[test]
        fn psi_matches_huber_of_norm(v in prop::collection::vec(-30.0..30.0f64, 2), delta in 1e-3..10.0f64) {
            let h = huber(delta, norm(&v)).unwrap();
            prop_assert!((psi(delta, &v) - h).abs() <= 1e-12 * h.abs().max(f64::MIN_POSITIVE));
        }

        #[test]
        fn huber_is_even_and_continuous(u in -100.0..100.0f64, delta in 1e-3..10.0f64) {
            prop_assert_eq!(huber(delta, u).unwrap(), huber(delta, -u).unwrap());
            let below = huber(delta, delta * (1.0 - 1e-12)).unwrap();
            let above = huber(delta, delta * (1.0 + 1e-12)).unwrap();
            prop_assert!((below - above).abs() < 1e-9 * delta * delta + 1e-15);
        }
    }
}
