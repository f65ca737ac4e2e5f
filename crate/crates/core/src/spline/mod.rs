//! Cubic splines with assigned boundary velocity and acceleration.
//!
//! Two assistant knots split the first and last raw intervals by `β`, which
//! frees enough degrees of freedom to impose `v0, a0, vf, af`. The unknown knot
//! accelerations `m` then satisfy the tridiagonal system `A·m = C·S − D`.

mod trajectory;

use alloc::vec;
use alloc::vec::Vec;

pub use trajectory::{CubicSplineTrajectory, Sample};

use crate::band::BandMatrix;
use crate::{Error, JointVector, Result, Waypoints};

/// Smallest admissible μ; smaller values are raised to it.
pub const MU_FLOOR: f64 = 1e-6;

/// Raw segment durations plus the assistant-point split.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotSequence {
    raw: Vec<f64>,
    beta: f64,
    augmented: Vec<f64>,
}

impl KnotSequence {
    /// Builds the augmented time vector `[βT0, (1−β)T0, T1, …, (1−β)Tn−1, βTn−1]`.
    ///
    /// A single raw interval becomes `[βT0/2, (1−β)T0, βT0/2]`, so both
    /// assistant knots still exist and the total is preserved.
    pub fn new(raw: &[f64], beta: f64) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, found: 0 });
        }
        if let Some((index, &value)) =
            raw.iter().enumerate().find(|(_, t)| !(t.is_finite() && **t > 0.0))
        {
            return Err(Error::InvalidDuration { index, value });
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameter { name: "beta", value: beta });
        }
        let n = raw.len();
        let augmented = if n == 1 {
            vec![0.5 * beta * raw[0], (1.0 - beta) * raw[0], 0.5 * beta * raw[0]]
        } else {
            let mut h = Vec::with_capacity(n + 2);
            h.push(beta * raw[0]);
            h.push((1.0 - beta) * raw[0]);
            h.extend_from_slice(&raw[1..n - 1]);
            h.push((1.0 - beta) * raw[n - 1]);
            h.push(beta * raw[n - 1]);
            h
        };
        Ok(Self { raw: raw.to_vec(), beta, augmented })
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn augmented(&self) -> &[f64] {
        &self.augmented
    }

    /// Number of raw segments.
    pub fn segments(&self) -> usize {
        self.raw.len()
    }

    /// Number of issued waypoints, one more than the raw segments.
    pub fn waypoints(&self) -> usize {
        self.raw.len() + 1
    }

    pub fn total(&self) -> f64 {
        self.raw.iter().sum()
    }

    /// Mean raw duration.
    pub fn mean_duration(&self) -> f64 {
        self.total() / self.raw.len() as f64
    }
}

/// Alias of [`KnotSequence::new`].
pub fn build_time_vector(raw: &[f64], beta: f64) -> Result<KnotSequence> {
    KnotSequence::new(raw, beta)
}

/// Assigned velocity and acceleration at both ends of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryState {
    pub v0: JointVector,
    pub a0: JointVector,
    pub vf: JointVector,
    pub af: JointVector,
}

impl BoundaryState {
    /// Rest at both ends.
    pub fn rest(dof: usize) -> Self {
        Self { v0: vec![0.0; dof], a0: vec![0.0; dof], vf: vec![0.0; dof], af: vec![0.0; dof] }
    }

    /// Starts from `(v0, a0)` and ends at rest.
    pub fn from_start(v0: JointVector, a0: JointVector) -> Self {
        let dof = v0.len();
        Self { v0, a0, vf: vec![0.0; dof], af: vec![0.0; dof] }
    }

    pub fn dof(&self) -> usize {
        self.v0.len()
    }

    fn validate(&self, dof: usize) -> Result<()> {
        for v in [&self.v0, &self.a0, &self.vf, &self.af] {
            if v.len() != dof {
                return Err(Error::DimensionMismatch { expected: dof, found: v.len() });
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter { name: "boundary", value: *x });
            }
        }
        Ok(())
    }

    fn column(&self, j: usize) -> [f64; 4] {
        [self.v0[j], self.a0[j], self.vf[j], self.af[j]]
    }
}

/// Which quadratic form measures curvature in the min-stretch objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StretchMetric {
    /// Integrated squared acceleration over every augmented segment.
    #[default]
    Exact,
    /// Replaces the energy matrix with `A` and treats it as self-adjoint.
    /// With zero boundary and unit weights this is the closed form of
    /// [`static_min_stretch`].
    SystemMatrix,
}

/// Fit-versus-smoothness weighting of the min-stretch objective.
#[derive(Debug, Clone, PartialEq)]
pub struct StretchWeights {
    mu: f64,
    lambda: f64,
    /// Per-waypoint fit weights; `f64::INFINITY` pins the waypoint exactly.
    pub w: Vec<f64>,
    pub metric: StretchMetric,
}

impl StretchWeights {
    /// Unit weights for `waypoints` knots. `μ = 0` is rejected, tiny `μ` is floored.
    pub fn new(mu: f64, waypoints: usize) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::InvalidParameter { name: "mu", value: mu });
        }
        let mu = mu.max(MU_FLOOR);
        Ok(Self { mu, lambda: (1.0 - mu) / mu, w: vec![1.0; waypoints], metric: StretchMetric::Exact })
    }

    /// Weights from `λ ≥ 0` directly.
    pub fn from_lambda(lambda: f64, waypoints: usize) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter { name: "lambda", value: lambda });
        }
        Ok(Self {
            mu: 1.0 / (1.0 + lambda),
            lambda,
            w: vec![1.0; waypoints],
            metric: StretchMetric::Exact,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn pin(mut self, index: usize) -> Self {
        self.w[index] = f64::INFINITY;
        self
    }

    pub fn with_metric(mut self, metric: StretchMetric) -> Self {
        self.metric = metric;
        self
    }
}

/// The matrices of `A·m = C·S − D` for one knot sequence.
///
/// `D` is linear in the boundary state; `boundary_coefficients` holds, per row,
/// the factors multiplying `(v0, a0, vf, af)`.
#[derive(Debug, Clone)]
pub struct SplineSystem {
    pub a: BandMatrix,
    pub c: BandMatrix,
    pub boundary_coefficients: Vec<[f64; 4]>,
}

/// Augmented knot position as raw waypoint index, boundary contribution and
/// assistant-acceleration contribution.
struct KnotExpr {
    raw: usize,
    boundary: [f64; 4],
    omega: Option<(usize, f64)>,
}

fn knot_expr(h: &[f64], n: usize, k: usize) -> KnotExpr {
    let big_n = h.len();
    let h0 = h[0];
    let hl = h[big_n - 1];
    if k == 0 {
        KnotExpr { raw: 0, boundary: [0.0; 4], omega: None }
    } else if k == big_n {
        KnotExpr { raw: n, boundary: [0.0; 4], omega: None }
    } else if k == 1 {
        KnotExpr {
            raw: 0,
            boundary: [h0, h0 * h0 / 3.0, 0.0, 0.0],
            omega: Some((1, h0 * h0 / 6.0)),
        }
    } else if k == big_n - 1 {
        KnotExpr {
            raw: n,
            boundary: [0.0, 0.0, -hl, hl * hl / 3.0],
            omega: Some((big_n - 1, hl * hl / 6.0)),
        }
    } else {
        KnotExpr { raw: k - 1, boundary: [0.0; 4], omega: None }
    }
}

impl SplineSystem {
    /// Assembles `A`, `C` and the boundary coefficients of `D`.
    pub fn assemble(knots: &KnotSequence) -> Self {
        let h = knots.augmented();
        let n = knots.segments();
        let big_n = h.len();
        let dim = n + 1;
        let mut a = BandMatrix::zeros(dim, 1, 1);
        let mut c = BandMatrix::zeros(dim, 1, 1);
        let mut dc = vec![[0.0; 4]; dim];
        for k in 1..big_n {
            let r = k - 1;
            let (hp, hk) = (h[k - 1], h[k]);
            for (kk, coef) in [(k - 1, hp / 6.0), (k, (hp + hk) / 3.0), (k + 1, hk / 6.0)] {
                if kk == 0 {
                    dc[r][1] += coef;
                } else if kk == big_n {
                    dc[r][3] += coef;
                } else {
                    a.add(r, kk - 1, coef);
                }
            }
            for (kk, coef) in [(k + 1, 1.0 / hk), (k, -(1.0 / hp + 1.0 / hk)), (k - 1, 1.0 / hp)] {
                let e = knot_expr(h, n, kk);
                c.add(r, e.raw, coef);
                for (d, b) in dc[r].iter_mut().zip(e.boundary) {
                    *d -= coef * b;
                }
                if let Some((w, oc)) = e.omega {
                    a.add(r, w - 1, -coef * oc);
                }
            }
        }
        Self { a, c, boundary_coefficients: dc }
    }

    /// The boundary vector `D`, one row per equation and one column per joint.
    pub fn boundary_vector(&self, boundary: &BoundaryState) -> Waypoints {
        let dof = boundary.dof();
        let mut d = Waypoints::zeros(self.boundary_coefficients.len(), dof);
        for (r, coef) in self.boundary_coefficients.iter().enumerate() {
            for j in 0..dof {
                let b = boundary.column(j);
                d[(r, j)] = coef.iter().zip(b).map(|(c, x)| c * x).sum();
            }
        }
        d
    }
}

/// Band matrix `A` of the knot-acceleration system.
pub fn assemble_a(knots: &KnotSequence) -> BandMatrix {
    SplineSystem::assemble(knots).a
}

/// Coefficient matrix `C` mapping issued positions to curvature forcing.
pub fn assemble_c(knots: &KnotSequence) -> BandMatrix {
    SplineSystem::assemble(knots).c
}

/// Stretch-energy matrix for the given segment durations.
///
/// Diagonal `(1/6)[2T0, 2(T0+T1), …, 2Tn−1]`, off-diagonal `Ti/6`; the energy
/// of a spline with knot accelerations `ω` is `ωᵀ·Ā·ω`.
pub fn assemble_abar(durations: &[f64]) -> BandMatrix {
    let n = durations.len();
    let mut e = BandMatrix::zeros(n + 1, 1, 1);
    for (k, &h) in durations.iter().enumerate() {
        e.add(k, k, h / 3.0);
        e.add(k + 1, k + 1, h / 3.0);
        e.add(k, k + 1, h / 6.0);
        e.add(k + 1, k, h / 6.0);
    }
    e
}

fn check_shape(q: &Waypoints, knots: &KnotSequence) -> Result<()> {
    if q.rows() < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: q.rows() });
    }
    if q.rows() != knots.waypoints() {
        return Err(Error::DimensionMismatch { expected: knots.waypoints(), found: q.rows() });
    }
    Ok(())
}

/// Spline through every row of `q` with the assigned boundary state.
pub fn interpolating_spline(
    q: &Waypoints,
    boundary: &BoundaryState,
    knots: &KnotSequence,
) -> Result<CubicSplineTrajectory> {
    check_shape(q, knots)?;
    boundary.validate(q.cols())?;
    let sys = SplineSystem::assemble(knots);
    let mut rhs = sys.c.mul_waypoints(q);
    let d = sys.boundary_vector(boundary);
    for (x, y) in rhs.as_mut_slice().iter_mut().zip(d.as_slice()) {
        *x -= y;
    }
    let m = sys.a.solve(&rhs)?;
    Ok(CubicSplineTrajectory::from_knots(knots, q, &m, boundary))
}

/// Min-stretch spline: minimizes `½(S−Q)ᵀW(S−Q) + ½λ·E(m)` subject to `A·m = C·S − D`.
///
/// Solved as one banded first-order optimality system in `(S, m, ν)`, interleaved
/// per knot so the bandwidth stays at five. Pinned waypoints (infinite weight)
/// are reproduced exactly.
pub fn min_stretch_spline(
    q: &Waypoints,
    weights: &StretchWeights,
    boundary: &BoundaryState,
    knots: &KnotSequence,
) -> Result<CubicSplineTrajectory> {
    check_shape(q, knots)?;
    boundary.validate(q.cols())?;
    let dim = q.rows();
    if weights.w.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: weights.w.len() });
    }
    if let Some(w) = weights.w.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::InvalidParameter { name: "weight", value: *w });
    }
    let lambda = weights.lambda();
    if lambda == 0.0 && weights.w.iter().all(|w| *w > 0.0) {
        return interpolating_spline(q, boundary, knots);
    }
    let sys = SplineSystem::assemble(knots);
    let d = sys.boundary_vector(boundary);
    let dof = q.cols();

    let big_n = knots.augmented().len();
    let energy = assemble_abar(knots.augmented());
    let mut k = BandMatrix::zeros(3 * dim, 5, 5);
    for i in 0..dim {
        let (rs, rm, rc) = (3 * i, 3 * i + 1, 3 * i + 2);
        if weights.w[i].is_infinite() {
            k.set(rs, rs, 1.0);
        } else {
            k.set(rs, rs, weights.w[i]);
            for r in sys.c.row_span(i) {
                // Column i of C meets row r when r lies within the band.
                k.add(rs, 3 * r + 2, -sys.c.get(r, i));
            }
        }
        for j in i.saturating_sub(1)..(i + 2).min(dim) {
            let e = match weights.metric {
                StretchMetric::Exact => energy.get(i + 1, j + 1),
                StretchMetric::SystemMatrix => sys.a.get(i, j),
            };
            k.add(rm, 3 * j + 1, lambda * e);
            let adj = match weights.metric {
                StretchMetric::Exact => sys.a.get(j, i),
                StretchMetric::SystemMatrix => sys.a.get(i, j),
            };
            k.add(rm, 3 * j + 2, adj);
            k.add(rc, 3 * j, -sys.c.get(i, j));
            k.add(rc, 3 * j + 1, sys.a.get(i, j));
        }
    }
    let lu = k.factor()?;

    let mut s = Waypoints::zeros(dim, dof);
    let mut m = Waypoints::zeros(dim, dof);
    let mut x = vec![0.0; 3 * dim];
    for jt in 0..dof {
        for i in 0..dim {
            let w = weights.w[i];
            x[3 * i] = if w.is_infinite() { q[(i, jt)] } else { w * q[(i, jt)] };
            x[3 * i + 1] = match weights.metric {
                StretchMetric::Exact => {
                    -lambda
                        * (energy.get(i + 1, 0) * boundary.a0[jt]
                            + energy.get(i + 1, big_n) * boundary.af[jt])
                }
                StretchMetric::SystemMatrix => 0.0,
            };
            x[3 * i + 2] = -d[(i, jt)];
        }
        lu.solve_in_place(&mut x);
        for i in 0..dim {
            s[(i, jt)] = x[3 * i];
            m[(i, jt)] = x[3 * i + 1];
        }
    }
    Ok(CubicSplineTrajectory::from_knots(knots, &s, &m, boundary))
}

/// Closed-form min-stretch solution for rest-to-rest motion with unit weights:
/// `m = (A + λCCᵀ)⁻¹·C·Q`, `S = Q − λ·Cᵀ·m`.
pub fn static_min_stretch(
    q: &Waypoints,
    lambda: f64,
    knots: &KnotSequence,
) -> Result<CubicSplineTrajectory> {
    check_shape(q, knots)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter { name: "lambda", value: lambda });
    }
    let sys = SplineSystem::assemble(knots);
    let ct = sys.c.transpose();
    let lhs = sys.a.add_scaled(lambda, &sys.c.mul(&ct));
    let m = lhs.solve(&sys.c.mul_waypoints(q))?;
    let correction = ct.mul_waypoints(&m);
    let mut s = q.clone();
    for i in 0..s.rows() {
        for j in 0..s.cols() {
            s[(i, j)] -= lambda * correction[(i, j)];
        }
    }
    Ok(CubicSplineTrajectory::from_knots(knots, &s, &m, &BoundaryState::rest(q.cols())))
}
