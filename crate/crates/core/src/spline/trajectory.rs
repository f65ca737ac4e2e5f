use alloc::vec;
use alloc::vec::Vec;

use super::{assemble_abar, BoundaryState, KnotSequence};
use crate::{JointVector, Waypoints};

/// Position, velocity and acceleration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub position: JointVector,
    pub velocity: JointVector,
    pub acceleration: JointVector,
    /// The requested time lay outside the trajectory and was clamped.
    pub clamped: bool,
}

/// Piecewise cubic trajectory over the augmented segments.
///
/// Segment `k` on local time `τ ∈ [0, h_k]` is `a + bτ + cτ² + dτ³` per joint.
/// Both the knot values and the polynomial coefficients are kept so that
/// evaluation never allocates.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSplineTrajectory {
    dof: usize,
    durations: Vec<f64>,
    starts: Vec<f64>,
    total: f64,
    /// `[a, b, c, d]` indexed by `segment * dof + joint`.
    coeffs: Vec<[f64; 4]>,
    knot_positions: Waypoints,
    knot_accelerations: Waypoints,
    raw_durations: Vec<f64>,
    issued: Vec<usize>,
}

impl CubicSplineTrajectory {
    /// Builds the trajectory from issued-knot positions `s`, interior knot
    /// accelerations `m` (one row per issued knot) and the boundary state.
    pub fn from_knots(
        knots: &KnotSequence,
        s: &Waypoints,
        m: &Waypoints,
        boundary: &BoundaryState,
    ) -> Self {
        let h = knots.augmented();
        let big_n = h.len();
        let n = knots.segments();
        let dof = s.cols();
        let mut p = Waypoints::zeros(big_n + 1, dof);
        let mut om = Waypoints::zeros(big_n + 1, dof);
        let (h0, hl) = (h[0], h[big_n - 1]);
        for j in 0..dof {
            om[(0, j)] = boundary.a0[j];
            om[(big_n, j)] = boundary.af[j];
            for k in 1..big_n {
                om[(k, j)] = m[(k - 1, j)];
            }
            p[(0, j)] = s[(0, j)];
            p[(big_n, j)] = s[(n, j)];
            for k in 2..big_n - 1 {
                p[(k, j)] = s[(k - 1, j)];
            }
            p[(1, j)] = s[(0, j)]
                + h0 * boundary.v0[j]
                + h0 * h0 / 3.0 * boundary.a0[j]
                + h0 * h0 / 6.0 * om[(1, j)];
            p[(big_n - 1, j)] = s[(n, j)] - hl * boundary.vf[j]
                + hl * hl / 3.0 * boundary.af[j]
                + hl * hl / 6.0 * om[(big_n - 1, j)];
        }
        let mut issued = Vec::with_capacity(n + 1);
        issued.push(0);
        issued.extend(2..big_n - 1);
        issued.push(big_n);
        Self::assemble(h.to_vec(), p, om, knots.raw().to_vec(), issued)
    }

    fn assemble(
        durations: Vec<f64>,
        p: Waypoints,
        om: Waypoints,
        raw_durations: Vec<f64>,
        issued: Vec<usize>,
    ) -> Self {
        let dof = p.cols();
        let mut coeffs = Vec::with_capacity(durations.len() * dof);
        let mut starts = Vec::with_capacity(durations.len());
        let mut acc = 0.0;
        for (k, &hk) in durations.iter().enumerate() {
            starts.push(acc);
            acc += hk;
            for j in 0..dof {
                let (p0, p1) = (p[(k, j)], p[(k + 1, j)]);
                let (w0, w1) = (om[(k, j)], om[(k + 1, j)]);
                coeffs.push([
                    p0,
                    (p1 - p0) / hk - hk * (2.0 * w0 + w1) / 6.0,
                    0.5 * w0,
                    (w1 - w0) / (6.0 * hk),
                ]);
            }
        }
        let total = raw_durations.iter().sum::<f64>().max(acc);
        Self {
            dof,
            durations,
            starts,
            total,
            coeffs,
            knot_positions: p,
            knot_accelerations: om,
            raw_durations,
            issued,
        }
    }

    /// Motionless trajectory at `q` lasting `duration` seconds.
    pub fn hold(q: &[f64], duration: f64) -> Self {
        let p = Waypoints::from_rows(&[q, q]).expect("equal rows");
        let om = Waypoints::zeros(2, q.len());
        Self::assemble(vec![duration], p, om, vec![duration], vec![0, 1])
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    /// Total duration in seconds.
    pub fn duration(&self) -> f64 {
        self.total
    }

    /// Augmented segment durations.
    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    /// Raw segment durations between issued knots.
    pub fn raw_durations(&self) -> &[f64] {
        &self.raw_durations
    }

    /// Positions at every augmented knot, assistant knots included.
    pub fn knot_positions(&self) -> &Waypoints {
        &self.knot_positions
    }

    /// Accelerations at every augmented knot, boundary values included.
    pub fn knot_second_derivatives(&self) -> &Waypoints {
        &self.knot_accelerations
    }

    /// Attained positions at the issued knots (the fitted `S`).
    pub fn issued_positions(&self) -> Waypoints {
        let rows: Vec<&[f64]> = self.issued.iter().map(|&k| self.knot_positions.row(k)).collect();
        Waypoints::from_rows(&rows).unwrap_or_else(|_| Waypoints::zeros(0, self.dof))
    }

    /// Times of the issued knots, starting at 0.
    pub fn issued_times(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.raw_durations.len() + 1);
        let mut acc = 0.0;
        t.push(0.0);
        for d in &self.raw_durations {
            acc += d;
            t.push(acc);
        }
        t
    }

    /// Start times of the augmented segments.
    pub fn segment_starts(&self) -> &[f64] {
        &self.starts
    }

    /// Coefficients `[a, b, c, d]` of one joint on one augmented segment.
    pub fn coefficients(&self, segment: usize, joint: usize) -> [f64; 4] {
        self.coeffs[segment * self.dof + joint]
    }

    fn locate(&self, t: f64) -> (usize, f64, bool) {
        let (t, clamped) = if t < 0.0 {
            (0.0, true)
        } else if t > self.total {
            (self.total, true)
        } else if t.is_nan() {
            (0.0, true)
        } else {
            (t, false)
        };
        let k = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
        (k, t - self.starts[k], clamped)
    }

    /// Allocation-free evaluation into caller buffers; returns the clamp flag.
    pub fn eval_into(&self, t: f64, pos: &mut [f64], vel: &mut [f64], acc: &mut [f64]) -> bool {
        let (k, tau, clamped) = self.locate(t);
        let base = k * self.dof;
        for j in 0..self.dof {
            let [a, b, c, d] = self.coeffs[base + j];
            pos[j] = a + tau * (b + tau * (c + tau * d));
            vel[j] = b + tau * (2.0 * c + 3.0 * d * tau);
            acc[j] = 2.0 * c + 6.0 * d * tau;
        }
        clamped
    }

    /// Position, velocity and acceleration at `t`, clamped into `[0, duration]`.
    pub fn eval(&self, t: f64) -> Sample {
        let mut position = vec![0.0; self.dof];
        let mut velocity = vec![0.0; self.dof];
        let mut acceleration = vec![0.0; self.dof];
        let clamped = self.eval_into(t, &mut position, &mut velocity, &mut acceleration);
        Sample { position, velocity, acceleration, clamped }
    }

    /// Integrated squared acceleration summed over joints, `tr(ωᵀ·Ā·ω)`.
    pub fn stretch_energy(&self) -> f64 {
        let e = assemble_abar(&self.durations);
        (0..self.dof)
            .map(|j| {
                let w = self.knot_accelerations.column(j);
                e.mul_vec(&w).iter().zip(&w).map(|(x, y)| x * y).sum::<f64>()
            })
            .sum()
    }

    /// Per-joint peak `|velocity|` and `|acceleration|`, found analytically.
    pub fn peak_rates(&self) -> (Vec<f64>, Vec<f64>) {
        let mut vmax = vec![0.0f64; self.dof];
        let mut amax = vec![0.0f64; self.dof];
        for (k, &h) in self.durations.iter().enumerate() {
            for j in 0..self.dof {
                let [_, b, c, d] = self.coeffs[k * self.dof + j];
                let v = |t: f64| libm::fabs(b + t * (2.0 * c + 3.0 * d * t));
                let mut pv = v(0.0).max(v(h));
                if d != 0.0 {
                    let ts = -c / (3.0 * d);
                    if ts > 0.0 && ts < h {
                        pv = pv.max(v(ts));
                    }
                }
                let pa = libm::fabs(2.0 * c).max(libm::fabs(2.0 * c + 6.0 * d * h));
                vmax[j] = vmax[j].max(pv);
                amax[j] = amax[j].max(pa);
            }
        }
        (vmax, amax)
    }

    /// Per-joint `(min, max)` of position over the whole trajectory.
    pub fn position_range(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dof];
        for (k, &h) in self.durations.iter().enumerate() {
            for (j, r) in out.iter_mut().enumerate() {
                let [a, b, c, d] = self.coeffs[k * self.dof + j];
                let p = |t: f64| a + t * (b + t * (c + t * d));
                let mut upd = |t: f64| {
                    let x = p(t);
                    r.0 = r.0.min(x);
                    r.1 = r.1.max(x);
                };
                upd(0.0);
                upd(h);
                // Stationary points solve b + 2cτ + 3dτ² = 0.
                let (qa, qb, qc) = (3.0 * d, 2.0 * c, b);
                if qa != 0.0 {
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc >= 0.0 {
                        let sq = libm::sqrt(disc);
                        for t in [(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)] {
                            if t > 0.0 && t < h {
                                upd(t);
                            }
                        }
                    }
                } else if qb != 0.0 {
                    let t = -qc / qb;
                    if t > 0.0 && t < h {
                        upd(t);
                    }
                }
            }
        }
        out
    }
}
