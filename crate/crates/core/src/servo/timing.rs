//! Duration assignment under velocity and acceleration limits.

use alloc::vec;
use alloc::vec::Vec;

use crate::robot::JointLimits;
use crate::spline::{interpolating_spline, static_min_stretch, BoundaryState, CubicSplineTrajectory, KnotSequence};
use crate::{Error, Result, Waypoints};

/// Factor applied to every duration when a trajectory breaks a limit.
pub const DILATION_FACTOR: f64 = 1.1;
/// Dilation rounds before giving up.
pub const MAX_DILATIONS: usize = 50;

const LIMIT_SLACK: f64 = 1e-9;

/// Shortest rest-to-rest duration for one displacement, over all joints.
pub fn heuristic_duration(from: &[f64], to: &[f64], limits: &JointLimits) -> f64 {
    from.iter()
        .zip(to)
        .enumerate()
        .map(|(j, (a, b))| {
            let d = libm::fabs(b - a);
            f64::max(1.5 * d / limits.velocity[j], libm::sqrt(6.0 * d / limits.acceleration[j]))
        })
        .fold(0.0, f64::max)
}

/// True when the trajectory's analytic velocity and acceleration peaks respect the limits.
pub fn within_rate_limits(traj: &CubicSplineTrajectory, limits: &JointLimits) -> bool {
    let (v, a) = traj.peak_rates();
    v.iter().zip(&limits.velocity).all(|(x, l)| *x <= l * (1.0 + LIMIT_SLACK))
        && a.iter().zip(&limits.acceleration).all(|(x, l)| *x <= l * (1.0 + LIMIT_SLACK))
}

/// Rounds cumulative knot times up onto multiples of `grid`, at least one step apart.
pub fn snap_to_grid(durations: &mut [f64], grid: f64) {
    let mut ticks = 0.0;
    let mut t = 0.0;
    for d in durations.iter_mut() {
        t += *d;
        let end = libm::ceil(t / grid - 1e-9).max(ticks + 1.0);
        *d = (end - ticks) * grid;
        ticks = end;
    }
}

/// Rebuilds with durations scaled by 1.1 until the limits hold.
///
/// With a `grid`, knot times are kept on its multiples. Returns the
/// trajectory, the final durations and the number of dilations.
pub fn dilate_until_compliant<F>(
    durations: Vec<f64>,
    limits: &JointLimits,
    grid: Option<f64>,
    mut build: F,
) -> Result<(CubicSplineTrajectory, Vec<f64>, usize)>
where
    F: FnMut(&[f64]) -> Result<CubicSplineTrajectory>,
{
    let mut raw = durations;
    for round in 0..=MAX_DILATIONS {
        let mut d = raw.clone();
        if let Some(g) = grid {
            snap_to_grid(&mut d, g);
        }
        let traj = build(&d)?;
        if within_rate_limits(&traj, limits) {
            return Ok((traj, d, round));
        }
        raw.iter_mut().for_each(|d| *d *= DILATION_FACTOR);
    }
    Err(Error::TimeAllocationFailed { iterations: MAX_DILATIONS })
}

/// Stretches only the final segment first, falling back to uniform dilation.
///
/// Online plans end at rest on the newest waypoint; stopping in time is what
/// usually breaks a limit, and the schedule of earlier knots can stay put.
/// The flag is true when the uniform fallback was needed.
pub fn dilate_tail_first<F>(
    durations: Vec<f64>,
    limits: &JointLimits,
    grid: Option<f64>,
    mut build: F,
) -> Result<(CubicSplineTrajectory, Vec<f64>, usize, bool)>
where
    F: FnMut(&[f64]) -> Result<CubicSplineTrajectory>,
{
    let mut raw = durations.clone();
    for round in 0..=MAX_DILATIONS {
        let mut d = raw.clone();
        if let Some(g) = grid {
            snap_to_grid(&mut d, g);
        }
        let traj = build(&d)?;
        if within_rate_limits(&traj, limits) {
            return Ok((traj, d, round, false));
        }
        if let Some(last) = raw.last_mut() {
            *last *= DILATION_FACTOR;
        }
    }
    let (traj, d, rounds) = dilate_until_compliant(durations, limits, grid, build)?;
    Ok((traj, d, MAX_DILATIONS + rounds, true))
}

/// Segment durations for `waypoints`, from stamps when given and the
/// limit heuristic otherwise, then dilated until a rest-to-rest
/// interpolating spline through the waypoints respects the limits.
pub fn allocate_times(
    waypoints: &Waypoints,
    stamps: Option<&[f64]>,
    limits: &JointLimits,
    beta: f64,
    floor: f64,
) -> Result<Vec<f64>> {
    let n = waypoints.rows();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    if waypoints.cols() != limits.dof() {
        return Err(Error::DimensionMismatch { expected: limits.dof(), found: waypoints.cols() });
    }
    let initial: Vec<f64> = match stamps {
        Some(s) => {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: s.len() });
            }
            s.windows(2).map(|w| (w[1] - w[0]).max(floor)).collect()
        }
        None => (0..n - 1)
            .map(|i| heuristic_duration(waypoints.row(i), waypoints.row(i + 1), limits).max(floor))
            .collect(),
    };
    let rest = BoundaryState::rest(waypoints.cols());
    let (_, durations, _) = dilate_until_compliant(initial, limits, None, |d| {
        interpolating_spline(waypoints, &rest, &KnotSequence::new(d, beta)?)
    })?;
    Ok(durations)
}

/// Rest-to-rest move from `q_from` to `q_to` over one raw segment.
///
/// `q_to` is clamped into the position limits; the duration is the limit
/// heuristic (never below `floor` or `min_duration`), dilated as needed and
/// rounded up to a multiple of `floor`.
pub fn solve_ptp_timed(
    q_from: &[f64],
    q_to: &[f64],
    limits: &JointLimits,
    beta: f64,
    floor: f64,
    min_duration: f64,
) -> Result<(CubicSplineTrajectory, bool, usize)> {
    if q_from.len() != limits.dof() || q_to.len() != limits.dof() {
        return Err(Error::DimensionMismatch { expected: limits.dof(), found: q_to.len() });
    }
    if let Some(joint) = limits.violation(q_from) {
        return Err(Error::OutOfLimits { joint, value: q_from[joint] });
    }
    let mut target = q_to.to_vec();
    let clamped = limits.clamp_position(&mut target);
    let q = Waypoints::from_rows(&[q_from, &target[..]])?;
    let t0 = heuristic_duration(q_from, &target, limits).max(floor).max(min_duration);
    let (traj, _, dilations) =
        dilate_until_compliant(vec![t0], limits, Some(floor), |d| static_min_stretch(&q, 0.0, &KnotSequence::new(d, beta)?))?;
    Ok((traj, clamped, dilations))
}

/// Rest-to-rest move with the default 5 ms duration floor.
pub fn solve_ptp(
    q_from: &[f64],
    q_to: &[f64],
    limits: &JointLimits,
    beta: f64,
) -> Result<CubicSplineTrajectory> {
    solve_ptp_timed(q_from, q_to, limits, beta, super::DEFAULT_DT_OUTPUT, 0.0).map(|r| r.0)
}
