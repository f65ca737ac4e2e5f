//! Simulated actuator, smoothness metrics and baseline comparison.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::robot::RobotConfig;
use crate::servo::{run_servo, Command, RunOptions, ServoSettings};
use crate::{Error, JointVector, Result, TimedWaypoint, Waypoints};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActuatorMode {
    /// Follows commands exactly.
    Perfect,
    /// `dx/dt = (u − x)/τ` with zero-order-held input.
    FirstOrderLag { time_constant: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorModel {
    pub mode: ActuatorMode,
    /// Feedback rate for the lag mode.
    pub rate_hz: f64,
}

impl Default for ActuatorModel {
    fn default() -> Self {
        Self { mode: ActuatorMode::Perfect, rate_hz: 200.0 }
    }
}

/// Uniformly sampled joint feedback with finite-difference derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub positions: Waypoints,
    pub velocities: Waypoints,
    pub accelerations: Waypoints,
}

impl Trace {
    /// Derives velocities and accelerations from positions on a uniform grid.
    pub fn from_positions(times: Vec<f64>, positions: Waypoints) -> Result<Self> {
        let n = times.len();
        if positions.rows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: positions.rows() });
        }
        let cols = positions.cols();
        let mut velocities = Waypoints::zeros(n, cols);
        let mut accelerations = Waypoints::zeros(n, cols);
        if n >= 2 {
            let h = (times[n - 1] - times[0]) / (n - 1) as f64;
            for (i, w) in times.windows(2).enumerate() {
                if !(w[1] > w[0]) {
                    return Err(Error::Unordered { index: i + 1 });
                }
                if libm::fabs((w[1] - w[0]) - h) > 1e-6 * h {
                    return Err(Error::InvalidParameter { name: "grid spacing", value: w[1] - w[0] });
                }
            }
            let x = |i: usize, j: usize| positions[(i, j)];
            for j in 0..cols {
                velocities[(0, j)] = (x(1, j) - x(0, j)) / h;
                velocities[(n - 1, j)] = (x(n - 1, j) - x(n - 2, j)) / h;
                for i in 1..n - 1 {
                    velocities[(i, j)] = (x(i + 1, j) - x(i - 1, j)) / (2.0 * h);
                }
                if n >= 3 {
                    for i in 1..n - 1 {
                        accelerations[(i, j)] = (x(i + 1, j) - 2.0 * x(i, j) + x(i - 1, j)) / (h * h);
                    }
                    accelerations[(0, j)] = (x(2, j) - 2.0 * x(1, j) + x(0, j)) / (h * h);
                    accelerations[(n - 1, j)] =
                        (x(n - 1, j) - 2.0 * x(n - 2, j) + x(n - 3, j)) / (h * h);
                }
            }
        }
        Ok(Self { times, positions, velocities, accelerations })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Time-stamped positions of a command stream.
pub fn command_waypoints(commands: &[Command]) -> Vec<TimedWaypoint> {
    commands.iter().map(|c| TimedWaypoint::new(c.t, c.q.clone())).collect()
}

/// Feeds a command stream through the actuator model.
///
/// `initial` is the actuator state before the first command; it defaults to
/// the first command.
pub fn simulate(
    commands: &[TimedWaypoint],
    model: &ActuatorModel,
    initial: Option<&[f64]>,
) -> Result<Trace> {
    for (i, w) in commands.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(Error::Unordered { index: i + 1 });
        }
    }
    let Some(first) = commands.first() else {
        return Trace::from_positions(Vec::new(), Waypoints::zeros(0, 0));
    };
    let dof = first.q.len();
    match model.mode {
        ActuatorMode::Perfect => {
            let rows: Vec<&[f64]> = commands.iter().map(|c| c.q.as_slice()).collect();
            Trace::from_positions(commands.iter().map(|c| c.t).collect(), Waypoints::from_rows(&rows)?)
        }
        ActuatorMode::FirstOrderLag { time_constant } => {
            if !(time_constant > 0.0) {
                return Err(Error::InvalidParameter { name: "time_constant", value: time_constant });
            }
            if !(model.rate_hz > 0.0) {
                return Err(Error::InvalidParameter { name: "rate_hz", value: model.rate_hz });
            }
            let h = 1.0 / model.rate_hz;
            let t0 = first.t;
            let span = commands[commands.len() - 1].t - t0;
            let steps = libm::floor(span / h + 1e-9) as usize;
            let decay = libm::exp(-h / time_constant);
            let mut x: JointVector = initial.map_or_else(|| first.q.clone(), <[f64]>::to_vec);
            if x.len() != dof {
                return Err(Error::DimensionMismatch { expected: dof, found: x.len() });
            }
            let mut times = Vec::with_capacity(steps + 1);
            let mut data = Vec::with_capacity((steps + 1) * dof);
            let mut held = 0;
            for k in 0..=steps {
                let t = t0 + k as f64 * h;
                times.push(t);
                data.extend_from_slice(&x);
                while held + 1 < commands.len() && commands[held + 1].t <= t + 1e-12 {
                    held += 1;
                }
                let u = &commands[held].q;
                for (xi, ui) in x.iter_mut().zip(u) {
                    *xi = ui + (*xi - ui) * decay;
                }
            }
            Trace::from_positions(times, Waypoints::from_row_major(steps + 1, dof, data)?)
        }
    }
}

/// Per-joint mean of `|a|` over a matrix of acceleration samples.
pub fn mean_abs(acc: &Waypoints) -> Vec<f64> {
    let n = acc.rows().max(1) as f64;
    (0..acc.cols()).map(|j| acc.column(j).iter().map(|a| libm::fabs(*a)).sum::<f64>() / n).collect()
}

/// Per-joint population standard deviation of `|a|`.
pub fn std_abs(acc: &Waypoints) -> Vec<f64> {
    let mean = mean_abs(acc);
    let n = acc.rows().max(1) as f64;
    (0..acc.cols())
        .map(|j| {
            let var = acc.column(j).iter().map(|a| { let d = libm::fabs(*a) - mean[j]; d * d }).sum::<f64>() / n;
            libm::sqrt(var)
        })
        .collect()
}

/// Mean absolute acceleration per joint.
pub fn mav(trace: &Trace) -> Result<Vec<f64>> {
    if trace.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, found: trace.len() });
    }
    Ok(mean_abs(&trace.accelerations))
}

/// Repeats each target at the output rate until the next one arrives.
/// The last target is held for one mean input period.
pub fn hold_baseline(inputs: &[TimedWaypoint], dt: f64) -> Vec<TimedWaypoint> {
    let Some(first) = inputs.first() else { return Vec::new() };
    let last = &inputs[inputs.len() - 1];
    let period = if inputs.len() > 1 {
        (last.t - first.t) / (inputs.len() - 1) as f64
    } else {
        dt
    };
    let end = last.t + period;
    let count = libm::floor((end - first.t) / dt - 1e-9) as usize + 1;
    let mut out = Vec::with_capacity(count);
    let mut held = 0;
    for k in 0..count {
        let t = first.t + k as f64 * dt;
        while held + 1 < inputs.len() && inputs[held + 1].t <= t + 1e-9 {
            held += 1;
        }
        out.push(TimedWaypoint::new(t, inputs[held].q.clone()));
    }
    out
}

/// Engine versus zero-order hold on the same stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub mav_uttg: Vec<f64>,
    pub mav_hold: Vec<f64>,
    pub std_uttg: Vec<f64>,
    pub std_hold: Vec<f64>,
    /// Per-joint reduction, `None` where the baseline MAV is zero.
    pub joint_reduction_percent: Vec<Option<f64>>,
    /// Mean over the joints where a reduction is defined.
    pub reduction_percent: Option<f64>,
    /// RMSE of the engine trace against the linearly interpolated input,
    /// shifted by the startup latency.
    pub tracking_rmse: Vec<f64>,
    pub latency: f64,
    pub commands: usize,
}

/// Runs the engine and the hold baseline through the same actuator model.
pub fn compare_baseline(
    inputs: &[TimedWaypoint],
    config: &RobotConfig,
    settings: &ServoSettings,
    model: &ActuatorModel,
) -> Result<ComparisonReport> {
    if inputs.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, found: inputs.len() });
    }
    let run = run_servo(inputs, config, settings, &RunOptions::default())?;
    if let Some(e) = run.diagnostics.errors.first() {
        return Err(e.clone());
    }
    let engine = simulate(&command_waypoints(&run.commands), model, None)?;
    let hold = simulate(&hold_baseline(inputs, settings.dt_output), model, None)?;
    let mav_uttg = mav(&engine)?;
    let mav_hold = mav(&hold)?;
    let joint_reduction_percent: Vec<Option<f64>> = mav_uttg
        .iter()
        .zip(&mav_hold)
        .map(|(u, h)| (*h > 1e-12).then(|| 100.0 * (1.0 - u / h)))
        .collect();
    let defined: Vec<f64> = joint_reduction_percent.iter().flatten().copied().collect();
    let reduction_percent =
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    let latency = run.commands.first().map_or(0.0, |c| c.t - inputs[0].t);
    Ok(ComparisonReport {
        std_uttg: std_abs(&engine.accelerations),
        std_hold: std_abs(&hold.accelerations),
        mav_uttg,
        mav_hold,
        joint_reduction_percent,
        reduction_percent,
        tracking_rmse: tracking_rmse(&engine, inputs, latency),
        latency,
        commands: run.commands.len(),
    })
}

fn tracking_rmse(trace: &Trace, inputs: &[TimedWaypoint], latency: f64) -> Vec<f64> {
    let dof = trace.positions.cols();
    let mut sum = vec![0.0; dof];
    let mut count = 0usize;
    let (t_first, t_last) = (inputs[0].t, inputs[inputs.len() - 1].t);
    let mut seg = 0;
    for (i, t) in trace.times.iter().enumerate() {
        let ti = t - latency;
        if ti < t_first - 1e-12 || ti > t_last + 1e-12 {
            continue;
        }
        while seg + 2 < inputs.len() && inputs[seg + 1].t < ti {
            seg += 1;
        }
        let (a, b) = (&inputs[seg], &inputs[(seg + 1).min(inputs.len() - 1)]);
        let s = if b.t > a.t { ((ti - a.t) / (b.t - a.t)).clamp(0.0, 1.0) } else { 0.0 };
        for j in 0..dof {
            let r = a.q[j] + s * (b.q[j] - a.q[j]);
            let e = trace.positions[(i, j)] - r;
            sum[j] += e * e;
        }
        count += 1;
    }
    sum.iter().map(|s| libm::sqrt(s / count.max(1) as f64)).collect()
}

/// Samples `f` at `rate_hz` over `[0, duration]`, both ends included.
pub fn sampled_stream<F: Fn(f64) -> JointVector>(f: F, rate_hz: f64, duration: f64) -> Vec<TimedWaypoint> {
    let n = libm::round(duration * rate_hz) as usize;
    (0..=n)
        .map(|k| {
            let t = k as f64 / rate_hz;
            TimedWaypoint::new(t, f(t))
        })
        .collect()
}

/// Two-joint test motion: 0.8 rad at 0.5 Hz and 0.5 rad at 0.3 Hz, 20 Hz for 5 s.
///
/// Cosine phase, so the motion starts and ends at rest.
pub fn standard_stream() -> Vec<TimedWaypoint> {
    sampled_stream(
        |t| vec![0.8 * libm::cos(2.0 * PI * 0.5 * t), 0.5 * libm::cos(2.0 * PI * 0.3 * t)],
        20.0,
        5.0,
    )
}

/// Instant of the jump in [`step_jump_stream`].
pub const STEP_JUMP_TIME: f64 = 1.0;
/// Target after the jump in [`step_jump_stream`].
pub const STEP_JUMP_TARGET: [f64; 2] = [0.6, -0.4];

/// Two-joint stream holding at the origin, then jumping to [`STEP_JUMP_TARGET`].
pub fn step_jump_stream() -> Vec<TimedWaypoint> {
    sampled_stream(
        |t| if t + 1e-9 < STEP_JUMP_TIME { vec![0.0, 0.0] } else { STEP_JUMP_TARGET.to_vec() },
        20.0,
        3.0,
    )
}
