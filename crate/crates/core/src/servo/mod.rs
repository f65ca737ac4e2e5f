//! Buffered online planning: precise and rapid servo loops.
//!
//! Roles follow a monitor / executor / sender split. The [`Executor`] owns the
//! waypoint buffer and produces [`Plan`]s; the [`Player`] samples the active
//! plan once per output tick. [`ServoEngine`] runs both in lockstep on a
//! simulated clock; threaded runtimes drive the two halves separately.

mod engine;
mod executor;
mod timing;

use alloc::collections::VecDeque;
use alloc::vec::Vec;

pub use engine::{run_servo, Diagnostics, RunOptions, ServoEngine, ServoRun, ServoState};
pub use executor::{Executor, ExecutorStats, LiveState, Plan, PlannedKnot, Player};
pub use timing::{
    allocate_times, dilate_tail_first, dilate_until_compliant, heuristic_duration, snap_to_grid, solve_ptp, solve_ptp_timed,
    within_rate_limits, DILATION_FACTOR, MAX_DILATIONS,
};

use crate::filter::FilterSettings;
use crate::spline::CubicSplineTrajectory;
use crate::waypoints::max_abs_diff;
use crate::{Error, JointVector, Result, TimedWaypoint, Waypoints};

pub const DEFAULT_DT_OUTPUT: f64 = 0.005;
pub const DEFAULT_DT_SERVO: f64 = 0.05;
pub const DEFAULT_PRECISE_MU: f64 = 0.999;
pub const DEFAULT_RAPID_MU: f64 = 0.9;
pub const DEFAULT_BETA: f64 = 0.5;
/// Points closer than this in max-norm are treated as one.
pub const MERGE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ServoMode {
    /// Visit every buffered waypoint.
    #[default]
    Precise,
    /// Head for the newest waypoint, skipping stale ones.
    Rapid,
}

impl ServoMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ServoMode::Precise => "precise",
            ServoMode::Rapid => "rapid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "precise" => Some(ServoMode::Precise),
            "rapid" => Some(ServoMode::Rapid),
            _ => None,
        }
    }
}

/// Operator-facing tuning of the servo loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ServoSettings {
    pub mode: ServoMode,
    /// μ used in precise mode.
    pub precise_mu: f64,
    /// μ used in rapid mode.
    pub rapid_mu: f64,
    pub beta: f64,
    pub dt_output: f64,
    pub dt_servo: f64,
    /// Input periods buffered before the first plan. Later knots are
    /// scheduled at their stamp plus the latency this creates, so each plan
    /// looks that far ahead.
    pub lookahead: usize,
    pub buffer_capacity: usize,
    pub filter: FilterSettings,
}

impl Default for ServoSettings {
    fn default() -> Self {
        Self {
            mode: ServoMode::Precise,
            precise_mu: DEFAULT_PRECISE_MU,
            rapid_mu: DEFAULT_RAPID_MU,
            beta: DEFAULT_BETA,
            dt_output: DEFAULT_DT_OUTPUT,
            dt_servo: DEFAULT_DT_SERVO,
            lookahead: 3,
            buffer_capacity: 256,
            filter: FilterSettings::default(),
        }
    }
}

impl ServoSettings {
    pub fn for_mode(mode: ServoMode) -> Self {
        Self { mode, ..Self::default() }
    }

    /// μ of the active mode.
    pub fn mu(&self) -> f64 {
        match self.mode {
            ServoMode::Precise => self.precise_mu,
            ServoMode::Rapid => self.rapid_mu,
        }
    }

    /// Sets μ of the active mode.
    pub fn set_mu(&mut self, mu: f64) {
        match self.mode {
            ServoMode::Precise => self.precise_mu = mu,
            ServoMode::Rapid => self.rapid_mu = mu,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_output > 0.0 && self.dt_output.is_finite()) {
            return Err(Error::InvalidParameter { name: "dt_output", value: self.dt_output });
        }
        if !(self.dt_servo >= self.dt_output) {
            return Err(Error::InvalidParameter { name: "dt_servo", value: self.dt_servo });
        }
        for mu in [self.precise_mu, self.rapid_mu] {
            if !(mu > 0.0 && mu <= 1.0) {
                return Err(Error::InvalidParameter { name: "mu", value: mu });
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter { name: "beta", value: self.beta });
        }
        if self.buffer_capacity == 0 {
            return Err(Error::InvalidParameter { name: "buffer_capacity", value: 0.0 });
        }
        self.filter.validate()
    }
}

/// FIFO of filtered waypoints with drop-oldest overflow.
#[derive(Debug, Clone)]
pub struct WaypointBuffer {
    entries: VecDeque<TimedWaypoint>,
    capacity: usize,
    dropped: usize,
}

impl WaypointBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { entries: VecDeque::new(), capacity: capacity.max(1), dropped: 0 }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries lost to overflow.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn push(&mut self, wp: TimedWaypoint) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if !(wp.t > last.t) {
                return Err(Error::StaleInput { stamp: wp.t, previous: last.t });
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
            self.dropped += 1;
        }
        self.entries.push_back(wp);
        Ok(())
    }

    pub fn front(&self) -> Option<&TimedWaypoint> {
        self.entries.front()
    }

    pub fn pop_front(&mut self) -> Option<TimedWaypoint> {
        self.entries.pop_front()
    }

    /// Puts entries back at the head, keeping their order.
    pub fn restore_front(&mut self, items: Vec<TimedWaypoint>) {
        for wp in items.into_iter().rev() {
            self.entries.push_front(wp);
        }
    }

    /// Removes everything.
    pub fn drain_all(&mut self) -> Vec<TimedWaypoint> {
        self.entries.drain(..).collect()
    }

    /// Removes everything and returns the newest entry plus how many were skipped.
    pub fn pop_newest(&mut self) -> Option<(TimedWaypoint, usize)> {
        let newest = self.entries.pop_back()?;
        let skipped = self.entries.len();
        self.entries.clear();
        Some((newest, skipped))
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Position command stamped on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub tick: u64,
    pub t: f64,
    pub q: JointVector,
    pub qd: JointVector,
    pub qdd: JointVector,
    /// A joint hit its position limit and was clamped.
    pub clamped: bool,
}

/// `[q_current, q_end, q_new]` with coincident neighbours merged.
pub fn plan_joint_path(q_current: &[f64], q_end: &[f64], q_new: &[f64]) -> Waypoints {
    let mut rows: Vec<&[f64]> = alloc::vec![q_current];
    for q in [q_end, q_new] {
        if max_abs_diff(rows[rows.len() - 1], q) >= MERGE_TOLERANCE {
            rows.push(q);
        }
    }
    Waypoints::from_rows(&rows).expect("rows share one length")
}

/// Samples `traj` every `dt` from its start for `floor(horizon / dt)` ticks.
///
/// The horizon is clamped to the trajectory duration.
pub fn execute_trajectory(
    traj: &CubicSplineTrajectory,
    horizon: f64,
    dt: f64,
    first_tick: u64,
) -> Vec<Command> {
    let horizon = horizon.min(traj.duration()).max(0.0);
    let count = libm::floor(horizon / dt + 1e-9) as u64;
    (0..count)
        .map(|k| {
            let s = traj.eval(k as f64 * dt);
            let tick = first_tick + k;
            Command {
                tick,
                t: tick as f64 * dt,
                q: s.position,
                qd: s.velocity,
                qdd: s.acceleration,
                clamped: s.clamped,
            }
        })
        .collect()
}
