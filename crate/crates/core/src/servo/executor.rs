use alloc::vec;
use alloc::vec::Vec;

use super::timing::{dilate_tail_first, solve_ptp_timed};
use super::{plan_joint_path, Command, ServoMode, ServoSettings, WaypointBuffer, MERGE_TOLERANCE};
use crate::filter::WaypointFilter;
use crate::robot::JointLimits;
use crate::spline::{
    interpolating_spline, min_stretch_spline, BoundaryState, CubicSplineTrajectory, KnotSequence,
    StretchWeights,
};
use crate::waypoints::max_abs_diff;
use crate::{Error, JointVector, Result, TimedWaypoint, Waypoints};

/// Kinematic state of the robot as commanded.
#[derive(Debug, Clone, PartialEq)]
pub struct LiveState {
    pub q: JointVector,
    pub qd: JointVector,
    pub qdd: JointVector,
}

impl LiveState {
    pub fn at_rest(q: JointVector) -> Self {
        let n = q.len();
        Self { q, qd: vec![0.0; n], qdd: vec![0.0; n] }
    }
}

/// An issued target on a plan's schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedKnot {
    /// Absolute time at which the trajectory reaches the knot.
    pub time: f64,
    /// Stamp of the waypoint the knot came from.
    pub stamp: f64,
    pub q: JointVector,
}

/// A trajectory anchored on the output grid, with its schedule.
#[derive(Debug, Clone)]
pub struct Plan {
    pub id: u64,
    pub mode: ServoMode,
    pub start_tick: u64,
    pub start_time: f64,
    pub traj: CubicSplineTrajectory,
    /// Targets after the start knot, in order.
    pub knots: Vec<PlannedKnot>,
    /// Schedule latency: knot time minus stamp.
    pub offset: f64,
    /// Buffer entries this plan took.
    pub consumed: Vec<TimedWaypoint>,
    /// Buffer entries discarded unvisited.
    pub skipped: usize,
    pub dilations: usize,
    /// Uniform dilation moved this plan's schedule.
    pub shifted: bool,
}

impl Plan {
    pub fn end_time(&self) -> f64 {
        self.start_time + self.traj.duration()
    }

    fn local_time(&self, tick: u64, dt: f64) -> f64 {
        tick.saturating_sub(self.start_tick) as f64 * dt
    }

    pub fn live(&self, tick: u64, dt: f64) -> LiveState {
        let s = self.traj.eval(self.local_time(tick, dt));
        LiveState { q: s.position, qd: s.velocity, qdd: s.acceleration }
    }
}

/// Running counters kept by the executor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExecutorStats {
    pub replans: usize,
    pub consumed: usize,
    pub skipped: usize,
    pub plan_knots: usize,
    pub dilations: usize,
    /// Plans that needed uniform dilation and so delayed the schedule.
    pub schedule_shifts: usize,
    pub stale_inputs: usize,
    pub clamped_inputs: usize,
    pub suppressed_inputs: usize,
}

/// Buffer owner and trajectory producer.
#[derive(Debug, Clone)]
pub struct Executor {
    settings: ServoSettings,
    limits: JointLimits,
    filter: WaypointFilter,
    buffer: WaypointBuffer,
    offset: f64,
    last_plan_tick: Option<u64>,
    next_id: u64,
    first_stamp: Option<f64>,
    stats: ExecutorStats,
}

impl Executor {
    pub fn new(limits: JointLimits, settings: ServoSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            filter: WaypointFilter::new(settings.filter)?,
            buffer: WaypointBuffer::new(settings.buffer_capacity),
            settings,
            limits,
            offset: 0.0,
            last_plan_tick: None,
            next_id: 0,
            first_stamp: None,
            stats: ExecutorStats::default(),
        })
    }

    pub fn settings(&self) -> &ServoSettings {
        &self.settings
    }

    pub fn mode(&self) -> ServoMode {
        self.settings.mode
    }

    /// Takes effect at the next replan; the running trajectory is untouched.
    pub fn set_mode(&mut self, mode: ServoMode) {
        self.settings.mode = mode;
    }

    pub fn buffer(&self) -> &WaypointBuffer {
        &self.buffer
    }

    pub fn stats(&self) -> ExecutorStats {
        let mut s = self.stats.clone();
        s.suppressed_inputs = self.filter.suppressed_count();
        s
    }

    /// Schedule latency of the latest committed plan.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Filters a raw input and appends it to the buffer.
    pub fn push_input(&mut self, raw: &TimedWaypoint) -> Result<()> {
        if raw.q.len() != self.limits.dof() {
            return Err(Error::DimensionMismatch { expected: self.limits.dof(), found: raw.q.len() });
        }
        let filtered = match self.filter.filter(raw) {
            Ok(f) => f,
            Err(e) => {
                self.stats.stale_inputs += 1;
                return Err(e);
            }
        };
        if let Some(mut wp) = filtered {
            if self.limits.clamp_position(&mut wp.q) {
                self.stats.clamped_inputs += 1;
            }
            self.first_stamp.get_or_insert(wp.t);
            self.buffer.push(wp)?;
        }
        Ok(())
    }

    /// Drops everything still buffered.
    pub fn clear_buffer(&mut self) {
        self.buffer.clear();
    }

    /// Decides whether a new plan starts at `tick` and builds it.
    ///
    /// `current` is the plan being played and `live` its state at `tick`.
    pub fn poll(
        &mut self,
        tick: u64,
        current: Option<&Plan>,
        live: &LiveState,
        start_servo: bool,
    ) -> Result<Option<Plan>> {
        let dt = self.settings.dt_output;
        let now = tick as f64 * dt;
        let eps = 0.25 * dt;
        let Some(plan) = current else {
            // A sparse stream never fills the lookahead; start once the oldest entry has waited that long.
            let window = (self.settings.lookahead + 1) as f64 * self.settings.dt_servo;
            let stalled = self.buffer.front().is_some_and(|w| now > w.t + window + eps);
            let ready = self.buffer.len() > self.settings.lookahead
                || stalled
                || (!start_servo && !self.buffer.is_empty());
            if !ready {
                return Ok(None);
            }
            return self.first_plan(tick, now, live).map(Some);
        };
        if self.buffer.is_empty() {
            return Ok(None);
        }
        let finished = now >= plan.end_time() - eps;
        let due = match self.settings.mode {
            ServoMode::Precise => plan.knots.first().is_none_or(|k| now >= k.time - eps),
            ServoMode::Rapid => self
                .last_plan_tick
                .is_none_or(|t| now >= t as f64 * dt + self.settings.dt_servo - eps),
        };
        if !(finished || due) {
            return Ok(None);
        }
        let plan = match self.settings.mode {
            ServoMode::Precise => {
                let fresh = self.buffer.drain_all();
                let pending = plan.knots.iter().filter(|k| k.time > now + eps);
                let targets = pending
                    .map(|k| (k.stamp, &k.q))
                    .chain(fresh.iter().map(|w| (w.t, &w.q)));
                let entries = self.schedule(now, targets);
                self.build(tick, now, live, entries, fresh, 0)?
            }
            ServoMode::Rapid => {
                let (newest, skipped) = self.buffer.pop_newest().expect("buffer is not empty");
                let end = plan.knots.last().filter(|k| k.time > now + eps);
                let q_end = end.map_or(&live.q, |k| &k.q);
                let path = plan_joint_path(&live.q, q_end, &newest.q);
                let mut targets = Vec::with_capacity(2);
                if path.rows() == 3 {
                    let k = end.expect("q_end differs from the live state");
                    targets.push((k.stamp, &k.q));
                }
                targets.push((newest.t, &newest.q));
                let entries = self.schedule(now, targets.into_iter());
                self.build(tick, now, live, entries, vec![newest], skipped)?
            }
        };
        Ok(Some(plan))
    }

    /// Places targets at stamp plus the current offset, at least one tick apart.
    fn schedule<'a>(
        &self,
        now: f64,
        targets: impl Iterator<Item = (f64, &'a JointVector)>,
    ) -> Vec<PlannedKnot> {
        let dt = self.settings.dt_output;
        let mut prev = now;
        targets
            .map(|(stamp, q)| {
                let time = (stamp + self.offset).max(prev + dt);
                prev = time;
                PlannedKnot { time, stamp, q: q.clone() }
            })
            .collect()
    }

    fn first_plan(&mut self, tick: u64, now: f64, live: &LiveState) -> Result<Plan> {
        let dt = self.settings.dt_output;
        match self.settings.mode {
            ServoMode::Precise => {
                let first = self.buffer.pop_front().expect("ready implies entries");
                if max_abs_diff(&live.q, &first.q) < MERGE_TOLERANCE {
                    self.offset = now - first.t;
                    let rest = self.buffer.drain_all();
                    let mut entries = self.schedule(now, rest.iter().map(|w| (w.t, &w.q)));
                    if entries.is_empty() {
                        entries.push(PlannedKnot { time: now + dt, stamp: first.t, q: first.q.clone() });
                    }
                    let mut consumed = vec![first];
                    consumed.extend(rest);
                    self.build(tick, now, live, entries, consumed, 0)
                } else {
                    self.ptp_plan(tick, now, live, first, 0, 0.0)
                }
            }
            ServoMode::Rapid => {
                let (newest, skipped) = self.buffer.pop_newest().expect("ready implies entries");
                let min = newest.t - self.first_stamp.unwrap_or(newest.t);
                self.ptp_plan(tick, now, live, newest, skipped, min)
            }
        }
    }

    fn ptp_plan(
        &mut self,
        tick: u64,
        now: f64,
        live: &LiveState,
        target: TimedWaypoint,
        skipped: usize,
        min_duration: f64,
    ) -> Result<Plan> {
        let dt = self.settings.dt_output;
        let (traj, _, dilations) = solve_ptp_timed(
            &live.q,
            &target.q,
            &self.limits,
            self.settings.beta,
            dt,
            min_duration,
        )?;
        let time = now + traj.duration();
        let knot = PlannedKnot { time, stamp: target.t, q: traj.eval(traj.duration()).position };
        let offset = time - target.t;
        Ok(self.finish(tick, now, traj, vec![knot], vec![target], skipped, dilations, offset))
    }

    fn build(
        &mut self,
        tick: u64,
        now: f64,
        live: &LiveState,
        mut entries: Vec<PlannedKnot>,
        consumed: Vec<TimedWaypoint>,
        skipped: usize,
    ) -> Result<Plan> {
        let dt = self.settings.dt_output;
        let mut rows: Vec<&[f64]> = Vec::with_capacity(entries.len() + 1);
        rows.push(&live.q);
        rows.extend(entries.iter().map(|k| k.q.as_slice()));
        let q = Waypoints::from_rows(&rows)?;
        let mut prev = now;
        let durations: Vec<f64> = entries
            .iter()
            .map(|k| {
                let d = (k.time - prev).max(dt);
                prev = k.time;
                d
            })
            .collect();
        let boundary = BoundaryState::from_start(live.qd.clone(), live.qdd.clone());
        let mu = self.settings.mu();
        let beta = self.settings.beta;
        let (traj, durations, dilations, shifted) = dilate_tail_first(durations, &self.limits, Some(dt), |d| {
            let knots = KnotSequence::new(d, beta)?;
            if q.rows() == 2 {
                return interpolating_spline(&q, &boundary, &knots);
            }
            // μ weighs energy measured in units of the mean segment duration.
            let scale = libm::pow(knots.mean_duration(), 3.0);
            let last = q.rows() - 1;
            let lambda = (1.0 - mu) / mu * scale;
            let w = StretchWeights::from_lambda(lambda, q.rows())?.pin(0).pin(last);
            min_stretch_spline(&q, &w, &boundary, &knots)
        })?;
        let mut t = now;
        for (k, d) in entries.iter_mut().zip(&durations) {
            t += d;
            k.time = t;
        }
        // A stretched tail is provisional; only uniform dilation moves the schedule.
        let offset = if shifted {
            entries.last().map_or(self.offset, |k| k.time - k.stamp)
        } else {
            self.offset
        };
        Ok(self.finish(tick, now, traj, entries, consumed, skipped, dilations, offset))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &mut self,
        tick: u64,
        now: f64,
        traj: CubicSplineTrajectory,
        knots: Vec<PlannedKnot>,
        consumed: Vec<TimedWaypoint>,
        skipped: usize,
        dilations: usize,
        offset: f64,
    ) -> Plan {
        let id = self.next_id;
        self.next_id += 1;
        Plan {
            id,
            mode: self.settings.mode,
            start_tick: tick,
            start_time: now,
            traj,
            knots,
            offset,
            consumed,
            skipped,
            dilations,
            shifted: offset > self.offset + 1e-12,
        }
    }

    /// Records that `plan` went live.
    pub fn commit(&mut self, plan: &Plan) {
        self.offset = plan.offset;
        self.last_plan_tick = Some(plan.start_tick);
        self.stats.replans += 1;
        self.stats.consumed += plan.consumed.len();
        self.stats.skipped += plan.skipped;
        self.stats.plan_knots += plan.knots.len() + 1;
        self.stats.dilations += plan.dilations;
        self.stats.schedule_shifts += usize::from(plan.shifted);
    }

    /// Returns a plan's waypoints to the buffer after the sender refused it.
    pub fn reject(&mut self, plan: Plan) {
        let mut items = plan.consumed;
        items.extend(self.buffer.drain_all());
        self.buffer.restore_front(items);
    }
}

/// Samples the active plan on the output grid.
#[derive(Debug, Clone)]
pub struct Player {
    dt: f64,
    limits: JointLimits,
    plan: Option<Plan>,
    hold: JointVector,
}

impl Player {
    pub fn new(dt: f64, limits: JointLimits, q_init: JointVector) -> Self {
        Self { dt, limits, plan: None, hold: q_init }
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.plan.as_ref()
    }

    pub fn install(&mut self, plan: Plan) {
        self.plan = Some(plan);
    }

    /// Commanded state at `tick`.
    pub fn live(&self, tick: u64) -> LiveState {
        match &self.plan {
            Some(p) => p.live(tick, self.dt),
            None => LiveState::at_rest(self.hold.clone()),
        }
    }

    /// True when nothing remains to play at `tick`.
    pub fn finished(&self, tick: u64) -> bool {
        self.plan
            .as_ref()
            .is_none_or(|p| tick as f64 * self.dt >= p.end_time() - 0.25 * self.dt)
    }

    /// Command for `tick`, clamped into the position limits.
    pub fn emit(&mut self, tick: u64) -> Command {
        let s = self.live(tick);
        let mut q = s.q;
        let clamped = self.limits.clamp_position(&mut q);
        Command { tick, t: tick as f64 * self.dt, q, qd: s.qd, qdd: s.qdd, clamped }
    }
}
