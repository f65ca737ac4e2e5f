use alloc::vec;
use alloc::vec::Vec;

use super::executor::{Executor, Plan, Player};
use super::{Command, ServoMode, ServoSettings};
use crate::robot::RobotConfig;
use crate::waypoints::max_abs_diff;
use crate::{Error, JointVector, Result, TimedWaypoint};

/// Snapshot of the servo loop as the sender last left it.
#[derive(Debug, Clone, PartialEq)]
pub struct ServoState {
    pub start_servo: bool,
    /// Seconds into the current trajectory.
    pub traj_clock: f64,
    pub q_current: JointVector,
    pub qd_current: JointVector,
    pub qdd_current: JointVector,
    /// The engine has emitted at least one command.
    pub started: bool,
    /// Set once planning failed; the engine then only holds.
    pub fault: Option<Error>,
}

/// Counters and extrema gathered over a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub replans: usize,
    /// Buffered waypoints taken into plans.
    pub consumed_waypoints: usize,
    /// Waypoints discarded unvisited by rapid mode.
    pub skipped_waypoints: usize,
    /// Knots over all plans, start knots included.
    pub plan_knots: usize,
    pub dilations: usize,
    /// Plans whose uniform dilation delayed the schedule.
    pub schedule_shifts: usize,
    pub stale_inputs: usize,
    pub overflow_drops: usize,
    pub clamped_inputs: usize,
    pub suppressed_inputs: usize,
    pub clamped_commands: usize,
    pub max_velocity: Vec<f64>,
    pub max_acceleration: Vec<f64>,
    /// Largest position, velocity and acceleration jump at a replan.
    pub max_stitch_gap: [f64; 3],
    pub errors: Vec<Error>,
}

impl Diagnostics {
    /// Inputs that never became knots.
    pub fn dropped_inputs(&self) -> usize {
        self.stale_inputs + self.overflow_drops + self.skipped_waypoints
    }
}

/// Executor and sender in lockstep on a simulated clock.
#[derive(Debug, Clone)]
pub struct ServoEngine {
    executor: Executor,
    player: Player,
    state: ServoState,
    tick: u64,
    done: bool,
    diag: Diagnostics,
    record_plans: bool,
    plans: Vec<Plan>,
}

impl ServoEngine {
    /// Engine whose first tick is `start_tick`, with the robot at rest at `q_init`.
    pub fn new(
        config: &RobotConfig,
        settings: ServoSettings,
        q_init: JointVector,
        start_tick: u64,
    ) -> Result<Self> {
        let limits = config.limits.clone();
        if q_init.len() != limits.dof() {
            return Err(Error::DimensionMismatch { expected: limits.dof(), found: q_init.len() });
        }
        if let Some(joint) = limits.violation(&q_init) {
            return Err(Error::OutOfLimits { joint, value: q_init[joint] });
        }
        let dof = limits.dof();
        let player = Player::new(settings.dt_output, limits.clone(), q_init.clone());
        Ok(Self {
            executor: Executor::new(limits, settings)?,
            player,
            state: ServoState {
                start_servo: true,
                traj_clock: 0.0,
                q_current: q_init,
                qd_current: vec![0.0; dof],
                qdd_current: vec![0.0; dof],
                started: false,
                fault: None,
            },
            tick: start_tick,
            done: false,
            diag: Diagnostics {
                max_velocity: vec![0.0; dof],
                max_acceleration: vec![0.0; dof],
                ..Diagnostics::default()
            },
            record_plans: false,
            plans: Vec::new(),
        })
    }

    /// Keep a copy of every committed plan.
    pub fn record_plans(&mut self, on: bool) {
        self.record_plans = on;
    }

    pub fn plans(&self) -> &[Plan] {
        &self.plans
    }

    pub fn settings(&self) -> &ServoSettings {
        self.executor.settings()
    }

    pub fn state(&self) -> &ServoState {
        &self.state
    }

    pub fn executor(&self) -> &Executor {
        &self.executor
    }

    pub fn current_plan(&self) -> Option<&Plan> {
        self.player.plan()
    }

    /// Tick the next call to [`step`](Self::step) will emit.
    pub fn next_tick(&self) -> u64 {
        self.tick
    }

    pub fn now(&self) -> f64 {
        self.tick as f64 * self.settings().dt_output
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Monitor switch. Once off, new inputs are ignored and the buffer drains.
    pub fn set_start_servo(&mut self, on: bool) {
        self.state.start_servo = on;
    }

    pub fn set_mode(&mut self, mode: ServoMode) {
        self.executor.set_mode(mode);
    }

    /// Feeds one raw input through the filter into the buffer.
    pub fn push_input(&mut self, raw: &TimedWaypoint) -> Result<()> {
        if !self.state.start_servo || self.state.fault.is_some() {
            return Ok(());
        }
        self.executor.push_input(raw)
    }

    /// Advances one output tick. Returns the command emitted on it, if any.
    pub fn step(&mut self) -> Option<Command> {
        if self.done {
            return None;
        }
        let tick = self.tick;
        self.tick += 1;
        if self.state.fault.is_none() {
            let live = self.player.live(tick);
            match self.executor.poll(tick, self.player.plan(), &live, self.state.start_servo) {
                Ok(Some(plan)) => {
                    if self.state.started {
                        let next = plan.live(tick, self.settings().dt_output);
                        let gaps = [
                            max_abs_diff(&live.q, &next.q),
                            max_abs_diff(&live.qd, &next.qd),
                            max_abs_diff(&live.qdd, &next.qdd),
                        ];
                        for (m, g) in self.diag.max_stitch_gap.iter_mut().zip(gaps) {
                            *m = m.max(g);
                        }
                    }
                    self.executor.commit(&plan);
                    if self.record_plans {
                        self.plans.push(plan.clone());
                    }
                    self.player.install(plan);
                    self.state.started = true;
                }
                Ok(None) => {}
                Err(e) => {
                    self.diag.errors.push(e.clone());
                    self.state.fault = Some(e);
                    self.executor.clear_buffer();
                }
            }
        }
        let idle = !self.state.start_servo && self.executor.buffer().is_empty();
        if !self.state.started {
            if idle || self.state.fault.is_some() && !self.state.start_servo {
                self.done = true;
            }
            return None;
        }
        let cmd = self.player.emit(tick);
        for (m, v) in self.diag.max_velocity.iter_mut().zip(&cmd.qd) {
            *m = m.max(libm::fabs(*v));
        }
        for (m, a) in self.diag.max_acceleration.iter_mut().zip(&cmd.qdd) {
            *m = m.max(libm::fabs(*a));
        }
        if cmd.clamped {
            self.diag.clamped_commands += 1;
        }
        self.state.traj_clock = self
            .player
            .plan()
            .map_or(0.0, |p| (tick - p.start_tick) as f64 * self.settings().dt_output);
        self.state.q_current.clone_from(&cmd.q);
        self.state.qd_current.clone_from(&cmd.qd);
        self.state.qdd_current.clone_from(&cmd.qdd);
        if idle && self.player.finished(tick) {
            self.done = true;
        }
        Some(cmd)
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let s = self.executor.stats();
        let mut d = self.diag.clone();
        d.replans = s.replans;
        d.consumed_waypoints = s.consumed;
        d.skipped_waypoints = s.skipped;
        d.plan_knots = s.plan_knots;
        d.dilations = s.dilations;
        d.schedule_shifts = s.schedule_shifts;
        d.stale_inputs = s.stale_inputs;
        d.clamped_inputs = s.clamped_inputs;
        d.suppressed_inputs = s.suppressed_inputs;
        d.overflow_drops = self.executor.buffer().dropped();
        d
    }
}

/// Options of a simulated-clock run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    /// Robot state at the first tick; defaults to the first input.
    pub initial: Option<JointVector>,
    /// Time at which the monitor switches servoing off.
    pub stop_at: Option<f64>,
    /// Keep every committed plan in the result.
    pub record_plans: bool,
}

/// Output of [`run_servo`].
#[derive(Debug, Clone)]
pub struct ServoRun {
    pub commands: Vec<Command>,
    pub diagnostics: Diagnostics,
    pub plans: Vec<Plan>,
}

/// Runs the engine over a recorded input stream on a simulated clock.
///
/// Inputs are delivered on the first tick at or after their stamp. The
/// monitor keeps servoing on until the stream is exhausted (or `stop_at`);
/// the run ends once the buffer is drained and the last trajectory finished.
pub fn run_servo(
    inputs: &[TimedWaypoint],
    config: &RobotConfig,
    settings: &ServoSettings,
    options: &RunOptions,
) -> Result<ServoRun> {
    let dt = settings.dt_output;
    settings.validate()?;
    let dof = config.dof();
    if let Some(bad) = inputs.iter().find(|w| w.q.len() != dof) {
        return Err(Error::DimensionMismatch { expected: dof, found: bad.q.len() });
    }
    let initial = match (&options.initial, inputs.first()) {
        (Some(q), _) => q.clone(),
        (None, Some(w)) => {
            let mut q = w.q.clone();
            config.limits.clamp_position(&mut q);
            q
        }
        (None, None) => vec![0.0; dof],
    };
    let start_tick = inputs.first().map_or(0, |w| libm::floor(w.t / dt + 1e-9).max(0.0) as u64);
    let mut engine = ServoEngine::new(config, settings.clone(), initial, start_tick)?;
    engine.record_plans(options.record_plans);

    let span = inputs.last().map_or(0.0, |w| w.t) - inputs.first().map_or(0.0, |w| w.t);
    let max_ticks = libm::ceil(span / dt) as u64 * 20 + 200_000;
    let mut commands = Vec::new();
    let mut next = 0;
    for _ in 0..max_ticks {
        let now = engine.now();
        let stopped = options.stop_at.is_some_and(|s| now >= s - 1e-9);
        if stopped {
            engine.set_start_servo(false);
        }
        while next < inputs.len() && inputs[next].t <= now + 1e-9 {
            // Stale inputs are counted by the executor and otherwise ignored.
            let _ = engine.push_input(&inputs[next]);
            next += 1;
        }
        if next == inputs.len() {
            engine.set_start_servo(false);
        }
        if let Some(c) = engine.step() {
            commands.push(c);
        }
        if engine.is_done() {
            break;
        }
    }
    let diagnostics = engine.diagnostics();
    let plans = core::mem::take(&mut engine.plans);
    Ok(ServoRun { commands, diagnostics, plans })
}
