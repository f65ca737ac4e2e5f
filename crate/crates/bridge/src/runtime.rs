//! Threaded servo runtime on the wall clock.
//!
//! Three roles share the work. The monitor is the [`RuntimeHandle`]: it owns
//! the StartServo flag and is where input adapters push waypoints. The
//! executor thread owns the filter, the buffer and the planner. The sender
//! thread owns the active trajectory and emits one command per output tick.
//!
//! Plans cross from executor to sender through a single-slot handoff. Each
//! plan is built for a tick a few periods ahead of the sender; the sender
//! installs it on that tick or refuses it if the tick has already passed, in
//! which case the executor puts the consumed waypoints back and plans again.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender, TryRecvError, TrySendError};
use log::{debug, warn};
use teleop_otg_core::robot::JointLimits;
use teleop_otg_core::servo::{Command, Executor, ExecutorStats, LiveState, Plan, Player, ServoMode, ServoSettings};
use teleop_otg_core::{Error, JointVector, TimedWaypoint};

#[derive(Debug, Clone)]
pub struct RuntimeOptions {
    pub settings: ServoSettings,
    pub limits: JointLimits,
    pub initial: JointVector,
    /// Ticks between the sender's clock and the tick a new plan starts on.
    pub lead_ticks: u64,
    /// Wall-clock speed-up; 1.0 is real time.
    pub time_scale: f64,
    /// Keep ticking after the buffer drains (service use).
    pub keep_alive: bool,
    /// Initial state of the StartServo flag.
    pub serving: bool,
    pub input_capacity: usize,
    /// Capacity of the outbound command channel; 0 disables it.
    pub command_capacity: usize,
}

impl RuntimeOptions {
    pub fn new(settings: ServoSettings, limits: JointLimits, initial: JointVector) -> Self {
        Self {
            settings,
            limits,
            initial,
            lead_ticks: 4,
            time_scale: 1.0,
            keep_alive: false,
            serving: true,
            input_capacity: 1024,
            command_capacity: 4096,
        }
    }
}

enum Input {
    Waypoint(TimedWaypoint),
    Mode(ServoMode),
}

/// Latest emitted state, published by the sender.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub tick: u64,
    pub t: f64,
    pub q: JointVector,
    pub qd: JointVector,
    pub qdd: JointVector,
    pub clamped: bool,
    pub mode: ServoMode,
    pub started: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RuntimeReport {
    pub commands: u64,
    pub replans: usize,
    pub rejected_plans: usize,
    /// Wall-clock time of every planning call that produced a plan.
    pub replan_latencies: Vec<Duration>,
    /// Ticks whose deadline had already passed when the sender woke.
    pub late_ticks: u64,
    /// Commands lost because the outbound channel was full.
    pub dropped_commands: u64,
    pub dropped_inputs: u64,
    pub errors: Vec<Error>,
    pub stats: ExecutorStats,
}

struct Shared {
    start_servo: AtomicBool,
    shutdown: AtomicBool,
    idle: AtomicBool,
    faulted: AtomicBool,
    clock: AtomicU64,
    dropped_inputs: AtomicU64,
    mode: Mutex<ServoMode>,
    snapshot: Mutex<Snapshot>,
}

/// Monitor role and entry point of a running runtime.
pub struct RuntimeHandle {
    shared: Arc<Shared>,
    inputs: Sender<Input>,
    commands: Option<Receiver<Command>>,
    dt: f64,
    executor: Option<JoinHandle<ExecutorOutcome>>,
    sender: Option<JoinHandle<(u64, u64, u64)>>,
}

impl RuntimeHandle {
    pub fn spawn(options: RuntimeOptions) -> teleop_otg_core::Result<Self> {
        let settings = options.settings.clone();
        settings.validate()?;
        if options.initial.len() != options.limits.dof() {
            return Err(Error::DimensionMismatch { expected: options.limits.dof(), found: options.initial.len() });
        }
        if !(options.time_scale > 0.0) {
            return Err(Error::InvalidParameter { name: "time_scale", value: options.time_scale });
        }
        let executor = Executor::new(options.limits.clone(), settings.clone())?;
        let dof = options.limits.dof();
        let shared = Arc::new(Shared {
            start_servo: AtomicBool::new(options.serving),
            shutdown: AtomicBool::new(false),
            idle: AtomicBool::new(false),
            faulted: AtomicBool::new(false),
            clock: AtomicU64::new(0),
            dropped_inputs: AtomicU64::new(0),
            mode: Mutex::new(settings.mode),
            snapshot: Mutex::new(Snapshot {
                tick: 0,
                t: 0.0,
                q: options.initial.clone(),
                qd: vec![0.0; dof],
                qdd: vec![0.0; dof],
                clamped: false,
                mode: settings.mode,
                started: false,
            }),
        });
        let (input_tx, input_rx) = bounded(options.input_capacity.max(1));
        let (plan_tx, plan_rx) = bounded::<Plan>(1);
        let (ack_tx, ack_rx) = bounded::<bool>(1);
        let (cmd_tx, cmd_rx) = if options.command_capacity > 0 {
            let (tx, rx) = bounded(options.command_capacity);
            (Some(tx), Some(rx))
        } else {
            (None, None)
        };
        let exec = {
            let shared = Arc::clone(&shared);
            let options = options.clone();
            thread::Builder::new()
                .name("uttg-executor".into())
                .spawn(move || executor_loop(executor, &options, &shared, &input_rx, &plan_tx, &ack_rx))
                .expect("spawn executor thread")
        };
        let send = {
            let shared = Arc::clone(&shared);
            thread::Builder::new()
                .name("uttg-sender".into())
                .spawn(move || sender_loop(&options, &shared, &plan_rx, &ack_tx, cmd_tx.as_ref()))
                .expect("spawn sender thread")
        };
        Ok(Self { shared, inputs: input_tx, commands: cmd_rx, dt: settings.dt_output, executor: Some(exec), sender: Some(send) })
    }

    /// Runtime clock in seconds: the tick about to be emitted times the output period.
    pub fn now(&self) -> f64 {
        self.shared.clock.load(Ordering::Acquire) as f64 * self.dt
    }

    /// Queues a raw waypoint. Ignored while servoing is off.
    pub fn push(&self, wp: TimedWaypoint) -> bool {
        if !self.shared.start_servo.load(Ordering::Acquire) || self.shared.faulted.load(Ordering::Acquire) {
            return false;
        }
        match self.inputs.try_send(Input::Waypoint(wp)) {
            Ok(()) => true,
            Err(_) => {
                self.shared.dropped_inputs.fetch_add(1, Ordering::Relaxed);
                false
            }
        }
    }

    /// Switches planner; the running trajectory finishes its current segment first.
    pub fn set_mode(&self, mode: ServoMode) {
        *self.shared.mode.lock().expect("mode lock") = mode;
        let _ = self.inputs.send(Input::Mode(mode));
    }

    pub fn mode(&self) -> ServoMode {
        *self.shared.mode.lock().expect("mode lock")
    }

    pub fn start(&self) {
        self.shared.start_servo.store(true, Ordering::Release);
    }

    /// Stops accepting input; buffered waypoints still play out.
    pub fn stop(&self) {
        self.shared.start_servo.store(false, Ordering::Release);
    }

    pub fn is_serving(&self) -> bool {
        self.shared.start_servo.load(Ordering::Acquire)
    }

    pub fn snapshot(&self) -> Snapshot {
        self.shared.snapshot.lock().expect("snapshot lock").clone()
    }

    /// Outbound command stream, when enabled.
    pub fn commands(&self) -> Option<&Receiver<Command>> {
        self.commands.as_ref()
    }

    /// True once the sender has stopped on its own.
    pub fn is_finished(&self) -> bool {
        self.sender.as_ref().is_none_or(JoinHandle::is_finished)
    }

    /// Waits for a non-keep-alive run to end, then collects the report.
    pub fn join(mut self) -> RuntimeReport {
        if let Some(s) = self.sender.take() {
            let (commands, late, dropped) = s.join().expect("sender thread panicked");
            self.shared.shutdown.store(true, Ordering::Release);
            let (exec, latencies, rejected, errors) =
                self.executor.take().expect("executor joined once").join().expect("executor thread panicked");
            let stats = exec.stats();
            return RuntimeReport {
                commands,
                replans: stats.replans,
                rejected_plans: rejected,
                replan_latencies: latencies,
                late_ticks: late,
                dropped_commands: dropped,
                dropped_inputs: self.shared.dropped_inputs.load(Ordering::Relaxed),
                errors,
                stats,
            };
        }
        RuntimeReport::default()
    }

    /// Stops both threads immediately and collects the report.
    pub fn shutdown(self) -> RuntimeReport {
        self.shared.shutdown.store(true, Ordering::Release);
        self.join()
    }
}

impl Drop for RuntimeHandle {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::Release);
    }
}

/// Executor, replan latencies, rejected plan count and planner errors.
type ExecutorOutcome = (Executor, Vec<Duration>, usize, Vec<Error>);

fn executor_loop(
    mut exec: Executor,
    options: &RuntimeOptions,
    shared: &Shared,
    inputs: &Receiver<Input>,
    plans: &Sender<Plan>,
    acks: &Receiver<bool>,
) -> ExecutorOutcome {
    let dt = options.settings.dt_output;
    let nap = Duration::from_secs_f64((dt / options.time_scale / 5.0).max(1e-5));
    let mut current: Option<Plan> = None;
    let mut outstanding: Option<Plan> = None;
    let mut latencies = Vec::new();
    let mut rejected = 0;
    let mut errors = Vec::new();
    let mut last_polled: Option<u64> = None;
    while !shared.shutdown.load(Ordering::Acquire) {
        let serving = shared.start_servo.load(Ordering::Acquire);
        loop {
            match inputs.try_recv() {
                Ok(Input::Waypoint(w)) => {
                    if !shared.faulted.load(Ordering::Acquire) {
                        if let Err(e) = exec.push_input(&w) {
                            debug!("input at t={} dropped: {e}", w.t);
                        }
                    }
                }
                Ok(Input::Mode(m)) => exec.set_mode(m),
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => break,
            }
        }
        if let Some(plan) = outstanding.take() {
            match acks.recv_timeout(nap) {
                Ok(true) => {
                    exec.commit(&plan);
                    current = Some(plan);
                }
                Ok(false) => {
                    rejected += 1;
                    debug!("plan {} missed tick {}", plan.id, plan.start_tick);
                    exec.reject(plan);
                }
                Err(_) => outstanding = Some(plan),
            }
            continue;
        }
        let tick = shared.clock.load(Ordering::Acquire) + options.lead_ticks;
        let fresh = last_polled.is_none_or(|t| tick > t);
        if fresh && !shared.faulted.load(Ordering::Acquire) {
            last_polled = Some(tick);
            let live = current
                .as_ref()
                .map_or_else(|| LiveState::at_rest(options.initial.clone()), |p| p.live(tick, dt));
            let started = Instant::now();
            match exec.poll(tick, current.as_ref(), &live, serving) {
                Ok(Some(plan)) => {
                    latencies.push(started.elapsed());
                    if plans.send(plan.clone()).is_err() {
                        break;
                    }
                    outstanding = Some(plan);
                    continue;
                }
                Ok(None) => {}
                Err(e) => {
                    warn!("planner failed, holding: {e}");
                    errors.push(e);
                    shared.faulted.store(true, Ordering::Release);
                    exec.clear_buffer();
                }
            }
        }
        let idle = !serving && inputs.is_empty() && exec.buffer().is_empty()
            || shared.faulted.load(Ordering::Acquire);
        shared.idle.store(idle, Ordering::Release);
        thread::sleep(nap);
    }
    (exec, latencies, rejected, errors)
}

fn sender_loop(
    options: &RuntimeOptions,
    shared: &Shared,
    plans: &Receiver<Plan>,
    acks: &Sender<bool>,
    commands: Option<&Sender<Command>>,
) -> (u64, u64, u64) {
    let dt = options.settings.dt_output;
    let period = Duration::from_secs_f64(dt / options.time_scale);
    let mut player = Player::new(dt, options.limits.clone(), options.initial.clone());
    let mut pending: Option<Plan> = None;
    let (mut emitted, mut late, mut dropped) = (0u64, 0u64, 0u64);
    let mut started = false;
    let origin = Instant::now();
    let mut tick = 0u64;
    while !shared.shutdown.load(Ordering::Acquire) {
        let deadline = origin + period * u32::try_from(tick).unwrap_or(u32::MAX);
        let now = Instant::now();
        if deadline > now {
            thread::sleep(deadline - now);
        } else if now - deadline > period {
            late += 1;
        }
        shared.clock.store(tick, Ordering::Release);
        if pending.is_none() {
            pending = plans.try_recv().ok();
        }
        if let Some(plan) = pending.take() {
            if plan.start_tick == tick {
                player.install(plan);
                started = true;
                let _ = acks.send(true);
            } else if plan.start_tick < tick {
                let _ = acks.send(false);
            } else {
                pending = Some(plan);
            }
        }
        if started {
            let cmd = player.emit(tick);
            {
                let mut snap = shared.snapshot.lock().expect("snapshot lock");
                snap.tick = tick;
                snap.t = cmd.t;
                snap.q.clone_from(&cmd.q);
                snap.qd.clone_from(&cmd.qd);
                snap.qdd.clone_from(&cmd.qdd);
                snap.clamped = cmd.clamped;
                snap.mode = *shared.mode.lock().expect("mode lock");
                snap.started = true;
            }
            if let Some(tx) = commands {
                match tx.try_send(cmd) {
                    Ok(()) => {}
                    Err(TrySendError::Full(_)) => dropped += 1,
                    Err(TrySendError::Disconnected(_)) => {}
                }
            }
            emitted += 1;
        } else {
            let mut snap = shared.snapshot.lock().expect("snapshot lock");
            snap.tick = tick;
            snap.t = tick as f64 * dt;
            snap.mode = *shared.mode.lock().expect("mode lock");
        }
        let idle = shared.idle.load(Ordering::Acquire) && pending.is_none() && plans.is_empty();
        if !options.keep_alive && idle && player.finished(tick) {
            break;
        }
        tick += 1;
    }
    shared.clock.store(tick + 1, Ordering::Release);
    (emitted, late, dropped)
}
