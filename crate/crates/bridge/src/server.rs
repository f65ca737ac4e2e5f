//! Live servo service: one operator session over a WebSocket.
//!
//! The session thread is the only producer into the runtime. Pose targets go
//! through IK before they reach the filter. State frames are published at the
//! UI rate from the sender's snapshot; the 200 Hz command stream stays inside.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use teleop_otg_core::kinematics::{forward_kinematics, ik_solve, IkOutcome, IkSettings, Pose};
use teleop_otg_core::robot::RobotConfig;
use teleop_otg_core::servo::ServoSettings;
use teleop_otg_core::{JointVector, TimedWaypoint};
use tungstenite::{Message, WebSocket};

use crate::config::ConfigFile;
use crate::error::{BridgeError, Result};
use crate::protocol::{encode, parse_client, ClientMessage, EePose, Metrics, ServerMessage};
use crate::runtime::{RuntimeHandle, RuntimeOptions};

pub const DEFAULT_UI_RATE_HZ: f64 = 60.0;

#[derive(Debug, Clone)]
pub struct ServerOptions {
    pub settings: ServoSettings,
    pub ui_rate_hz: f64,
    pub ik: IkSettings,
    /// Robot posture at startup; zeros clamped into the limits by default.
    pub initial: Option<JointVector>,
    pub time_scale: f64,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            settings: ServoSettings::default(),
            ui_rate_hz: DEFAULT_UI_RATE_HZ,
            ik: IkSettings::default(),
            initial: None,
            time_scale: 1.0,
        }
    }
}

pub struct Server {
    listener: TcpListener,
    config: Arc<RobotConfig>,
    options: ServerOptions,
    stop: Arc<AtomicBool>,
}

impl Server {
    pub fn bind<A: ToSocketAddrs>(addr: A, config: RobotConfig, options: ServerOptions) -> Result<Self> {
        if !(options.ui_rate_hz > 0.0 && options.ui_rate_hz.is_finite()) {
            return Err(BridgeError::Config(format!("ui rate must be positive, got {}", options.ui_rate_hz)));
        }
        options.settings.validate()?;
        let listener = TcpListener::bind(addr).map_err(|e| BridgeError::io("bind", e))?;
        listener.set_nonblocking(true).map_err(|e| BridgeError::io("listener", e))?;
        Ok(Self { listener, config: Arc::new(config), options, stop: Arc::new(AtomicBool::new(false)) })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        self.listener.local_addr().map_err(|e| BridgeError::io("listener", e))
    }

    /// Flag that ends [`Server::run`] when set.
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }

    /// Serves until the stop flag is raised.
    pub fn run(self) -> Result<()> {
        let dof = self.config.dof();
        let initial = match &self.options.initial {
            Some(q) if q.len() != dof => return Err(BridgeError::DofMismatch { expected: dof, found: q.len() }),
            Some(q) => q.clone(),
            None => {
                let mut q = vec![0.0; dof];
                self.config.limits.clamp_position(&mut q);
                q
            }
        };
        let mut rt = RuntimeOptions::new(self.options.settings.clone(), self.config.limits.clone(), initial);
        rt.keep_alive = true;
        rt.serving = false;
        rt.command_capacity = 0;
        rt.time_scale = self.options.time_scale;
        let runtime = Arc::new(RuntimeHandle::spawn(rt)?);
        let active = Arc::new(AtomicBool::new(false));
        let mut sessions = Vec::new();
        info!("listening on {}", self.local_addr()?);
        while !self.stop.load(Ordering::Acquire) {
            match self.listener.accept() {
                Ok((stream, peer)) => {
                    if stream.set_nonblocking(false).is_err() {
                        continue;
                    }
                    if active.swap(true, Ordering::AcqRel) {
                        info!("refusing second session from {peer}");
                        thread::spawn(move || refuse(stream));
                        continue;
                    }
                    info!("operator session from {peer}");
                    let session = Session {
                        config: Arc::clone(&self.config),
                        runtime: Arc::clone(&runtime),
                        ik: self.options.ik,
                        ui_period: Duration::from_secs_f64(1.0 / self.options.ui_rate_hz),
                        ui_rate_hz: self.options.ui_rate_hz,
                        dt: self.options.settings.dt_output,
                        stop: Arc::clone(&self.stop),
                        last_target: None,
                        last_client_t: None,
                        last_stamp: None,
                    };
                    let active = Arc::clone(&active);
                    sessions.push(thread::spawn(move || {
                        if let Err(e) = session.serve(stream) {
                            debug!("session ended: {e}");
                        }
                        active.store(false, Ordering::Release);
                    }));
                }
                Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
                Err(e) => warn!("accept failed: {e}"),
            }
            sessions.retain(|h| !h.is_finished());
        }
        for s in sessions {
            let _ = s.join();
        }
        if let Ok(rt) = Arc::try_unwrap(runtime) {
            rt.shutdown();
        }
        Ok(())
    }
}

fn refuse(stream: TcpStream) {
    if let Ok(mut ws) = tungstenite::accept(stream) {
        let msg = ServerMessage::Error { message: "another operator session is active".into() };
        let _ = ws.send(Message::Text(encode(&msg)));
        let _ = ws.close(None);
        let _ = ws.flush();
    }
}

struct Session {
    config: Arc<RobotConfig>,
    runtime: Arc<RuntimeHandle>,
    ik: IkSettings,
    ui_period: Duration,
    ui_rate_hz: f64,
    dt: f64,
    stop: Arc<AtomicBool>,
    last_target: Option<JointVector>,
    last_client_t: Option<f64>,
    last_stamp: Option<f64>,
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

impl Session {
    fn serve(mut self, stream: TcpStream) -> Result<()> {
        let mut ws = tungstenite::accept(stream).map_err(|e| BridgeError::Config(format!("handshake failed: {e}")))?;
        let hello = ServerMessage::Hello {
            config: ConfigFile::from_config(&self.config),
            ui_rate_hz: self.ui_rate_hz,
            mode: self.runtime.mode().into(),
        };
        ws.send(Message::Text(encode(&hello)))?;
        let mut next_state = Instant::now();
        let result = loop {
            if self.stop.load(Ordering::Acquire) {
                let _ = ws.close(None);
                let _ = ws.flush();
                break Ok(());
            }
            let now = Instant::now();
            if now >= next_state {
                if let Err(e) = self.send_state(&mut ws) {
                    break Err(e);
                }
                next_state += self.ui_period;
                if next_state < now {
                    next_state = now + self.ui_period;
                }
            }
            let wait = next_state.saturating_duration_since(Instant::now()).max(Duration::from_micros(200));
            let _ = ws.get_ref().set_read_timeout(Some(wait));
            match ws.read() {
                Ok(Message::Text(text)) => {
                    for reply in self.handle(&text) {
                        if let Err(e) = ws.send(Message::Text(encode(&reply))) {
                            return Err(e.into());
                        }
                    }
                }
                Ok(Message::Close(_)) => break Ok(()),
                Ok(Message::Binary(_)) => {
                    let reply = ServerMessage::Error { message: "binary frames are not supported".into() };
                    ws.send(Message::Text(encode(&reply)))?;
                }
                Ok(_) => {}
                Err(e) if is_timeout(&e) => {}
                Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => break Ok(()),
                Err(e) => break Err(e.into()),
            }
        };
        // A vanished operator leaves the arm holding.
        self.runtime.stop();
        result
    }

    fn send_state(&self, ws: &mut WebSocket<TcpStream>) -> Result<()> {
        let snap = self.runtime.snapshot();
        let ee = forward_kinematics(&self.config, &snap.q)
            .map(|p| EePose::from(&p))
            .unwrap_or(EePose { x: 0.0, y: 0.0, z: 0.0, quaternion: [1.0, 0.0, 0.0, 0.0] });
        let clamped = snap
            .q
            .iter()
            .zip(&self.config.limits.position)
            .map(|(q, (lo, hi))| *q <= *lo || *q >= *hi)
            .collect();
        let msg = ServerMessage::State {
            ee,
            t: snap.t,
            clamped,
            metrics: Metrics { abs_acceleration: snap.qdd.iter().map(|a| a.abs()).collect() },
            mode: snap.mode.into(),
            serving: self.runtime.is_serving(),
            q: snap.q,
        };
        ws.send(Message::Text(encode(&msg)))?;
        Ok(())
    }

    fn check_time(&mut self, t: f64) -> std::result::Result<(), String> {
        if !t.is_finite() {
            return Err(format!("timestamp {t} is not finite"));
        }
        if let Some(prev) = self.last_client_t {
            if t <= prev {
                return Err(format!("timestamp {t} does not follow {prev}"));
            }
        }
        self.last_client_t = Some(t);
        Ok(())
    }

    /// Server-side stamp: the runtime clock, kept at least one output period
    /// past the previous stamp.
    fn stamp(&mut self) -> f64 {
        let now = self.runtime.now();
        let t = self.last_stamp.map_or(now, |p| now.max(p + self.dt));
        self.last_stamp = Some(t);
        t
    }

    fn push_target(&mut self, q: JointVector) -> ServerMessage {
        if !self.runtime.is_serving() {
            return ServerMessage::Error { message: "servoing is stopped; send start first".into() };
        }
        let t = self.stamp();
        self.last_target = Some(q.clone());
        if self.runtime.push(TimedWaypoint::new(t, q)) {
            ServerMessage::Ack { of: "target".into(), mode: None }
        } else {
            ServerMessage::Error { message: "input queue full; target dropped".into() }
        }
    }

    fn handle(&mut self, text: &str) -> Vec<ServerMessage> {
        let msg = match parse_client(text) {
            Ok(m) => m,
            Err(message) => return vec![ServerMessage::Error { message }],
        };
        let kind = msg.kind().to_string();
        let ack = |mode| ServerMessage::Ack { of: kind.clone(), mode };
        match msg {
            ClientMessage::Start {} => {
                self.runtime.start();
                vec![ack(None)]
            }
            ClientMessage::Stop {} => {
                self.runtime.stop();
                vec![ack(None)]
            }
            ClientMessage::Mode { value } => {
                self.runtime.set_mode(value.into());
                vec![ack(Some(value))]
            }
            ClientMessage::TargetJoints { q, t } => {
                if q.len() != self.config.dof() {
                    return vec![ServerMessage::Error {
                        message: format!("target has {} joints, robot has {}", q.len(), self.config.dof()),
                    }];
                }
                if let Err(message) = self.check_time(t) {
                    return vec![ServerMessage::Error { message }];
                }
                let mut reply = self.push_target(q);
                if let ServerMessage::Ack { of, .. } = &mut reply {
                    of.clone_from(&kind);
                }
                vec![reply]
            }
            ClientMessage::TargetPose { x, y, z, quaternion, t } => {
                if let Err(message) = self.check_time(t) {
                    return vec![ServerMessage::Error { message }];
                }
                match self.solve_pose(x, y, z, quaternion) {
                    Ok(q) => {
                        let mut reply = self.push_target(q);
                        if let ServerMessage::Ack { of, .. } = &mut reply {
                            of.clone_from(&kind);
                        }
                        vec![reply]
                    }
                    Err(message) => vec![ServerMessage::Error { message }],
                }
            }
        }
    }

    fn solve_pose(&self, x: f64, y: f64, z: f64, quaternion: Option<[f64; 4]>) -> std::result::Result<JointVector, String> {
        let rotation = match quaternion {
            Some([w, i, j, k]) => {
                let q = Quaternion::new(w, i, j, k);
                if !(q.norm() > 1e-9) {
                    return Err("quaternion has zero norm".into());
                }
                UnitQuaternion::from_quaternion(q)
            }
            None => UnitQuaternion::identity(),
        };
        let target = Pose::new(Vector3::new(x, y, z), rotation);
        let seed = self.last_target.clone().unwrap_or_else(|| self.runtime.snapshot().q);
        let settings = IkSettings {
            position_only: self.ik.position_only || quaternion.is_none() || self.config.dof() < 6,
            ..self.ik
        };
        match ik_solve(&self.config, &target, &seed, &settings) {
            Ok(IkOutcome::Converged { q, .. }) => Ok(q),
            Ok(IkOutcome::Unreachable { position_error, .. }) => {
                Err(format!("target unreachable (residual {position_error:.3e} m); holding previous target"))
            }
            Err(e) => Err(e.to_string()),
        }
    }
}
