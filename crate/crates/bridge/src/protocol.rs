//! JSON wire protocol between the live servo service and an operator console.
//!
//! Every message is one text frame holding an object with a `type` field:
//!
//! ```json
//! {"type":"target_joints","q":[0.1,0.2],"t":1.25}
//! {"type":"target_pose","x":1.2,"y":0.4,"z":0.0,"quaternion":[1,0,0,0],"t":1.3}
//! {"type":"mode","value":"rapid"}
//! {"type":"start"}
//! {"type":"state","q":[…],"ee":{"x":…,"y":…,"z":…,"quaternion":[…]},"t":2.0,
//!  "clamped":[false,false],"metrics":{"abs_acceleration":[…]},"mode":"precise"}
//! ```
//!
//! Quaternions are `[w, x, y, z]`.

use serde::{Deserialize, Serialize};
use teleop_otg_core::kinematics::Pose;
use teleop_otg_core::servo::ServoMode;

use crate::config::ConfigFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeValue {
    Precise,
    Rapid,
}

impl From<ModeValue> for ServoMode {
    fn from(m: ModeValue) -> Self {
        match m {
            ModeValue::Precise => ServoMode::Precise,
            ModeValue::Rapid => ServoMode::Rapid,
        }
    }
}

impl From<ServoMode> for ModeValue {
    fn from(m: ServoMode) -> Self {
        match m {
            ServoMode::Precise => ModeValue::Precise,
            ServoMode::Rapid => ModeValue::Rapid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EePose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub quaternion: [f64; 4],
}

impl From<&Pose> for EePose {
    fn from(p: &Pose) -> Self {
        let q = p.rotation.quaternion();
        EePose { x: p.translation.x, y: p.translation.y, z: p.translation.z, quaternion: [q.w, q.i, q.j, q.k] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Instantaneous |qdd| per joint, rad/s².
    pub abs_acceleration: Vec<f64>,
}

/// Messages sent by the operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    TargetPose {
        x: f64,
        y: f64,
        z: f64,
        /// Omitted for position-only targets.
        #[serde(default)]
        quaternion: Option<[f64; 4]>,
        t: f64,
    },
    TargetJoints {
        q: Vec<f64>,
        t: f64,
    },
    Mode {
        value: ModeValue,
    },
    Start {},
    Stop {},
}

/// Messages sent by the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        config: ConfigFile,
        ui_rate_hz: f64,
        mode: ModeValue,
    },
    State {
        q: Vec<f64>,
        ee: EePose,
        t: f64,
        clamped: Vec<bool>,
        metrics: Metrics,
        mode: ModeValue,
        serving: bool,
    },
    Ack {
        /// `type` of the acknowledged message.
        of: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mode: Option<ModeValue>,
    },
    Error {
        message: String,
    },
}

impl ClientMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::TargetPose { .. } => "target_pose",
            ClientMessage::TargetJoints { .. } => "target_joints",
            ClientMessage::Mode { .. } => "mode",
            ClientMessage::Start {} => "start",
            ClientMessage::Stop {} => "stop",
        }
    }
}

pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
}

pub fn encode<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("protocol messages serialize")
}
