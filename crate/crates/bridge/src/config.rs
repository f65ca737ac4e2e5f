//! The JSON configuration file produced by `gen-config`.
//!
//! ```json
//! {
//!   "robot_name": "planar",
//!   "dof": 2,
//!   "joints": [
//!     { "name": "j1", "type": "revolute", "position_limits": [-3.1416, 3.1416],
//!       "velocity_limit": 3.0, "acceleration_limit": 30.0,
//!       "axis": [0, 0, 1], "origin": { "xyz": [0, 0, 0], "rpy": [0, 0, 0] } }
//!   ],
//!   "chain": { "base": "base", "tip": "flange" }
//! }
//! ```
//!
//! `joints` lists every joint of the chain in order, fixed ones included
//! (their limits are `null`). Unbounded position limits are written as `null`.
//! Acceleration limits may be edited by hand.

use std::path::Path;

use serde::{Deserialize, Serialize};
use teleop_otg_core::robot::{ChainJoint, JointLimits, JointType, Origin, RobotConfig};

use crate::error::{BridgeError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginEntry {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEntry {
    pub name: String,
    #[serde(rename = "type")]
    pub joint_type: String,
    pub position_limits: Option<[Option<f64>; 2]>,
    pub velocity_limit: Option<f64>,
    pub acceleration_limit: Option<f64>,
    pub axis: [f64; 3],
    pub origin: OriginEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEntry {
    pub base: String,
    pub tip: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub robot_name: String,
    pub dof: usize,
    pub joints: Vec<JointEntry>,
    pub chain: ChainEntry,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl ConfigFile {
    pub fn from_config(config: &RobotConfig) -> Self {
        let joints = config
            .chain
            .iter()
            .map(|j| {
                let (position_limits, velocity_limit, acceleration_limit) = match j.dof_index {
                    Some(i) => {
                        let (lo, hi) = config.limits.position[i];
                        (
                            Some([finite(lo), finite(hi)]),
                            Some(config.limits.velocity[i]),
                            Some(config.limits.acceleration[i]),
                        )
                    }
                    None => (None, None, None),
                };
                JointEntry {
                    name: j.name.clone(),
                    joint_type: j.joint_type.as_str().into(),
                    position_limits,
                    velocity_limit,
                    acceleration_limit,
                    axis: j.axis,
                    origin: OriginEntry { xyz: j.origin.xyz, rpy: j.origin.rpy },
                }
            })
            .collect();
        ConfigFile {
            robot_name: config.robot_name.clone(),
            dof: config.dof(),
            joints,
            chain: ChainEntry { base: config.base.clone(), tip: config.tip.clone() },
        }
    }

    pub fn to_config(&self) -> Result<RobotConfig> {
        let mut names = Vec::new();
        let mut limits = JointLimits { position: Vec::new(), velocity: Vec::new(), acceleration: Vec::new() };
        let mut chain = Vec::with_capacity(self.joints.len());
        for j in &self.joints {
            let joint_type = JointType::parse(&j.joint_type)
                .ok_or_else(|| BridgeError::Config(format!("joint '{}' has unknown type '{}'", j.name, j.joint_type)))?;
            let dof_index = if joint_type.is_movable() {
                let missing = |what: &str| BridgeError::Config(format!("joint '{}' has no {what}", j.name));
                let [lo, hi] = j.position_limits.ok_or_else(|| missing("position_limits"))?;
                let (lo, hi) = (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY));
                let v = j.velocity_limit.ok_or_else(|| missing("velocity_limit"))?;
                let a = j.acceleration_limit.ok_or_else(|| missing("acceleration_limit"))?;
                if !(lo <= hi) {
                    return Err(BridgeError::Config(format!("joint '{}' has lower limit above upper limit", j.name)));
                }
                if !(v > 0.0 && a > 0.0) {
                    return Err(BridgeError::Config(format!("joint '{}' needs positive rate limits", j.name)));
                }
                names.push(j.name.clone());
                limits.position.push((lo, hi));
                limits.velocity.push(v);
                limits.acceleration.push(a);
                Some(names.len() - 1)
            } else {
                None
            };
            chain.push(ChainJoint {
                name: j.name.clone(),
                joint_type,
                origin: Origin { xyz: j.origin.xyz, rpy: j.origin.rpy },
                axis: j.axis,
                dof_index,
            });
        }
        if names.len() != self.dof {
            return Err(BridgeError::Config(format!(
                "dof is {} but {} movable joints are listed",
                self.dof,
                names.len()
            )));
        }
        Ok(RobotConfig {
            robot_name: self.robot_name.clone(),
            base: self.chain.base.clone(),
            tip: self.chain.tip.clone(),
            joint_names: names,
            limits,
            chain,
        })
    }
}

pub fn to_json(config: &RobotConfig) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ConfigFile::from_config(config))?)
}

pub fn from_json(text: &str) -> Result<RobotConfig> {
    serde_json::from_str::<ConfigFile>(text)?.to_config()
}

pub fn save_config(config: &RobotConfig, path: &Path) -> Result<()> {
    let mut text = to_json(config)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| BridgeError::io(path.display().to_string(), e))
}

pub fn load_config(path: &Path) -> Result<RobotConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| BridgeError::io(path.display().to_string(), e))?;
    from_json(&text)
}

/// Multiplies every acceleration limit by `scale`.
pub fn scale_acceleration(config: &mut RobotConfig, scale: f64) -> Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(BridgeError::Config(format!("acceleration scale must be positive, got {scale}")));
    }
    config.limits.acceleration.iter_mut().for_each(|a| *a *= scale);
    Ok(())
}
