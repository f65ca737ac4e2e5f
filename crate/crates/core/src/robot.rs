//! Robot descriptions: the parsed model and the configuration the engine consumes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Time over which a joint may reach its velocity limit from rest.
pub const ACCEL_REFERENCE_TIME: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointType {
    Revolute,
    Continuous,
    Prismatic,
    Fixed,
}

impl JointType {
    pub fn is_movable(self) -> bool {
        self != JointType::Fixed
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JointType::Revolute => "revolute",
            JointType::Continuous => "continuous",
            JointType::Prismatic => "prismatic",
            JointType::Fixed => "fixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "revolute" => JointType::Revolute,
            "continuous" => JointType::Continuous,
            "prismatic" => JointType::Prismatic,
            "fixed" => JointType::Fixed,
            _ => return None,
        })
    }
}

/// Rigid transform as translation (m) and roll-pitch-yaw (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Origin {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

/// Limits as authored in a robot description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelLimits {
    pub lower: f64,
    pub upper: f64,
    pub velocity: f64,
    pub effort: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelJoint {
    pub name: String,
    pub joint_type: JointType,
    pub parent: String,
    pub child: String,
    pub origin: Origin,
    pub axis: [f64; 3],
    pub limits: Option<ModelLimits>,
}

/// Kinematic tree of links and joints.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<String>,
    pub joints: Vec<ModelJoint>,
}

impl RobotModel {
    /// Checks limits and tree topology.
    pub fn validate(&self) -> Result<()> {
        let mut parent_of: BTreeMap<&str, &str> = BTreeMap::new();
        for j in &self.joints {
            for link in [&j.parent, &j.child] {
                if !self.links.iter().any(|l| l == link) {
                    return Err(Error::InvalidModel(format!(
                        "joint '{}' references unknown link '{link}'",
                        j.name
                    )));
                }
            }
            if parent_of.insert(&j.child, &j.parent).is_some() {
                return Err(Error::InvalidModel(format!(
                    "link '{}' has more than one parent joint",
                    j.child
                )));
            }
            match (j.joint_type, j.limits) {
                (JointType::Revolute | JointType::Prismatic, None) => {
                    return Err(Error::InvalidModel(format!(
                        "joint '{}' is missing its limit element",
                        j.name
                    )));
                }
                (JointType::Revolute | JointType::Prismatic, Some(l)) if l.lower > l.upper => {
                    return Err(Error::InvalidModel(format!(
                        "joint '{}' has lower limit above upper limit",
                        j.name
                    )));
                }
                (t, Some(l)) if t.is_movable() && !(l.velocity > 0.0) => {
                    return Err(Error::InvalidModel(format!(
                        "joint '{}' needs a positive velocity limit",
                        j.name
                    )));
                }
                (JointType::Continuous, None) => {
                    return Err(Error::InvalidModel(format!(
                        "joint '{}' needs a velocity limit",
                        j.name
                    )));
                }
                _ => {}
            }
        }
        let roots: Vec<&String> =
            self.links.iter().filter(|l| !parent_of.contains_key(l.as_str())).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidModel(format!(
                "expected one root link, found {}",
                roots.len()
            )));
        }
        // Every link must reach the root without revisiting a link.
        for link in &self.links {
            let mut cur = link.as_str();
            let mut steps = 0;
            while let Some(p) = parent_of.get(cur) {
                cur = p;
                steps += 1;
                if steps > self.links.len() {
                    return Err(Error::InvalidModel(format!("cycle through link '{link}'")));
                }
            }
            if cur != roots[0] {
                return Err(Error::InvalidModel(format!("link '{link}' is disconnected")));
            }
        }
        Ok(())
    }

    pub fn root_link(&self) -> Option<&str> {
        self.links
            .iter()
            .find(|l| !self.joints.iter().any(|j| &j.child == *l))
            .map(String::as_str)
    }

    /// Links that are nobody's parent.
    pub fn leaf_links(&self) -> Vec<&str> {
        self.links
            .iter()
            .filter(|l| !self.joints.iter().any(|j| &j.parent == *l))
            .map(String::as_str)
            .collect()
    }

    /// Joint indices of the serial path from `base` down to `tip`.
    pub fn chain(&self, base: &str, tip: &str) -> Result<Vec<usize>> {
        for link in [base, tip] {
            if !self.links.iter().any(|l| l == link) {
                return Err(Error::ChainResolution(format!("unknown link '{link}'")));
            }
        }
        let mut path = Vec::new();
        let mut cur = tip;
        while cur != base {
            let Some(idx) = self.joints.iter().position(|j| j.child == cur) else {
                return Err(Error::ChainResolution(format!(
                    "link '{tip}' does not descend from '{base}'"
                )));
            };
            path.push(idx);
            cur = &self.joints[idx].parent;
            if path.len() > self.joints.len() {
                return Err(Error::ChainResolution(String::from("cycle in joint tree")));
            }
        }
        path.reverse();
        Ok(path)
    }

    /// Chain from the root to the single leaf, when the tree is a plain chain.
    pub fn default_chain(&self) -> Result<(String, String)> {
        let root = self
            .root_link()
            .ok_or_else(|| Error::ChainResolution(String::from("no root link")))?;
        let leaves = self.leaf_links();
        match leaves.as_slice() {
            [tip] => Ok((String::from(root), String::from(*tip))),
            _ => Err(Error::ChainResolution(format!(
                "{} leaf links; name the tip explicitly",
                leaves.len()
            ))),
        }
    }
}

/// Per-joint limits for the movable joints of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct JointLimits {
    /// `(lower, upper)`; continuous joints use infinities.
    pub position: Vec<(f64, f64)>,
    pub velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

impl JointLimits {
    /// Same limits on every joint.
    pub fn uniform(dof: usize, position: (f64, f64), velocity: f64, acceleration: f64) -> Self {
        Self {
            position: alloc::vec![position; dof],
            velocity: alloc::vec![velocity; dof],
            acceleration: alloc::vec![acceleration; dof],
        }
    }

    pub fn dof(&self) -> usize {
        self.velocity.len()
    }

    pub fn clamp_position(&self, q: &mut [f64]) -> bool {
        let mut clamped = false;
        for (x, (lo, hi)) in q.iter_mut().zip(&self.position) {
            if *x < *lo {
                *x = *lo;
                clamped = true;
            } else if *x > *hi {
                *x = *hi;
                clamped = true;
            }
        }
        clamped
    }

    /// First joint outside its position limits, if any.
    pub fn violation(&self, q: &[f64]) -> Option<usize> {
        q.iter()
            .zip(&self.position)
            .position(|(x, (lo, hi))| !(*x >= *lo - 1e-12 && *x <= *hi + 1e-12))
    }
}

/// One joint of the resolved chain, fixed joints included.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainJoint {
    pub name: String,
    pub joint_type: JointType,
    pub origin: Origin,
    pub axis: [f64; 3],
    /// Column of the joint vector, `None` for fixed joints.
    pub dof_index: Option<usize>,
}

/// Everything the engine needs to know about a robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotConfig {
    pub robot_name: String,
    pub base: String,
    pub tip: String,
    pub joint_names: Vec<String>,
    pub limits: JointLimits,
    pub chain: Vec<ChainJoint>,
}

impl RobotConfig {
    pub fn dof(&self) -> usize {
        self.joint_names.len()
    }
}

/// Resolves the chain `base → tip` and synthesizes acceleration limits as
/// `accel_scale · velocity / 0.1 s`.
pub fn generate_config(
    model: &RobotModel,
    base: &str,
    tip: &str,
    accel_scale: f64,
) -> Result<RobotConfig> {
    if !(accel_scale > 0.0 && accel_scale.is_finite()) {
        return Err(Error::InvalidParameter { name: "accel_scale", value: accel_scale });
    }
    let path = model.chain(base, tip)?;
    let mut names = Vec::new();
    let mut position = Vec::new();
    let mut velocity = Vec::new();
    let mut acceleration = Vec::new();
    let mut chain = Vec::with_capacity(path.len());
    for idx in path {
        let j = &model.joints[idx];
        let dof_index = if j.joint_type.is_movable() {
            let lim = j.limits.ok_or_else(|| {
                Error::InvalidModel(format!("joint '{}' is missing its limit element", j.name))
            })?;
            if !(lim.velocity > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "joint '{}' needs a positive velocity limit",
                    j.name
                )));
            }
            names.push(j.name.clone());
            position.push(if j.joint_type == JointType::Continuous {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (lim.lower, lim.upper)
            });
            velocity.push(lim.velocity);
            acceleration.push(accel_scale * lim.velocity / ACCEL_REFERENCE_TIME);
            Some(names.len() - 1)
        } else {
            None
        };
        chain.push(ChainJoint {
            name: j.name.clone(),
            joint_type: j.joint_type,
            origin: j.origin,
            axis: j.axis,
            dof_index,
        });
    }
    Ok(RobotConfig {
        robot_name: model.name.clone(),
        base: String::from(base),
        tip: String::from(tip),
        joint_names: names,
        limits: JointLimits { position, velocity, acceleration },
        chain,
    })
}
