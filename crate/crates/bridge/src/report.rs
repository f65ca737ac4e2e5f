//! JSON report of a baseline comparison.
//!
//! ```json
//! {
//!   "mode": "precise",
//!   "commands": 1001,
//!   "latency_s": 0.15,
//!   "mav_uttg": [..], "mav_hold": [..],
//!   "joint_reduction_percent": [99.1, "not_applicable"],
//!   "reduction_percent": 99.2,
//!   "rmse": [..],
//!   "std_devs": { "uttg": [..], "hold": [..] }
//! }
//! ```
//!
//! A reduction is `"not_applicable"` when the baseline MAV is zero.

use serde::{Deserialize, Serialize};
use teleop_otg_core::harness::ComparisonReport;
use teleop_otg_core::servo::ServoMode;

pub const NOT_APPLICABLE: &str = "not_applicable";

/// A percentage or the not-applicable marker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Reduction {
    Percent(f64),
    Marker(Marker),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Marker {
    #[serde(rename = "not_applicable")]
    NotApplicable,
}

impl From<Option<f64>> for Reduction {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Reduction::Marker(Marker::NotApplicable), Reduction::Percent)
    }
}

impl Reduction {
    pub fn percent(self) -> Option<f64> {
        match self {
            Reduction::Percent(p) => Some(p),
            Reduction::Marker(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdDevs {
    pub uttg: Vec<f64>,
    pub hold: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mode: String,
    pub commands: usize,
    pub latency_s: f64,
    pub mav_uttg: Vec<f64>,
    pub mav_hold: Vec<f64>,
    pub joint_reduction_percent: Vec<Reduction>,
    pub reduction_percent: Reduction,
    pub rmse: Vec<f64>,
    pub std_devs: StdDevs,
}

impl Report {
    pub fn new(mode: ServoMode, r: &ComparisonReport) -> Self {
        Report {
            mode: mode.as_str().into(),
            commands: r.commands,
            latency_s: r.latency,
            mav_uttg: r.mav_uttg.clone(),
            mav_hold: r.mav_hold.clone(),
            joint_reduction_percent: r.joint_reduction_percent.iter().map(|p| (*p).into()).collect(),
            reduction_percent: r.reduction_percent.into(),
            rmse: r.tracking_rmse.clone(),
            std_devs: StdDevs { uttg: r.std_uttg.clone(), hold: r.std_hold.clone() },
        }
    }
}

/// Top-level keys every report carries.
pub const REPORT_KEYS: [&str; 9] = [
    "mode",
    "commands",
    "latency_s",
    "mav_uttg",
    "mav_hold",
    "joint_reduction_percent",
    "reduction_percent",
    "rmse",
    "std_devs",
];
