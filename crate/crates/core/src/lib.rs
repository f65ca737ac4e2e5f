//! Online trajectory generation for teleoperation.
//!
//! Low-rate, noisy waypoint streams go in; smooth, limit-respecting joint
//! position commands come out at a fixed output rate. The crate is `no_std`
//! and only needs `alloc`.
//!
//! Layout:
//! - [`band`]: banded matrices and a pivoting LU factorization.
//! - [`spline`]: assistant-point cubic splines, interpolating and min-stretch.
//! - [`filter`]: input smoothing and deadband suppression.
//! - [`servo`]: precise and rapid planning loops, time allocation, the engine.
//! - [`robot`] and [`kinematics`]: robot configuration, FK, Jacobian, IK.
//! - [`harness`]: simulated actuator, MAV metric, baseline comparison.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod band;
pub mod error;
pub mod filter;
pub mod harness;
pub mod kinematics;
pub mod robot;
pub mod servo;
pub mod spline;
mod waypoints;

pub use error::Error;
pub use waypoints::{JointVector, TimedWaypoint, Waypoints};

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
