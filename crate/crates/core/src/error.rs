use alloc::string::String;
use core::fmt;

/// Everything that can go wrong inside the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A segment duration was zero, negative or not finite.
    InvalidDuration { index: usize, value: f64 },
    /// A tuning parameter fell outside its admissible range.
    InvalidParameter { name: &'static str, value: f64 },
    /// Two inputs that must agree in size did not.
    DimensionMismatch { expected: usize, found: usize },
    /// Fewer waypoints or samples than the operation needs.
    TooFewPoints { needed: usize, found: usize },
    /// A pivot fell below the relative tolerance during factorization.
    SingularSystem { pivot_index: usize },
    /// Time dilation did not reach a limit-compliant trajectory.
    TimeAllocationFailed { iterations: usize },
    /// The robot state lies outside its position limits.
    OutOfLimits { joint: usize, value: f64 },
    /// An input timestamp did not advance past the previous one.
    StaleInput { stamp: f64, previous: f64 },
    /// Commands or samples were not in time order.
    Unordered { index: usize },
    /// Robot description inconsistency.
    InvalidModel(String),
    /// No unique chain connects the requested links.
    ChainResolution(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDuration { index, value } => {
                write!(f, "invalid duration {value} at segment {index}")
            }
            Error::InvalidParameter { name, value } => {
                write!(f, "invalid parameter {name} = {value}")
            }
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::TooFewPoints { needed, found } => {
                write!(f, "need at least {needed} points, got {found}")
            }
            Error::SingularSystem { pivot_index } => {
                write!(f, "singular system at pivot {pivot_index}")
            }
            Error::TimeAllocationFailed { iterations } => {
                write!(f, "time allocation failed after {iterations} dilations")
            }
            Error::OutOfLimits { joint, value } => {
                write!(f, "joint {joint} at {value} is outside its position limits")
            }
            Error::StaleInput { stamp, previous } => {
                write!(f, "stale input: stamp {stamp} does not follow {previous}")
            }
            Error::Unordered { index } => write!(f, "samples out of order at index {index}"),
            Error::InvalidModel(msg) => write!(f, "invalid robot model: {msg}"),
            Error::ChainResolution(msg) => write!(f, "chain-resolution error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
