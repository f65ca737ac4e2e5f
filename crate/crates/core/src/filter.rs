//! Input smoothing ahead of the waypoint buffer.

use crate::waypoints::max_abs_diff;
use crate::{Error, JointVector, Result, TimedWaypoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSettings {
    pub cutoff_hz: f64,
    /// Minimum max-norm change, after smoothing, for a sample to be forwarded.
    pub deadband: f64,
    pub enabled: bool,
}

impl Default for FilterSettings {
    fn default() -> Self {
        Self { cutoff_hz: 5.0, deadband: 0.0, enabled: true }
    }
}

impl FilterSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff_hz > 0.0) {
            return Err(Error::InvalidParameter { name: "cutoff_hz", value: self.cutoff_hz });
        }
        if !(self.deadband >= 0.0) {
            return Err(Error::InvalidParameter { name: "deadband", value: self.deadband });
        }
        Ok(())
    }
}

/// First-order low-pass with deadband, one instance per input stream.
#[derive(Debug, Clone)]
pub struct WaypointFilter {
    settings: FilterSettings,
    last_stamp: Option<f64>,
    state: JointVector,
    forwarded: Option<JointVector>,
    stale: usize,
    suppressed: usize,
}

impl WaypointFilter {
    pub fn new(settings: FilterSettings) -> Result<Self> {
        settings.validate()?;
        Ok(Self {
            settings,
            last_stamp: None,
            state: JointVector::new(),
            forwarded: None,
            stale: 0,
            suppressed: 0,
        })
    }

    pub fn settings(&self) -> &FilterSettings {
        &self.settings
    }

    /// Inputs rejected for non-increasing timestamps.
    pub fn stale_count(&self) -> usize {
        self.stale
    }

    /// Inputs absorbed by the deadband.
    pub fn suppressed_count(&self) -> usize {
        self.suppressed
    }

    /// Smooths one raw sample. `Ok(None)` means the deadband absorbed it.
    pub fn filter(&mut self, raw: &TimedWaypoint) -> Result<Option<TimedWaypoint>> {
        if let Some(prev) = self.last_stamp {
            if !(raw.t > prev) {
                self.stale += 1;
                return Err(Error::StaleInput { stamp: raw.t, previous: prev });
            }
            if raw.q.len() != self.state.len() {
                return Err(Error::DimensionMismatch { expected: self.state.len(), found: raw.q.len() });
            }
            if self.settings.enabled {
                let dt = raw.t - prev;
                let rc = 1.0 / (2.0 * core::f64::consts::PI * self.settings.cutoff_hz);
                let alpha = dt / (dt + rc);
                for (s, x) in self.state.iter_mut().zip(&raw.q) {
                    *s += alpha * (x - *s);
                }
            } else {
                self.state.clone_from(&raw.q);
            }
        } else {
            self.state = raw.q.clone();
        }
        self.last_stamp = Some(raw.t);
        if let Some(f) = &self.forwarded {
            if self.settings.enabled && max_abs_diff(f, &self.state) < self.settings.deadband {
                self.suppressed += 1;
                return Ok(None);
            }
        }
        self.forwarded = Some(self.state.clone());
        Ok(Some(TimedWaypoint::new(raw.t, self.state.clone())))
    }
}

/// Free-function form of [`WaypointFilter::filter`].
pub fn filter_waypoint(
    state: &mut WaypointFilter,
    raw: &TimedWaypoint,
) -> Result<Option<TimedWaypoint>> {
    state.filter(raw)
}
