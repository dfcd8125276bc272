//! Straight-line AGV kinematics with a latched emergency stop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;

/// Default cruise speed of the R1 vehicle.
pub const R1_SPEED_MPS: f64 = 0.093;
/// Default cruise speed of the R2 vehicle.
pub const R2_SPEED_MPS: f64 = 0.277;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgvError {
    #[error("max speed must be positive, got {0}")]
    MaxSpeed(f64),
    #[error("deceleration must be positive, got {0}")]
    Decel(f64),
    #[error("commanded speed {speed} m/s is outside (0, {max}]")]
    Speed { speed: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgvProfile {
    pub name: String,
    pub max_speed_mps: f64,
    /// Braking deceleration; `None` stops instantly.
    #[serde(default)]
    pub decel_mps2: Option<f64>,
    #[serde(default)]
    pub tag_forward_offset_m: f64,
}

impl AgvProfile {
    pub fn r1() -> Self {
        AgvProfile {
            name: "R1".into(),
            max_speed_mps: R1_SPEED_MPS,
            decel_mps2: None,
            tag_forward_offset_m: 0.0,
        }
    }

    pub fn r2() -> Self {
        AgvProfile {
            name: "R2".into(),
            max_speed_mps: R2_SPEED_MPS,
            decel_mps2: None,
            tag_forward_offset_m: 0.0,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "R1" => Some(Self::r1()),
            "R2" => Some(Self::r2()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), AgvError> {
        if !(self.max_speed_mps.is_finite() && self.max_speed_mps > 0.0) {
            return Err(AgvError::MaxSpeed(self.max_speed_mps));
        }
        if let Some(a) = self.decel_mps2 {
            if a.is_nan() || a <= 0.0 {
                return Err(AgvError::Decel(a));
            }
        }
        Ok(())
    }

    pub fn check_speed(&self, speed: f64) -> Result<(), AgvError> {
        if speed > 0.0 && speed <= self.max_speed_mps {
            Ok(())
        } else {
            Err(AgvError::Speed {
                speed,
                max: self.max_speed_mps,
            })
        }
    }

    /// Travel from stop latch to rest at `speed`.
    pub fn braking_distance(&self, speed: f64) -> f64 {
        match self.decel_mps2 {
            Some(a) if a.is_finite() => speed * speed / (2.0 * a),
            _ => 0.0,
        }
    }

    /// Time from stop latch to rest at `speed`, in ms.
    pub fn braking_time_ms(&self, speed: f64) -> f64 {
        match self.decel_mps2 {
            Some(a) if a.is_finite() => 1000.0 * speed / a,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgvState {
    pub position: Point2,
    pub heading: f64,
    pub speed: f64,
    pub stopped: bool,
    pub stop_latched_at_ms: Option<f64>,
}

impl AgvState {
    pub fn moving(position: Point2, heading: f64, speed: f64) -> Self {
        AgvState {
            position,
            heading,
            speed,
            stopped: false,
            stop_latched_at_ms: None,
        }
    }

    pub fn is_latched(&self) -> bool {
        self.stop_latched_at_ms.is_some()
    }
}

/// Advances `state` by `dt_ms`, integrating braking exactly when latched.
pub fn step(state: &AgvState, profile: &AgvProfile, dt_ms: f64) -> AgvState {
    let mut next = state.clone();
    if state.stopped || state.speed == 0.0 || dt_ms <= 0.0 {
        return next;
    }
    let dt = dt_ms / 1000.0;
    let dir = Point2::from_heading(state.heading);
    let decel = profile.decel_mps2.filter(|a| a.is_finite());
    match (state.is_latched(), decel) {
        (true, Some(a)) => {
            let t_rest = state.speed / a;
            if dt >= t_rest {
                next.position = state.position.add(dir.scale(state.speed * t_rest / 2.0));
                next.speed = 0.0;
                next.stopped = true;
            } else {
                let travel = state.speed * dt - 0.5 * a * dt * dt;
                next.position = state.position.add(dir.scale(travel));
                next.speed = state.speed - a * dt;
            }
        }
        _ => {
            next.position = state.position.add(dir.scale(state.speed * dt));
        }
    }
    next
}

/// Latches the emergency stop. Idempotent: a second call changes nothing.
pub fn apply_stop(state: &AgvState, profile: &AgvProfile, now_ms: f64) -> AgvState {
    if state.is_latched() {
        return state.clone();
    }
    let mut next = state.clone();
    next.stop_latched_at_ms = Some(now_ms);
    let instant = !matches!(profile.decel_mps2, Some(a) if a.is_finite());
    if instant || state.speed == 0.0 {
        next.speed = 0.0;
        next.stopped = true;
    }
    next
}

/// Tag location: vehicle reference point shifted forward along the heading.
pub fn tag_position(state: &AgvState, profile: &AgvProfile) -> Point2 {
    state
        .position
        .add(Point2::from_heading(state.heading).scale(profile.tag_forward_offset_m))
}
