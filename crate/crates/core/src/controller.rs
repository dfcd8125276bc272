//! Geofence safety controller: per-estimate encroachment check with a
//! one-shot STOP latch per tag.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, WorldConfig};
use crate::rtls::PositionEstimate;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("tag `{tag_id}`: estimate at {timestamp_ms} ms arrived after one at {last_ms} ms")]
    OutOfOrder {
        tag_id: String,
        timestamp_ms: f64,
        last_ms: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertKind {
    BufferEncroachment,
    DangerEncroachment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub tag_id: String,
    pub timestamp_ms: f64,
    pub estimate: Point2,
    pub zone_id: String,
    pub kind: AlertKind,
}

impl Alert {
    /// One trace line: `timestamp,tag,zone,kind,x,y`.
    pub fn trace_line(&self) -> String {
        let kind = match self.kind {
            AlertKind::BufferEncroachment => "buffer_encroachment",
            AlertKind::DangerEncroachment => "danger_encroachment",
        };
        format!(
            "{},{},{},{},{},{}",
            self.timestamp_ms, self.tag_id, self.zone_id, kind, self.estimate.x, self.estimate.y
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopCommand {
    pub tag_id: String,
    pub issued_at_ms: f64,
    pub cause: Alert,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ControllerOutput {
    pub alert: Option<Alert>,
    pub command: Option<StopCommand>,
}

/// Controller state for one run. Holds the world it checks against.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyController {
    world: WorldConfig,
    latches: BTreeMap<String, StopCommand>,
    last_seen: BTreeMap<String, f64>,
    alerts: Vec<Alert>,
}

impl SafetyController {
    pub fn new(world: WorldConfig) -> Self {
        SafetyController {
            world,
            latches: BTreeMap::new(),
            last_seen: BTreeMap::new(),
            alerts: Vec::new(),
        }
    }

    pub fn world(&self) -> &WorldConfig {
        &self.world
    }

    pub fn alerts(&self) -> &[Alert] {
        &self.alerts
    }

    pub fn command_for(&self, tag_id: &str) -> Option<&StopCommand> {
        self.latches.get(tag_id)
    }

    pub fn is_latched(&self, tag_id: &str) -> bool {
        self.latches.contains_key(tag_id)
    }

    fn classify(&self, p: Point2) -> Option<(String, AlertKind)> {
        if let Some(z) = self.world.zones.iter().find(|z| z.contains(p)) {
            return Some((z.id().to_string(), AlertKind::DangerEncroachment));
        }
        self.world
            .buffered_zones()
            .find(|bz| bz.contains(p))
            .map(|bz| (bz.base.id().to_string(), AlertKind::BufferEncroachment))
    }

    pub fn process_estimate(&mut self, est: &PositionEstimate) -> Result<ControllerOutput, ControllerError> {
        if let Some(&last) = self.last_seen.get(&est.tag_id) {
            if est.timestamp_ms < last {
                return Err(ControllerError::OutOfOrder {
                    tag_id: est.tag_id.clone(),
                    timestamp_ms: est.timestamp_ms,
                    last_ms: last,
                });
            }
        }
        self.last_seen.insert(est.tag_id.clone(), est.timestamp_ms);

        if self.latches.contains_key(&est.tag_id) {
            return Ok(ControllerOutput::default());
        }
        let Some((zone_id, kind)) = self.classify(est.position) else {
            return Ok(ControllerOutput::default());
        };
        let alert = Alert {
            tag_id: est.tag_id.clone(),
            timestamp_ms: est.timestamp_ms,
            estimate: est.position,
            zone_id,
            kind,
        };
        let command = StopCommand {
            tag_id: est.tag_id.clone(),
            issued_at_ms: est.timestamp_ms,
            cause: alert.clone(),
        };
        self.alerts.push(alert.clone());
        self.latches.insert(est.tag_id.clone(), command.clone());
        Ok(ControllerOutput {
            alert: Some(alert),
            command: Some(command),
        })
    }

    /// Clears latches, ordering state and the alert log; keeps the world.
    pub fn reset(&mut self) {
        self.latches.clear();
        self.last_seen.clear();
        self.alerts.clear();
    }
}
