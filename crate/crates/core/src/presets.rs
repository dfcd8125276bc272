//! The nine bench configurations and the NLOS variants.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agv::{AgvProfile, R2_SPEED_MPS};
use crate::calibration::Calibration;
use crate::geometry::WorldConfig;
use crate::harness::{ExperimentConfig, TrajectoryConfig};
use crate::rtls::{ErrorModel, TagConfig};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown preset `{0}`; valid presets: {valid}", valid = preset_ids().join(", "))]
pub struct UnknownPreset(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vehicle {
    R1,
    R2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpeedSetting {
    /// Full speed of R2.
    Full,
    /// One third of R2's full speed (R1's default).
    Third,
}

/// One row of the bench configuration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetRow {
    pub id: &'static str,
    pub vehicle: Vehicle,
    pub period_ms: f64,
    pub speed: SpeedSetting,
    pub server: bool,
    pub random_offset: bool,
    /// Outcome observed on hardware ("yes" = stopped safely on every run).
    pub observed: &'static str,
}

pub const TABLE: [PresetRow; 9] = [
    row("T1", Vehicle::R1, 100.0, SpeedSetting::Third, false, true, "yes"),
    row("T2", Vehicle::R2, 100.0, SpeedSetting::Full, true, true, "no"),
    row("T3", Vehicle::R2, 100.0, SpeedSetting::Third, true, true, "no"),
    row("T4", Vehicle::R2, 100.0, SpeedSetting::Full, false, true, "no"),
    row("T5", Vehicle::R2, 100.0, SpeedSetting::Third, false, true, "yes"),
    row("T6", Vehicle::R2, 200.0, SpeedSetting::Full, false, true, "no"),
    row("T7", Vehicle::R2, 200.0, SpeedSetting::Third, false, true, "no"),
    row("T8", Vehicle::R2, 200.0, SpeedSetting::Full, false, false, "no"),
    row("T9", Vehicle::R2, 200.0, SpeedSetting::Third, false, false, "no (once)"),
];

const fn row(
    id: &'static str,
    vehicle: Vehicle,
    period_ms: f64,
    speed: SpeedSetting,
    server: bool,
    random_offset: bool,
    observed: &'static str,
) -> PresetRow {
    PresetRow {
        id,
        vehicle,
        period_ms,
        speed,
        server,
        random_offset,
        observed,
    }
}

pub const NLOS_ID: &str = "T1-NLOS";
pub const NLOS_STRESS_ID: &str = "T1-NLOS-STRESS";

/// Default campaign size per configuration.
pub const DEFAULT_RUNS: u64 = 50;

pub fn preset_ids() -> Vec<&'static str> {
    TABLE.iter().map(|r| r.id).chain([NLOS_ID, NLOS_STRESS_ID]).collect()
}

pub fn table_row(id: &str) -> Option<&'static PresetRow> {
    TABLE.iter().find(|r| r.id == id)
}

impl PresetRow {
    pub fn profile(&self) -> AgvProfile {
        match self.vehicle {
            Vehicle::R1 => AgvProfile::r1(),
            Vehicle::R2 => AgvProfile::r2(),
        }
    }

    pub fn speed_mps(&self) -> f64 {
        match (self.vehicle, self.speed) {
            (Vehicle::R1, _) => AgvProfile::r1().max_speed_mps,
            (Vehicle::R2, SpeedSetting::Full) => R2_SPEED_MPS,
            (Vehicle::R2, SpeedSetting::Third) => R2_SPEED_MPS / 3.0,
        }
    }
}

/// Preset configuration under the default calibration.
pub fn preset(id: &str) -> Result<ExperimentConfig, UnknownPreset> {
    preset_with(id, &Calibration::default())
}

pub fn preset_with(id: &str, cal: &Calibration) -> Result<ExperimentConfig, UnknownPreset> {
    let (base_id, nlos_scale) = match id {
        NLOS_ID => ("T1", Some(1.0)),
        NLOS_STRESS_ID => ("T1", Some(1.5)),
        other => (other, None),
    };
    let row = table_row(base_id).ok_or_else(|| UnknownPreset(id.to_string()))?;
    let tag = TagConfig::new(row.period_ms, row.random_offset);
    let agv = row.profile();
    let mut error_model = ErrorModel::vendor_default();
    let mut labels = BTreeMap::new();
    labels.insert("pipeline".to_string(), format!("CALIBRATED ({})", cal.label));
    labels.insert(
        "danger_zone".to_string(),
        "ASSUMED: 2 m x 2 m rectangle in the bottom-right corner of an 8 m x 8 m room".to_string(),
    );
    labels.insert(
        "error_model".to_string(),
        "sigma from 98% of fixes within 0.30 m (radial)".to_string(),
    );
    if let Some(scale) = nlos_scale {
        error_model.nlos_enabled = true;
        error_model.nlos_sigma_scale = scale;
        if scale > 1.0 {
            labels.insert(
                "nlos".to_string(),
                "STRESS VARIANT: sigma x1.5, not a bench observation".to_string(),
            );
        }
    }
    Ok(ExperimentConfig {
        id: id.to_string(),
        pipeline: cal.pipeline_for(&agv.name, row.period_ms, row.server, row.random_offset),
        speed_mps: row.speed_mps(),
        agv,
        tag,
        error_model,
        server_contention: row.server,
        world: WorldConfig::default_lab(),
        trajectory: TrajectoryConfig::default(),
        n_runs: DEFAULT_RUNS,
        seed: 1,
        labels,
    })
}
