//! Tag blink schedule and the location-engine error model.
//!
//! The anchor network and location engine are treated as a black box that
//! returns the true tag position plus isotropic Gaussian noise. The noise
//! level is derived from the vendor accuracy figure (a fraction of fixes
//! falling within a radius) by inverting the Rayleigh radial CDF.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RtlsError {
    #[error("probability must lie strictly between 0 and 1, got {0}")]
    Probability(f64),
    #[error("radius must be positive, got {0}")]
    Radius(f64),
    #[error("tag period must be positive, got {0} ms")]
    Period(f64),
    #[error("jitter fraction must lie in [0, 0.5), got {0}")]
    Jitter(f64),
    #[error("sigma must be positive, got {0}")]
    Sigma(f64),
    #[error("drop probability must lie in [0, 1), got {0}")]
    DropProbability(f64),
    #[error("NLOS sigma scale must be >= 1, got {0}")]
    NlosScale(f64),
}

fn default_jitter() -> f64 {
    0.10
}

/// Tag transmission schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagConfig {
    pub period_ms: f64,
    pub random_offset: bool,
    #[serde(default = "default_jitter")]
    pub jitter_fraction: f64,
}

impl TagConfig {
    pub fn new(period_ms: f64, random_offset: bool) -> Self {
        TagConfig {
            period_ms,
            random_offset,
            jitter_fraction: default_jitter(),
        }
    }

    pub fn validate(&self) -> Result<(), RtlsError> {
        if !(self.period_ms.is_finite() && self.period_ms > 0.0) {
            return Err(RtlsError::Period(self.period_ms));
        }
        if !(0.0..0.5).contains(&self.jitter_fraction) {
            return Err(RtlsError::Jitter(self.jitter_fraction));
        }
        Ok(())
    }

    /// Gap to the next blink.
    pub fn next_gap<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.random_offset && self.jitter_fraction > 0.0 {
            let j = self.jitter_fraction * self.period_ms;
            self.period_ms + rng.random_range(-j..=j)
        } else {
            self.period_ms
        }
    }
}

/// Blink timestamps in `[0, horizon_ms]`, starting at 0.
///
/// Without random offset the timestamps are exactly `k * period`. With it,
/// every gap is `period + U(-j*period, +j*period)`, drawn independently.
pub fn blink_schedule<R: Rng + ?Sized>(cfg: &TagConfig, horizon_ms: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    if !cfg.random_offset {
        let mut k = 0u64;
        loop {
            let t = k as f64 * cfg.period_ms;
            if t > horizon_ms {
                break;
            }
            out.push(t);
            k += 1;
        }
        return out;
    }
    let mut t = 0.0;
    while t <= horizon_ms {
        out.push(t);
        t += cfg.next_gap(rng);
    }
    out
}

/// Per-axis sigma such that `P(|e| < radius_m) = p_within` for a 2-D
/// isotropic Gaussian error `e`.
pub fn calibrate_sigma(p_within: f64, radius_m: f64) -> Result<f64, RtlsError> {
    if !(p_within > 0.0 && p_within < 1.0) {
        return Err(RtlsError::Probability(p_within));
    }
    if !(radius_m.is_finite() && radius_m > 0.0) {
        return Err(RtlsError::Radius(radius_m));
    }
    Ok(radius_m / (-2.0 * (1.0 - p_within).ln()).sqrt())
}

/// Optional linear growth of sigma with distance from a reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionScaling {
    pub center: Point2,
    /// Relative sigma increase per meter from `center`.
    pub slope_per_m: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub sigma_m: f64,
    #[serde(default)]
    pub nlos_enabled: bool,
    #[serde(default = "one")]
    pub nlos_sigma_scale: f64,
    #[serde(default)]
    pub nlos_bias_m: f64,
    /// Direction of the NLOS bias, radians from +x.
    #[serde(default)]
    pub nlos_bias_heading_rad: f64,
    #[serde(default)]
    pub drop_probability: f64,
    #[serde(default)]
    pub position_scaling: Option<PositionScaling>,
}

impl ErrorModel {
    pub fn gaussian(sigma_m: f64) -> Self {
        ErrorModel {
            sigma_m,
            nlos_enabled: false,
            nlos_sigma_scale: 1.0,
            nlos_bias_m: 0.0,
            nlos_bias_heading_rad: 0.0,
            drop_probability: 0.0,
            position_scaling: None,
        }
    }

    /// 98 % of fixes within 30 cm.
    pub fn vendor_default() -> Self {
        ErrorModel::gaussian(calibrate_sigma(0.98, 0.30).expect("constant arguments are valid"))
    }

    pub fn validate(&self) -> Result<(), RtlsError> {
        if !(self.sigma_m.is_finite() && self.sigma_m > 0.0) {
            return Err(RtlsError::Sigma(self.sigma_m));
        }
        if !(0.0..1.0).contains(&self.drop_probability) {
            return Err(RtlsError::DropProbability(self.drop_probability));
        }
        if self.nlos_sigma_scale.is_nan() || self.nlos_sigma_scale < 1.0 {
            return Err(RtlsError::NlosScale(self.nlos_sigma_scale));
        }
        Ok(())
    }

    /// Per-axis sigma that applies at `p`.
    pub fn effective_sigma(&self, p: Point2) -> f64 {
        let mut s = self.sigma_m;
        if self.nlos_enabled {
            s *= self.nlos_sigma_scale;
        }
        if let Some(ps) = &self.position_scaling {
            s *= 1.0 + ps.slope_per_m * p.distance(ps.center);
        }
        s
    }
}

/// Output of the location engine for one blink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub tag_id: String,
    pub timestamp_ms: f64,
    pub position: Point2,
    pub true_position: Point2,
}

/// Draws one estimate of `true_pos`, or `None` if the blink is lost.
///
/// Always consumes exactly three draws from `rng` so that streams stay
/// aligned between models that differ only in their parameters.
pub fn estimate_position<R: Rng + ?Sized>(
    tag_id: &str,
    timestamp_ms: f64,
    true_pos: Point2,
    em: &ErrorModel,
    rng: &mut R,
) -> Option<PositionEstimate> {
    let u: f64 = rng.random();
    let zx: f64 = StandardNormal.sample(rng);
    let zy: f64 = StandardNormal.sample(rng);
    if u < em.drop_probability {
        return None;
    }
    let sigma = em.effective_sigma(true_pos);
    let mut position = true_pos.add(Point2::new(zx, zy).scale(sigma));
    if em.nlos_enabled && em.nlos_bias_m != 0.0 {
        position = position.add(Point2::from_heading(em.nlos_bias_heading_rad).scale(em.nlos_bias_m));
    }
    Some(PositionEstimate {
        tag_id: tag_id.to_string(),
        timestamp_ms,
        position,
        true_position: true_pos,
    })
}
