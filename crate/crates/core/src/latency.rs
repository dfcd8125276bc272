//! Blink-to-motor-stop latency as an ordered chain of independent stages.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatencyError {
    #[error("stage `{stage}`: {reason}")]
    InvalidDistribution { stage: StageName, reason: String },
    #[error("stage `{0}` appears more than once")]
    DuplicateStage(StageName),
    #[error("stage `{0}` is out of canonical order")]
    OutOfOrder(StageName),
    #[error("quantile level must lie strictly between 0 and 1, got {0}")]
    Quantile(f64),
}

/// Pipeline stages in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    UwbAir,
    AnchorBackhaul,
    LocationEngine,
    SafetyController,
    StopDispatchNetwork,
    AgvCommandExec,
}

impl StageName {
    pub const CANONICAL: [StageName; 6] = [
        StageName::UwbAir,
        StageName::AnchorBackhaul,
        StageName::LocationEngine,
        StageName::SafetyController,
        StageName::StopDispatchNetwork,
        StageName::AgvCommandExec,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageName::UwbAir => "uwb_air",
            StageName::AnchorBackhaul => "anchor_backhaul",
            StageName::LocationEngine => "location_engine",
            StageName::SafetyController => "safety_controller",
            StageName::StopDispatchNetwork => "stop_dispatch_network",
            StageName::AgvCommandExec => "agv_command_exec",
        }
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Latency distribution, all parameters in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyDist {
    Constant {
        value: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    ShiftedExponential {
        shift: f64,
        mean_excess: f64,
    },
    /// Draws from `slow` with probability `p`, otherwise from `fast`.
    Mixture {
        p: f64,
        fast: Box<LatencyDist>,
        slow: Box<LatencyDist>,
    },
}

impl LatencyDist {
    pub fn constant(value: f64) -> Self {
        LatencyDist::Constant { value }
    }

    pub fn uniform(lo: f64, hi: f64) -> Self {
        LatencyDist::Uniform { lo, hi }
    }

    pub fn shifted_exponential(shift: f64, mean_excess: f64) -> Self {
        LatencyDist::ShiftedExponential { shift, mean_excess }
    }

    pub fn mixture(p: f64, fast: LatencyDist, slow: LatencyDist) -> Self {
        LatencyDist::Mixture {
            p,
            fast: Box::new(fast),
            slow: Box::new(slow),
        }
    }

    fn check(&self) -> Result<(), String> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be finite and >= 0, got {v}"))
            }
        };
        match self {
            LatencyDist::Constant { value } => finite_nonneg("value", *value),
            LatencyDist::Uniform { lo, hi } => {
                finite_nonneg("lo", *lo)?;
                finite_nonneg("hi", *hi)?;
                if lo > hi {
                    return Err(format!("lo ({lo}) exceeds hi ({hi})"));
                }
                Ok(())
            }
            LatencyDist::ShiftedExponential { shift, mean_excess } => {
                finite_nonneg("shift", *shift)?;
                finite_nonneg("mean_excess", *mean_excess)
            }
            LatencyDist::Mixture { p, fast, slow } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(format!("mixture probability must lie in [0, 1], got {p}"));
                }
                fast.check()?;
                slow.check()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            LatencyDist::Constant { value } => *value,
            LatencyDist::Uniform { lo, hi } => {
                if lo == hi {
                    *lo
                } else {
                    rng.random_range(*lo..*hi)
                }
            }
            LatencyDist::ShiftedExponential { shift, mean_excess } => {
                let e: f64 = Exp1.sample(rng);
                shift + mean_excess * e
            }
            LatencyDist::Mixture { p, fast, slow } => {
                let u: f64 = rng.random();
                if u < *p {
                    slow.sample(rng)
                } else {
                    fast.sample(rng)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            LatencyDist::Constant { value } => *value,
            LatencyDist::Uniform { lo, hi } => 0.5 * (lo + hi),
            LatencyDist::ShiftedExponential { shift, mean_excess } => shift + mean_excess,
            LatencyDist::Mixture { p, fast, slow } => (1.0 - p) * fast.mean() + p * slow.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            LatencyDist::Constant { .. } => 0.0,
            LatencyDist::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            LatencyDist::ShiftedExponential { mean_excess, .. } => mean_excess * mean_excess,
            LatencyDist::Mixture { p, fast, slow } => {
                let m = self.mean();
                let second = |d: &LatencyDist| d.variance() + d.mean() * d.mean();
                (1.0 - p) * second(fast) + p * second(slow) - m * m
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            LatencyDist::Constant { value } => {
                if x >= *value {
                    1.0
                } else {
                    0.0
                }
            }
            LatencyDist::Uniform { lo, hi } => {
                if x < *lo {
                    0.0
                } else if x >= *hi {
                    1.0
                } else {
                    (x - lo) / (hi - lo)
                }
            }
            LatencyDist::ShiftedExponential { shift, mean_excess } => {
                if x < *shift {
                    0.0
                } else if *mean_excess == 0.0 {
                    1.0
                } else {
                    1.0 - (-(x - shift) / mean_excess).exp()
                }
            }
            LatencyDist::Mixture { p, fast, slow } => (1.0 - p) * fast.cdf(x) + p * slow.cdf(x),
        }
    }

    fn support_min(&self) -> f64 {
        match self {
            LatencyDist::Constant { value } => *value,
            LatencyDist::Uniform { lo, .. } => *lo,
            LatencyDist::ShiftedExponential { shift, .. } => *shift,
            LatencyDist::Mixture { fast, slow, .. } => fast.support_min().min(slow.support_min()),
        }
    }

    /// Smallest `x` with `cdf(x) >= q`.
    pub fn quantile(&self, q: f64) -> Result<f64, LatencyError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(LatencyError::Quantile(q));
        }
        Ok(match self {
            LatencyDist::Constant { value } => *value,
            LatencyDist::Uniform { lo, hi } => lo + q * (hi - lo),
            LatencyDist::ShiftedExponential { shift, mean_excess } => shift - mean_excess * (1.0 - q).ln(),
            LatencyDist::Mixture { .. } => self.invert_cdf(q),
        })
    }

    fn invert_cdf(&self, q: f64) -> f64 {
        let mut lo = self.support_min();
        if self.cdf(lo) >= q {
            return lo;
        }
        let mut hi = lo.max(1.0);
        while self.cdf(hi) < q {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= q {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-12 * hi.max(1.0) {
                break;
            }
        }
        hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStage {
    pub name: StageName,
    pub distribution: LatencyDist,
}

impl LatencyStage {
    pub fn new(name: StageName, distribution: LatencyDist) -> Self {
        LatencyStage { name, distribution }
    }
}

pub fn stage_quantile(stage: &LatencyStage, q: f64) -> Result<f64, LatencyError> {
    stage.distribution.quantile(q)
}

/// Stages in canonical order, each appearing at most once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LatencyStage>", into = "Vec<LatencyStage>")]
pub struct LatencyPipeline {
    stages: Vec<LatencyStage>,
}

impl TryFrom<Vec<LatencyStage>> for LatencyPipeline {
    type Error = LatencyError;

    fn try_from(stages: Vec<LatencyStage>) -> Result<Self, Self::Error> {
        LatencyPipeline::new(stages)
    }
}

impl From<LatencyPipeline> for Vec<LatencyStage> {
    fn from(p: LatencyPipeline) -> Self {
        p.stages
    }
}

/// One end-to-end draw with its per-stage breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub total_ms: f64,
    pub stages: Vec<(StageName, f64)>,
}

impl LatencyPipeline {
    pub fn new(stages: Vec<LatencyStage>) -> Result<Self, LatencyError> {
        let mut prev: Option<StageName> = None;
        for s in &stages {
            s.distribution
                .check()
                .map_err(|reason| LatencyError::InvalidDistribution { stage: s.name, reason })?;
            if let Some(p) = prev {
                if p == s.name {
                    return Err(LatencyError::DuplicateStage(s.name));
                }
                if p > s.name {
                    if stages.iter().filter(|o| o.name == s.name).count() > 1 {
                        return Err(LatencyError::DuplicateStage(s.name));
                    }
                    return Err(LatencyError::OutOfOrder(s.name));
                }
            }
            prev = Some(s.name);
        }
        Ok(LatencyPipeline { stages })
    }

    /// Zero-latency pipeline.
    pub fn empty() -> Self {
        LatencyPipeline { stages: Vec::new() }
    }

    /// Single constant stage carrying the whole latency budget.
    pub fn constant_total(total_ms: f64) -> Result<Self, LatencyError> {
        LatencyPipeline::new(vec![LatencyStage::new(
            StageName::AgvCommandExec,
            LatencyDist::constant(total_ms),
        )])
    }

    pub fn stages(&self) -> &[LatencyStage] {
        &self.stages
    }

    pub fn stage(&self, name: StageName) -> Option<&LatencyStage> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Copy of the pipeline with `name` removed.
    pub fn without(&self, name: StageName) -> LatencyPipeline {
        LatencyPipeline {
            stages: self.stages.iter().filter(|s| s.name != name).cloned().collect(),
        }
    }

    pub fn mean_ms(&self) -> f64 {
        self.stages.iter().map(|s| s.distribution.mean()).sum()
    }

    pub fn variance_ms2(&self) -> f64 {
        self.stages.iter().map(|s| s.distribution.variance()).sum()
    }
}

pub fn sample_total_latency<R: Rng + ?Sized>(p: &LatencyPipeline, rng: &mut R) -> LatencySample {
    let stages: Vec<(StageName, f64)> = p.stages.iter().map(|s| (s.name, s.distribution.sample(rng))).collect();
    LatencySample {
        total_ms: stages.iter().map(|(_, v)| v).sum(),
        stages,
    }
}
