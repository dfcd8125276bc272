//! Assume-guarantee safety contracts and their evaluation against campaign
//! evidence.
//!
//! A contract reads "if {conditions} then {component} shall provide
//! {property} with confidence of {confidence}". Conditions are predicates on
//! the experiment configuration, addressed by the same dotted paths used for
//! CLI overrides.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::harness::{ExperimentConfig, REPORT_CI_LEVEL};
use crate::stats::{self, StatsError};

#[derive(Debug, Error)]
pub enum ContractError {
    #[error("config schema: {0}")]
    Schema(String),
    #[error("invalid contract: {0}")]
    Invalid(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<=", alias = "≤")]
    Le,
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = "=", alias = "==")]
    Eq,
    #[serde(rename = "in", alias = "∈")]
    In,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
            Comparator::In => "in",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionPredicate {
    /// Dotted path into the serialized experiment config, e.g. `tag.period_ms`.
    pub subject: String,
    pub comparator: Comparator,
    pub bound: Value,
}

impl ConditionPredicate {
    pub fn new(subject: &str, comparator: Comparator, bound: impl Into<Value>) -> Self {
        ConditionPredicate {
            subject: subject.to_string(),
            comparator,
            bound: bound.into(),
        }
    }

    /// Evaluates the predicate against an already-serialized config.
    pub fn eval(&self, config: &Value) -> Result<bool, ContractError> {
        let value = resolve_path(config, &self.subject)
            .ok_or_else(|| ContractError::Schema(format!("unresolvable condition subject `{}`", self.subject)))?;
        let mismatch = || {
            ContractError::Schema(format!(
                "comparator `{}` is not applicable to `{}` = {} with bound {}",
                self.comparator.symbol(),
                self.subject,
                value,
                self.bound
            ))
        };
        match self.comparator {
            Comparator::Le | Comparator::Ge => {
                let (v, b) = match (value.as_f64(), self.bound.as_f64()) {
                    (Some(v), Some(b)) => (v, b),
                    _ => return Err(mismatch()),
                };
                Ok(if self.comparator == Comparator::Le {
                    v <= b
                } else {
                    v >= b
                })
            }
            Comparator::Eq => {
                if value.is_object() || value.is_array() {
                    return Err(mismatch());
                }
                Ok(json_eq(value, &self.bound))
            }
            Comparator::In => match &self.bound {
                Value::Array(options) => Ok(options.iter().any(|o| json_eq(value, o))),
                _ => Err(mismatch()),
            },
        }
    }
}

impl fmt::Display for ConditionPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.comparator.symbol(), self.bound)
    }
}

fn json_eq(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

/// Looks up `a.b.c` in a JSON value. Array segments match either an index or
/// an element whose `name` field equals the segment (pipeline stages).
pub fn resolve_path<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    if path.is_empty() {
        return None;
    }
    path.split('.').try_fold(root, |node, seg| match node {
        Value::Object(map) => map.get(seg),
        Value::Array(items) => match seg.parse::<usize>() {
            Ok(i) => items.get(i),
            Err(_) => items
                .iter()
                .find(|it| it.get("name").and_then(Value::as_str) == Some(seg)),
        },
        _ => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    MinStopDistanceM,
    MeanStopDistanceM,
    ProportionStoppedSafely,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::MinStopDistanceM => "min_stop_distance_m",
            Metric::MeanStopDistanceM => "mean_stop_distance_m",
            Metric::ProportionStoppedSafely => "proportion_stopped_safely",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropertyComparator {
    #[serde(rename = ">=", alias = "≥")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeProperty {
    pub metric: Metric,
    pub comparator: PropertyComparator,
    /// Metres for distance metrics, a probability for the proportion.
    pub threshold: f64,
}

impl GuaranteeProperty {
    fn accepts(&self, statistic: f64) -> bool {
        match self.comparator {
            PropertyComparator::Ge => statistic >= self.threshold,
            PropertyComparator::Gt => statistic > self.threshold,
        }
    }
}

impl fmt::Display for GuaranteeProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.comparator {
            PropertyComparator::Ge => ">=",
            PropertyComparator::Gt => ">",
        };
        let unit = if self.metric == Metric::ProportionStoppedSafely {
            ""
        } else {
            " m"
        };
        write!(f, "{} {} {}{}", self.metric.as_str(), op, self.threshold, unit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyContract {
    pub component: String,
    #[serde(default)]
    pub conditions: Vec<ConditionPredicate>,
    /// Must be set when `conditions` is empty.
    #[serde(default)]
    pub unconditional: bool,
    pub property: GuaranteeProperty,
    pub confidence: f64,
    #[serde(default)]
    pub notes: String,
}

impl SafetyContract {
    pub fn validate(&self) -> Result<(), ContractError> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(ContractError::Invalid(format!(
                "confidence must be in (0, 1), got {}",
                self.confidence
            )));
        }
        if self.conditions.is_empty() && !self.unconditional {
            return Err(ContractError::Invalid(
                "a contract needs at least one condition or `unconditional: true`".into(),
            ));
        }
        if !self.property.threshold.is_finite() {
            return Err(ContractError::Invalid("threshold must be finite".into()));
        }
        if self.property.metric == Metric::ProportionStoppedSafely && !(0.0..=1.0).contains(&self.property.threshold) {
            return Err(ContractError::Invalid(format!(
                "proportion threshold must be in [0, 1], got {}",
                self.property.threshold
            )));
        }
        Ok(())
    }

    /// "if {condition} then {component} shall provide {property} with
    /// confidence of {confidence}"
    pub fn render_sentence(&self) -> String {
        let cond = if self.conditions.is_empty() {
            "true".to_string()
        } else {
            self.conditions
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(" and ")
        };
        format!(
            "if {cond} then {} shall provide {} with confidence of {}%",
            self.component,
            self.property,
            self.confidence * 100.0
        )
    }
}

/// The stopping requirement as a conditional contract: under the conditions
/// the bench runs met, every run stops before the danger zone.
pub fn sr2_contract() -> SafetyContract {
    SafetyContract {
        component: "geofence stop chain".into(),
        conditions: vec![
            ConditionPredicate::new("speed_mps", Comparator::Le, 0.093),
            ConditionPredicate::new("tag.period_ms", Comparator::Le, 100.0),
            ConditionPredicate::new("tag.random_offset", Comparator::Eq, true),
            ConditionPredicate::new("server_contention", Comparator::Eq, false),
        ],
        unconditional: false,
        property: GuaranteeProperty {
            metric: Metric::MinStopDistanceM,
            comparator: PropertyComparator::Gt,
            threshold: 0.0,
        },
        confidence: REPORT_CI_LEVEL,
        notes: "Source wording of the period condition: \"Tag transmission gap is at least 100 milliseconds\". \
                Encoded as period_ms <= 100 because the 100 ms configurations passed and every 200 ms \
                configuration failed."
            .into(),
    }
}

/// Unconditional bound on the mean: the vehicle stops no further than the
/// buffer width past the virtual stop line.
pub fn mean_buffer_contract() -> SafetyContract {
    SafetyContract {
        component: "geofence stop chain".into(),
        conditions: Vec::new(),
        unconditional: true,
        property: GuaranteeProperty {
            metric: Metric::MeanStopDistanceM,
            comparator: PropertyComparator::Ge,
            threshold: 0.30,
        },
        confidence: REPORT_CI_LEVEL,
        notes: "Mean stop distance to the danger zone, bounded below by the lower end of the interval.".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Holds,
    Violated,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractVerdict {
    pub outcome: Outcome,
    /// Whether the evidence satisfies the property. Only meaningful when
    /// `conditions_satisfied` is true.
    pub holds: bool,
    pub conditions_satisfied: bool,
    /// Mean interval for distance metrics, Wilson interval for the proportion.
    pub achieved_confidence_interval: (f64, f64),
    /// The number compared with the threshold.
    pub statistic: f64,
    pub n_samples: usize,
    pub failed_conditions: Vec<String>,
    pub notes: String,
}

pub fn evaluate_contract(
    c: &SafetyContract,
    config: &ExperimentConfig,
    samples: &[f64],
) -> Result<ContractVerdict, ContractError> {
    c.validate()?;
    let cfg = serde_json::to_value(config).map_err(|e| ContractError::Schema(e.to_string()))?;
    let mut failed = Vec::new();
    for cond in &c.conditions {
        if !cond.eval(&cfg)? {
            failed.push(cond.to_string());
        }
    }
    if samples.is_empty() {
        return Err(StatsError::InsufficientData { needed: 1, got: 0 }.into());
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite.into());
    }
    let (statistic, interval, note) = match c.property.metric {
        Metric::MeanStopDistanceM => {
            let ci = stats::mean_confidence_interval(samples, c.confidence)?;
            (ci.lo, (ci.lo, ci.hi), "lower bound of the mean interval")
        }
        Metric::MinStopDistanceM => {
            let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let interval = if samples.len() >= 2 {
                let ci = stats::mean_confidence_interval(samples, c.confidence)?;
                (ci.lo, ci.hi)
            } else {
                (samples[0], samples[0])
            };
            (min, interval, "sample minimum")
        }
        Metric::ProportionStoppedSafely => {
            let safe = samples.iter().filter(|&&d| d > 0.0).count();
            let (lo, hi) = stats::wilson_interval(safe, samples.len(), c.confidence)?;
            (lo, (lo, hi), "Wilson lower bound of P(stop distance > 0)")
        }
    };
    let holds = c.property.accepts(statistic);
    let conditions_satisfied = failed.is_empty();
    let outcome = match (conditions_satisfied, holds) {
        (false, _) => Outcome::NotApplicable,
        (true, true) => Outcome::Holds,
        (true, false) => Outcome::Violated,
    };
    Ok(ContractVerdict {
        outcome,
        holds,
        conditions_satisfied,
        achieved_confidence_interval: interval,
        statistic,
        n_samples: samples.len(),
        failed_conditions: failed,
        notes: format!("{note} = {statistic:.4} vs {}", c.property),
    })
}
