//! Perturbable neighbour features and the Δ-bounded perturbation interval.
//!
//! Only values the prompt actually exposes for surrounding vehicles are in the
//! pool: each present neighbour contributes its longitudinal speed and its
//! distance. Ego features are never perturbed.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{Direction, DrivingScenario, SENSING_RANGE_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    SpeedX,
    Distance,
}

impl Attribute {
    pub const ALL: [Attribute; 2] = [Attribute::SpeedX, Attribute::Distance];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::SpeedX => "SpeedX",
            Attribute::Distance => "Distance",
        }
    }

    /// Physically plausible range of the attribute.
    pub fn physical_bounds(self) -> Interval {
        match self {
            Attribute::SpeedX => Interval { lo: 0.0, hi: 250.0 },
            // open at zero; valid clean distances are positive so the multiplicative
            // lower edge never reaches it
            Attribute::Distance => Interval { lo: 0.0, hi: SENSING_RANGE_M },
        }
    }
}

/// A single perturbable scalar of one neighbour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureId {
    pub direction: Direction,
    pub attribute: Attribute,
    /// Position in the scenario's ordered feature list.
    pub ordinal: usize,
}

impl FeatureId {
    /// `direction.attribute`, e.g. `LeftFront.Distance`.
    pub fn label(&self) -> String {
        format!("{}.{}", self.direction.name(), self.attribute.name())
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.direction.name(), self.attribute.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Additive perturbation of one feature, in the feature's own units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub feature: FeatureId,
    pub delta: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("perturbation budget must lie in (0, 1), got {0}")]
    InvalidBudget(f64),
    #[error("feature {0} is not present in scenario")]
    UnknownFeature(String),
    #[error("perturbed value {value} of {feature} lies outside {interval}")]
    BoundViolation { feature: String, value: f64, interval: Interval },
}

/// Ordered feature list: directions in enumeration order, `SpeedX` before
/// `Distance`, only for neighbours that are present.
pub fn enumerate_features(scenario: &DrivingScenario) -> Vec<FeatureId> {
    scenario
        .neighbors
        .keys()
        .flat_map(|&direction| Attribute::ALL.into_iter().map(move |attribute| (direction, attribute)))
        .enumerate()
        .map(|(ordinal, (direction, attribute))| FeatureId { direction, attribute, ordinal })
        .collect()
}

/// Clean value of a feature, if its neighbour is present.
pub fn feature_value(scenario: &DrivingScenario, direction: Direction, attribute: Attribute) -> Option<f64> {
    scenario.neighbors.get(&direction).map(|n| match attribute {
        Attribute::SpeedX => n.speed_x,
        Attribute::Distance => n.distance,
    })
}

/// Admissible range of the perturbed value: `[s − Δ|s|, s + Δ|s|]` intersected
/// with the attribute's physical bounds.
pub fn bounds_for(scenario: &DrivingScenario, feature: &FeatureId, budget: f64) -> Result<Interval, FeatureError> {
    if !(budget > 0.0 && budget < 1.0) {
        return Err(FeatureError::InvalidBudget(budget));
    }
    let s = feature_value(scenario, feature.direction, feature.attribute)
        .ok_or_else(|| FeatureError::UnknownFeature(feature.label()))?;
    Ok(bounds_around(s, feature.attribute, budget))
}

pub(crate) fn bounds_around(s: f64, attribute: Attribute, budget: f64) -> Interval {
    let phys = attribute.physical_bounds();
    let reach = budget * s.abs();
    let lo = (s - reach).max(phys.lo).min(s);
    let hi = (s + reach).min(phys.hi).max(s);
    Interval { lo, hi }
}

/// Same interval expressed as admissible `delta` values.
pub fn delta_bounds(scenario: &DrivingScenario, feature: &FeatureId, budget: f64) -> Result<Interval, FeatureError> {
    let value = bounds_for(scenario, feature, budget)?;
    let s = feature_value(scenario, feature.direction, feature.attribute).unwrap_or_default();
    Ok(Interval { lo: value.lo - s, hi: value.hi - s })
}

/// Returns a copy of `scenario` with exactly one neighbour value replaced.
pub fn apply(
    scenario: &DrivingScenario,
    perturbation: &Perturbation,
    budget: f64,
) -> Result<DrivingScenario, FeatureError> {
    let feature = &perturbation.feature;
    let interval = bounds_for(scenario, feature, budget)?;
    let s = feature_value(scenario, feature.direction, feature.attribute).unwrap_or_default();
    let value = s + perturbation.delta;
    // one rounding step of slack for deltas sampled from `delta_bounds`
    let slack = 1e-9 * s.abs().max(1.0);
    if !(value >= interval.lo - slack && value <= interval.hi + slack) {
        return Err(FeatureError::BoundViolation { feature: feature.label(), value, interval });
    }
    let value = value.clamp(interval.lo, interval.hi);

    let mut out = scenario.clone();
    let n = out.neighbors.get_mut(&feature.direction).expect("presence checked by bounds_for");
    match feature.attribute {
        Attribute::SpeedX => n.speed_x = value,
        Attribute::Distance => n.distance = value,
    }
    Ok(out)
}
