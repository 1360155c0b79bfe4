//! Driving-scene data model.
//!
//! A [`DrivingScenario`] bundles the ego vehicle state, the local map and up
//! to eight directional neighbours. Values are stored in the units the prompt
//! renders: speeds in km/h, accelerations in m/s², positions and distances in
//! meters.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Sensing range of the ego vehicle in meters.
pub const SENSING_RANGE_M: f64 = 200.0;
/// Number of ego history points (2 s at 0.4 s spacing, current point included).
pub const HISTORY_LEN: usize = 6;
/// Number of predicted waypoints (1 s .. 4 s).
pub const HORIZON_LEN: usize = 4;

pub type Point = (f64, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleKind {
    Car,
    Truck,
}

impl fmt::Display for VehicleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VehicleKind::Car => f.write_str("Car"),
            VehicleKind::Truck => f.write_str("Truck"),
        }
    }
}

/// Lane-change intention. The integer codes are part of the wire format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Intention {
    KeepLane,
    LeftChange,
    RightChange,
}

impl Intention {
    pub const ALL: [Intention; 3] = [Intention::KeepLane, Intention::LeftChange, Intention::RightChange];

    pub fn code(self) -> u8 {
        match self {
            Intention::KeepLane => 0,
            Intention::LeftChange => 1,
            Intention::RightChange => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Intention::KeepLane),
            1 => Some(Intention::LeftChange),
            2 => Some(Intention::RightChange),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize
    }

    /// Short label used in report tables.
    pub fn abbrev(self) -> &'static str {
        match self {
            Intention::KeepLane => "KL",
            Intention::LeftChange => "LC",
            Intention::RightChange => "RC",
        }
    }

    /// Label used in the response grammar, e.g. `1: Left lane change`.
    pub fn label(self) -> &'static str {
        match self {
            Intention::KeepLane => "Keep lane",
            Intention::LeftChange => "Left lane change",
            Intention::RightChange => "Right lane change",
        }
    }
}

/// The eight neighbour cells around the ego vehicle, in enumeration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Front,
    Behind,
    Left,
    Right,
    LeftFront,
    LeftBehind,
    RightFront,
    RightBehind,
}

impl Direction {
    pub const ALL: [Direction; 8] = [
        Direction::Front,
        Direction::Behind,
        Direction::Left,
        Direction::Right,
        Direction::LeftFront,
        Direction::LeftBehind,
        Direction::RightFront,
        Direction::RightBehind,
    ];

    /// Label as it appears in the user message.
    pub fn prompt_label(self) -> &'static str {
        match self {
            Direction::Front => "Front",
            Direction::Behind => "Rear",
            Direction::Left => "Left",
            Direction::Right => "Right",
            Direction::LeftFront => "Left front",
            Direction::LeftBehind => "Left rear",
            Direction::RightFront => "Right front",
            Direction::RightBehind => "Right rear",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Front => "Front",
            Direction::Behind => "Behind",
            Direction::Left => "Left",
            Direction::Right => "Right",
            Direction::LeftFront => "LeftFront",
            Direction::LeftBehind => "LeftBehind",
            Direction::RightFront => "RightFront",
            Direction::RightBehind => "RightBehind",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Direction::ALL.into_iter().find(|d| d.name() == name)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    /// Longitudinal speed, km/h.
    pub vx: f64,
    /// Lateral speed, km/h (positive to the left).
    pub vy: f64,
    /// Longitudinal acceleration, m/s².
    pub ax: f64,
    /// Lateral acceleration, m/s².
    pub ay: f64,
    pub kind: VehicleKind,
    pub width: f64,
    pub length: f64,
    /// Ego-centred positions, oldest first; the last point is the current position (0, 0).
    pub history: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub kind: VehicleKind,
    /// Longitudinal speed, km/h.
    pub speed_x: f64,
    /// Centre-to-centre distance to the ego vehicle, meters.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EgoLane {
    Leftmost,
    Rightmost,
    /// 1-based lane index counted from the left.
    Middle(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapInfo {
    pub lane_count: u32,
    pub ego_lane: EgoLane,
}

/// One driving scene: `(ego, neighbours, map)` plus an opaque identifier.
///
/// Neighbours are keyed by [`Direction`], so there is at most one per cell and
/// the canonical JSON lists them in enumeration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingScenario {
    pub id: String,
    pub map: MapInfo,
    pub ego: EgoState,
    #[serde(default)]
    pub neighbors: BTreeMap<Direction, Neighbor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub intention: Intention,
    /// Ego-centred waypoints at t = 1, 2, 3, 4 s.
    pub trajectory: [Point; HORIZON_LEN],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub intention: Intention,
    pub trajectory: [Point; HORIZON_LEN],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thought: Option<Vec<String>>,
}

/// One line of a `.jsonl` corpus: a scenario with an optional ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    #[serde(flatten)]
    pub scenario: DrivingScenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<GroundTruth>,
}

/// A violated invariant, naming the offending field and the rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

impl DrivingScenario {
    /// Canonical JSON. Field order is fixed by the type definitions and
    /// neighbours are ordered by direction, so equal scenarios give equal bytes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Checks every data-model invariant; an empty list means the scenario is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push =
            |field: &str, rule: &str| out.push(Violation { field: field.to_string(), rule: rule.to_string() });

        if self.map.lane_count < 2 {
            push("map.lane_count", "lane count must be at least 2");
        }
        if let EgoLane::Middle(i) = self.map.ego_lane {
            if i < 2 || i + 1 > self.map.lane_count {
                push("map.ego_lane", "middle lane index must lie strictly between the outer lanes");
            }
        }

        let ego = &self.ego;
        if ego.history.len() != HISTORY_LEN {
            push("ego.history", "history length ≠ 6");
        } else if ego.history[HISTORY_LEN - 1] != (0.0, 0.0) {
            push("ego.history", "current position must be exactly (0, 0)");
        }
        if ego.history.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            push("ego.history", "positions must be finite");
        }
        if !(ego.width > 0.0) {
            push("ego.width", "width must be positive");
        }
        if !(ego.length > 0.0) {
            push("ego.length", "length must be positive");
        }
        for (name, v) in [("ego.vx", ego.vx), ("ego.vy", ego.vy), ("ego.ax", ego.ax), ("ego.ay", ego.ay)] {
            if !v.is_finite() {
                push(name, "value must be finite");
            }
        }

        for (dir, n) in &self.neighbors {
            if !(n.distance > 0.0) {
                push(&format!("neighbors.{dir}.distance"), "distance must be positive");
            } else if n.distance > SENSING_RANGE_M {
                push(&format!("neighbors.{dir}.distance"), "distance exceeds 200 m sensing range");
            }
            if !n.speed_x.is_finite() {
                push(&format!("neighbors.{dir}.speed_x"), "speed must be finite");
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

/// Rounds to the two-decimal resolution used in prompts and corpora.
pub fn round2(v: f64) -> f64 {
    let r = (v * 100.0).round() / 100.0;
    // normalise -0.0 so canonical JSON never carries a signed zero
    if r == 0.0 {
        0.0
    } else {
        r
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::example_scenario;
    use super::*;

    #[test]
    fn example_is_valid() {
        assert!(example_scenario().validate().is_empty());
    }

    #[test]
    fn short_history_is_flagged() {
        let mut s = example_scenario();
        s.ego.history.remove(0);
        let v = s.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "ego.history");
        assert_eq!(v[0].rule, "history length ≠ 6");
    }

    #[test]
    fn out_of_range_neighbor_is_flagged() {
        let mut s = example_scenario();
        s.neighbors.get_mut(&Direction::LeftFront).unwrap().distance = 250.0;
        let v = s.validate();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "distance exceeds 200 m sensing range");
    }

    #[test]
    fn history_must_end_at_origin() {
        let mut s = example_scenario();
        s.ego.history[5] = (0.1, 0.0);
        assert_eq!(s.validate()[0].rule, "current position must be exactly (0, 0)");
    }

    #[test]
    fn lane_description_checked_against_count() {
        let mut s = example_scenario();
        s.map = MapInfo { lane_count: 3, ego_lane: EgoLane::Middle(3) };
        assert_eq!(s.validate()[0].field, "map.ego_lane");
        s.map = MapInfo { lane_count: 3, ego_lane: EgoLane::Middle(2) };
        assert!(s.is_valid());
        s.map.lane_count = 1;
        assert!(!s.is_valid());
    }

    #[test]
    fn intention_codes_are_fixed() {
        assert_eq!(Intention::KeepLane.code(), 0);
        assert_eq!(Intention::LeftChange.code(), 1);
        assert_eq!(Intention::RightChange.code(), 2);
        assert_eq!(Intention::from_code(3), None);
    }

    #[test]
    fn canonical_json_ignores_insertion_order() {
        let a = example_scenario();
        let mut b = example_scenario();
        let lf = b.neighbors.remove(&Direction::LeftFront).unwrap();
        b.neighbors.insert(Direction::LeftFront, lf);
        assert_eq!(a.canonical_json(), b.canonical_json());
        let json = a.canonical_json();
        assert!(json.starts_with(r#"{"id":"example","map":"#));
        assert!(json.find("LeftFront").unwrap() < json.find("LeftBehind").unwrap());
    }

    #[test]
    fn corpus_entry_keys() {
        let entry = CorpusEntry {
            scenario: example_scenario(),
            truth: Some(GroundTruth {
                intention: Intention::LeftChange,
                trajectory: [(1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)],
            }),
        };
        let value: serde_json::Value = serde_json::to_value(&entry).unwrap();
        let keys: Vec<_> = value.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["ego", "id", "map", "neighbors", "truth"]);
        let back: CorpusEntry = serde_json::from_value(value).unwrap();
        assert_eq!(back, entry);
    }

    #[test]
    fn round2_normalises_negative_zero() {
        assert_eq!(round2(-0.001).to_bits(), 0.0f64.to_bits());
        assert_eq!(round2(92.7049), 92.7);
    }
}
