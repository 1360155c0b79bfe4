//! Deterministic gap-acceptance surrogate.
//!
//! Stands in for a fine-tuned language model at desk scale. It reads exactly
//! the prompt-visible neighbour values, so a one-feature perturbation can move
//! a scene across its decision boundary.

use serde::{Deserialize, Serialize};

use super::{Capabilities, Predictor, Reply, TransportError};
use crate::prompt::{fmt2, fmt_distance, format_response, PromptMode};
use crate::scenario::{round2, Direction, DrivingScenario, EgoState, Intention, Point, PredictionResult, HORIZON_LEN};

pub const LANE_WIDTH_M: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateParams {
    /// Lateral speed needed to commit to a lane change, km/h.
    pub lateral_speed_threshold: f64,
    /// A lead vehicle closer than this motivates overtaking, m.
    pub front_gap: f64,
    /// Minimum free gap ahead in the target lane, m.
    pub adjacent_front_gap: f64,
    /// Minimum free gap behind in the target lane, m.
    pub adjacent_rear_gap: f64,
    /// Lead vehicle must be at least this much slower to motivate overtaking, km/h.
    pub speed_advantage: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            lateral_speed_threshold: 1.0,
            front_gap: 50.0,
            adjacent_front_gap: 70.0,
            adjacent_rear_gap: 30.0,
            speed_advantage: 5.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Surrogate {
    params: SurrogateParams,
    mode: PromptMode,
}

impl Surrogate {
    pub fn new(params: SurrogateParams) -> Self {
        Self { params, mode: PromptMode::Plain }
    }

    pub fn with_mode(mut self, mode: PromptMode) -> Self {
        self.mode = mode;
        self
    }

    fn gap_admits(&self, s: &DrivingScenario, front: Direction, rear: Direction) -> bool {
        let p = &self.params;
        let front_ok = s.neighbors.get(&front).is_none_or(|n| n.distance >= p.adjacent_front_gap);
        let rear_ok = s.neighbors.get(&rear).is_none_or(|n| n.distance >= p.adjacent_rear_gap);
        front_ok && rear_ok
    }

    pub fn decide(&self, s: &DrivingScenario) -> Intention {
        let p = &self.params;
        let vy = s.ego.vy;
        let left_open = self.gap_admits(s, Direction::LeftFront, Direction::LeftBehind);
        if vy > p.lateral_speed_threshold && left_open {
            return Intention::LeftChange;
        }
        if vy < -p.lateral_speed_threshold && self.gap_admits(s, Direction::RightFront, Direction::RightBehind) {
            return Intention::RightChange;
        }
        let slow_leader = s
            .neighbors
            .get(&Direction::Front)
            .is_some_and(|n| n.distance < p.front_gap && n.speed_x <= s.ego.vx - p.speed_advantage);
        if slow_leader && left_open {
            return Intention::LeftChange;
        }
        Intention::KeepLane
    }

    fn thought(&self, s: &DrivingScenario, intention: Intention) -> Vec<String> {
        let mut lines = vec![format!("Notable features: v_y = {};", fmt2(s.ego.vy))];
        for dir in [Direction::Front, Direction::LeftFront, Direction::RightFront] {
            match s.neighbors.get(&dir) {
                Some(n) => {
                    lines.push(format!("Notable feature: {} at {} m;", dir.prompt_label(), fmt_distance(n.distance)))
                }
                None => lines.push(format!("Notable feature: {} is free;", dir.prompt_label())),
            }
        }
        lines.push(match intention {
            Intention::KeepLane => "Potential behavior: Keep the current lane.".to_string(),
            Intention::LeftChange => "Potential behavior: Change left to the fast lane.".to_string(),
            Intention::RightChange => "Potential behavior: Change right to the slow lane.".to_string(),
        });
        lines
    }

    pub fn predict_result(&self, s: &DrivingScenario) -> PredictionResult {
        let intention = self.decide(s);
        PredictionResult {
            intention,
            trajectory: surrogate_trajectory(&s.ego, intention),
            thought: (self.mode == PromptMode::Cot).then(|| self.thought(s, intention)),
        }
    }
}

/// Constant-acceleration longitudinal motion; for lane changes a smoothstep
/// lateral ramp reaching one lane width at 4 s. Waypoints are rounded to the
/// two-decimal resolution of the response grammar.
pub fn surrogate_trajectory(ego: &EgoState, intention: Intention) -> [Point; HORIZON_LEN] {
    let v = ego.vx / 3.6;
    let a = ego.ax;
    let side = match intention {
        Intention::KeepLane => 0.0,
        Intention::LeftChange => 1.0,
        Intention::RightChange => -1.0,
    };
    std::array::from_fn(|i| {
        let t = (i + 1) as f64;
        let x = v * t + 0.5 * a * t * t;
        let u = t / HORIZON_LEN as f64;
        let y = side * LANE_WIDTH_M * (3.0 * u * u - 2.0 * u * u * u);
        (round2(x), round2(y))
    })
}

impl Predictor for Surrogate {
    fn capabilities(&self) -> Capabilities {
        Capabilities { mode: self.mode, max_concurrency: usize::MAX, deterministic: true }
    }

    fn predict(&self, scenario: &DrivingScenario) -> Result<Reply, TransportError> {
        let result = self.predict_result(scenario);
        Ok(Reply { raw: format_response(&result, self.mode), outcome: Ok(result), cached: false })
    }
}
