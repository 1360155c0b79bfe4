//! Seeded synthetic corpora labelled by the surrogate predictor.
//!
//! Ordinary scenes keep every gap far from the surrogate's decision thresholds
//! so that no single-feature change within a 30 % budget alters the label.
//! Planted scenes put the left-front gap just beside the adjacent-lane gap
//! threshold, reachable within a 10 % budget.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::predictor::{Predictor, Surrogate};
use crate::scenario::{
    round2, Direction, DrivingScenario, EgoLane, EgoState, GroundTruth, Intention, MapInfo, Neighbor, VehicleKind,
    HISTORY_LEN,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub size: usize,
    /// Class shares for KL, LC, RC.
    pub mix: [f64; 3],
    /// Share of the corpus with a planted near-threshold gap. Capped by the
    /// number of KL and LC scenes.
    pub planted_fraction: f64,
    pub id_prefix: String,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { size: 100, mix: [0.4, 0.3, 0.3], planted_fraction: 0.15, id_prefix: "syn".to_string() }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.mix.iter().any(|m| !(*m >= 0.0)) || self.mix.iter().sum::<f64>() <= 0.0 {
            return Err("class mix must be non-negative with a positive sum".into());
        }
        if !(0.0..=1.0).contains(&self.planted_fraction) {
            return Err(format!("planted fraction must lie in [0, 1], got {}", self.planted_fraction));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `size` over the mix.
    pub fn class_counts(&self) -> [usize; 3] {
        let total: f64 = self.mix.iter().sum();
        let quotas = self.mix.map(|m| m / total * self.size as f64);
        let mut counts = quotas.map(|q| q.floor() as usize);
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| {
            (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b))
        });
        let short = self.size - counts.iter().sum::<usize>();
        for &i in order.iter().take(short) {
            counts[i] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub scenario: DrivingScenario,
    pub truth: GroundTruth,
    /// True for scenes built with a gap next to a decision threshold.
    pub planted: bool,
}

#[derive(Debug, Clone, Copy)]
enum Recipe {
    Plain(Intention),
    Planted(Intention),
}

fn kind<R: Rng>(rng: &mut R) -> VehicleKind {
    if rng.random_bool(0.15) {
        VehicleKind::Truck
    } else {
        VehicleKind::Car
    }
}

fn neighbor<R: Rng>(rng: &mut R, ego_vx: f64, gap: (f64, f64)) -> Neighbor {
    Neighbor {
        kind: kind(rng),
        speed_x: round2((ego_vx + rng.random_range(-15.0..15.0)).clamp(40.0, 150.0)),
        distance: round2(rng.random_range(gap.0..=gap.1)),
    }
}

fn ego_lane<R: Rng>(rng: &mut R, lanes: u32, intention: Intention) -> EgoLane {
    // a left change never starts from the leftmost lane, a right change never from the rightmost
    let (lo, hi) = match intention {
        Intention::LeftChange => (2, lanes),
        Intention::RightChange => (1, lanes - 1),
        Intention::KeepLane => (1, lanes),
    };
    match rng.random_range(lo..=hi) {
        1 => EgoLane::Leftmost,
        i if i == lanes => EgoLane::Rightmost,
        i => EgoLane::Middle(i),
    }
}

fn build<R: Rng>(rng: &mut R, id: String, recipe: Recipe) -> DrivingScenario {
    let lanes = rng.random_range(2..=4u32);
    let vx = round2(rng.random_range(70.0..130.0));
    let ax = round2(rng.random_range(-1.0..1.0));
    let ay = round2(rng.random_range(-0.5..0.5));
    let (intention, planted) = match recipe {
        Recipe::Plain(i) => (i, false),
        Recipe::Planted(i) => (i, true),
    };
    let vy = round2(match (intention, planted) {
        (Intention::KeepLane, false) => rng.random_range(-0.6..=0.6),
        (Intention::KeepLane, true) | (Intention::LeftChange, _) => rng.random_range(1.5..=3.0),
        (Intention::RightChange, _) => -rng.random_range(1.5..=3.0),
    });
    let ego_lane = ego_lane(rng, lanes, intention);

    let mut neighbors = BTreeMap::new();
    let mut maybe = |rng: &mut R, dir: Direction, p: f64, gap: (f64, f64)| {
        if rng.random_bool(p) {
            neighbors.insert(dir, neighbor(rng, vx, gap));
        }
    };
    match (intention, planted) {
        (Intention::KeepLane, false) => {
            maybe(rng, Direction::Front, 0.6, (80.0, 190.0));
            maybe(rng, Direction::Behind, 0.5, (20.0, 150.0));
            maybe(rng, Direction::LeftFront, 0.4, (20.0, 190.0));
            maybe(rng, Direction::RightBehind, 0.4, (20.0, 150.0));
        }
        (Intention::LeftChange, false) => {
            maybe(rng, Direction::Front, 0.5, (30.0, 190.0));
            maybe(rng, Direction::LeftFront, 0.5, (110.0, 190.0));
            maybe(rng, Direction::LeftBehind, 0.5, (50.0, 150.0));
            maybe(rng, Direction::Right, 0.3, (3.0, 6.0));
        }
        (Intention::RightChange, _) => {
            maybe(rng, Direction::Front, 0.5, (30.0, 190.0));
            maybe(rng, Direction::RightFront, 0.5, (110.0, 190.0));
            maybe(rng, Direction::RightBehind, 0.5, (50.0, 150.0));
            maybe(rng, Direction::Left, 0.3, (3.0, 6.0));
        }
        (Intention::KeepLane, true) => {
            maybe(rng, Direction::LeftFront, 1.0, (67.5, 69.5));
            maybe(rng, Direction::LeftBehind, 1.0, (50.0, 120.0));
        }
        (Intention::LeftChange, true) => {
            maybe(rng, Direction::LeftFront, 1.0, (70.5, 72.5));
            maybe(rng, Direction::LeftBehind, 1.0, (50.0, 120.0));
        }
    }

    let (v, a, w) = (vx / 3.6, ax, vy / 3.6);
    let history = (0..HISTORY_LEN)
        .map(|k| {
            let t = -0.4 * (HISTORY_LEN - 1 - k) as f64;
            (round2(v * t + 0.5 * a * t * t), round2(w * t))
        })
        .collect();
    let kind = kind(rng);
    let (width, length) = match kind {
        VehicleKind::Car => (round2(rng.random_range(1.7..2.1)), round2(rng.random_range(4.0..5.2))),
        VehicleKind::Truck => (2.5, round2(rng.random_range(10.0..18.0))),
    };

    DrivingScenario {
        id,
        map: MapInfo { lane_count: lanes, ego_lane },
        ego: EgoState { vx, vy, ax, ay, kind, width, length, history },
        neighbors,
    }
}

/// Generates `spec.size` valid scenarios labelled by the default surrogate,
/// so a clean surrogate run scores perfectly on the corpus.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Vec<SyntheticSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [kl, lc, rc] = spec.class_counts();
    let planted = ((spec.planted_fraction * spec.size as f64).round() as usize).min(kl + lc);
    let planted_kl = (planted * kl + (kl + lc) / 2).checked_div(kl + lc).unwrap_or(0).min(kl);
    let planted_lc = (planted - planted_kl).min(lc);
    let planted_kl = planted - planted_lc;

    let mut recipes = Vec::with_capacity(spec.size);
    recipes.extend((0..planted_kl).map(|_| Recipe::Planted(Intention::KeepLane)));
    recipes.extend((planted_kl..kl).map(|_| Recipe::Plain(Intention::KeepLane)));
    recipes.extend((0..planted_lc).map(|_| Recipe::Planted(Intention::LeftChange)));
    recipes.extend((planted_lc..lc).map(|_| Recipe::Plain(Intention::LeftChange)));
    recipes.extend((0..rc).map(|_| Recipe::Plain(Intention::RightChange)));
    recipes.shuffle(&mut rng);

    let oracle = Surrogate::default();
    recipes
        .into_iter()
        .enumerate()
        .map(|(i, recipe)| {
            let id = format!("{}-{i:04}", spec.id_prefix);
            let scenario = build(&mut rng, id, recipe);
            let reply = oracle.predict(&scenario).expect("surrogate never fails to respond");
            let prediction = reply.outcome.expect("surrogate output always parses");
            let truth = GroundTruth { intention: prediction.intention, trajectory: prediction.trajectory };
            SyntheticSample { scenario, truth, planted: matches!(recipe, Recipe::Planted(_)) }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_follow_mix() {
        let spec = SyntheticSpec::default();
        assert_eq!(spec.class_counts(), [40, 30, 30]);
        let odd = SyntheticSpec { size: 7, mix: [1.0, 1.0, 1.0], ..Default::default() };
        assert_eq!(odd.class_counts().iter().sum::<usize>(), 7);
    }

    #[test]
    fn labels_match_recipes() {
        let spec = SyntheticSpec { planted_fraction: 0.5, ..Default::default() };
        let corpus = generate_synthetic(&spec, 7);
        let mut counts = [0; 3];
        for s in &corpus {
            assert!(s.scenario.is_valid(), "{:?}", s.scenario.validate());
            counts[s.truth.intention.index()] += 1;
        }
        assert_eq!(counts, [40, 30, 30]);
        assert_eq!(corpus.iter().filter(|s| s.planted).count(), 50);
    }

    #[test]
    fn seeded() {
        let spec = SyntheticSpec::default();
        assert_eq!(generate_synthetic(&spec, 3), generate_synthetic(&spec, 3));
        assert_ne!(generate_synthetic(&spec, 3), generate_synthetic(&spec, 4));
    }
}
