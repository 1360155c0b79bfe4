//! Independent oracles shared by the integration tests: a brute-force grid
//! search, a hand-rolled fitness, and a predictor wrapper auditing every
//! candidate against the perturbation bounds.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use trajattack::predictor::{Capabilities, Predictor, Reply, TransportError};
use trajattack::prompt::ParseError;
use trajattack::scenario::{
    Direction, DrivingScenario, EgoLane, EgoState, GroundTruth, MapInfo, Neighbor, PredictionResult, VehicleKind,
};

pub const GRID_STEPS: usize = 41;

pub fn example_scenario() -> DrivingScenario {
    let mut neighbors = BTreeMap::new();
    neighbors.insert(Direction::LeftFront, Neighbor { kind: VehicleKind::Car, speed_x: 85.43, distance: 103.0 });
    neighbors.insert(Direction::LeftBehind, Neighbor { kind: VehicleKind::Car, speed_x: 91.84, distance: 60.0 });
    DrivingScenario {
        id: "example".into(),
        map: MapInfo { lane_count: 4, ego_lane: EgoLane::Rightmost },
        ego: EgoState {
            vx: 78.52,
            vy: 2.05,
            ax: 2.20,
            ay: -2.20,
            kind: VehicleKind::Car,
            width: 2.02,
            length: 4.65,
            history: vec![
                (-41.30, -0.79),
                (-33.92, -0.71),
                (-25.71, -0.58),
                (-17.37, -0.41),
                (-8.79, -0.22),
                (0.0, 0.0),
            ],
        },
        neighbors,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attr {
    Speed,
    Distance,
}

/// Perturbable scalars in the documented order: directions in enumeration
/// order, speed before distance.
pub fn features(s: &DrivingScenario) -> Vec<(Direction, Attr)> {
    let order = [
        Direction::Front,
        Direction::Behind,
        Direction::Left,
        Direction::Right,
        Direction::LeftFront,
        Direction::LeftBehind,
        Direction::RightFront,
        Direction::RightBehind,
    ];
    order
        .into_iter()
        .filter(|d| s.neighbors.contains_key(d))
        .flat_map(|d| [(d, Attr::Speed), (d, Attr::Distance)])
        .collect()
}

pub fn value(s: &DrivingScenario, f: (Direction, Attr)) -> f64 {
    let n = &s.neighbors[&f.0];
    match f.1 {
        Attr::Speed => n.speed_x,
        Attr::Distance => n.distance,
    }
}

pub fn with_value(s: &DrivingScenario, f: (Direction, Attr), v: f64) -> DrivingScenario {
    let mut out = s.clone();
    let n = out.neighbors.get_mut(&f.0).unwrap();
    match f.1 {
        Attr::Speed => n.speed_x = v,
        Attr::Distance => n.distance = v,
    }
    out
}

/// `[s − Δ|s|, s + Δ|s|]` intersected with the physical range of the attribute.
pub fn bounds(s: f64, attr: Attr, delta: f64) -> (f64, f64) {
    let (plo, phi) = match attr {
        Attr::Speed => (0.0, 250.0),
        Attr::Distance => (0.0, 200.0),
    };
    ((s - delta * s.abs()).max(plo), (s + delta * s.abs()).min(phi))
}

pub fn displacement(p: &PredictionResult, t: &GroundTruth) -> f64 {
    let mut total = 0.0;
    for i in 0..4 {
        let dx = p.trajectory[i].0 - t.trajectory[i].0;
        let dy = p.trajectory[i].1 - t.trajectory[i].1;
        total += (dx * dx + dy * dy).sqrt();
    }
    total / 4.0
}

#[derive(Debug, Clone, Copy)]
pub struct Weights {
    pub traj: f64,
    pub int: f64,
    pub fail: f64,
}

pub const DEFAULT_WEIGHTS: Weights = Weights { traj: 1.0, int: 5.0, fail: 5.0 };

pub fn fitness(
    outcome: &Result<PredictionResult, ParseError>,
    truth: &GroundTruth,
    clean_disp: f64,
    w: Weights,
) -> f64 {
    match outcome {
        Ok(p) => w.traj * displacement(p, truth) + if p.intention == truth.intention { 0.0 } else { w.int },
        Err(_) => w.traj * clean_disp + w.fail,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub feature: usize,
    pub value: f64,
    pub fitness: f64,
}

pub struct Oracle<'a, P: Predictor> {
    pub scenario: &'a DrivingScenario,
    pub truth: &'a GroundTruth,
    pub predictor: &'a P,
    pub weights: Weights,
    pub clean_disp: f64,
    pub clean_fitness: f64,
}

impl<'a, P: Predictor> Oracle<'a, P> {
    pub fn new(scenario: &'a DrivingScenario, truth: &'a GroundTruth, predictor: &'a P, weights: Weights) -> Self {
        let clean = predictor.predict(scenario).unwrap().outcome;
        let clean_disp = clean.as_ref().map_or(0.0, |p| displacement(p, truth));
        let clean_fitness = fitness(&clean, truth, clean_disp, weights);
        Self { scenario, truth, predictor, weights, clean_disp, clean_fitness }
    }

    pub fn eval(&self, f: (Direction, Attr), v: f64) -> f64 {
        let out = self.predictor.predict(&with_value(self.scenario, f, v)).unwrap().outcome;
        fitness(&out, self.truth, self.clean_disp, self.weights)
    }

    /// Best of `GRID_STEPS` evenly spaced values per feature, never below the
    /// zero perturbation.
    pub fn grid(&self, delta: f64) -> GridPoint {
        let feats = features(self.scenario);
        let mut best = GridPoint { feature: usize::MAX, value: f64::NAN, fitness: self.clean_fitness };
        for (k, f) in feats.iter().enumerate() {
            let (lo, hi) = bounds(value(self.scenario, *f), f.1, delta);
            for i in 0..GRID_STEPS {
                let v = lo + (hi - lo) * i as f64 / (GRID_STEPS - 1) as f64;
                let fit = self.eval(*f, v);
                if fit > best.fitness {
                    best = GridPoint { feature: k, value: v, fitness: fit };
                }
            }
        }
        best
    }

    /// Refines around a grid point: ±1 grid step at ten times the resolution.
    pub fn refine(&self, at: GridPoint, delta: f64) -> f64 {
        if at.feature == usize::MAX {
            return at.fitness;
        }
        let f = features(self.scenario)[at.feature];
        let (lo, hi) = bounds(value(self.scenario, f), f.1, delta);
        let step = (hi - lo) / (GRID_STEPS - 1) as f64;
        let mut best = at.fitness;
        for i in 0..=20 {
            let v = (at.value - step + step * i as f64 / 10.0).clamp(lo, hi);
            best = best.max(self.eval(f, v));
        }
        best
    }
}

/// Wraps a predictor and checks each query against the clean scenario with
/// the same id: at most one neighbour scalar may differ, and it must lie in
/// its perturbation interval.
pub struct Auditor<P> {
    pub inner: P,
    pub delta: f64,
    clean: HashMap<String, DrivingScenario>,
    pub violations: Mutex<Vec<String>>,
    pub checked: Mutex<usize>,
}

impl<P: Predictor> Auditor<P> {
    pub fn new(inner: P, delta: f64, clean: &[DrivingScenario]) -> Self {
        Self {
            inner,
            delta,
            clean: clean.iter().map(|s| (s.id.clone(), s.clone())).collect(),
            violations: Mutex::new(Vec::new()),
            checked: Mutex::new(0),
        }
    }

    fn audit(&self, s: &DrivingScenario) -> Result<(), String> {
        let clean = self.clean.get(&s.id).ok_or("unknown scenario id")?;
        if clean.ego != s.ego || clean.map != s.map {
            return Err("ego or map changed".into());
        }
        if clean.neighbors.keys().ne(s.neighbors.keys()) {
            return Err("neighbour set changed".into());
        }
        let mut changed = 0;
        for f in features(clean) {
            let (c, v) = (value(clean, f), value(s, f));
            if c.to_bits() == v.to_bits() {
                continue;
            }
            changed += 1;
            let (lo, hi) = bounds(c, f.1, self.delta);
            let tol = 1e-9 * c.abs().max(1.0);
            let physical = match f.1 {
                Attr::Speed => (0.0..=250.0).contains(&v),
                Attr::Distance => v > 0.0 && v <= 200.0,
            };
            if !(v >= lo - tol && v <= hi + tol) || !physical {
                return Err(format!("{:?}.{:?} = {v} outside [{lo}, {hi}]", f.0, f.1));
            }
        }
        for d in clean.neighbors.keys() {
            if clean.neighbors[d].kind != s.neighbors[d].kind {
                return Err("neighbour kind changed".into());
            }
        }
        if changed > 1 {
            return Err(format!("{changed} features changed"));
        }
        Ok(())
    }
}

impl<P: Predictor> Predictor for Auditor<P> {
    fn capabilities(&self) -> Capabilities {
        self.inner.capabilities()
    }

    fn predict(&self, s: &DrivingScenario) -> Result<Reply, TransportError> {
        *self.checked.lock().unwrap() += 1;
        if let Err(e) = self.audit(s) {
            self.violations.lock().unwrap().push(format!("{}: {e}", s.id));
        }
        self.inner.predict(s)
    }
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Macro F1 in percent, counted directly from label pairs (`None` is an
/// unparseable prediction, which counts as a miss for its true class).
pub fn macro_f1(pairs: &[(u8, Option<u8>)]) -> f64 {
    let mut total = 0.0;
    for c in 0..3u8 {
        let tp = pairs.iter().filter(|(t, p)| *t == c && *p == Some(c)).count() as f64;
        let predicted = pairs.iter().filter(|(_, p)| *p == Some(c)).count() as f64;
        let actual = pairs.iter().filter(|(t, p)| *t == c && p.is_some()).count() as f64;
        let p = if predicted > 0.0 { 100.0 * tp / predicted } else { 0.0 };
        let r = if actual > 0.0 { 100.0 * tp / actual } else { 0.0 };
        total += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    total / 3.0
}
