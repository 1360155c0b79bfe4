//! One-feature perturbation attacks.
//!
//! A candidate is a point `(k_real, delta)`: `floor(k_real)` selects a feature
//! from the scenario's ordered feature list and `delta` is added to it. The
//! differential-evolution search lives in [`de`], the unoptimised control in
//! [`random`].

pub mod de;
pub mod random;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use de::{crossover, crossover_with, init_population, mutate, mutate_with, repair, run_attack, run_attack_logged};
pub use random::{random_attack, RandomAttackOutcome};

use crate::features::{apply, delta_bounds, enumerate_features, FeatureId, Interval, Perturbation};
use crate::predictor::{Predictor, QueryLog, QueryRecord, Reply, TransportError};
use crate::prompt::ParseError;
use crate::scenario::{DrivingScenario, GroundTruth, PredictionResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeParams {
    pub population: usize,
    /// Mutation factor α.
    pub mutation: f64,
    /// Crossover rate CR.
    pub crossover: f64,
    pub generations: usize,
    /// Relative perturbation budget Δ.
    pub budget: f64,
}

impl Default for DeParams {
    fn default() -> Self {
        Self { population: 5, mutation: 0.5, crossover: 0.9, generations: 10, budget: 0.1 }
    }
}

impl DeParams {
    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |m: String| Err(AttackError::InvalidParams(m));
        if self.population < 4 {
            return bad(format!("population must be at least 4, got {}", self.population));
        }
        if !(0.0..=2.0).contains(&self.mutation) {
            return bad(format!("mutation factor must lie in [0, 2], got {}", self.mutation));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return bad(format!("crossover rate must lie in [0, 1], got {}", self.crossover));
        }
        if !(self.budget > 0.0 && self.budget < 1.0) {
            return bad(format!("perturbation budget must lie in (0, 1), got {}", self.budget));
        }
        Ok(())
    }

    /// Upper bound on candidate evaluations: initial population plus one trial
    /// per individual per generation.
    pub fn query_budget(&self) -> usize {
        self.population * (self.generations + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitnessWeights {
    /// Weight on the mean displacement over the four horizons, per meter.
    pub trajectory: f64,
    /// Weight on an intention mismatch.
    pub intention: f64,
    /// Score added when the response cannot be parsed.
    pub parse_failure: f64,
}

impl Default for FitnessWeights {
    fn default() -> Self {
        Self { trajectory: 1.0, intention: 5.0, parse_failure: 5.0 }
    }
}

impl FitnessWeights {
    pub fn validate(&self) -> Result<(), AttackError> {
        if self.trajectory < 0.0 || self.intention < 0.0 || self.parse_failure < 0.0 {
            return Err(AttackError::InvalidParams("fitness weights must be non-negative".into()));
        }
        if self.trajectory == 0.0 && self.intention == 0.0 {
            return Err(AttackError::InvalidParams("trajectory and intention weights cannot both be zero".into()));
        }
        Ok(())
    }
}

/// A DE individual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub k_real: f64,
    pub delta: f64,
}

impl Candidate {
    pub fn new(k_real: f64, delta: f64) -> Self {
        Self { k_real, delta }
    }

    /// Feature index; assumes `k_real` has been wrapped into `[0, count)`.
    pub fn feature_index(&self, count: usize) -> usize {
        (self.k_real.floor().max(0.0) as usize).min(count.saturating_sub(1))
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.k_real, self.delta]
    }

    pub fn from_array(a: [f64; 2]) -> Self {
        Self { k_real: a[0], delta: a[1] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackMethod {
    DifferentialEvolution,
    RandomSingleDraw,
    RandomBestOfBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionOutcome {
    Parsed(PredictionResult),
    Failed(ParseError),
}

impl PredictionOutcome {
    pub fn from_result(r: &Result<PredictionResult, ParseError>) -> Self {
        match r {
            Ok(p) => PredictionOutcome::Parsed(p.clone()),
            Err(e) => PredictionOutcome::Failed(e.clone()),
        }
    }

    pub fn prediction(&self) -> Option<&PredictionResult> {
        match self {
            PredictionOutcome::Parsed(p) => Some(p),
            PredictionOutcome::Failed(_) => None,
        }
    }
}

/// Outcome of one attack run on one scenario.
///
/// For DE and best-of-budget runs `best_fitness >= clean_fitness`: when no
/// candidate beats the clean prediction the zero perturbation is reported
/// (`feature` is `None`, `delta` is 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub scenario_id: String,
    pub method: AttackMethod,
    pub rng_seed: u64,
    pub budget: f64,
    /// Targeted feature as `direction.attribute`.
    pub feature: Option<String>,
    pub delta: f64,
    pub clean_fitness: f64,
    pub best_fitness: f64,
    /// Best fitness after initialisation and after every generation.
    pub trace: Vec<f64>,
    /// Predictor queries spent on candidates, excluding cache hits and the
    /// clean reference query.
    pub total_queries: usize,
    pub clean_prediction: PredictionOutcome,
    pub attacked_prediction: PredictionOutcome,
}

impl AttackResult {
    /// Improvement over the clean prediction in fitness units.
    pub fn impact(&self) -> f64 {
        self.best_fitness - self.clean_fitness
    }

    /// True when the attacked intention differs from the clean one, or either
    /// response was unparseable.
    pub fn intention_flipped(&self) -> bool {
        match (self.clean_prediction.prediction(), self.attacked_prediction.prediction()) {
            (Some(c), Some(a)) => c.intention != a.intention,
            _ => true,
        }
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("scenario has no surrounding vehicles to perturb")]
    NoAttackSurface,
    #[error("invalid attack parameters: {0}")]
    InvalidParams(String),
    #[error("predictor transport failure after {queries} queries: {error}")]
    Transport { error: TransportError, partial_trace: Vec<f64>, queries: usize },
}

/// Mean Euclidean distance between predicted and true waypoints.
pub fn mean_displacement(prediction: &PredictionResult, truth: &GroundTruth) -> f64 {
    prediction
        .trajectory
        .iter()
        .zip(&truth.trajectory)
        .map(|(p, t)| ((p.0 - t.0).powi(2) + (p.1 - t.1).powi(2)).sqrt())
        .sum::<f64>()
        / truth.trajectory.len() as f64
}

/// Scores one response against the ground truth. An unparseable response
/// keeps the clean displacement term and adds the parse-failure penalty.
pub fn score(
    outcome: &Result<PredictionResult, ParseError>,
    truth: &GroundTruth,
    weights: &FitnessWeights,
    clean_displacement: f64,
) -> f64 {
    match outcome {
        Ok(p) => {
            let flip = if p.intention != truth.intention { 1.0 } else { 0.0 };
            weights.trajectory * mean_displacement(p, truth) + weights.intention * flip
        }
        Err(_) => weights.trajectory * clean_displacement + weights.parse_failure,
    }
}

/// Shared state of one attack run: feature list, admissible delta ranges,
/// the clean reference and query accounting.
pub(crate) struct Evaluator<'a, P: ?Sized> {
    pub scenario: &'a DrivingScenario,
    pub truth: &'a GroundTruth,
    pub predictor: &'a P,
    pub weights: FitnessWeights,
    pub budget: f64,
    pub features: Vec<FeatureId>,
    pub ranges: Vec<Interval>,
    pub clean: Reply,
    pub clean_displacement: f64,
    pub clean_fitness: f64,
    pub queries: usize,
    pub log: Option<&'a QueryLog>,
}

impl<'a, P: Predictor + ?Sized> Evaluator<'a, P> {
    pub fn new(
        scenario: &'a DrivingScenario,
        truth: &'a GroundTruth,
        predictor: &'a P,
        weights: FitnessWeights,
        budget: f64,
        log: Option<&'a QueryLog>,
    ) -> Result<Self, AttackError> {
        weights.validate()?;
        let features = enumerate_features(scenario);
        if features.is_empty() {
            return Err(AttackError::NoAttackSurface);
        }
        let ranges = features
            .iter()
            .map(|f| delta_bounds(scenario, f, budget))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| AttackError::InvalidParams(e.to_string()))?;
        // the clean query is accounted separately from the attack budget
        let clean = predictor.predict(scenario).map_err(|error| AttackError::Transport {
            error,
            partial_trace: Vec::new(),
            queries: 0,
        })?;
        let clean_displacement = clean.outcome.as_ref().map_or(0.0, |p| mean_displacement(p, truth));
        let clean_fitness = score(&clean.outcome, truth, &weights, clean_displacement);
        Ok(Self {
            scenario,
            truth,
            predictor,
            weights,
            budget,
            features,
            ranges,
            clean,
            clean_displacement,
            clean_fitness,
            queries: 0,
            log,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn perturbation(&self, c: &Candidate) -> Perturbation {
        Perturbation { feature: self.features[c.feature_index(self.features.len())], delta: c.delta }
    }

    /// One predictor query for a repaired candidate.
    pub fn evaluate(&mut self, c: &Candidate) -> Result<(f64, Reply), TransportError> {
        let perturbed = apply(self.scenario, &self.perturbation(c), self.budget)
            .expect("repaired candidates lie inside their feature bounds");
        let started = Instant::now();
        let reply = self.predictor.predict(&perturbed)?;
        // cache hits cost nothing against the budget
        if !reply.cached {
            self.queries += 1;
        }
        if let Some(log) = self.log {
            let mode = self.predictor.capabilities().mode;
            log.append(QueryRecord::new(&perturbed, mode, &reply, started.elapsed()));
        }
        let f = score(&reply.outcome, self.truth, &self.weights, self.clean_displacement);
        Ok((f, reply))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Intention;

    fn truth() -> GroundTruth {
        GroundTruth {
            intention: Intention::LeftChange,
            trajectory: [(10.0, 0.0), (20.0, 0.0), (30.0, 0.0), (40.0, 0.0)],
        }
    }

    fn pred(intention: Intention, offsets: [f64; 4]) -> PredictionResult {
        let t = truth().trajectory;
        PredictionResult {
            intention,
            trajectory: std::array::from_fn(|i| (t[i].0 + offsets[i], t[i].1)),
            thought: None,
        }
    }

    #[test]
    fn fitness_examples() {
        let w = FitnessWeights::default();
        assert_eq!(score(&Ok(pred(Intention::LeftChange, [0.0; 4])), &truth(), &w, 0.0), 0.0);
        assert_eq!(score(&Ok(pred(Intention::KeepLane, [0.0; 4])), &truth(), &w, 0.0), 5.0);
        let f = score(&Ok(pred(Intention::LeftChange, [0.1, 0.2, 0.3, 0.4])), &truth(), &w, 0.0);
        assert!((f - 0.25).abs() < 1e-12);
        let failed = score(&Err(ParseError::MissingIntention), &truth(), &w, 0.7);
        assert!((failed - 5.7).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        assert!(DeParams::default().validate().is_ok());
        assert_eq!(DeParams::default().query_budget(), 55);
        for p in [
            DeParams { population: 3, ..Default::default() },
            DeParams { mutation: 2.5, ..Default::default() },
            DeParams { crossover: -0.1, ..Default::default() },
            DeParams { budget: 1.0, ..Default::default() },
        ] {
            assert!(matches!(p.validate(), Err(AttackError::InvalidParams(_))));
        }
        let w = FitnessWeights { trajectory: 0.0, intention: 0.0, parse_failure: 1.0 };
        assert!(w.validate().is_err());
    }

    #[test]
    fn decode_clamps_index() {
        assert_eq!(Candidate::new(3.999, 0.0).feature_index(4), 3);
        assert_eq!(Candidate::new(0.0, 0.0).feature_index(4), 0);
    }
}
