//! Unoptimised control: i.i.d. uniform candidates at the same query budget.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::de::uniform_in;
use super::{AttackError, AttackMethod, AttackResult, Candidate, Evaluator, FitnessWeights, PredictionOutcome};
use crate::predictor::{Predictor, QueryLog};
use crate::scenario::{DrivingScenario, GroundTruth};

/// Both readings of a random-attack run over the same draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomAttackOutcome {
    /// The last draw, reported as-is with no fallback to the clean input.
    pub single_draw: AttackResult,
    /// The best of all draws, with the zero-perturbation fallback.
    pub best_of_budget: AttackResult,
}

#[allow(clippy::too_many_arguments)]
pub fn random_attack<P: Predictor + ?Sized>(
    scenario: &DrivingScenario,
    truth: &GroundTruth,
    predictor: &P,
    query_budget: usize,
    budget: f64,
    weights: &FitnessWeights,
    seed: u64,
    log: Option<&QueryLog>,
) -> Result<RandomAttackOutcome, AttackError> {
    if query_budget == 0 {
        return Err(AttackError::InvalidParams("query budget must be at least 1".into()));
    }
    if !(budget > 0.0 && budget < 1.0) {
        return Err(AttackError::InvalidParams(format!("perturbation budget must lie in (0, 1), got {budget}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator::new(scenario, truth, predictor, *weights, budget, log)?;
    let count = eval.feature_count();

    let mut trace = Vec::with_capacity(query_budget);
    let mut best: Option<(Candidate, f64, PredictionOutcome)> = None;
    let mut last = None;
    for _ in 0..query_budget {
        let k = rng.random_range(0..count);
        let c = Candidate::new(k as f64 + 0.5, uniform_in(&mut rng, &eval.ranges[k]));
        let (f, reply) = eval.evaluate(&c).map_err(|error| AttackError::Transport {
            error,
            partial_trace: trace.clone(),
            queries: eval.queries,
        })?;
        let outcome = PredictionOutcome::from_result(&reply.outcome);
        if best.as_ref().is_none_or(|(_, bf, _)| f > *bf) {
            best = Some((c, f, outcome.clone()));
        }
        trace.push(best.as_ref().map_or(f, |b| b.1));
        last = Some((c, f, outcome));
    }

    let clean_prediction = PredictionOutcome::from_result(&eval.clean.outcome);
    let result = |method, feature, delta, best_fitness, attacked_prediction, trace: Vec<f64>| AttackResult {
        scenario_id: scenario.id.clone(),
        method,
        rng_seed: seed,
        budget,
        feature,
        delta,
        clean_fitness: eval.clean_fitness,
        best_fitness,
        trace,
        total_queries: eval.queries,
        clean_prediction: clean_prediction.clone(),
        attacked_prediction,
    };

    let (lc, lf, lo) = last.expect("query budget is at least 1");
    let lp = eval.perturbation(&lc);
    let single_draw = result(AttackMethod::RandomSingleDraw, Some(lp.feature.label()), lp.delta, lf, lo, vec![lf]);

    let (bc, bf, bo) = best.expect("query budget is at least 1");
    let best_of_budget = if bf > eval.clean_fitness {
        let bp = eval.perturbation(&bc);
        result(AttackMethod::RandomBestOfBudget, Some(bp.feature.label()), bp.delta, bf, bo, trace)
    } else {
        let trace = trace.into_iter().map(|t| t.max(eval.clean_fitness)).collect();
        result(AttackMethod::RandomBestOfBudget, None, 0.0, eval.clean_fitness, clean_prediction.clone(), trace)
    };

    Ok(RandomAttackOutcome { single_draw, best_of_budget })
}
