//! Differential-evolution search over `(feature, delta)`.
//!
//! DE/rand/1/bin with per-individual greedy selection: a trial replaces its
//! parent only if it scores strictly higher. Fitness of survivors is cached so
//! every evaluation costs exactly one predictor query.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    AttackError, AttackMethod, AttackResult, Candidate, DeParams, Evaluator, FitnessWeights, PredictionOutcome,
};
use crate::features::Interval;
use crate::predictor::{Predictor, QueryLog};
use crate::prompt::ParseError;
use crate::scenario::{DrivingScenario, GroundTruth, PredictionResult};

pub(crate) fn uniform_in<R: Rng + ?Sized>(rng: &mut R, range: &Interval) -> f64 {
    if range.is_degenerate() {
        range.lo
    } else {
        rng.random_range(range.lo..=range.hi)
    }
}

/// Draws `n` candidates. A feature with a degenerate range is re-drawn as long
/// as some other feature can actually be perturbed.
pub fn init_population<R: Rng + ?Sized>(
    ranges: &[Interval],
    n: usize,
    rng: &mut R,
) -> Result<Vec<Candidate>, AttackError> {
    if ranges.is_empty() {
        return Err(AttackError::NoAttackSurface);
    }
    let count = ranges.len();
    let any_open = ranges.iter().any(|r| !r.is_degenerate());
    let pop = (0..n)
        .map(|_| loop {
            let k_real = rng.random_range(0.0..count as f64);
            let range = &ranges[Candidate::new(k_real, 0.0).feature_index(count)];
            if range.is_degenerate() && any_open {
                continue;
            }
            break Candidate::new(k_real, uniform_in(rng, range));
        })
        .collect();
    Ok(pop)
}

/// `x_r1 + α (x_r2 − x_r3)`, component-wise.
pub fn mutate_with(x_r1: Candidate, x_r2: Candidate, x_r3: Candidate, alpha: f64) -> Candidate {
    Candidate::new(x_r1.k_real + alpha * (x_r2.k_real - x_r3.k_real), x_r1.delta + alpha * (x_r2.delta - x_r3.delta))
}

/// Mutant for individual `i` from three distinct other individuals.
pub fn mutate<R: Rng + ?Sized>(population: &[Candidate], i: usize, alpha: f64, rng: &mut R) -> Candidate {
    assert!(population.len() >= 4, "mutation needs three individuals besides the target");
    let picks = sample(rng, population.len() - 1, 3);
    let other = |j: usize| population[if j >= i { j + 1 } else { j }];
    mutate_with(other(picks.index(0)), other(picks.index(1)), other(picks.index(2)), alpha)
}

/// Binomial crossover with explicit draws: dimension `j` comes from the
/// mutant when `draws[j] <= cr` or `j == forced`.
pub fn crossover_with(parent: Candidate, mutant: Candidate, cr: f64, draws: [f64; 2], forced: usize) -> Candidate {
    let x = parent.to_array();
    let v = mutant.to_array();
    Candidate::from_array(std::array::from_fn(|j| if draws[j] <= cr || j == forced { v[j] } else { x[j] }))
}

pub fn crossover<R: Rng + ?Sized>(parent: Candidate, mutant: Candidate, cr: f64, rng: &mut R) -> Candidate {
    // draws from (0, 1] so that CR = 0 crosses only the forced dimension and CR = 1 crosses all
    let draws = [1.0 - rng.random::<f64>(), 1.0 - rng.random::<f64>()];
    let forced = rng.random_range(0..2);
    crossover_with(parent, mutant, cr, draws, forced)
}

/// Wraps the feature coordinate modulo the feature count and resamples an
/// out-of-range delta uniformly from the decoded feature's range.
pub fn repair<R: Rng + ?Sized>(candidate: Candidate, ranges: &[Interval], rng: &mut R) -> Candidate {
    let count = ranges.len() as f64;
    let mut k_real =
        if candidate.k_real.is_finite() { candidate.k_real.rem_euclid(count) } else { rng.random_range(0.0..count) };
    if k_real >= count {
        // rem_euclid of a tiny negative value can round up to `count`
        k_real = 0.0;
    }
    let range = &ranges[Candidate::new(k_real, 0.0).feature_index(ranges.len())];
    let delta = if candidate.delta.is_finite() && range.contains(candidate.delta) {
        candidate.delta
    } else {
        uniform_in(rng, range)
    };
    Candidate::new(k_real, delta)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Runs the DE attack with a private RNG seeded from `seed`.
pub fn run_attack<P: Predictor + ?Sized>(
    scenario: &DrivingScenario,
    truth: &GroundTruth,
    predictor: &P,
    params: &DeParams,
    weights: &FitnessWeights,
    seed: u64,
) -> Result<AttackResult, AttackError> {
    run_attack_logged(scenario, truth, predictor, params, weights, seed, None)
}

/// As [`run_attack`], appending every candidate query to `log`.
pub fn run_attack_logged<P: Predictor + ?Sized>(
    scenario: &DrivingScenario,
    truth: &GroundTruth,
    predictor: &P,
    params: &DeParams,
    weights: &FitnessWeights,
    seed: u64,
    log: Option<&QueryLog>,
) -> Result<AttackResult, AttackError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eval = Evaluator::new(scenario, truth, predictor, *weights, params.budget, log)?;
    let ranges = eval.ranges.clone();

    let mut trace = Vec::with_capacity(params.generations + 1);
    let abort =
        |error, trace: &Vec<f64>, queries| AttackError::Transport { error, partial_trace: trace.clone(), queries };

    let mut population = init_population(&ranges, params.population, &mut rng)?;
    let mut fitness = Vec::with_capacity(population.len());
    let mut outcomes: Vec<Result<PredictionResult, ParseError>> = Vec::with_capacity(population.len());
    for c in &population {
        let (f, reply) = eval.evaluate(c).map_err(|e| abort(e, &trace, eval.queries))?;
        fitness.push(f);
        outcomes.push(reply.outcome);
    }
    trace.push(fitness[argmax(&fitness)]);

    for _ in 0..params.generations {
        let mut next = population.clone();
        for i in 0..population.len() {
            let mutant = mutate(&population, i, params.mutation, &mut rng);
            let trial = repair(crossover(population[i], mutant, params.crossover, &mut rng), &ranges, &mut rng);
            let (f, reply) = eval.evaluate(&trial).map_err(|e| abort(e, &trace, eval.queries))?;
            if f > fitness[i] {
                next[i] = trial;
                fitness[i] = f;
                outcomes[i] = reply.outcome;
            }
        }
        population = next;
        trace.push(fitness[argmax(&fitness)]);
    }

    let best = argmax(&fitness);
    let clean_prediction = PredictionOutcome::from_result(&eval.clean.outcome);
    let (feature, delta, best_fitness, attacked_prediction) = if fitness[best] > eval.clean_fitness {
        let p = eval.perturbation(&population[best]);
        (Some(p.feature.label()), p.delta, fitness[best], PredictionOutcome::from_result(&outcomes[best]))
    } else {
        (None, 0.0, eval.clean_fitness, clean_prediction.clone())
    };

    Ok(AttackResult {
        scenario_id: scenario.id.clone(),
        method: AttackMethod::DifferentialEvolution,
        rng_seed: seed,
        budget: params.budget,
        feature,
        delta,
        clean_fitness: eval.clean_fitness,
        best_fitness,
        trace,
        total_queries: eval.queries,
        clean_prediction,
        attacked_prediction,
    })
}
