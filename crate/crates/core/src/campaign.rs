//! Corpus-level campaigns: clean evaluation, DE attacks, random baselines and
//! report files.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    random_attack, run_attack_logged, AttackError, AttackResult, DeParams, FitnessWeights, PredictionOutcome,
};
use crate::ingest::read_corpus;
use crate::metrics::{
    intention_report, render_tables, ConditionMetrics, ConfusionMatrix, IntentionDegradation, PositionDegradation,
    SquaredErrorSums,
};
use crate::predictor::{Cached, EndpointConfig, Predictor, QueryLog, RemotePredictor, Surrogate, SurrogateParams};
use crate::prompt::PromptMode;
use crate::scenario::{CorpusEntry, DrivingScenario, GroundTruth};
use crate::util::{derive_seed, sha256_hex};
use crate::vuln::{aggregate, emit_to_path, FeatureVulnerability, VulnFormat};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    #[default]
    Surrogate,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMode {
    /// The last random draw, no fallback.
    #[default]
    Single,
    /// Best of the DE-equal query budget.
    Best,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub predictor: PredictorKind,
    pub endpoint: EndpointConfig,
    pub surrogate: SurrogateParams,
    pub de: DeParams,
    pub weights: FitnessWeights,
    /// Master seed; required.
    pub seed: Option<u64>,
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub mode: PromptMode,
    /// Budget sweep. Empty means the single budget in `de.budget`.
    pub deltas: Vec<f64>,
    pub workers: usize,
    pub baseline: BaselineMode,
    /// Share of scenarios allowed to fail in transport before the run is
    /// reported as an endpoint failure.
    pub max_failure_rate: f64,
    /// Also write every predictor query to `queries.jsonl` (contains timings,
    /// so it is not byte-reproducible).
    pub query_log: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            predictor: PredictorKind::Surrogate,
            endpoint: EndpointConfig::default(),
            surrogate: SurrogateParams::default(),
            de: DeParams::default(),
            weights: FitnessWeights::default(),
            seed: None,
            corpus: None,
            out: None,
            mode: PromptMode::Plain,
            deltas: Vec::new(),
            workers: 1,
            baseline: BaselineMode::Single,
            max_failure_rate: 0.1,
            query_log: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("endpoint failure: {0}")]
    Endpoint(String),
}

impl CampaignError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CampaignError::Config(_) => 1,
            CampaignError::Data(_) => 2,
            CampaignError::Endpoint(_) => 3,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CampaignError {
    CampaignError::Data(e.to_string())
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = fs::read_to_string(path).map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))
    }

    pub fn budgets(&self) -> Vec<f64> {
        if self.deltas.is_empty() {
            vec![self.de.budget]
        } else {
            self.deltas.clone()
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let cfg = |m: String| CampaignError::Config(m);
        if self.seed.is_none() {
            return Err(cfg("a master seed is required".into()));
        }
        if self.workers == 0 {
            return Err(cfg("workers must be at least 1".into()));
        }
        self.de.validate().map_err(|e| cfg(e.to_string()))?;
        self.weights.validate().map_err(|e| cfg(e.to_string()))?;
        for d in self.budgets() {
            DeParams { budget: d, ..self.de }.validate().map_err(|e| cfg(e.to_string()))?;
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(cfg("max_failure_rate must lie in [0, 1]".into()));
        }
        if self.predictor == PredictorKind::Remote {
            self.endpoint.validate().map_err(cfg)?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of this configuration, with the corpus
    /// and output paths left out (the corpus is hashed by content instead).
    pub fn hash(&self) -> String {
        let portable = CampaignConfig { corpus: None, out: None, ..self.clone() };
        sha256_hex(serde_json::to_string(&portable).expect("config serializes"))
    }

    pub fn build_predictor(&self) -> Result<Box<dyn Predictor>, CampaignError> {
        match self.predictor {
            PredictorKind::Surrogate => {
                let s = Surrogate::new(self.surrogate).with_mode(self.mode);
                Ok(Box::new(Cached::new(s).map_err(|e| CampaignError::Config(e.to_string()))?))
            }
            PredictorKind::Remote => {
                let remote = RemotePredictor::new(self.endpoint.clone(), self.mode).map_err(CampaignError::Config)?;
                if remote.capabilities().deterministic {
                    Ok(Box::new(Cached::new(remote).map_err(|e| CampaignError::Config(e.to_string()))?))
                } else {
                    Ok(Box::new(remote))
                }
            }
        }
    }
}

/// Per-condition metrics with the change relative to the clean condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionDelta {
    pub label: String,
    pub position: Option<PositionDegradation>,
    pub intention: Option<IntentionDegradation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub command: String,
    pub budget: Option<f64>,
    pub scenarios: usize,
    /// Scenarios dropped after a transport failure.
    pub transport_failures: usize,
    /// Scenarios with no neighbour to perturb; scored with their clean prediction.
    pub no_attack_surface: usize,
    pub total_queries: usize,
    pub conditions: Vec<ConditionMetrics>,
    pub degradation: Vec<ConditionDelta>,
    pub vulnerability: Vec<FeatureVulnerability>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub corpus_hash: String,
    pub budgets: Vec<f64>,
    pub files: Vec<String>,
}

/// Loaded corpus with every entry carrying a ground truth.
pub struct Corpus {
    pub entries: Vec<(DrivingScenario, GroundTruth)>,
    pub hash: String,
}

pub fn load_labelled_corpus(path: &Path) -> Result<Corpus, CampaignError> {
    let bytes = fs::read(path).map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?;
    let entries = read_corpus(BufReader::new(bytes.as_slice())).map_err(data_err)?;
    if entries.is_empty() {
        return Err(CampaignError::Data(format!("{}: corpus is empty", path.display())));
    }
    let mut out = Vec::with_capacity(entries.len());
    for CorpusEntry { scenario, truth } in entries {
        let truth = truth.ok_or_else(|| {
            CampaignError::Config(format!("scenario {:?} has no ground truth; evaluation needs labels", scenario.id))
        })?;
        out.push((scenario, truth));
    }
    Ok(Corpus { entries: out, hash: sha256_hex(&bytes) })
}

fn condition(label: &str, rows: &[(&GroundTruth, &PredictionOutcome)]) -> ConditionMetrics {
    let mut sums = SquaredErrorSums::default();
    let mut confusion = ConfusionMatrix::default();
    for (truth, outcome) in rows {
        let p = outcome.prediction();
        if let Some(p) = p {
            sums.add(p, truth);
        }
        confusion.add(truth.intention, p.map(|p| p.intention));
    }
    ConditionMetrics {
        label: label.to_string(),
        position: sums.finish().ok(),
        intention: intention_report(&confusion).ok(),
        confusion,
    }
}

fn deltas(conditions: &[ConditionMetrics]) -> Vec<ConditionDelta> {
    let Some(clean) = conditions.first() else { return Vec::new() };
    conditions[1..]
        .iter()
        .map(|c| ConditionDelta {
            label: c.label.clone(),
            position: clean.position.as_ref().zip(c.position.as_ref()).map(|(a, b)| a.degradation(b)),
            intention: clean.intention.as_ref().zip(c.intention.as_ref()).map(|(a, b)| a.degradation(b)),
        })
        .collect()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CampaignError> {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CampaignError::Config(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CampaignError> {
    fs::write(path, bytes).map_err(|e| data_err(format!("{}: {e}", path.display())))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CampaignError> {
    let file = fs::File::create(path).map_err(|e| data_err(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(data_err)?;
        w.write_all(b"\n").map_err(data_err)?;
    }
    w.flush().map_err(data_err)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CampaignError> {
    let mut text = serde_json::to_string_pretty(value).map_err(data_err)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn out_dir(config: &CampaignConfig) -> Result<PathBuf, CampaignError> {
    let dir = config.out.clone().ok_or_else(|| CampaignError::Config("an output directory is required".into()))?;
    fs::create_dir_all(&dir).map_err(|e| CampaignError::Config(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

fn corpus_path(config: &CampaignConfig) -> Result<&Path, CampaignError> {
    config.corpus.as_deref().ok_or_else(|| CampaignError::Config("a corpus path is required".into()))
}

fn check_failures(failures: usize, total: usize, limit: f64) -> Result<(), CampaignError> {
    if total > 0 && failures as f64 / total as f64 > limit {
        return Err(CampaignError::Endpoint(format!(
            "{failures} of {total} scenarios failed in transport (allowed share {limit})"
        )));
    }
    Ok(())
}

/// Result of one campaign command.
#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub reports: Vec<CampaignReport>,
    pub out_dir: PathBuf,
}

/// Clean run of the predictor over the corpus.
pub fn run_eval(config: &CampaignConfig) -> Result<CampaignOutcome, CampaignError> {
    config.validate()?;
    let corpus = load_labelled_corpus(corpus_path(config)?)?;
    let predictor = config.build_predictor()?;
    let dir = out_dir(config)?;

    let replies: Vec<_> = pool(config.workers)?.install(|| {
        corpus
            .entries
            .par_iter()
            .map(|(s, _)| predictor.predict(s).map(|r| PredictionOutcome::from_result(&r.outcome)))
            .collect()
    });
    let mut rows = Vec::new();
    let mut failures = 0;
    let mut predictions = Vec::new();
    for ((s, truth), reply) in corpus.entries.iter().zip(&replies) {
        match reply {
            Ok(outcome) => {
                rows.push((truth, outcome));
                predictions.push(serde_json::json!({"scenario_id": s.id, "prediction": outcome}));
            }
            Err(e) => {
                eprintln!("scenario {}: {e}", s.id);
                failures += 1;
            }
        }
    }
    let conditions = vec![condition("No attack", &rows)];
    let report = CampaignReport {
        command: "eval".into(),
        budget: None,
        scenarios: corpus.entries.len(),
        transport_failures: failures,
        no_attack_surface: 0,
        total_queries: rows.len(),
        degradation: Vec::new(),
        vulnerability: Vec::new(),
        conditions,
    };
    write_jsonl(&dir.join("predictions.jsonl"), &predictions)?;
    write_json(&dir.join("report.json"), &report)?;
    write_file(&dir.join("report.txt"), render_tables(&report.conditions).as_bytes())?;
    write_manifest(&dir, config, "eval", &corpus.hash, &["predictions.jsonl", "report.json", "report.txt"])?;
    check_failures(failures, corpus.entries.len(), config.max_failure_rate)?;
    Ok(CampaignOutcome { reports: vec![report], out_dir: dir })
}

fn write_manifest(
    dir: &Path,
    config: &CampaignConfig,
    command: &str,
    corpus_hash: &str,
    files: &[&str],
) -> Result<(), CampaignError> {
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: TOOL_VERSION.to_string(),
        command: command.to_string(),
        config_hash: config.hash(),
        seed: config.seed.expect("validated"),
        corpus_hash: corpus_hash.to_string(),
        budgets: config.budgets(),
        files: files.iter().map(|f| f.to_string()).collect(),
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

enum Run {
    Done(Box<AttackResult>),
    Baseline(Box<AttackResult>, Box<AttackResult>),
    NoSurface(PredictionOutcome),
    Failed(String),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    De,
    Random,
}

fn attack_one(
    kind: Kind,
    config: &CampaignConfig,
    predictor: &dyn Predictor,
    scenario: &DrivingScenario,
    truth: &GroundTruth,
    budget: f64,
    log: Option<&QueryLog>,
) -> Run {
    let seed = derive_seed(config.seed.expect("validated"), &scenario.id);
    let params = DeParams { budget, ..config.de };
    let outcome = match kind {
        Kind::De => run_attack_logged(scenario, truth, predictor, &params, &config.weights, seed, log)
            .map(|r| Run::Done(Box::new(r))),
        Kind::Random => {
            random_attack(scenario, truth, predictor, params.query_budget(), budget, &config.weights, seed, log)
                .map(|r| Run::Baseline(Box::new(r.single_draw), Box::new(r.best_of_budget)))
        }
    };
    match outcome {
        Ok(run) => run,
        Err(AttackError::NoAttackSurface) => match predictor.predict(scenario) {
            Ok(reply) => Run::NoSurface(PredictionOutcome::from_result(&reply.outcome)),
            Err(e) => Run::Failed(e.to_string()),
        },
        Err(e) => Run::Failed(e.to_string()),
    }
}

fn budget_dir(dir: &Path, budget: f64, sweep: bool) -> Result<PathBuf, CampaignError> {
    if !sweep {
        return Ok(dir.to_path_buf());
    }
    let sub = dir.join(format!("delta-{budget}"));
    fs::create_dir_all(&sub).map_err(|e| data_err(format!("{}: {e}", sub.display())))?;
    Ok(sub)
}

fn run_campaign(config: &CampaignConfig, kind: Kind) -> Result<CampaignOutcome, CampaignError> {
    config.validate()?;
    let corpus = load_labelled_corpus(corpus_path(config)?)?;
    let predictor = config.build_predictor()?;
    let dir = out_dir(config)?;
    let pool = pool(config.workers)?;
    let budgets = config.budgets();
    let sweep = budgets.len() > 1;
    let command = match kind {
        Kind::De => "attack",
        Kind::Random => "baseline",
    };

    let mut reports = Vec::new();
    let mut worst_failures = 0;
    for &budget in &budgets {
        let log = config.query_log.then(QueryLog::new);
        let runs: Vec<Run> = pool.install(|| {
            corpus
                .entries
                .par_iter()
                .map(|(s, t)| attack_one(kind, config, predictor.as_ref(), s, t, budget, log.as_ref()))
                .collect()
        });

        let mut clean_rows = Vec::new();
        let mut attacked_rows = Vec::new();
        let mut extra_rows = Vec::new();
        let mut results = Vec::new();
        let mut failures = 0;
        let mut no_surface = 0;
        let mut total_queries = 0;
        for ((s, truth), run) in corpus.entries.iter().zip(&runs) {
            match run {
                Run::Done(r) => {
                    clean_rows.push((truth, &r.clean_prediction));
                    attacked_rows.push((truth, &r.attacked_prediction));
                    total_queries += r.total_queries;
                    results.push(r.as_ref());
                }
                Run::Baseline(single, best) => {
                    clean_rows.push((truth, &single.clean_prediction));
                    attacked_rows.push((truth, &single.attacked_prediction));
                    extra_rows.push((truth, &best.attacked_prediction));
                    total_queries += single.total_queries;
                    results.push(match config.baseline {
                        BaselineMode::Single => single.as_ref(),
                        BaselineMode::Best => best.as_ref(),
                    });
                }
                Run::NoSurface(p) => {
                    no_surface += 1;
                    clean_rows.push((truth, p));
                    attacked_rows.push((truth, p));
                    extra_rows.push((truth, p));
                }
                Run::Failed(e) => {
                    eprintln!("scenario {}: {e}", s.id);
                    failures += 1;
                }
            }
        }

        let mut conditions = vec![condition("No attack", &clean_rows)];
        match kind {
            Kind::De => conditions.push(condition("One-feature DE attack", &attacked_rows)),
            Kind::Random => {
                conditions.push(condition("Random (single draw)", &attacked_rows));
                conditions.push(condition("Random (best of budget)", &extra_rows));
            }
        }
        let owned: Vec<AttackResult> = results.iter().map(|r| (*r).clone()).collect();
        let vulnerability = if owned.is_empty() { Vec::new() } else { aggregate(&owned).unwrap_or_default() };
        let report = CampaignReport {
            command: command.into(),
            budget: Some(budget),
            scenarios: corpus.entries.len(),
            transport_failures: failures,
            no_attack_surface: no_surface,
            total_queries,
            degradation: deltas(&conditions),
            vulnerability,
            conditions,
        };

        let sub = budget_dir(&dir, budget, sweep)?;
        let mut files = vec!["attack_results.jsonl", "report.json", "report.txt"];
        write_jsonl(&sub.join("attack_results.jsonl"), &owned)?;
        write_json(&sub.join("report.json"), &report)?;
        write_file(&sub.join("report.txt"), render_tables(&report.conditions).as_bytes())?;
        if !report.vulnerability.is_empty() {
            emit_to_path(&report.vulnerability, VulnFormat::Csv, &sub.join("vulnerability.csv")).map_err(data_err)?;
            files.push("vulnerability.csv");
        }
        if let Some(log) = &log {
            write_jsonl(&sub.join("queries.jsonl"), &log.snapshot())?;
            files.push("queries.jsonl");
        }
        write_manifest(&sub, &budget_config(config, budget, sweep), command, &corpus.hash, &files)?;
        worst_failures = worst_failures.max(failures);
        reports.push(report);
    }

    if sweep {
        write_file(&dir.join("sweep_report.txt"), render_sweep(&reports).as_bytes())?;
        write_json(&dir.join("sweep_report.json"), &reports)?;
        write_manifest(&dir, config, command, &corpus.hash, &["sweep_report.txt", "sweep_report.json"])?;
    }
    check_failures(worst_failures, corpus.entries.len(), config.max_failure_rate)?;
    Ok(CampaignOutcome { reports, out_dir: dir })
}

/// The configuration one budget of a sweep actually ran with.
fn budget_config(config: &CampaignConfig, budget: f64, sweep: bool) -> CampaignConfig {
    if !sweep {
        return config.clone();
    }
    CampaignConfig { de: DeParams { budget, ..config.de }, deltas: vec![budget], ..config.clone() }
}

/// One row group per budget, preceded by the clean condition.
pub fn render_sweep(reports: &[CampaignReport]) -> String {
    let mut rows: Vec<ConditionMetrics> = Vec::new();
    if let Some(first) = reports.first().and_then(|r| r.conditions.first()) {
        rows.push(first.clone());
    }
    for r in reports {
        if let (Some(budget), Some(c)) = (r.budget, r.conditions.get(1)) {
            rows.push(ConditionMetrics { label: format!("{budget}"), ..c.clone() });
        }
    }
    render_tables(&rows)
}

pub fn run_attack_campaign(config: &CampaignConfig) -> Result<CampaignOutcome, CampaignError> {
    run_campaign(config, Kind::De)
}

pub fn run_baseline_campaign(config: &CampaignConfig) -> Result<CampaignOutcome, CampaignError> {
    run_campaign(config, Kind::Random)
}

/// Reads attack results written by earlier campaigns.
pub fn read_results(path: &Path) -> Result<Vec<AttackResult>, CampaignError> {
    let text = fs::read_to_string(path).map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| data_err(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// Merges the attack results of several campaign outputs into one
/// vulnerability report. Each input is a results file or a directory holding
/// `attack_results.jsonl`.
pub fn merge_reports(
    inputs: &[PathBuf],
    out: &Path,
    format: VulnFormat,
) -> Result<Vec<FeatureVulnerability>, CampaignError> {
    if inputs.is_empty() {
        return Err(CampaignError::Config("no campaign outputs given".into()));
    }
    let mut all = Vec::new();
    for input in inputs {
        let path = if input.is_dir() { input.join("attack_results.jsonl") } else { input.clone() };
        all.extend(read_results(&path)?);
    }
    let vulns = aggregate(&all).map_err(data_err)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| data_err(format!("{}: {e}", parent.display())))?;
    }
    emit_to_path(&vulns, format, out).map_err(data_err)?;
    Ok(vulns)
}
