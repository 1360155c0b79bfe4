use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use trajattack::campaign::{
    merge_reports, run_attack_campaign, run_baseline_campaign, run_eval, BaselineMode, CampaignConfig, CampaignError,
    CampaignOutcome, PredictorKind,
};
use trajattack::ingest::{
    extract_scenarios, generate_synthetic, load_tracks, write_corpus, AnchorMode, ExtractionConfig, LaneConvention,
    SyntheticSpec,
};
use trajattack::metrics::render_tables;
use trajattack::prompt::PromptMode;
use trajattack::scenario::CorpusEntry;
use trajattack::vuln::VulnFormat;

#[derive(Parser)]
#[command(name = "trajattack", version, about = "One-feature black-box attacks on trajectory and intention predictors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score the predictor on clean scenarios.
    Eval(CampaignArgs),
    /// Run the differential-evolution attack on every scenario.
    Attack(CampaignArgs),
    /// Run the random-perturbation baseline at the DE query budget.
    Baseline {
        #[command(flatten)]
        campaign: CampaignArgs,
        /// Which random result feeds the vulnerability report and results file.
        #[arg(long, value_enum)]
        mode: Option<BaselineArg>,
    },
    /// Generate a seeded synthetic corpus labelled by the surrogate.
    Gen(GenArgs),
    /// Extract scenarios from highD-style track CSVs.
    Extract(ExtractArgs),
    /// Merge attack results of several campaigns into one vulnerability report.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PredictorArg {
    Surrogate,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineArg {
    Single,
    Best,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum LaneArg {
    LeftDecreasing,
    LeftIncreasing,
    ByTravelDirection,
}

#[derive(Args)]
struct CampaignArgs {
    /// JSON campaign configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Perturbation budget; repeat for a sweep.
    #[arg(long = "delta")]
    deltas: Vec<f64>,
    #[arg(long)]
    pop: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    cr: Option<f64>,
    #[arg(long)]
    gens: Option<usize>,
    #[arg(long, value_enum)]
    predictor: Option<PredictorArg>,
    /// Chat-completion base URL.
    #[arg(long)]
    endpoint: Option<String>,
    /// Use the chain-of-thought prompt and response grammar.
    #[arg(long)]
    cot: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Write every predictor query to queries.jsonl.
    #[arg(long)]
    query_log: bool,
}

impl CampaignArgs {
    fn resolve(&self) -> Result<CampaignConfig, CampaignError> {
        let mut c = match &self.config {
            Some(path) => CampaignConfig::load(path)?,
            None => CampaignConfig::default(),
        };
        c.endpoint = c.endpoint.with_env();
        if let Some(v) = &self.corpus {
            c.corpus = Some(v.clone());
        }
        if let Some(v) = &self.out {
            c.out = Some(v.clone());
        }
        if let Some(v) = self.seed {
            c.seed = Some(v);
        }
        if !self.deltas.is_empty() {
            c.deltas = self.deltas.clone();
            if let [single] = self.deltas[..] {
                c.de.budget = single;
                c.deltas.clear();
            }
        }
        if let Some(v) = self.pop {
            c.de.population = v;
        }
        if let Some(v) = self.alpha {
            c.de.mutation = v;
        }
        if let Some(v) = self.cr {
            c.de.crossover = v;
        }
        if let Some(v) = self.gens {
            c.de.generations = v;
        }
        if let Some(v) = self.predictor {
            c.predictor = match v {
                PredictorArg::Surrogate => PredictorKind::Surrogate,
                PredictorArg::Remote => PredictorKind::Remote,
            };
        }
        if let Some(v) = &self.endpoint {
            c.endpoint.base_url = v.clone();
        }
        if self.cot {
            c.mode = PromptMode::Cot;
        }
        if let Some(v) = self.workers {
            c.workers = v;
        }
        if self.query_log {
            c.query_log = true;
        }
        Ok(c)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    size: usize,
    /// Share of scenes with a planted near-threshold gap.
    #[arg(long, default_value_t = 0.15)]
    planted: f64,
    /// Class shares KL,LC,RC.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.4, 0.3, 0.3])]
    mix: Vec<f64>,
    #[arg(long, default_value = "syn")]
    prefix: String,
    /// Output `.jsonl` file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    /// Track CSV files; repeatable.
    #[arg(long = "tracks", required = true)]
    tracks: Vec<PathBuf>,
    /// JSON extraction configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    lane_convention: Option<LaneArg>,
    /// Use sliding-window anchors with this stride in seconds.
    #[arg(long)]
    sliding: Option<f64>,
    /// Seconds between the anchor and a lane-change frame.
    #[arg(long)]
    lead: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Campaign output directories or attack_results.jsonl files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

fn summarize(outcome: &CampaignOutcome) {
    for r in &outcome.reports {
        if let Some(b) = r.budget {
            println!("budget {b}");
        }
        print!("{}", render_tables(&r.conditions));
        if let Some(top) = r.vulnerability.first() {
            println!("top feature: {} (selected {} times)", top.feature, top.selection_count);
        }
    }
    println!("outputs written to {}", outcome.out_dir.display());
}

fn cmd_gen(a: &GenArgs) -> Result<(), CampaignError> {
    let spec = SyntheticSpec {
        size: a.size,
        mix: [a.mix[0], a.mix[1], a.mix[2]],
        planted_fraction: a.planted,
        id_prefix: a.prefix.clone(),
    };
    spec.validate().map_err(CampaignError::Config)?;
    let entries: Vec<CorpusEntry> = generate_synthetic(&spec, a.seed)
        .into_iter()
        .map(|s| CorpusEntry { scenario: s.scenario, truth: Some(s.truth) })
        .collect();
    write_entries(&a.out, &entries)?;
    println!("wrote {} scenarios to {}", entries.len(), a.out.display());
    Ok(())
}

fn write_entries(path: &PathBuf, entries: &[CorpusEntry]) -> Result<(), CampaignError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CampaignError::Data(format!("{}: {e}", parent.display())))?;
    }
    let file = fs::File::create(path).map_err(|e| CampaignError::Data(format!("{}: {e}", path.display())))?;
    write_corpus(entries, BufWriter::new(file)).map_err(|e| CampaignError::Data(e.to_string()))
}

fn cmd_extract(a: &ExtractArgs) -> Result<(), CampaignError> {
    let mut config = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?
        }
        None => ExtractionConfig::default(),
    };
    if let Some(l) = a.lane_convention {
        config.lane_convention = match l {
            LaneArg::LeftDecreasing => LaneConvention::LeftDecreasing,
            LaneArg::LeftIncreasing => LaneConvention::LeftIncreasing,
            LaneArg::ByTravelDirection => LaneConvention::ByTravelDirection,
        };
    }
    if let Some(s) = a.sliding {
        config.anchors = AnchorMode::Sliding { stride_s: s };
    }
    if let Some(l) = a.lead {
        config.lane_change_lead_s = l;
    }
    config.validate().map_err(CampaignError::Config)?;

    let mut entries = Vec::new();
    for path in &a.tracks {
        let file = fs::File::open(path).map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?;
        let tracks =
            load_tracks(BufReader::new(file)).map_err(|e| CampaignError::Data(format!("{}: {e}", path.display())))?;
        let extraction = extract_scenarios(&tracks, &config);
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("tracks");
        for (reason, count) in &extraction.skipped {
            eprintln!("{}: skipped {count} anchors ({reason:?})", path.display());
        }
        entries.extend(extraction.samples.into_iter().map(|(mut scenario, truth)| {
            if a.tracks.len() > 1 {
                scenario.id = format!("{stem}/{}", scenario.id);
            }
            CorpusEntry { scenario, truth: Some(truth) }
        }));
    }
    write_entries(&a.out, &entries)?;
    println!("wrote {} scenarios to {}", entries.len(), a.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), CampaignError> {
    match cli.command {
        Command::Eval(a) => summarize(&run_eval(&a.resolve()?)?),
        Command::Attack(a) => summarize(&run_attack_campaign(&a.resolve()?)?),
        Command::Baseline { campaign, mode } => {
            let mut c = campaign.resolve()?;
            if let Some(m) = mode {
                c.baseline = match m {
                    BaselineArg::Single => BaselineMode::Single,
                    BaselineArg::Best => BaselineMode::Best,
                };
            }
            summarize(&run_baseline_campaign(&c)?)
        }
        Command::Gen(a) => cmd_gen(&a)?,
        Command::Extract(a) => cmd_extract(&a)?,
        Command::Report(a) => {
            let format = match a.format {
                FormatArg::Csv => VulnFormat::Csv,
                FormatArg::Json => VulnFormat::Json,
            };
            let v = merge_reports(&a.inputs, &a.out, format)?;
            println!("wrote {} features to {}", v.len(), a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
