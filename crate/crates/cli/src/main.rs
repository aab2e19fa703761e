mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use threadcode::corpus::{corpus_stats, validate_thread_graph, Code, Corpus, Lexicon, ValidationConfig};
use threadcode::llm::{
    HttpProvider, OracleProvider, PricingTable, Provider, ProviderKind, ReplayProvider, ResponseStore,
};
use threadcode::prompts::TemplateId;
use threadcode::runner::{
    evaluate_run, tradeoff_report, write_json, Axis, EvalOptions, EvalReport, ExperimentSpec, RunLog, Runner,
    Strategy, ThreadSource,
};
use threadcode::windowing::Feedback;

use config::Config;

#[derive(Parser)]
#[command(
    name = "threadcode",
    version,
    about = "Threading and ABCDE coding experiments over transcripts"
)]
struct Cli {
    /// JSON settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Corpus directory holding manifest.json.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_provider)]
    provider: Option<ProviderKind>,
    /// Model id; other model settings come from the config.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Output root for runs/ and reports/.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent transcripts and in-flight requests.
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the corpus, check coverage and print thread statistics.
    Ingest,
    /// Report thread-graph errors and lints.
    Validate,
    /// Run a threading experiment.
    Thread(ThreadArgs),
    /// Run an ABCDE coding experiment.
    Code(CodeArgs),
    /// Score a finished run.
    Eval(EvalArgs),
    /// Time and cost tradeoff across runs plus the human baseline.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Window,
    AllAtOnce,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Window => Strategy::Window,
            StrategyArg::AllAtOnce => Strategy::AllAtOnce,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Full experiment spec as JSON; overrides the flags below.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "window")]
    strategy: StrategyArg,
    /// Window size, target included.
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Comma-separated transcript ids; default is the whole corpus.
    #[arg(long, value_delimiter = ',')]
    transcripts: Vec<String>,
}

#[derive(Args)]
struct ThreadArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Labeled example transcripts for all-at-once runs.
    #[arg(long, default_value_t = 0)]
    shots: usize,
    /// Labels shown for earlier utterances: self, gold or none.
    #[arg(long, default_value = "self")]
    feedback: Feedback,
}

#[derive(Args)]
struct CodeArgs {
    #[command(flatten)]
    run: RunArgs,
    /// none, human, or llm:<run id>.
    #[arg(long, default_value = "human")]
    thread_source: ThreadSource,
    /// Prior-work prompt instead of the ABCDE templates.
    #[arg(long)]
    baseline: Option<TemplateId>,
}

#[derive(Args)]
struct EvalArgs {
    run_id: String,
    /// Also score threading per utterance subcategory.
    #[arg(long)]
    subcategories: bool,
    /// Code letter scored for ABCDE runs.
    #[arg(long, default_value = "E")]
    code: Code,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(required = true)]
    run_ids: Vec<String>,
}

fn parse_provider(s: &str) -> Result<ProviderKind, String> {
    s.parse::<ProviderKind>().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(c) = cli.corpus {
        cfg.corpus = c;
    }
    if let Some(p) = cli.provider {
        cfg.provider = p;
    }
    if let Some(m) = cli.model {
        cfg.model.model_id = m;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(k) = cli.concurrency {
        cfg.concurrency.transcripts = k;
        cfg.concurrency.requests = k;
    }

    match cli.command {
        Command::Ingest => ingest(&cfg),
        Command::Validate => validate(&cfg),
        Command::Thread(args) => {
            let spec = match &args.run.spec {
                Some(path) => load_spec(path, &cfg)?,
                None => thread_spec(&cfg, &args),
            };
            experiment(&cfg, &spec)
        }
        Command::Code(args) => {
            let spec = match &args.run.spec {
                Some(path) => load_spec(path, &cfg)?,
                None => code_spec(&cfg, &args),
            };
            experiment(&cfg, &spec)
        }
        Command::Eval(args) => eval(&cfg, &args),
        Command::Report(args) => report(&cfg, &args),
    }
}

fn load_corpus(cfg: &Config) -> anyhow::Result<Arc<Corpus>> {
    let corpus =
        Corpus::load_dir(&cfg.corpus).with_context(|| format!("loading {}", cfg.corpus.display()))?;
    corpus.check()?;
    Ok(Arc::new(corpus))
}

fn ingest(cfg: &Config) -> anyhow::Result<ExitCode> {
    let corpus = load_corpus(cfg)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&corpus_stats(&corpus.entries))?
    );
    Ok(ExitCode::SUCCESS)
}

fn validate(cfg: &Config) -> anyhow::Result<ExitCode> {
    let corpus =
        Corpus::load_dir(&cfg.corpus).with_context(|| format!("loading {}", cfg.corpus.display()))?;
    let lexicon = match &cfg.lexicon {
        Some(path) => Lexicon::from_file(path).with_context(|| format!("reading {}", path.display()))?,
        None => Lexicon::default(),
    };
    let vcfg = ValidationConfig {
        lexicon,
        long_gap: cfg.long_gap,
    };
    let mut errors = 0;
    for e in &corpus.entries {
        let report = validate_thread_graph(&e.transcript, &e.gold, &vcfg);
        errors += report.errors.len();
        println!("{}", serde_json::to_string(&report)?);
    }
    if errors > 0 {
        eprintln!("{errors} hard errors");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn load_spec(path: &Path, cfg: &Config) -> anyhow::Result<ExperimentSpec> {
    let raw = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut spec: ExperimentSpec =
        serde_json::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?;
    if spec.template_dir.is_none() {
        spec.template_dir = cfg.templates.clone();
    }
    Ok(spec)
}

fn base_spec(cfg: &Config, run: &RunArgs, mut spec: ExperimentSpec) -> ExperimentSpec {
    spec.transcripts = run.transcripts.clone();
    spec.template_dir = cfg.templates.clone();
    spec.strictness = cfg.strictness;
    spec
}

fn thread_spec(cfg: &Config, args: &ThreadArgs) -> ExperimentSpec {
    let mut spec = match args.run.strategy {
        StrategyArg::Window => ExperimentSpec::threading_window(cfg.model.clone(), args.run.window),
        StrategyArg::AllAtOnce => ExperimentSpec::threading_all_at_once(cfg.model.clone(), args.shots),
    };
    if let Some(w) = spec.window.as_mut() {
        w.feedback = args.feedback;
    }
    if matches!(args.run.strategy, StrategyArg::Window) {
        spec.shots = args.shots;
    }
    base_spec(cfg, &args.run, spec)
}

fn code_spec(cfg: &Config, args: &CodeArgs) -> ExperimentSpec {
    let mut spec = ExperimentSpec::abcde(
        cfg.model.clone(),
        args.run.strategy.into(),
        args.run.window,
        args.thread_source.clone(),
    );
    if args.baseline.is_some() {
        spec.baseline = args.baseline;
        spec.thread_source = Some(ThreadSource::None);
    }
    base_spec(cfg, &args.run, spec)
}

fn provider(cfg: &Config, corpus: &Arc<Corpus>, spec: &ExperimentSpec) -> anyhow::Result<Arc<dyn Provider>> {
    Ok(match cfg.provider {
        ProviderKind::Http => Arc::new(HttpProvider::from_env(&spec.model, cfg.retry)?),
        ProviderKind::Replay => {
            let Some(path) = &cfg.fixtures else {
                bail!("the replay provider needs `fixtures` in the config");
            };
            Arc::new(ReplayProvider::from_file(path)?)
        }
        ProviderKind::Oracle => Arc::new(OracleProvider::new(corpus.clone())),
    })
}

fn runner(cfg: &Config, corpus: Arc<Corpus>, provider: Arc<dyn Provider>) -> anyhow::Result<Runner> {
    let mut r = Runner::new(corpus, provider)
        .with_runs_dir(cfg.runs_dir())
        .with_concurrency(cfg.concurrency.transcripts, cfg.concurrency.requests)
        .with_prompt_logging(cfg.log_prompts);
    if let Some(path) = &cfg.cache {
        r = r.with_cache(Arc::new(ResponseStore::open(path)?));
    }
    if let Some(path) = &cfg.pricing {
        r = r.with_pricing(PricingTable::load(path)?);
    }
    Ok(r)
}

fn experiment(cfg: &Config, spec: &ExperimentSpec) -> anyhow::Result<ExitCode> {
    spec.validate()?;
    let corpus = load_corpus(cfg)?;
    let provider = provider(cfg, &corpus, spec)?;
    let r = runner(cfg, corpus, provider)?;
    let log = r.run(spec)?;
    let s = &log.summary;
    log::info!(
        "{}: {} utterances, {} requests ({} cached), {} failed transcripts",
        spec.condition(),
        s.n_records,
        s.n_requests,
        s.n_cached,
        s.failed_transcripts.len()
    );
    if let Some(cost) = s.cost_usd {
        log::info!("estimated cost ${cost:.4}");
    }
    println!("{}", log.run_id());
    Ok(ExitCode::SUCCESS)
}

fn read_log(cfg: &Config, run_id: &str) -> anyhow::Result<RunLog> {
    let path = cfg.runs_dir().join(run_id).join("log.jsonl");
    RunLog::read(&path).with_context(|| format!("reading {}", path.display()))
}

fn eval(cfg: &Config, args: &EvalArgs) -> anyhow::Result<ExitCode> {
    let corpus = load_corpus(cfg)?;
    let log = read_log(cfg, &args.run_id)?;
    let opts = EvalOptions {
        subcategories: args.subcategories,
        code: args.code,
    };
    let report = evaluate_run(&log, &corpus, &opts)?;
    let path = cfg.runs_dir().join(&args.run_id).join("eval.json");
    std::fs::write(&path, report.to_json()).with_context(|| format!("writing {}", path.display()))?;
    let a = &report.aggregate;
    println!(
        "{}: accuracy {:.4} ± {:.4}, macro-F1 {:.4} ± {:.4}, kappa {:.4} ± {:.4} over {} transcripts",
        report.condition,
        a.accuracy.mean,
        a.accuracy.std,
        a.macro_f1.mean,
        a.macro_f1.std,
        a.kappa.mean,
        a.kappa.std,
        a.n_reports
    );
    Ok(ExitCode::SUCCESS)
}

fn report(cfg: &Config, args: &ReportArgs) -> anyhow::Result<ExitCode> {
    let corpus = load_corpus(cfg)?;
    let mut runs = Vec::with_capacity(args.run_ids.len());
    for id in &args.run_ids {
        let log = read_log(cfg, id)?;
        let eval_path = cfg.runs_dir().join(id).join("eval.json");
        let eval: EvalReport = if eval_path.exists() {
            serde_json::from_str(&std::fs::read_to_string(&eval_path)?)
                .with_context(|| format!("parsing {}", eval_path.display()))?
        } else {
            evaluate_run(&log, &corpus, &EvalOptions::default())?
        };
        runs.push((log, eval));
    }
    let pricing = cfg.pricing.as_deref().map(PricingTable::load).transpose()?;
    let pairs: Vec<_> = runs.iter().map(|(l, e)| (l, e)).collect();
    let table = tradeoff_report(&pairs, &cfg.human_baseline, pricing.as_ref());

    let dir = cfg.reports_dir();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("tradeoff.csv"), table.to_csv())?;
    std::fs::write(dir.join("tradeoff.svg"), table.to_svg(Axis::Time))?;
    std::fs::write(dir.join("tradeoff_cost.svg"), table.to_svg(Axis::Cost))?;
    write_json(&dir.join("tradeoff.json"), &table)?;
    print!("{}", table.to_csv());
    Ok(ExitCode::SUCCESS)
}
