//! The `absa` command-line harness.
//!
//! Exit codes: 0 success, 1 evaluation or validation failure, 2 input error,
//! 3 backend failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use absa_core::backends::{
    remote::service_version, AscBackend, AteBackend, BackendError, FixtureSink, LexiconBackend, LexiconConfig,
    Recording, RemoteBackend, ReplayStore,
};
use absa_core::corpus::{
    apply_conflict_policy, corpus_stats, load_corpus, parse_semeval_xml_unchecked, read_corpus_bytes, sha256_hex,
    validate_corpus, ConflictPolicy, Corpus, CorpusFile, Polarity,
};
use absa_core::metrics::{score_asc_given_gold_par, AscSummary, MetricsError};
use absa_core::pipeline::{
    align_to_corpus, read_dump, run_corpus, write_dump, BackendIds, PipelineError, PredictionRecord,
};
use absa_core::report::{
    compare_to_baseline, emit, evaluate, CorpusInfo, Dataset, EvalReport, Format, PaperBaselines, ReportManifest,
    RunManifest, DEFAULT_TOLERANCE, TOOL_VERSION,
};
use clap::{Args, Parser, Subcommand};

pub mod config;

pub use config::{BackendKind, CliConfig, FileConfig, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_EVAL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

pub const DUMP_FILE: &str = "predictions.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_STEM: &str = "report";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INPUT, message: message.into() }
    }

    pub fn eval(message: impl Into<String>) -> Self {
        CliError { code: EXIT_EVAL, message: message.into() }
    }

    pub fn backend(message: impl Into<String>) -> Self {
        CliError { code: EXIT_BACKEND, message: message.into() }
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Config(_) | BackendError::InvalidInput(_) => CliError::input(e.to_string()),
            other => CliError::backend(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "absa", version, about = "Run and score aspect-based sentiment pipelines")]
pub struct Cli {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check corpus files for schema and offset violations.
    Validate(PathsArgs),
    /// Per-file corpus statistics as csv.
    Stats(PathsArgs),
    /// Run the pipeline over a corpus and score it.
    Run(RunArgs),
    /// Score an existing prediction dump.
    Score(ScoreArgs),
    /// Compare a report against the published baselines.
    Compare(CompareArgs),
    /// Run the pipeline and record every backend answer as replay fixtures.
    Record(RunArgs),
    /// Print the published baseline table.
    Baselines(BaselinesArgs),
}

#[derive(Debug, Args)]
pub struct PathsArgs {
    #[arg(long = "corpus")]
    pub corpus: Vec<PathBuf>,
    pub paths: Vec<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    pub ate: Option<BackendKind>,
    #[arg(long, value_enum)]
    pub asc: Option<BackendKind>,
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Lexicon file (TOML or JSON) for the lexicon backend; defaults to a built-in list.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// drop, keep or map_to_neutral
    #[arg(long)]
    pub conflict: Option<ConflictPolicy>,
}

#[derive(Debug, Args, Default)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated: json, csv, markdown.
    #[arg(long, value_delimiter = ',')]
    pub format: Vec<Format>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub backends: BackendArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Skip classifying the gold aspects.
    #[arg(long)]
    pub no_gold_asc: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Prediction dump (JSON lines) to score.
    #[arg(long)]
    pub predictions: PathBuf,
    #[command(flatten)]
    pub backends: BackendArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// report.json written by run or score.
    #[arg(long)]
    pub report: PathBuf,
    /// Res-14, Lap-14, Res-15 or Res-16; inferred from the corpus name when omitted.
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub format: Option<Format>,
    /// Also write comparison.<ext> into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub format: Option<Format>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

pub fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Validate(args) => cmd_validate(&paths_or_config(args, &file)?, out, err),
        Command::Stats(args) => cmd_stats(&paths_or_config(args, &file)?, out),
        Command::Run(args) => {
            let no_gold = args.no_gold_asc;
            let cfg =
                CliConfig::resolve(overrides(args.corpus, args.backends, args.output), &file, BackendKind::Lexicon)?;
            let run = cmd_run(&cfg, !no_gold, err)?;
            print_headline(out, &run.report);
            Ok(EXIT_OK)
        }
        Command::Score(args) => {
            if args.backends.ate.is_some() {
                return Err(CliError::input("score does not run extraction; --ate is not accepted"));
            }
            let options = ScoreOptions {
                gold_asc: args.backends.asc.is_some() || file.asc.is_some(),
                explicit_conflict: args.backends.conflict.is_some() || file.conflict.is_some(),
            };
            let cfg =
                CliConfig::resolve(overrides(args.corpus, args.backends, args.output), &file, BackendKind::Lexicon)?;
            let report = cmd_score(&cfg, &args.predictions, options, err)?;
            print_headline(out, &report);
            Ok(EXIT_OK)
        }
        Command::Compare(args) => {
            let tolerance = args.tolerance.or(file.tolerance).unwrap_or(DEFAULT_TOLERANCE);
            let format = args.format.unwrap_or(Format::Markdown);
            cmd_compare(&args.report, args.dataset.as_deref(), tolerance, format, args.out.as_deref(), out)
        }
        Command::Record(args) => {
            let no_gold = args.no_gold_asc;
            let cfg =
                CliConfig::resolve(overrides(args.corpus, args.backends, args.output), &file, BackendKind::Remote)?;
            let run = cmd_record(&cfg, !no_gold, err)?;
            print_headline(out, &run.report);
            Ok(EXIT_OK)
        }
        Command::Baselines(args) => {
            let baselines = PaperBaselines::published();
            let dataset = args.dataset.as_deref().map(parse_dataset).transpose()?;
            let entries: Vec<_> =
                baselines.entries().iter().filter(|e| dataset.is_none_or(|d| d == e.dataset)).cloned().collect();
            let bytes = match args.format.unwrap_or(Format::Csv) {
                Format::Csv => PaperBaselines::from_entries(entries).to_csv(),
                Format::Json => {
                    let mut v = serde_json::to_vec_pretty(&entries).expect("baselines serialize");
                    v.push(b'\n');
                    v
                }
                Format::Markdown => PaperBaselines::from_entries(entries).to_markdown().into_bytes(),
            };
            out.write_all(&bytes).map_err(|e| CliError::input(e.to_string()))?;
            Ok(EXIT_OK)
        }
    }
}

fn overrides(corpus: Option<PathBuf>, b: BackendArgs, o: OutputArgs) -> Overrides {
    Overrides {
        corpus,
        ate: b.ate,
        asc: b.asc,
        fixtures: b.fixtures,
        endpoint: b.endpoint,
        lexicon: b.lexicon,
        parallelism: b.parallelism,
        conflict: b.conflict,
        out: o.out,
        formats: o.format,
    }
}

fn paths_or_config(args: PathsArgs, file: &FileConfig) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = args.corpus;
    paths.extend(args.paths);
    if paths.is_empty() {
        paths.extend(file.corpus.clone());
    }
    if paths.is_empty() {
        return Err(CliError::input("no corpus files given"));
    }
    Ok(paths)
}

fn parse_dataset(name: &str) -> Result<Dataset, CliError> {
    name.parse().map_err(|e: absa_core::report::ReportError| CliError::input(e.to_string()))
}

fn print_headline(out: &mut dyn Write, report: &EvalReport) {
    let asc = match &report.asc.given_gold {
        Some(g) if !g.undefined => format!("{:.2}", g.macro_f1 * 100.0),
        _ => "n/a".to_string(),
    };
    let _ = writeln!(out, "ATE F1\t{:.2}", report.ate.f1 * 100.0);
    let _ = writeln!(out, "ASC F1\t{asc}");
    let _ = writeln!(out, "Joint F1\t{:.2}", report.joint.f1 * 100.0);
}

/// Exit 0 when every file is clean, 1 on violations, 2 when a file cannot be read or parsed.
pub fn cmd_validate(paths: &[PathBuf], out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let mut unreadable = false;
    let mut violations = 0usize;
    for path in paths {
        let parsed = read_corpus_bytes(path).and_then(|bytes| parse_semeval_xml_unchecked(&bytes));
        match parsed {
            Ok(corpus) => {
                for v in validate_corpus(&corpus) {
                    violations += 1;
                    let _ = writeln!(out, "{}\t{v}", path.display());
                }
            }
            Err(e) => {
                unreadable = true;
                let _ = writeln!(err, "error: {}: {e}", path.display());
            }
        }
    }
    Ok(if unreadable {
        EXIT_INPUT
    } else if violations > 0 {
        EXIT_EVAL
    } else {
        EXIT_OK
    })
}

pub const STATS_HEADER: [&str; 9] =
    ["corpus", "sentences", "aspects", "positive", "negative", "neutral", "conflict", "no_aspect", "mean_aspects"];

pub fn cmd_stats(paths: &[PathBuf], out: &mut dyn Write) -> Result<i32, CliError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(STATS_HEADER).expect("in-memory write");
    for path in paths {
        let file = load_corpus(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let s = corpus_stats(&file.corpus);
        let count = |p: Polarity| s.histogram.get(&p).copied().unwrap_or(0).to_string();
        writer
            .write_record([
                file.corpus.name.clone(),
                s.sentences.to_string(),
                s.aspects.to_string(),
                count(Polarity::Positive),
                count(Polarity::Negative),
                count(Polarity::Neutral),
                count(Polarity::Conflict),
                s.no_aspect.to_string(),
                format!("{:.2}", s.mean_aspects),
            ])
            .expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    out.write_all(&bytes).map_err(|e| CliError::input(e.to_string()))?;
    Ok(EXIT_OK)
}

/// Backends resolved for one command.
pub struct Backends {
    pub ate: Arc<dyn AteBackend>,
    pub asc: Arc<dyn AscBackend>,
    pub service_version: Option<String>,
}

#[derive(Default)]
struct BackendPool {
    lexicon: Option<Arc<LexiconBackend>>,
    replay: Option<Arc<ReplayStore>>,
    remote: Option<Arc<RemoteBackend>>,
    service_version: Option<String>,
}

impl BackendPool {
    fn lexicon(&mut self, cfg: &CliConfig) -> Result<Arc<LexiconBackend>, CliError> {
        if self.lexicon.is_none() {
            let lexicon = match &cfg.lexicon {
                Some(path) => load_lexicon(path)?,
                None => LexiconConfig::builtin(),
            };
            self.lexicon = Some(Arc::new(LexiconBackend::new(lexicon)?));
        }
        Ok(self.lexicon.clone().expect("just set"))
    }

    fn replay(&mut self, cfg: &CliConfig) -> Result<Arc<ReplayStore>, CliError> {
        if self.replay.is_none() {
            let path = cfg.fixtures.as_ref().ok_or_else(|| CliError::input("replay backend needs --fixtures"))?;
            let store = ReplayStore::load(path).map_err(|e| CliError::input(e.to_string()))?;
            self.replay = Some(Arc::new(store));
        }
        Ok(self.replay.clone().expect("just set"))
    }

    fn remote(&mut self, cfg: &CliConfig) -> Result<Arc<RemoteBackend>, CliError> {
        if self.remote.is_none() {
            let client = RemoteBackend::new(cfg.remote.clone()).map_err(|e| CliError::input(e.to_string()))?;
            let health = client.health().map_err(|e| CliError::backend(format!("inference service: {e}")))?;
            self.service_version = service_version(&health);
            self.remote = Some(Arc::new(client));
        }
        Ok(self.remote.clone().expect("just set"))
    }

    fn ate(&mut self, cfg: &CliConfig, kind: BackendKind) -> Result<Arc<dyn AteBackend>, CliError> {
        Ok(match kind {
            BackendKind::Lexicon => self.lexicon(cfg)?,
            BackendKind::Replay => self.replay(cfg)?,
            BackendKind::Remote => self.remote(cfg)?,
        })
    }

    fn asc(&mut self, cfg: &CliConfig, kind: BackendKind) -> Result<Arc<dyn AscBackend>, CliError> {
        Ok(match kind {
            BackendKind::Lexicon => self.lexicon(cfg)?,
            BackendKind::Replay => self.replay(cfg)?,
            BackendKind::Remote => self.remote(cfg)?,
        })
    }
}

fn load_lexicon(path: &Path) -> Result<LexiconConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read lexicon {}: {e}", path.display())))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| CliError::input(format!("lexicon {}: {e}", path.display())))
}

pub fn resolve_backends(cfg: &CliConfig) -> Result<Backends, CliError> {
    cfg.check_backends(&[cfg.ate, cfg.asc])?;
    let mut pool = BackendPool::default();
    let ate = pool.ate(cfg, cfg.ate)?;
    let asc = pool.asc(cfg, cfg.asc)?;
    Ok(Backends { ate, asc, service_version: pool.service_version })
}

/// Loads the corpus named in the settings and applies the conflict policy.
pub fn load_resolved_corpus(cfg: &CliConfig) -> Result<CorpusFile, CliError> {
    let mut file = load_corpus(&cfg.corpus).map_err(|e| CliError::input(format!("{}: {e}", cfg.corpus.display())))?;
    file.corpus = apply_conflict_policy(&file.corpus, cfg.conflict);
    Ok(file)
}

fn scored_manifest(
    cfg: &CliConfig,
    file: &CorpusFile,
    backends: BackendIds,
    service_version: Option<String>,
) -> ReportManifest {
    ReportManifest {
        corpus: CorpusInfo { name: file.corpus.name.clone(), split: file.corpus.split, sha256: file.sha256.clone() },
        backends,
        service_version,
        filter: cfg.filter.clone(),
        norm: cfg.norm.clone(),
        match_mode: cfg.match_mode,
        conflict_policy: cfg.conflict,
        term_semantics: "multiset".into(),
        tool_version: TOOL_VERSION.into(),
    }
}

/// Classifiers cannot predict "conflict", so gold-aspect scoring always drops it.
fn gold_asc(corpus: &Corpus, asc: &dyn AscBackend, parallelism: usize) -> Result<AscSummary, CliError> {
    let view = apply_conflict_policy(corpus, ConflictPolicy::Drop);
    score_asc_given_gold_par(&view, asc, parallelism).map_err(|e| match e {
        MetricsError::Backend(b) => CliError::from(b),
        other => CliError::eval(other.to_string()),
    })
}

/// What a pipeline run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<PredictionRecord>,
    pub manifest: RunManifest,
    pub report: EvalReport,
}

fn execute(
    cfg: &CliConfig,
    backends: &Backends,
    with_gold_asc: bool,
    err: &mut dyn Write,
) -> Result<RunOutcome, CliError> {
    let file = load_resolved_corpus(cfg)?;
    let total = file.corpus.sentences.len();
    let outputs = run_corpus(&*backends.ate, &*backends.asc, &file.corpus, &cfg.filter, cfg.parallelism).map_err(
        |e| match &e {
            PipelineError::Aborted { completed, source } if source.backend_error().is_some() => {
                CliError::backend(format!("{source} (completed {completed} of {total} sentences)"))
            }
            PipelineError::Config(_) => CliError::input(e.to_string()),
            _ => CliError::backend(e.to_string()),
        },
    )?;
    let records: Vec<PredictionRecord> = outputs.iter().map(PredictionRecord::from).collect();
    let given_gold = if with_gold_asc { Some(gold_asc(&file.corpus, &*backends.asc, cfg.parallelism)?) } else { None };
    let ids = BackendIds { ate: backends.ate.id(), asc: backends.asc.id() };
    let scored = scored_manifest(cfg, &file, ids, backends.service_version.clone());
    let manifest = RunManifest::now(cfg.corpus.display().to_string(), cfg.parallelism, scored);
    let report = evaluate(&file.corpus, &records, &manifest, given_gold).map_err(|e| CliError::eval(e.to_string()))?;
    let _ = writeln!(err, "scored {total} sentences from {}", cfg.corpus.display());
    Ok(RunOutcome { records, manifest, report })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn write_reports(dir: &Path, manifest: &RunManifest, report: &EvalReport, formats: &[Format]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    let mut manifest_bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    manifest_bytes.push(b'\n');
    write_file(&dir.join(MANIFEST_FILE), &manifest_bytes)?;
    for format in formats {
        write_file(&dir.join(format!("{REPORT_STEM}.{}", format.extension())), &emit(report, *format))?;
    }
    Ok(())
}

fn write_outcome(cfg: &CliConfig, outcome: &RunOutcome) -> Result<(), CliError> {
    write_reports(&cfg.out, &outcome.manifest, &outcome.report, &cfg.formats)?;
    write_file(&cfg.out.join(DUMP_FILE), &write_dump(&outcome.records))
}

/// Runs the pipeline and writes the dump, manifest and reports into the output directory.
pub fn cmd_run(cfg: &CliConfig, with_gold_asc: bool, err: &mut dyn Write) -> Result<RunOutcome, CliError> {
    let backends = resolve_backends(cfg)?;
    let outcome = execute(cfg, &backends, with_gold_asc, err)?;
    write_outcome(cfg, &outcome)?;
    Ok(outcome)
}

/// Like [`cmd_run`], but every backend answer is written to the fixture file.
/// A failed run leaves the fixture flagged incomplete.
pub fn cmd_record(cfg: &CliConfig, with_gold_asc: bool, err: &mut dyn Write) -> Result<RunOutcome, CliError> {
    if cfg.ate == BackendKind::Replay || cfg.asc == BackendKind::Replay {
        return Err(CliError::input("record cannot use the replay backend"));
    }
    let fixtures = cfg.fixtures.clone().ok_or_else(|| CliError::input("record needs --fixtures for its output"))?;
    let inner_cfg = CliConfig { fixtures: None, ..cfg.clone() };
    let inner = resolve_backends(&inner_cfg)?;
    let sink = FixtureSink::create(&fixtures)?;
    let backends = Backends {
        ate: Arc::new(Recording::new(inner.ate, sink.clone())),
        asc: Arc::new(Recording::new(inner.asc, sink.clone())),
        service_version: inner.service_version,
    };
    match execute(cfg, &backends, with_gold_asc, err) {
        Ok(outcome) => {
            write_outcome(cfg, &outcome)?;
            let _ = writeln!(err, "recorded fixtures to {}", fixtures.display());
            Ok(outcome)
        }
        Err(e) => {
            if let Err(flag) = sink.mark_incomplete(&e.message) {
                let _ = writeln!(err, "warning: could not flag {} as incomplete: {flag}", fixtures.display());
            }
            Err(e)
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ScoreOptions {
    /// Classify the gold aspects with the configured ASC backend.
    pub gold_asc: bool,
    /// The conflict policy was set by flag or config file rather than defaulted.
    pub explicit_conflict: bool,
}

/// Scores a prediction dump. Settings not given explicitly fall back to the
/// `manifest.json` next to the dump, so rescoring a run reproduces its report.
pub fn cmd_score(
    cfg: &CliConfig,
    dump_path: &Path,
    options: ScoreOptions,
    err: &mut dyn Write,
) -> Result<EvalReport, CliError> {
    let bytes =
        fs::read(dump_path).map_err(|e| CliError::input(format!("cannot read {}: {e}", dump_path.display())))?;
    let records = read_dump(&bytes).map_err(|e| CliError::input(format!("{}: {e}", dump_path.display())))?;
    let sidecar = dump_path.parent().map(|d| d.join(MANIFEST_FILE)).filter(|p| p.exists()).and_then(|p| {
        let parsed = fs::read(&p).ok().and_then(|b| serde_json::from_slice::<RunManifest>(&b).ok());
        if parsed.is_none() {
            let _ = writeln!(err, "warning: ignoring unreadable {}", p.display());
        }
        parsed
    });

    let mut cfg = cfg.clone();
    if let Some(prior) = &sidecar {
        cfg.filter = prior.scored.filter.clone();
        cfg.norm = prior.scored.norm.clone();
        cfg.match_mode = prior.scored.match_mode;
        if !options.explicit_conflict {
            cfg.conflict = prior.scored.conflict_policy;
        }
    }
    let file = load_resolved_corpus(&cfg)?;
    if let Some(prior) = &sidecar {
        if prior.scored.corpus.sha256 != file.sha256 {
            let _ = writeln!(err, "warning: corpus differs from the one recorded in {MANIFEST_FILE}");
        }
        if prior.scored.conflict_policy != cfg.conflict {
            let _ = writeln!(err, "warning: conflict policy differs from the recorded run");
        }
    }
    let aligned = align_to_corpus(&file.corpus, records).map_err(CliError::eval)?;
    for id in &aligned.missing {
        let _ = writeln!(err, "warning: no prediction for sentence {id}; scored as empty");
    }

    let (given_gold, asc_id, service_version) = if options.gold_asc {
        cfg.check_backends(&[cfg.asc])?;
        let mut pool = BackendPool::default();
        let asc = pool.asc(&cfg, cfg.asc)?;
        let summary = gold_asc(&file.corpus, &*asc, cfg.parallelism)?;
        (Some(summary), Some(asc.id()), pool.service_version)
    } else {
        (None, None, None)
    };
    let dump_id = format!("dump:{}", &sha256_hex(&bytes)[..12]);
    let ids = match &sidecar {
        Some(prior) => BackendIds {
            ate: prior.scored.backends.ate.clone(),
            asc: asc_id.unwrap_or(prior.scored.backends.asc.clone()),
        },
        None => BackendIds { ate: dump_id.clone(), asc: asc_id.unwrap_or(dump_id) },
    };
    let service_version = service_version.or_else(|| sidecar.as_ref().and_then(|m| m.scored.service_version.clone()));
    let scored = scored_manifest(&cfg, &file, ids, service_version);
    let manifest = RunManifest::now(cfg.corpus.display().to_string(), cfg.parallelism, scored);
    let report =
        evaluate(&file.corpus, &aligned.records, &manifest, given_gold).map_err(|e| CliError::eval(e.to_string()))?;
    write_reports(&cfg.out, &manifest, &report, &cfg.formats)?;
    Ok(report)
}

/// Exit 0 when no target baseline is missed, 1 when one falls below tolerance.
pub fn cmd_compare(
    report_path: &Path,
    dataset: Option<&str>,
    tolerance: f64,
    format: Format,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let dataset = dataset.map(parse_dataset).transpose()?;
    let bytes =
        fs::read(report_path).map_err(|e| CliError::input(format!("cannot read {}: {e}", report_path.display())))?;
    let report: EvalReport =
        serde_json::from_slice(&bytes).map_err(|e| CliError::input(format!("{}: {e}", report_path.display())))?;
    let result = compare_to_baseline(&report, dataset, &PaperBaselines::published(), tolerance)
        .map_err(|e| CliError::input(e.to_string()))?;
    let rendered = emit(&result, format);
    out.write_all(&rendered).map_err(|e| CliError::input(e.to_string()))?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
        write_file(&dir.join(format!("comparison.{}", format.extension())), &rendered)?;
    }
    Ok(if result.passed() { EXIT_OK } else { EXIT_EVAL })
}
