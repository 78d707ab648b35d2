//! Evaluation reports, published baselines and comparisons.
//!
//! A report is split in two: the [`RunManifest`] records everything about a
//! run (including when it happened and how parallel it was), and the
//! [`EvalReport`] embeds only the part of it that determines the scores, so
//! identical inputs give byte-identical reports.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ConflictPolicy, Corpus, Split};
use crate::metrics::{
    pair_errors, pipelined_polarity_accuracy, score_ate_with_mode, score_joint_with_mode, AscSummary, MatchMode,
    MetricsError, NormConfig, PrfScore, SentenceErrors, SentencePredictions,
};
use crate::pipeline::{BackendIds, FilterConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default allowed gap, in F1 points, between a live run and a published number.
pub const DEFAULT_TOLERANCE: f64 = 1.5;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no published baselines for dataset {0:?}")]
    UnknownDataset(String),
    #[error("tolerance must be non-negative, got {0}")]
    NegativeTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dataset {
    #[serde(rename = "Res-14")]
    Res14,
    #[serde(rename = "Lap-14")]
    Lap14,
    #[serde(rename = "Res-15")]
    Res15,
    #[serde(rename = "Res-16")]
    Res16,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::Res14, Dataset::Lap14, Dataset::Res15, Dataset::Res16];

    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::Res14 => "Res-14",
            Dataset::Lap14 => "Lap-14",
            Dataset::Res15 => "Res-15",
            Dataset::Res16 => "Res-16",
        }
    }

    /// Guesses the benchmark from a corpus or file name such as
    /// `Restaurants_Test_Gold`, `Laptops_Test_Gold` or `ABSA15_RestaurantsTest`.
    pub fn infer(name: &str) -> Option<Dataset> {
        if let Ok(exact) = name.parse() {
            return Some(exact);
        }
        let lower = name.to_lowercase();
        if lower.contains("15") {
            Some(Dataset::Res15)
        } else if lower.contains("16") || lower.contains("sb1") {
            Some(Dataset::Res16)
        } else if lower.contains("lap") {
            Some(Dataset::Lap14)
        } else if lower.contains("rest") {
            Some(Dataset::Res14)
        } else {
            None
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dataset {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase();
        match key.as_str() {
            "res14" | "rest14" | "restaurants14" | "restaurant14" => Ok(Dataset::Res14),
            "lap14" | "laptop14" | "laptops14" => Ok(Dataset::Lap14),
            "res15" | "rest15" | "restaurants15" | "restaurant15" => Ok(Dataset::Res15),
            "res16" | "rest16" | "restaurants16" | "restaurant16" => Ok(Dataset::Res16),
            _ => Err(ReportError::UnknownDataset(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    /// Aspect extraction F1.
    #[serde(rename = "AE")]
    AspectExtraction,
    /// Polarity accuracy over correctly extracted aspects.
    #[serde(rename = "SP")]
    PipelinedPolarity,
    /// (term, polarity) pair F1.
    #[serde(rename = "Joint")]
    Joint,
    /// Polarity accuracy when the classifier is given the gold aspects.
    #[serde(rename = "ASC")]
    GoldAspectPolarity,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::AspectExtraction => "AE",
            Task::PipelinedPolarity => "SP",
            Task::Joint => "Joint",
            Task::GoldAspectPolarity => "ASC",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineRole {
    /// A number this pipeline is expected to reproduce.
    Target,
    /// Another system's number, shown for context only.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub model: String,
    pub dataset: Dataset,
    pub task: Task,
    /// F1 (or accuracy) in percent.
    pub f1: f64,
    pub provenance: String,
    pub role: BaselineRole,
}

/// Published reference numbers, read-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperBaselines {
    entries: Vec<BaselineEntry>,
}

const PIPELINE_MODEL: &str = "Instruct-DeBERTa";
const PIPELINED_TABLE: &str = "results table: selected models individually and pipelined";
const JOINT_TEXT: &str = "joint-task pair extraction results";
const JOINT_TABLE: &str = "results table: joint-task models";
const SURVEY_TABLE: &str = "SemEval-2014 survey table (DeBERTa scores computed separately)";

impl PaperBaselines {
    pub fn published() -> Self {
        use BaselineRole::*;
        use Dataset::*;
        use Task::*;
        let row = |model: &str, dataset, task, f1, provenance: &str, role| BaselineEntry {
            model: model.to_string(),
            dataset,
            task,
            f1,
            provenance: provenance.to_string(),
            role,
        };
        PaperBaselines {
            entries: vec![
                row(PIPELINE_MODEL, Res14, AspectExtraction, 91.39, PIPELINED_TABLE, Target),
                row(PIPELINE_MODEL, Res14, PipelinedPolarity, 88.63, PIPELINED_TABLE, Target),
                row(PIPELINE_MODEL, Lap14, AspectExtraction, 91.56, PIPELINED_TABLE, Target),
                row(PIPELINE_MODEL, Lap14, PipelinedPolarity, 89.65, PIPELINED_TABLE, Target),
                row(PIPELINE_MODEL, Res15, AspectExtraction, 75.13, PIPELINED_TABLE, Target),
                row(PIPELINE_MODEL, Res15, PipelinedPolarity, 81.26, PIPELINED_TABLE, Target),
                row(PIPELINE_MODEL, Res16, AspectExtraction, 77.79, PIPELINED_TABLE, Target),
                row(PIPELINE_MODEL, Res16, PipelinedPolarity, 79.35, PIPELINED_TABLE, Target),
                row(PIPELINE_MODEL, Res14, Joint, 80.78, JOINT_TEXT, Target),
                row(PIPELINE_MODEL, Lap14, Joint, 80.94, JOINT_TEXT, Target),
                row("InstructABSA", Res14, Joint, 79.47, JOINT_TABLE, Reference),
                row("InstructABSA", Lap14, Joint, 79.34, JOINT_TABLE, Reference),
                row("GRACE", Res14, Joint, 77.26, JOINT_TABLE, Reference),
                row("GRACE", Lap14, Joint, 70.71, JOINT_TABLE, Reference),
                row("DeBERTa-V3-base-absa-v1", Res14, GoldAspectPolarity, 90.94, SURVEY_TABLE, Target),
                row("DeBERTa-V3-base-absa-v1", Lap14, GoldAspectPolarity, 90.32, SURVEY_TABLE, Target),
                row("DeBERTa-V3-base-absa-v1", Res15, GoldAspectPolarity, 89.55, SURVEY_TABLE, Target),
            ],
        }
    }

    /// A subset of the published table, e.g. one dataset.
    pub fn from_entries(entries: Vec<BaselineEntry>) -> Self {
        PaperBaselines { entries }
    }

    pub fn entries(&self) -> &[BaselineEntry] {
        &self.entries
    }

    pub fn for_dataset(&self, dataset: Dataset) -> impl Iterator<Item = &BaselineEntry> {
        self.entries.iter().filter(move |e| e.dataset == dataset)
    }

    pub fn get(&self, model: &str, dataset: Dataset, task: Task) -> Option<f64> {
        self.entries.iter().find(|e| e.model == model && e.dataset == dataset && e.task == task).map(|e| e.f1)
    }

    /// SHA-256 over a canonical one-line-per-entry rendering.
    pub fn checksum(&self) -> String {
        let mut canonical = String::new();
        for e in &self.entries {
            canonical
                .push_str(&format!("{}|{}|{}|{:.2}|{}|{:?}\n", e.model, e.dataset, e.task, e.f1, e.provenance, e.role));
        }
        crate::corpus::sha256_hex(canonical.as_bytes())
    }

    /// Series for plotting: `dataset,task,metric,value` with the model as metric.
    pub fn to_csv(&self) -> Vec<u8> {
        let mut writer = csv_writer();
        for e in &self.entries {
            write_row(&mut writer, e.dataset.as_str(), e.task.as_str(), &e.model, &pct(e.f1 / 100.0));
        }
        finish_csv(writer)
    }
}

impl PaperBaselines {
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Model | Dataset | Task | F1 | Role | Source |\n|---|---|---|---:|---|---|\n");
        for e in &self.entries {
            let role = match e.role {
                BaselineRole::Target => "target",
                BaselineRole::Reference => "reference",
            };
            out.push_str(&format!(
                "| {} | {} | {} | {:.2} | {role} | {} |\n",
                e.model, e.dataset, e.task, e.f1, e.provenance
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusInfo {
    pub name: String,
    pub split: Split,
    pub sha256: String,
}

/// The parts of a run that determine its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub corpus: CorpusInfo,
    pub backends: BackendIds,
    pub service_version: Option<String>,
    pub filter: FilterConfig,
    pub norm: NormConfig,
    pub match_mode: MatchMode,
    pub conflict_policy: ConflictPolicy,
    /// How repeated gold terms within a sentence are counted.
    pub term_semantics: String,
    pub tool_version: String,
}

/// Everything about a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub timestamp_unix: u64,
    pub corpus_path: String,
    pub parallelism: usize,
    #[serde(flatten)]
    pub scored: ReportManifest,
}

impl RunManifest {
    pub fn now(corpus_path: impl Into<String>, parallelism: usize, scored: ReportManifest) -> Self {
        let timestamp_unix =
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or_default();
        RunManifest { timestamp_unix, corpus_path: corpus_path.into(), parallelism, scored }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscSection {
    /// Scores with gold aspects as classifier input; absent when no classifier was available.
    pub given_gold: Option<AscSummary>,
    /// Polarity accuracy over the aspects the pipeline extracted correctly.
    pub pipelined_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub manifest: ReportManifest,
    pub ate: PrfScore,
    pub asc: AscSection,
    pub joint: PrfScore,
    pub errors: Vec<SentenceErrors>,
}

pub fn build_report(
    manifest: &RunManifest,
    ate: PrfScore,
    asc: AscSection,
    joint: PrfScore,
    mut errors: Vec<SentenceErrors>,
) -> EvalReport {
    errors.sort_by(|a, b| a.id.cmp(&b.id));
    EvalReport { manifest: manifest.scored.clone(), ate, asc, joint, errors }
}

/// Scores one run's outputs against gold and assembles the report, using the
/// normalization and match mode recorded in the manifest.
pub fn evaluate<P: SentencePredictions>(
    corpus: &Corpus,
    outputs: &[P],
    manifest: &RunManifest,
    given_gold: Option<AscSummary>,
) -> Result<EvalReport, MetricsError> {
    let norm = &manifest.scored.norm;
    let mode = manifest.scored.match_mode;
    let ate = score_ate_with_mode(corpus, outputs, norm, mode)?;
    let joint = score_joint_with_mode(corpus, outputs, norm, mode)?;
    let errors = pair_errors(corpus, outputs, norm)?;
    let asc = AscSection { given_gold, pipelined_accuracy: pipelined_polarity_accuracy(&ate, &joint) };
    Ok(build_report(manifest, ate, asc, joint, errors))
}

impl EvalReport {
    /// The measured value for a task, in percent.
    pub fn measured(&self, task: Task) -> Option<f64> {
        match task {
            Task::AspectExtraction => Some(self.ate.f1 * 100.0),
            Task::PipelinedPolarity => Some(self.asc.pipelined_accuracy * 100.0),
            Task::Joint => Some(self.joint.f1 * 100.0),
            Task::GoldAspectPolarity => {
                self.asc.given_gold.as_ref().filter(|s| !s.undefined).map(|s| s.accuracy * 100.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Within,
    Below,
    Above,
    NotMeasured,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Within => "within",
            Verdict::Below => "below",
            Verdict::Above => "above",
            Verdict::NotMeasured => "not_measured",
        }
    }

    pub fn from_delta(delta: f64, tolerance: f64) -> Verdict {
        const EPS: f64 = 1e-9;
        if delta < -tolerance - EPS {
            Verdict::Below
        } else if delta > tolerance + EPS {
            Verdict::Above
        } else {
            Verdict::Within
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub model: String,
    pub task: Task,
    pub role: BaselineRole,
    pub baseline: f64,
    pub measured: Option<f64>,
    /// measured - baseline, in F1 points.
    pub delta: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub dataset: Dataset,
    pub tolerance: f64,
    pub entries: Vec<ComparisonEntry>,
}

impl ComparisonResult {
    /// True unless a target entry fell below tolerance.
    pub fn passed(&self) -> bool {
        !self.entries.iter().any(|e| e.role == BaselineRole::Target && e.verdict == Verdict::Below)
    }
}

/// Compares a report against every baseline for its dataset. The dataset is
/// inferred from the corpus name when not given.
pub fn compare_to_baseline(
    report: &EvalReport,
    dataset: Option<Dataset>,
    baselines: &PaperBaselines,
    tolerance: f64,
) -> Result<ComparisonResult, ReportError> {
    if tolerance.is_nan() || tolerance < 0.0 {
        return Err(ReportError::NegativeTolerance(tolerance));
    }
    let corpus = &report.manifest.corpus.name;
    let dataset =
        dataset.or_else(|| Dataset::infer(corpus)).ok_or_else(|| ReportError::UnknownDataset(corpus.clone()))?;
    let entries: Vec<ComparisonEntry> = baselines
        .for_dataset(dataset)
        .map(|b| {
            let measured = report.measured(b.task);
            let delta = measured.map(|m| m - b.f1);
            let verdict = delta.map_or(Verdict::NotMeasured, |d| Verdict::from_delta(d, tolerance));
            ComparisonEntry {
                model: b.model.clone(),
                task: b.task,
                role: b.role,
                baseline: b.f1,
                measured,
                delta,
                verdict,
            }
        })
        .collect();
    if entries.is_empty() {
        return Err(ReportError::UnknownDataset(dataset.to_string()));
    }
    Ok(ComparisonResult { dataset, tolerance, entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(format!("unknown format {s:?} (expected json, csv or markdown)")),
        }
    }
}

/// Fraction rendered as a percentage with two decimals.
fn pct(fraction: f64) -> String {
    format!("{:.2}", fraction * 100.0)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["dataset", "task", "metric", "value"]).expect("in-memory write");
    writer
}

fn write_row(writer: &mut csv::Writer<Vec<u8>>, dataset: &str, task: &str, metric: &str, value: &str) {
    writer.write_record([dataset, task, metric, value]).expect("in-memory write");
}

fn finish_csv(writer: csv::Writer<Vec<u8>>) -> Vec<u8> {
    writer.into_inner().expect("in-memory flush")
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("report serializes");
    out.push(b'\n');
    out
}

/// Rendering to the three output formats. Identical values render to
/// identical bytes.
pub trait Emit {
    fn emit(&self, format: Format) -> Vec<u8>;
}

pub fn emit<T: Emit + ?Sized>(document: &T, format: Format) -> Vec<u8> {
    document.emit(format)
}

fn prf_rows(writer: &mut csv::Writer<Vec<u8>>, dataset: &str, task: &str, score: &PrfScore) {
    write_row(writer, dataset, task, "precision", &pct(score.precision));
    write_row(writer, dataset, task, "recall", &pct(score.recall));
    write_row(writer, dataset, task, "f1", &pct(score.f1));
    write_row(writer, dataset, task, "tp", &score.counts.tp.to_string());
    write_row(writer, dataset, task, "fp", &score.counts.fp.to_string());
    write_row(writer, dataset, task, "fn", &score.counts.fn_.to_string());
}

impl Emit for EvalReport {
    fn emit(&self, format: Format) -> Vec<u8> {
        let dataset = self.manifest.corpus.name.as_str();
        match format {
            Format::Json => json_bytes(self),
            Format::Csv => {
                let mut w = csv_writer();
                prf_rows(&mut w, dataset, "ate", &self.ate);
                if let Some(gold) = &self.asc.given_gold {
                    write_row(&mut w, dataset, "asc", "accuracy", &pct(gold.accuracy));
                    write_row(&mut w, dataset, "asc", "micro_f1", &pct(gold.micro_f1));
                    write_row(&mut w, dataset, "asc", "macro_f1", &pct(gold.macro_f1));
                    for (class, score) in &gold.per_class {
                        write_row(&mut w, dataset, "asc", &format!("f1_{class}"), &pct(score.f1));
                    }
                    write_row(&mut w, dataset, "asc", "total", &gold.total.to_string());
                    write_row(&mut w, dataset, "asc", "correct", &gold.correct.to_string());
                }
                write_row(&mut w, dataset, "asc", "pipelined_accuracy", &pct(self.asc.pipelined_accuracy));
                prf_rows(&mut w, dataset, "joint", &self.joint);
                finish_csv(w)
            }
            Format::Markdown => render_report_markdown(self).into_bytes(),
        }
    }
}

fn render_report_markdown(report: &EvalReport) -> String {
    let m = &report.manifest;
    let mut out = format!("# Evaluation: {}\n\n", m.corpus.name);
    out.push_str(&format!("- corpus sha256: `{}`\n", m.corpus.sha256));
    out.push_str(&format!("- ATE backend: `{}`\n- ASC backend: `{}`\n\n", m.backends.ate, m.backends.asc));
    out.push_str("| Task | Precision | Recall | F1 | Accuracy |\n|---|---:|---:|---:|---:|\n");
    out.push_str(&format!(
        "| ATE | {} | {} | {} | - |\n",
        pct(report.ate.precision),
        pct(report.ate.recall),
        pct(report.ate.f1)
    ));
    match &report.asc.given_gold {
        Some(gold) => {
            let macro_avg = |f: fn(&PrfScore) -> f64| {
                gold.per_class.values().map(f).sum::<f64>() / gold.per_class.len().max(1) as f64
            };
            out.push_str(&format!(
                "| ASC | {} | {} | {} | {} |\n",
                pct(macro_avg(|s| s.precision)),
                pct(macro_avg(|s| s.recall)),
                pct(gold.macro_f1),
                pct(gold.accuracy)
            ));
        }
        None => out.push_str("| ASC | - | - | - | - |\n"),
    }
    out.push_str(&format!(
        "| Joint | {} | {} | {} | - |\n\n",
        pct(report.joint.precision),
        pct(report.joint.recall),
        pct(report.joint.f1)
    ));
    out.push_str(&format!("Pipelined polarity accuracy: {}\n\n", pct(report.asc.pipelined_accuracy)));
    if let Some(gold) = &report.asc.given_gold {
        out.push_str("| Polarity | Precision | Recall | F1 |\n|---|---:|---:|---:|\n");
        for (class, s) in &gold.per_class {
            out.push_str(&format!("| {class} | {} | {} | {} |\n", pct(s.precision), pct(s.recall), pct(s.f1)));
        }
        out.push('\n');
    }
    out.push_str(&format!("Sentences with errors: {}\n", report.errors.len()));
    out
}

impl Emit for ComparisonResult {
    fn emit(&self, format: Format) -> Vec<u8> {
        let dataset = self.dataset.as_str();
        let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        match format {
            Format::Json => json_bytes(self),
            Format::Csv => {
                let mut w = csv_writer();
                for e in &self.entries {
                    let task = format!("{} {}", e.model, e.task);
                    write_row(&mut w, dataset, &task, "baseline", &format!("{:.2}", e.baseline));
                    write_row(&mut w, dataset, &task, "measured", &num(e.measured));
                    write_row(&mut w, dataset, &task, "delta", &num(e.delta));
                    write_row(&mut w, dataset, &task, "verdict", e.verdict.as_str());
                }
                finish_csv(w)
            }
            Format::Markdown => {
                let mut out = format!("# Comparison: {dataset} (tolerance {:.2})\n\n", self.tolerance);
                out.push_str("| Model | Task | Role | Baseline | Measured | Delta | Verdict |\n");
                out.push_str("|---|---|---|---:|---:|---:|---|\n");
                for e in &self.entries {
                    let role = match e.role {
                        BaselineRole::Target => "target",
                        BaselineRole::Reference => "reference",
                    };
                    out.push_str(&format!(
                        "| {} | {} | {role} | {:.2} | {} | {} | {} |\n",
                        e.model,
                        e.task,
                        e.baseline,
                        num(e.measured),
                        num(e.delta),
                        e.verdict.as_str()
                    ));
                }
                out.into_bytes()
            }
        }
    }
}

/// Per-class F1 map keyed by polarity name, for callers that want plain strings.
pub fn per_class_f1(summary: &AscSummary) -> BTreeMap<String, f64> {
    summary.per_class.iter().map(|(p, s)| (p.to_string(), s.f1)).collect::<BTreeMap<_, _>>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{prf, MatchCounts};

    fn manifest(name: &str) -> RunManifest {
        RunManifest {
            timestamp_unix: 0,
            corpus_path: format!("{name}.xml"),
            parallelism: 1,
            scored: ReportManifest {
                corpus: CorpusInfo { name: name.into(), split: Split::Test, sha256: "00".into() },
                backends: BackendIds { ate: "a".into(), asc: "b".into() },
                service_version: None,
                filter: FilterConfig::default(),
                norm: NormConfig::default(),
                match_mode: MatchMode::Normalized,
                conflict_policy: ConflictPolicy::Drop,
                term_semantics: "multiset".into(),
                tool_version: TOOL_VERSION.into(),
            },
        }
    }

    fn report_with_joint(name: &str, joint_f1_pct: f64) -> EvalReport {
        let mut joint = prf(MatchCounts::new(1, 0, 0));
        joint.f1 = joint_f1_pct / 100.0;
        build_report(
            &manifest(name),
            prf(MatchCounts::new(1, 0, 0)),
            AscSection { given_gold: None, pipelined_accuracy: 1.0 },
            joint,
            vec![],
        )
    }

    #[test]
    fn published_values() {
        let b = PaperBaselines::published();
        assert_eq!(b.get(PIPELINE_MODEL, Dataset::Res14, Task::AspectExtraction), Some(91.39));
        assert_eq!(b.get(PIPELINE_MODEL, Dataset::Lap14, Task::PipelinedPolarity), Some(89.65));
        assert_eq!(b.get(PIPELINE_MODEL, Dataset::Res16, Task::PipelinedPolarity), Some(79.35));
        assert_eq!(b.get(PIPELINE_MODEL, Dataset::Res14, Task::Joint), Some(80.78));
        assert_eq!(b.get(PIPELINE_MODEL, Dataset::Lap14, Task::Joint), Some(80.94));
        assert_eq!(b.get("GRACE", Dataset::Lap14, Task::Joint), Some(70.71));
        assert_eq!(b.get("DeBERTa-V3-base-absa-v1", Dataset::Res15, Task::GoldAspectPolarity), Some(89.55));
        assert!(b.entries().iter().all(|e| !e.provenance.is_empty()));
    }

    #[test]
    fn baselines_are_frozen() {
        let b = PaperBaselines::published();
        let expected = [
            ("Res-14", "AE", 91.39),
            ("Res-14", "SP", 88.63),
            ("Lap-14", "AE", 91.56),
            ("Lap-14", "SP", 89.65),
            ("Res-15", "AE", 75.13),
            ("Res-15", "SP", 81.26),
            ("Res-16", "AE", 77.79),
            ("Res-16", "SP", 79.35),
            ("Res-14", "Joint", 80.78),
            ("Lap-14", "Joint", 80.94),
            ("Res-14", "Joint", 79.47),
            ("Lap-14", "Joint", 79.34),
            ("Res-14", "Joint", 77.26),
            ("Lap-14", "Joint", 70.71),
            ("Res-14", "ASC", 90.94),
            ("Lap-14", "ASC", 90.32),
            ("Res-15", "ASC", 89.55),
        ];
        let got: Vec<(String, String, f64)> =
            b.entries().iter().map(|e| (e.dataset.to_string(), e.task.to_string(), e.f1)).collect();
        let expected: Vec<(String, String, f64)> =
            expected.iter().map(|&(d, t, f)| (d.to_string(), t.to_string(), f)).collect();
        assert_eq!(got, expected);
        assert_eq!(b.checksum(), "9637ef31577d8d52c73f5cc05154e3c752f8d9d5c961380bbb5faa678bf77bc1");
    }

    #[test]
    fn dataset_names() {
        assert_eq!("Res-14".parse::<Dataset>().unwrap(), Dataset::Res14);
        assert_eq!("lap14".parse::<Dataset>().unwrap(), Dataset::Lap14);
        assert!("Res-17".parse::<Dataset>().is_err());
        assert_eq!(Dataset::infer("Restaurants_Test_Gold"), Some(Dataset::Res14));
        assert_eq!(Dataset::infer("Laptops_Test_Gold"), Some(Dataset::Lap14));
        assert_eq!(Dataset::infer("ABSA15_RestaurantsTest"), Some(Dataset::Res15));
        assert_eq!(Dataset::infer("EN_REST_SB1_TEST"), Some(Dataset::Res16));
        assert_eq!(Dataset::infer("sample"), None);
    }

    #[test]
    fn verdicts() {
        let b = PaperBaselines::published();
        let joint = |r: &ComparisonResult| {
            r.entries.iter().find(|e| e.model == PIPELINE_MODEL && e.task == Task::Joint).unwrap().clone()
        };

        let r = compare_to_baseline(&report_with_joint("x", 80.10), Some(Dataset::Res14), &b, 1.5).unwrap();
        let e = joint(&r);
        assert_eq!(e.verdict, Verdict::Within);
        assert!((e.delta.unwrap() + 0.68).abs() < 1e-9);

        let r = compare_to_baseline(&report_with_joint("x", 70.0), Some(Dataset::Res14), &b, 1.5).unwrap();
        assert_eq!(joint(&r).verdict, Verdict::Below);
        assert!(!r.passed());

        let r = compare_to_baseline(&report_with_joint("x", 80.78), Some(Dataset::Res14), &b, 0.0).unwrap();
        assert_eq!(joint(&r).verdict, Verdict::Within);

        assert!(matches!(
            compare_to_baseline(&report_with_joint("sample", 1.0), None, &b, 1.5),
            Err(ReportError::UnknownDataset(_))
        ));
        assert!(compare_to_baseline(&report_with_joint("x", 1.0), Some(Dataset::Res14), &b, -1.0).is_err());
        // dataset inferred from corpus name; no gold-aspect ASC was run
        let r = compare_to_baseline(&report_with_joint("Laptops_Test_Gold", 81.0), None, &b, 1.5).unwrap();
        assert_eq!(r.dataset, Dataset::Lap14);
        assert!(r.entries.iter().any(|e| e.verdict == Verdict::NotMeasured));
    }

    #[test]
    fn emission() {
        let report = report_with_joint("x", 100.0);
        let json = emit(&report, Format::Json);
        let back: EvalReport = serde_json::from_slice(&json).unwrap();
        assert_eq!(back, report);
        assert_eq!(emit(&back, Format::Json), json);

        let text = String::from_utf8(json.clone()).unwrap();
        let top: Vec<usize> = ["manifest", "ate", "asc", "joint", "errors"]
            .iter()
            .map(|k| text.find(&format!("\n  \"{k}\":")).unwrap())
            .collect();
        assert!(top.windows(2).all(|w| w[0] < w[1]));

        let csv = String::from_utf8(emit(&report, Format::Csv)).unwrap();
        assert!(csv.starts_with("dataset,task,metric,value\n"));
        assert!(csv.contains("x,joint,f1,100.00\n"));
        // 6 ATE + 1 ASC + 6 joint rows + header
        assert_eq!(csv.lines().count(), 14);

        let md = String::from_utf8(emit(&report, Format::Markdown)).unwrap();
        for task in ["| ATE |", "| ASC |", "| Joint |"] {
            assert_eq!(md.matches(task).count(), 1, "{task}");
        }

        let cmp = compare_to_baseline(&report, Some(Dataset::Res14), &PaperBaselines::published(), 1.5).unwrap();
        let csv = String::from_utf8(emit(&cmp, Format::Csv)).unwrap();
        assert_eq!(csv.lines().count(), 1 + 4 * cmp.entries.len());
        let back: ComparisonResult = serde_json::from_slice(&emit(&cmp, Format::Json)).unwrap();
        assert_eq!(back, cmp);
    }
}
