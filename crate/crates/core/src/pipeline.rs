//! Extract, filter, classify.
//!
//! A sentence goes through three stages: the ATE backend proposes candidate
//! terms, [`filter_aspects`] cleans them up, and the ASC backend labels each
//! surviving aspect, one call per (sentence, aspect) pair.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{AscBackend, AscPrediction, AteBackend, BackendError, Scores};
use crate::corpus::{Corpus, Polarity, Sentence, Span};
use crate::metrics::{normalize_term, NormConfig, PredictedPair, SentencePredictions, DEFAULT_STRIP_CHARS};

/// Raw ATE output, in backend order. May contain duplicates and noise.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateAspects {
    pub terms: Vec<String>,
}

impl<S: Into<String>> FromIterator<S> for CandidateAspects {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        CandidateAspects { terms: iter.into_iter().map(Into::into).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedAspect {
    pub term: String,
    pub normalized: String,
    pub span: Option<Span>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledAspect {
    pub aspect: PredictedAspect,
    pub polarity: Polarity,
    pub scores: Option<Scores>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Drop terms that do not occur in the (normalized) sentence.
    pub require_substring: bool,
    pub lowercase: bool,
    pub strip_chars: String,
    pub dedupe: bool,
    pub max_terms: Option<usize>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            require_substring: true,
            lowercase: true,
            strip_chars: DEFAULT_STRIP_CHARS.to_string(),
            dedupe: true,
            max_terms: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        match self.max_terms {
            Some(0) => Err("max_terms must be at least 1".into()),
            _ => Ok(()),
        }
    }

    /// Normalization used for dedupe and substring checks.
    pub fn norm(&self) -> NormConfig {
        NormConfig {
            lowercase: self.lowercase,
            strip_chars: self.strip_chars.clone(),
            collapse_whitespace: true,
            strip_articles: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTiming {
    pub ate: Duration,
    pub filter: Duration,
    pub asc: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendIds {
    pub ate: String,
    pub asc: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub sentence_id: String,
    pub labeled: Vec<LabeledAspect>,
    pub timing: StageTiming,
    pub backend_ids: BackendIds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ate,
    Asc,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Ate => "ATE",
            Stage::Asc => "ASC",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("sentence {sentence_id}: {stage} backend failed: {source}")]
    Backend {
        sentence_id: String,
        stage: Stage,
        #[source]
        source: BackendError,
    },
    #[error("stopped after {completed} completed sentences: {source}")]
    Aborted {
        completed: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl PipelineError {
    /// The underlying backend failure, if any.
    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            PipelineError::Backend { source, .. } => Some(source),
            PipelineError::Aborted { source, .. } => source.backend_error(),
            PipelineError::Config(_) => None,
        }
    }
}

/// Serializes calls into a backend when it declares single-flight.
#[derive(Debug, Default)]
pub struct FlightGate(Option<Mutex<()>>);

impl FlightGate {
    pub fn new(single_flight: bool) -> Self {
        FlightGate(single_flight.then(|| Mutex::new(())))
    }

    pub fn run<R>(&self, f: impl FnOnce() -> R) -> R {
        match &self.0 {
            Some(lock) => {
                let _held = lock.lock().unwrap_or_else(|e| e.into_inner());
                f()
            }
            None => f(),
        }
    }
}

/// Calls the ATE backend. Output is returned unmodified.
pub fn extract_aspects(ate: &dyn AteBackend, text: &str) -> Result<CandidateAspects, BackendError> {
    if text.is_empty() {
        return Err(BackendError::InvalidInput("cannot extract aspects from empty text".into()));
    }
    Ok(CandidateAspects { terms: ate.extract(text)? })
}

fn lowercase_chars(s: &str) -> Vec<char> {
    s.chars().map(|c| c.to_lowercase().next().unwrap_or(c)).collect()
}

/// Character offset of the first case-insensitive occurrence of `needle`.
fn find_case_insensitive(text: &str, needle: &str) -> Option<usize> {
    let hay = lowercase_chars(text);
    let needle = lowercase_chars(needle);
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    hay.windows(needle.len()).position(|w| w == needle.as_slice())
}

/// Refines candidate terms.
///
/// In order: trim whitespace and `strip_chars`, drop empties, locate the
/// first case-insensitive occurrence in `text` (the located slice becomes the
/// retained surface form), drop terms absent from the normalized text when
/// `require_substring`, drop repeated normalized forms when `dedupe`, then cap
/// at `max_terms`. Never produces a term that was not a candidate.
pub fn filter_aspects(candidates: &CandidateAspects, cfg: &FilterConfig, text: &str) -> Vec<PredictedAspect> {
    let norm = cfg.norm();
    let haystack = normalize_text(text, &norm);
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    for raw in &candidates.terms {
        let surface = raw.trim_matches(|c: char| c.is_whitespace() || cfg.strip_chars.contains(c));
        if surface.is_empty() {
            continue;
        }
        let (term, span) = match find_case_insensitive(text, surface) {
            Some(from) => {
                let span = Span::new(from, from + surface.chars().count());
                let slice: String = text.chars().skip(span.from).take(span.to - span.from).collect();
                (slice, Some(span))
            }
            None => (surface.to_string(), None),
        };
        let normalized = normalize_term(&term, &norm);
        if normalized.is_empty() {
            continue;
        }
        if cfg.require_substring && !haystack.contains(&normalized) {
            continue;
        }
        if cfg.dedupe && !seen.insert(normalized.clone()) {
            continue;
        }
        kept.push(PredictedAspect { term, normalized, span });
        if cfg.max_terms.is_some_and(|cap| kept.len() >= cap) {
            break;
        }
    }
    kept
}

/// Text normalized the way terms are for substring checks: case folded if
/// configured and whitespace collapsed.
fn normalize_text(text: &str, cfg: &NormConfig) -> String {
    let text = if cfg.lowercase { text.to_lowercase() } else { text.to_string() };
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn classify_aspect(
    asc: &dyn AscBackend,
    text: &str,
    aspect: &PredictedAspect,
) -> Result<LabeledAspect, BackendError> {
    if aspect.term.trim().is_empty() {
        return Err(BackendError::InvalidInput("cannot classify an empty aspect term".into()));
    }
    let AscPrediction { polarity, scores } = asc.classify(text, &aspect.term)?;
    let prediction = AscPrediction { polarity, scores };
    prediction.validate().map_err(BackendError::InvalidOutput)?;
    Ok(LabeledAspect { aspect: aspect.clone(), polarity: prediction.polarity, scores: prediction.scores })
}

fn run_sentence(
    ate: &dyn AteBackend,
    asc: &dyn AscBackend,
    gates: (&FlightGate, &FlightGate),
    sentence: &Sentence,
    cfg: &FilterConfig,
    backend_ids: &BackendIds,
) -> Result<PipelineOutput, PipelineError> {
    let fail = |stage, source| PipelineError::Backend { sentence_id: sentence.id.clone(), stage, source };

    let started = Instant::now();
    let candidates = gates.0.run(|| extract_aspects(ate, &sentence.text)).map_err(|e| fail(Stage::Ate, e))?;
    let ate_time = started.elapsed();

    let started = Instant::now();
    let aspects = filter_aspects(&candidates, cfg, &sentence.text);
    let filter_time = started.elapsed();

    let started = Instant::now();
    let mut labeled = Vec::with_capacity(aspects.len());
    for aspect in &aspects {
        labeled.push(gates.1.run(|| classify_aspect(asc, &sentence.text, aspect)).map_err(|e| fail(Stage::Asc, e))?);
    }
    let asc_time = started.elapsed();

    Ok(PipelineOutput {
        sentence_id: sentence.id.clone(),
        labeled,
        timing: StageTiming { ate: ate_time, filter: filter_time, asc: asc_time },
        backend_ids: backend_ids.clone(),
    })
}

/// Runs one sentence through extract, filter and classify.
pub fn run_pipeline(
    ate: &dyn AteBackend,
    asc: &dyn AscBackend,
    sentence: &Sentence,
    cfg: &FilterConfig,
) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let ids = BackendIds { ate: ate.id(), asc: asc.id() };
    let gates = (FlightGate::default(), FlightGate::default());
    run_sentence(ate, asc, (&gates.0, &gates.1), sentence, cfg, &ids)
}

/// Runs every sentence, up to `parallelism` at a time. Output follows corpus
/// order; the first failure stops the run.
pub fn run_corpus(
    ate: &dyn AteBackend,
    asc: &dyn AscBackend,
    corpus: &Corpus,
    cfg: &FilterConfig,
    parallelism: usize,
) -> Result<Vec<PipelineOutput>, PipelineError> {
    if parallelism == 0 {
        return Err(PipelineError::Config("parallelism must be at least 1".into()));
    }
    cfg.validate().map_err(PipelineError::Config)?;
    let ids = BackendIds { ate: ate.id(), asc: asc.id() };
    let ate_gate = FlightGate::new(ate.single_flight());
    let asc_gate = FlightGate::new(asc.single_flight());
    parallel_map(&corpus.sentences, parallelism, |_, sentence| {
        run_sentence(ate, asc, (&ate_gate, &asc_gate), sentence, cfg, &ids)
    })
    .map_err(|(completed, e)| PipelineError::Aborted { completed, source: Box::new(e) })
}

/// Ordered, fail-fast parallel map over a slice.
///
/// Workers pull indices from a shared counter, so results are placed by index
/// regardless of completion order. On failure no new items are started and
/// the error with the lowest index is returned with the number of items that
/// had completed successfully.
pub fn parallel_map<T, R, E, F>(items: &[T], parallelism: usize, f: F) -> Result<Vec<R>, (usize, E)>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(usize, &T) -> Result<R, E> + Sync,
{
    let workers = parallelism.max(1).min(items.len());
    if workers <= 1 {
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match f(i, item) {
                Ok(r) => out.push(r),
                Err(e) => return Err((out.len(), e)),
            }
        }
        return Ok(out);
    }

    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let failures: Mutex<Vec<(usize, E)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                match f(i, &items[i]) {
                    Ok(r) => slots.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(r),
                    Err(e) => {
                        stop.store(true, Ordering::SeqCst);
                        failures.lock().unwrap_or_else(|e| e.into_inner()).push((i, e));
                    }
                }
            });
        }
    });
    let slots = slots.into_inner().unwrap_or_else(|e| e.into_inner());
    let mut failures = failures.into_inner().unwrap_or_else(|e| e.into_inner());
    if !failures.is_empty() {
        failures.sort_by_key(|(i, _)| *i);
        let (_, e) = failures.swap_remove(0);
        let completed = slots.iter().filter(|s| s.is_some()).count();
        return Err((completed, e));
    }
    Ok(slots.into_iter().map(|s| s.expect("every slot filled")).collect())
}

/// One aspect in the prediction dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpAspect {
    pub term: String,
    /// Character span in the sentence, when the term was located.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    pub polarity: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Scores>,
}

/// One line of the prediction dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub id: String,
    pub aspects: Vec<DumpAspect>,
}

impl PredictionRecord {
    pub fn empty(id: impl Into<String>) -> Self {
        PredictionRecord { id: id.into(), aspects: Vec::new() }
    }
}

impl From<&PipelineOutput> for PredictionRecord {
    fn from(output: &PipelineOutput) -> Self {
        PredictionRecord {
            id: output.sentence_id.clone(),
            aspects: output
                .labeled
                .iter()
                .map(|l| DumpAspect {
                    term: l.aspect.term.clone(),
                    span: l.aspect.span,
                    polarity: l.polarity,
                    scores: l.scores.clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Error)]
#[error("prediction dump line {line}: {detail}")]
pub struct DumpError {
    pub line: usize,
    pub detail: String,
}

/// Line-delimited JSON, one record per sentence.
pub fn write_dump(records: &[PredictionRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record).expect("prediction record serializes");
        out.push(b'\n');
    }
    out
}

pub fn read_dump(bytes: &[u8]) -> Result<Vec<PredictionRecord>, DumpError> {
    let text = std::str::from_utf8(bytes).map_err(|e| DumpError { line: 0, detail: e.to_string() })?;
    let mut records = Vec::new();
    for (index, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(line).map_err(|e| DumpError { line: index + 1, detail: e.to_string() })?;
        if let Some(bad) = record.aspects.iter().find(|a| !a.polarity.is_predictable()) {
            return Err(DumpError {
                line: index + 1,
                detail: format!("aspect {:?} has polarity {}", bad.term, bad.polarity),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// A dump lined up with its corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDump {
    /// One record per corpus sentence, in corpus order.
    pub records: Vec<PredictionRecord>,
    /// Corpus ids the dump had no record for; they were filled with empty predictions.
    pub missing: Vec<String>,
}

/// Orders dump records by corpus sentence, filling absent sentences with
/// empty predictions. Ids unknown to the corpus, and repeated ids, are errors.
pub fn align_to_corpus(corpus: &Corpus, records: Vec<PredictionRecord>) -> Result<AlignedDump, String> {
    let mut by_id: HashMap<String, PredictionRecord> = HashMap::with_capacity(records.len());
    for record in records {
        if by_id.contains_key(&record.id) {
            return Err(format!("duplicate prediction id {:?}", record.id));
        }
        by_id.insert(record.id.clone(), record);
    }
    let mut aligned = Vec::with_capacity(corpus.sentences.len());
    let mut missing = Vec::new();
    for sentence in &corpus.sentences {
        match by_id.remove(&sentence.id) {
            Some(record) => aligned.push(record),
            None => {
                missing.push(sentence.id.clone());
                aligned.push(PredictionRecord::empty(sentence.id.clone()));
            }
        }
    }
    if !by_id.is_empty() {
        let mut unknown: Vec<_> = by_id.into_keys().collect();
        unknown.sort();
        return Err(format!("predictions for sentences not in the corpus: {}", unknown.join(", ")));
    }
    Ok(AlignedDump { records: aligned, missing })
}

impl SentencePredictions for PipelineOutput {
    fn sentence_id(&self) -> &str {
        &self.sentence_id
    }

    fn predicted_pairs(&self) -> Vec<PredictedPair<'_>> {
        self.labeled
            .iter()
            .map(|l| PredictedPair { term: &l.aspect.term, span: l.aspect.span, polarity: l.polarity })
            .collect()
    }
}

impl SentencePredictions for PredictionRecord {
    fn sentence_id(&self) -> &str {
        &self.id
    }

    fn predicted_pairs(&self) -> Vec<PredictedPair<'_>> {
        self.aspects.iter().map(|a| PredictedPair { term: &a.term, span: a.span, polarity: a.polarity }).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{LexiconBackend, LexiconConfig};
    use crate::corpus::{sample_corpus, SAMPLE_TEXT};

    struct Fixed(Vec<&'static str>);

    impl AteBackend for Fixed {
        fn id(&self) -> String {
            "fixed".into()
        }
        fn extract(&self, _: &str) -> Result<Vec<String>, BackendError> {
            Ok(self.0.iter().map(|s| s.to_string()).collect())
        }
    }

    struct Panicking;

    impl AscBackend for Panicking {
        fn id(&self) -> String {
            "panicking".into()
        }
        fn classify(&self, _: &str, _: &str) -> Result<AscPrediction, BackendError> {
            panic!("ASC must not be called")
        }
    }

    #[test]
    fn filter_dedupes_and_spans() {
        let out = filter_aspects(&["price", "price", ""].into_iter().collect(), &FilterConfig::default(), SAMPLE_TEXT);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].term, "price");
        assert_eq!(out[0].normalized, "price");
        assert_eq!(out[0].span, Some(Span::new(4, 9)));
    }

    #[test]
    fn filter_edge_cases() {
        let cfg = FilterConfig::default();
        assert!(filter_aspects(&CandidateAspects::default(), &cfg, SAMPLE_TEXT).is_empty());
        assert!(filter_aspects(&["battery life"].into_iter().collect(), &cfg, SAMPLE_TEXT).is_empty());
        let loose = FilterConfig { require_substring: false, ..cfg.clone() };
        let kept = filter_aspects(&["battery life"].into_iter().collect(), &loose, SAMPLE_TEXT);
        assert_eq!(kept[0].span, None);

        // case and punctuation: surface form is taken from the text
        let out = filter_aspects(&["\"PRICE\".", " Restaurant "].into_iter().collect(), &cfg, SAMPLE_TEXT);
        assert_eq!(out.iter().map(|a| a.term.as_str()).collect::<Vec<_>>(), ["price", "restaurant"]);

        let capped = FilterConfig { max_terms: Some(1), ..cfg.clone() };
        assert_eq!(filter_aspects(&["restaurant", "price"].into_iter().collect(), &capped, SAMPLE_TEXT).len(), 1);

        let keep_dupes = FilterConfig { dedupe: false, ..cfg };
        assert_eq!(filter_aspects(&["price", "Price"].into_iter().collect(), &keep_dupes, SAMPLE_TEXT).len(), 2);
        assert!(FilterConfig { max_terms: Some(0), ..FilterConfig::default() }.validate().is_err());
    }

    #[test]
    fn sample_sentence_with_lexicon() {
        let lexicon = LexiconBackend::new(LexiconConfig::builtin()).unwrap();
        let sentence = &sample_corpus().sentences[0];
        let out = run_pipeline(&lexicon, &lexicon, sentence, &FilterConfig::default()).unwrap();
        let pairs: Vec<_> = out.labeled.iter().map(|l| (l.aspect.term.as_str(), l.polarity)).collect();
        assert_eq!(pairs, [("price", Polarity::Negative), ("restaurant", Polarity::Positive)]);
        assert_eq!(out.backend_ids.ate, AteBackend::id(&lexicon));
    }

    #[test]
    fn empty_extraction_skips_asc() {
        let sentence = &sample_corpus().sentences[0];
        let out = run_pipeline(&Fixed(vec![]), &Panicking, sentence, &FilterConfig::default()).unwrap();
        assert!(out.labeled.is_empty());
        let candidates = extract_aspects(&Fixed(vec!["price", "price"]), SAMPLE_TEXT).unwrap();
        assert_eq!(candidates.terms, ["price", "price"]);
    }

    #[test]
    fn corpus_order_and_failures() {
        let lexicon = LexiconBackend::new(LexiconConfig::builtin()).unwrap();
        let corpus = Corpus::new(
            "three",
            vec![
                Sentence::new("a", "Great food."),
                Sentence::new("b", "Rude staff."),
                Sentence::new("c", "The wine list."),
            ],
        );
        for parallelism in [1, 2, 8] {
            let out = run_corpus(&lexicon, &lexicon, &corpus, &FilterConfig::default(), parallelism).unwrap();
            assert_eq!(out.iter().map(|o| o.sentence_id.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
        }
        assert!(run_corpus(&lexicon, &lexicon, &Corpus::default(), &FilterConfig::default(), 4).unwrap().is_empty());
        assert!(matches!(
            run_corpus(&lexicon, &lexicon, &corpus, &FilterConfig::default(), 0),
            Err(PipelineError::Config(_))
        ));

        // "wine" is extracted but the ASC stub cannot classify it
        struct Failing;
        impl AscBackend for Failing {
            fn id(&self) -> String {
                "failing".into()
            }
            fn classify(&self, _: &str, term: &str) -> Result<AscPrediction, BackendError> {
                Err(BackendError::Unavailable { backend: "failing".into(), detail: term.into() })
            }
        }
        let only_c = Corpus::new("c", vec![Sentence::new("a", "Nothing."), Sentence::new("c", "The wine list.")]);
        match run_corpus(&lexicon, &Failing, &only_c, &FilterConfig::default(), 1) {
            Err(PipelineError::Aborted { completed, source }) => {
                assert_eq!(completed, 1);
                assert!(
                    matches!(*source, PipelineError::Backend { stage: Stage::Asc, ref sentence_id, .. } if sentence_id == "c")
                );
            }
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn parallel_map_reports_lowest_failure() {
        let items: Vec<usize> = (0..100).collect();
        let ok = parallel_map(&items, 7, |i, &x| Ok::<_, ()>(i * x)).unwrap();
        assert_eq!(ok, items.iter().map(|x| x * x).collect::<Vec<_>>());
        let err = parallel_map(&items, 1, |_, &x| if x == 5 { Err(x) } else { Ok(x) }).unwrap_err();
        assert_eq!(err, (5, 5));
    }

    #[test]
    fn dump_roundtrip() {
        let records = vec![
            PredictionRecord {
                id: "S1".into(),
                aspects: vec![DumpAspect {
                    term: "price".into(),
                    span: None,
                    polarity: Polarity::Negative,
                    scores: None,
                }],
            },
            PredictionRecord::empty("S2"),
        ];
        let bytes = write_dump(&records);
        assert_eq!(
            String::from_utf8_lossy(&bytes).lines().next().unwrap(),
            r#"{"id":"S1","aspects":[{"term":"price","polarity":"negative"}]}"#
        );
        assert_eq!(read_dump(&bytes).unwrap(), records);
        assert!(read_dump(b"{\"id\":\"x\"}\n").is_err());
        assert!(read_dump(br#"{"id":"x","aspects":[{"term":"a","polarity":"conflict"}]}"#).is_err());
    }

    #[test]
    fn alignment_fills_missing_and_rejects_unknown() {
        let corpus = Corpus::new("c", vec![Sentence::new("a", "x"), Sentence::new("b", "y")]);
        let aligned = align_to_corpus(&corpus, vec![PredictionRecord::empty("b")]).unwrap();
        assert_eq!(aligned.missing, ["a"]);
        assert_eq!(aligned.records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!(align_to_corpus(&corpus, vec![PredictionRecord::empty("z")]).is_err());
        assert!(align_to_corpus(&corpus, vec![PredictionRecord::empty("a"), PredictionRecord::empty("a")]).is_err());
    }
}
