//! Term, polarity and pair scoring.
//!
//! ATE and joint scores are micro-averaged: per-sentence [`MatchCounts`] are
//! summed over the corpus before [`prf`] is applied. Matching is multiset
//! intersection over normalized strings, so a term predicted twice only earns
//! credit twice when gold lists it twice.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{AscBackend, BackendError};
use crate::corpus::{Corpus, Polarity, Span};
use crate::pipeline::parallel_map;

pub const DEFAULT_STRIP_CHARS: &str = "\"'`.,\u{201c}\u{201d}\u{2018}\u{2019}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormConfig {
    pub lowercase: bool,
    pub strip_chars: String,
    pub collapse_whitespace: bool,
    /// Drop a leading "the", "a" or "an".
    pub strip_articles: bool,
}

impl Default for NormConfig {
    fn default() -> Self {
        NormConfig {
            lowercase: true,
            strip_chars: DEFAULT_STRIP_CHARS.to_string(),
            collapse_whitespace: true,
            strip_articles: false,
        }
    }
}

fn normalize_pass(term: &str, cfg: &NormConfig) -> String {
    let mut s = if cfg.lowercase { term.to_lowercase() } else { term.to_string() };
    s = s.trim_matches(|c: char| c.is_whitespace() || cfg.strip_chars.contains(c)).to_string();
    if cfg.collapse_whitespace {
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    if cfg.strip_articles {
        for article in ["the", "a", "an"] {
            let prefix_len = article.len();
            let matches = s.len() > prefix_len
                && s.is_char_boundary(prefix_len)
                && s[..prefix_len].eq_ignore_ascii_case(article)
                && s[prefix_len..].starts_with(char::is_whitespace);
            if matches {
                s = s[prefix_len..].trim_start().to_string();
                break;
            }
        }
    }
    s
}

/// Normalizes a term for matching. Runs to a fixed point, which makes the
/// transformation idempotent by construction.
pub fn normalize_term(term: &str, cfg: &NormConfig) -> String {
    let mut current = normalize_pass(term, cfg);
    loop {
        let next = normalize_pass(&current, cfg);
        if next == current {
            return current;
        }
        current = next;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl MatchCounts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        MatchCounts { tp, fp, fn_ }
    }
}

impl Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, rhs: Self) -> Self {
        MatchCounts { tp: self.tp + rhs.tp, fp: self.fp + rhs.fp, fn_: self.fn_ + rhs.fn_ }
    }
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for MatchCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(MatchCounts::default(), Add::add)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: MatchCounts,
    /// Set when a 0/0 division was replaced by 0.
    #[serde(default)]
    pub undefined: bool,
}

/// Precision, recall and F1 with 0 substituted for every 0/0.
///
/// F1 is computed as `2tp / (2tp + fp + fn)`, which equals `2pr / (p + r)`
/// whenever `tp > 0` and avoids compounding rounding error.
pub fn prf(counts: MatchCounts) -> PrfScore {
    let MatchCounts { tp, fp, fn_ } = counts;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    PrfScore {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        counts,
        undefined: tp + fp == 0 || tp + fn_ == 0,
    }
}

fn multiset_counts<K: Ord>(gold: impl IntoIterator<Item = K>, pred: impl IntoIterator<Item = K>) -> MatchCounts {
    let mut gold_counts: BTreeMap<K, usize> = BTreeMap::new();
    let mut n_gold = 0;
    for key in gold {
        *gold_counts.entry(key).or_default() += 1;
        n_gold += 1;
    }
    let mut pred_counts: BTreeMap<K, usize> = BTreeMap::new();
    let mut n_pred = 0;
    for key in pred {
        *pred_counts.entry(key).or_default() += 1;
        n_pred += 1;
    }
    let tp = pred_counts.iter().map(|(k, &p)| gold_counts.get(k).map_or(0, |&g| g.min(p))).sum::<usize>();
    MatchCounts { tp, fp: n_pred - tp, fn_: n_gold - tp }
}

pub fn match_terms<S: AsRef<str>>(gold: &[S], pred: &[S], cfg: &NormConfig) -> MatchCounts {
    multiset_counts(
        gold.iter().map(|t| normalize_term(t.as_ref(), cfg)),
        pred.iter().map(|t| normalize_term(t.as_ref(), cfg)),
    )
}

pub fn match_pairs<S: AsRef<str>>(gold: &[(S, Polarity)], pred: &[(S, Polarity)], cfg: &NormConfig) -> MatchCounts {
    multiset_counts(
        gold.iter().map(|(t, p)| (normalize_term(t.as_ref(), cfg), *p)),
        pred.iter().map(|(t, p)| (normalize_term(t.as_ref(), cfg), *p)),
    )
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("prediction ids do not match the corpus: {0}")]
    IdMismatch(String),
    #[error("sentence {sentence_id}: gold aspect {term:?} is labeled conflict; apply a conflict policy first")]
    ConflictLabel { sentence_id: String, term: String },
    #[error("oracle input too large ({gold} gold, {pred} predicted; limit {limit})")]
    SizeExceeded { gold: usize, pred: usize, limit: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// How predicted aspects are matched against gold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// String equality over normalized terms.
    #[default]
    Normalized,
    /// Character spans must be identical; aspects without spans never match.
    Offsets,
}

/// One predicted (term, polarity) with its best-effort span.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedPair<'a> {
    pub term: &'a str,
    pub span: Option<Span>,
    pub polarity: Polarity,
}

/// Anything that carries the predictions for one sentence.
pub trait SentencePredictions {
    fn sentence_id(&self) -> &str;
    fn predicted_pairs(&self) -> Vec<PredictedPair<'_>>;
}

fn index_outputs<'a, P: SentencePredictions>(
    corpus: &Corpus,
    outputs: &'a [P],
) -> Result<HashMap<&'a str, &'a P>, MetricsError> {
    let mut by_id = HashMap::with_capacity(outputs.len());
    for output in outputs {
        if by_id.insert(output.sentence_id(), output).is_some() {
            return Err(MetricsError::IdMismatch(format!("duplicate prediction id {:?}", output.sentence_id())));
        }
    }
    let corpus_ids: HashSet<&str> = corpus.sentences.iter().map(|s| s.id.as_str()).collect();
    if let Some(missing) = corpus.sentences.iter().find(|s| !by_id.contains_key(s.id.as_str())) {
        return Err(MetricsError::IdMismatch(format!("no prediction for sentence {:?}", missing.id)));
    }
    if let Some(extra) = outputs.iter().find(|o| !corpus_ids.contains(o.sentence_id())) {
        return Err(MetricsError::IdMismatch(format!("prediction for unknown sentence {:?}", extra.sentence_id())));
    }
    Ok(by_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum MatchKey {
    Term(usize),
    Span(Option<Span>),
}

/// Per-sentence matching. Returns one `MatchCounts` per corpus sentence, in corpus order.
fn sentence_counts<P: SentencePredictions>(
    corpus: &Corpus,
    outputs: &[P],
    cfg: &NormConfig,
    mode: MatchMode,
    with_polarity: bool,
) -> Result<Vec<MatchCounts>, MetricsError> {
    let by_id = index_outputs(corpus, outputs)?;
    let mut all = Vec::with_capacity(corpus.sentences.len());
    for sentence in &corpus.sentences {
        let pred = by_id[sentence.id.as_str()].predicted_pairs();
        let counts = match mode {
            MatchMode::Normalized => {
                let gold = sentence.gold.iter().map(|g| (normalize_term(&g.term, cfg), g.polarity));
                let pred = pred.iter().map(|p| (normalize_term(p.term, cfg), p.polarity));
                if with_polarity {
                    multiset_counts(gold, pred)
                } else {
                    multiset_counts(gold.map(|(t, _)| t), pred.map(|(t, _)| t))
                }
            }
            MatchMode::Offsets => {
                // Unspanned items get unique keys so they can never match.
                let mut fresh = 0usize;
                let mut key = |span: Option<Span>| match span {
                    Some(_) => MatchKey::Span(span),
                    None => {
                        fresh += 1;
                        MatchKey::Term(fresh)
                    }
                };
                let gold: Vec<_> = sentence.gold.iter().map(|g| (key(g.span), g.polarity)).collect();
                let pred: Vec<_> = pred.iter().map(|p| (key(p.span), p.polarity)).collect();
                if with_polarity {
                    multiset_counts(gold, pred)
                } else {
                    multiset_counts(gold.into_iter().map(|(k, _)| k), pred.into_iter().map(|(k, _)| k))
                }
            }
        };
        all.push(counts);
    }
    Ok(all)
}

pub fn score_ate<P: SentencePredictions>(
    corpus: &Corpus,
    outputs: &[P],
    cfg: &NormConfig,
) -> Result<PrfScore, MetricsError> {
    score_ate_with_mode(corpus, outputs, cfg, MatchMode::Normalized)
}

pub fn score_ate_with_mode<P: SentencePredictions>(
    corpus: &Corpus,
    outputs: &[P],
    cfg: &NormConfig,
    mode: MatchMode,
) -> Result<PrfScore, MetricsError> {
    Ok(prf(sentence_counts(corpus, outputs, cfg, mode, false)?.into_iter().sum()))
}

pub fn score_joint<P: SentencePredictions>(
    corpus: &Corpus,
    outputs: &[P],
    cfg: &NormConfig,
) -> Result<PrfScore, MetricsError> {
    score_joint_with_mode(corpus, outputs, cfg, MatchMode::Normalized)
}

pub fn score_joint_with_mode<P: SentencePredictions>(
    corpus: &Corpus,
    outputs: &[P],
    cfg: &NormConfig,
    mode: MatchMode,
) -> Result<PrfScore, MetricsError> {
    Ok(prf(sentence_counts(corpus, outputs, cfg, mode, true)?.into_iter().sum()))
}

/// Polarity accuracy over aspects that were extracted correctly: joint hits
/// divided by term hits. 0 when no term matched.
pub fn pipelined_polarity_accuracy(ate: &PrfScore, joint: &PrfScore) -> f64 {
    if ate.counts.tp == 0 {
        0.0
    } else {
        joint.counts.tp as f64 / ate.counts.tp as f64
    }
}

/// Polarity scores when the classifier is handed the gold aspects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AscSummary {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Equals accuracy for single-label classification; kept for reporting.
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class: BTreeMap<Polarity, PrfScore>,
    /// Set when there was nothing to classify.
    pub undefined: bool,
}

impl AscSummary {
    pub fn from_labels(labels: &[(Polarity, Polarity)]) -> AscSummary {
        let total = labels.len();
        let correct = labels.iter().filter(|(gold, pred)| gold == pred).count();
        let mut per_class = BTreeMap::new();
        let mut summed = MatchCounts::default();
        for class in Polarity::PREDICTABLE {
            let tp = labels.iter().filter(|&&(g, p)| g == class && p == class).count();
            let fp = labels.iter().filter(|&&(g, p)| g != class && p == class).count();
            let fn_ = labels.iter().filter(|&&(g, p)| g == class && p != class).count();
            let counts = MatchCounts { tp, fp, fn_ };
            summed += counts;
            per_class.insert(class, prf(counts));
        }
        // averaged over classes seen in gold or predictions
        let present: Vec<f64> =
            per_class.values().filter(|s| s.counts != MatchCounts::default()).map(|s| s.f1).collect();
        let macro_f1 = if present.is_empty() { 0.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
        AscSummary {
            total,
            correct,
            accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
            micro_f1: prf(summed).f1,
            macro_f1,
            per_class,
            undefined: total == 0,
        }
    }
}

/// Classifies every gold (sentence, term) pair and scores the labels.
pub fn score_asc_given_gold(corpus: &Corpus, backend: &dyn AscBackend) -> Result<AscSummary, MetricsError> {
    score_asc_given_gold_par(corpus, backend, 1)
}

pub fn score_asc_given_gold_par(
    corpus: &Corpus,
    backend: &dyn AscBackend,
    parallelism: usize,
) -> Result<AscSummary, MetricsError> {
    let mut jobs = Vec::new();
    for sentence in &corpus.sentences {
        for aspect in &sentence.gold {
            if aspect.polarity == Polarity::Conflict {
                return Err(MetricsError::ConflictLabel {
                    sentence_id: sentence.id.clone(),
                    term: aspect.term.clone(),
                });
            }
            jobs.push((sentence.text.as_str(), aspect.term.as_str(), aspect.polarity));
        }
    }
    let gate = crate::pipeline::FlightGate::new(backend.single_flight());
    let labels = parallel_map(&jobs, parallelism, |_, &(text, term, gold)| {
        let prediction = gate.run(|| backend.classify(text, term))?;
        Ok::<_, BackendError>((gold, prediction.polarity))
    })
    .map_err(|(_, e)| e)?;
    Ok(AscSummary::from_labels(&labels))
}

/// Exhaustive maximum matching between two lists where items match iff equal.
/// Independent of the multiset counting used by [`match_terms`].
pub fn brute_force_oracle<K: PartialEq>(gold: &[K], pred: &[K]) -> Result<MatchCounts, MetricsError> {
    const LIMIT: usize = 12;
    if gold.len() > LIMIT || pred.len() > LIMIT {
        return Err(MetricsError::SizeExceeded { gold: gold.len(), pred: pred.len(), limit: LIMIT });
    }
    // best[(i, used)] = max matches of gold[i..] given predictions in `used` are taken
    fn search<K: PartialEq>(
        gold: &[K],
        pred: &[K],
        i: usize,
        used: u16,
        memo: &mut HashMap<(usize, u16), usize>,
    ) -> usize {
        if i == gold.len() {
            return 0;
        }
        if let Some(&hit) = memo.get(&(i, used)) {
            return hit;
        }
        let mut best = search(gold, pred, i + 1, used, memo);
        for (j, p) in pred.iter().enumerate() {
            if used & (1 << j) == 0 && *p == gold[i] {
                best = best.max(1 + search(gold, pred, i + 1, used | (1 << j), memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    let tp = search(gold, pred, 0, 0, &mut HashMap::new());
    Ok(MatchCounts { tp, fp: pred.len() - tp, fn_: gold.len() - tp })
}

pub fn brute_force_terms<S: AsRef<str>>(gold: &[S], pred: &[S], cfg: &NormConfig) -> Result<MatchCounts, MetricsError> {
    let gold: Vec<String> = gold.iter().map(|t| normalize_term(t.as_ref(), cfg)).collect();
    let pred: Vec<String> = pred.iter().map(|t| normalize_term(t.as_ref(), cfg)).collect();
    brute_force_oracle(&gold, &pred)
}

pub fn brute_force_pairs<S: AsRef<str>>(
    gold: &[(S, Polarity)],
    pred: &[(S, Polarity)],
    cfg: &NormConfig,
) -> Result<MatchCounts, MetricsError> {
    let gold: Vec<(String, Polarity)> = gold.iter().map(|(t, p)| (normalize_term(t.as_ref(), cfg), *p)).collect();
    let pred: Vec<(String, Polarity)> = pred.iter().map(|(t, p)| (normalize_term(t.as_ref(), cfg), *p)).collect();
    brute_force_oracle(&gold, &pred)
}

/// A (term, polarity) entry in an error listing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairEntry {
    pub term: String,
    pub polarity: Polarity,
}

/// Gold pairs that were missed and predicted pairs that were wrong, for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceErrors {
    pub id: String,
    pub missed: Vec<PairEntry>,
    pub spurious: Vec<PairEntry>,
}

/// Sentences whose predicted pairs differ from gold, sorted by id.
pub fn pair_errors<P: SentencePredictions>(
    corpus: &Corpus,
    outputs: &[P],
    cfg: &NormConfig,
) -> Result<Vec<SentenceErrors>, MetricsError> {
    let by_id = index_outputs(corpus, outputs)?;
    let mut listing = Vec::new();
    for sentence in &corpus.sentences {
        let mut remaining: Vec<(String, Polarity, &str)> = by_id[sentence.id.as_str()]
            .predicted_pairs()
            .into_iter()
            .map(|p| (normalize_term(p.term, cfg), p.polarity, p.term))
            .collect();
        let mut missed = Vec::new();
        for gold in &sentence.gold {
            let key = normalize_term(&gold.term, cfg);
            match remaining.iter().position(|(t, p, _)| *t == key && *p == gold.polarity) {
                Some(pos) => {
                    remaining.remove(pos);
                }
                None => missed.push(PairEntry { term: gold.term.clone(), polarity: gold.polarity }),
            }
        }
        let spurious: Vec<PairEntry> =
            remaining.into_iter().map(|(_, polarity, term)| PairEntry { term: term.to_string(), polarity }).collect();
        if !missed.is_empty() || !spurious.is_empty() {
            listing.push(SentenceErrors { id: sentence.id.clone(), missed, spurious });
        }
    }
    listing.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(listing)
}
