//! Python bindings for the harness.
//!
//! Structured values (sentences, reports, comparisons) cross the boundary as
//! plain dicts and lists, converted through JSON.

use std::path::PathBuf;
use std::sync::Arc;

use absa_core::backends::{
    AscBackend, AteBackend, LexiconBackend, LexiconConfig, RemoteBackend, RemoteEndpointConfig, ReplayStore,
};
use absa_core::corpus::{
    apply_conflict_policy, corpus_stats, load_corpus, parse_semeval_xml, serialize_semeval_xml, sha256_hex,
    validate_corpus, ConflictPolicy, Polarity, Sentence,
};
use absa_core::metrics::{self, score_asc_given_gold_par, MatchCounts, MatchMode, NormConfig};
use absa_core::pipeline::{run_corpus, run_pipeline, BackendIds, FilterConfig, PredictionRecord};
use absa_core::report::{
    compare_to_baseline, evaluate, CorpusInfo, Dataset, EvalReport, PaperBaselines, ReportManifest, RunManifest,
    DEFAULT_TOLERANCE, TOOL_VERSION,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(absa_harness, BackendError, PyRuntimeError);

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn backend_err(e: impl ToString) -> PyErr {
    BackendError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

fn polarity(s: &str) -> PyResult<Polarity> {
    s.parse().map_err(value_err)
}

/// An annotated review corpus.
#[pyclass(module = "absa_harness", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Corpus {
    inner: absa_core::corpus::Corpus,
    sha256: String,
}

#[pymethods]
impl Corpus {
    /// Parses SemEval XML from a string or bytes.
    #[staticmethod]
    fn from_xml(data: &Bound<'_, PyAny>) -> PyResult<Corpus> {
        let bytes: Vec<u8> = match data.extract::<String>() {
            Ok(s) => s.into_bytes(),
            Err(_) => data.extract()?,
        };
        let inner = parse_semeval_xml(&bytes).map_err(value_err)?;
        Ok(Corpus { inner, sha256: sha256_hex(&bytes) })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Corpus> {
        let file = load_corpus(&path).map_err(value_err)?;
        Ok(Corpus { inner: file.corpus, sha256: file.sha256 })
    }

    /// The one-sentence restaurant example.
    #[staticmethod]
    fn sample() -> Corpus {
        let inner = absa_core::corpus::sample_corpus();
        let sha256 = sha256_hex(&serialize_semeval_xml(&inner));
        Corpus { inner, sha256 }
    }

    fn to_xml(&self) -> Vec<u8> {
        serialize_semeval_xml(&self.inner)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn split(&self) -> &'static str {
        self.inner.split.as_str()
    }

    #[getter]
    fn sha256(&self) -> String {
        self.sha256.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.sentences.len()
    }

    fn __repr__(&self) -> String {
        format!("Corpus(name={:?}, sentences={})", self.inner.name, self.inner.sentences.len())
    }

    fn sentences(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.sentences)
    }

    /// `(sentence_id, rule, detail)` for every broken invariant.
    fn validate(&self) -> Vec<(String, String, String)> {
        validate_corpus(&self.inner).into_iter().map(|v| (v.sentence_id, v.rule, v.detail)).collect()
    }

    fn stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &corpus_stats(&self.inner))
    }

    /// Applies `drop`, `keep` or `map_to_neutral` to conflict labels.
    fn with_conflict_policy(&self, policy: &str) -> PyResult<Corpus> {
        let policy: ConflictPolicy = policy.parse().map_err(value_err)?;
        Ok(Corpus { inner: apply_conflict_policy(&self.inner, policy), sha256: self.sha256.clone() })
    }
}

/// An extractor and a classifier wired through the filter.
///
/// Backends are `"lexicon"`, `"replay"` (needs `fixtures`) or `"remote"`
/// (needs `endpoint`).
#[pyclass(module = "absa_harness", frozen)]
struct Pipeline {
    ate: Arc<dyn AteBackend>,
    asc: Arc<dyn AscBackend>,
    filter: FilterConfig,
}

struct Pool {
    fixtures: Option<PathBuf>,
    endpoint: Option<String>,
    lexicon: Option<Arc<LexiconBackend>>,
    replay: Option<Arc<ReplayStore>>,
    remote: Option<Arc<RemoteBackend>>,
}

impl Pool {
    fn lexicon(&mut self) -> PyResult<Arc<LexiconBackend>> {
        if self.lexicon.is_none() {
            self.lexicon = Some(Arc::new(LexiconBackend::new(LexiconConfig::builtin()).map_err(value_err)?));
        }
        Ok(self.lexicon.clone().unwrap())
    }

    fn replay(&mut self) -> PyResult<Arc<ReplayStore>> {
        if self.replay.is_none() {
            let path = self.fixtures.as_ref().ok_or_else(|| value_err("replay backend needs fixtures"))?;
            self.replay = Some(Arc::new(ReplayStore::load(path).map_err(backend_err)?));
        }
        Ok(self.replay.clone().unwrap())
    }

    fn remote(&mut self) -> PyResult<Arc<RemoteBackend>> {
        if self.remote.is_none() {
            let url = self.endpoint.as_ref().ok_or_else(|| value_err("remote backend needs an endpoint"))?;
            let client = RemoteBackend::new(RemoteEndpointConfig::new(url.clone())).map_err(value_err)?;
            self.remote = Some(Arc::new(client));
        }
        Ok(self.remote.clone().unwrap())
    }

    fn ate(&mut self, kind: &str) -> PyResult<Arc<dyn AteBackend>> {
        Ok(match kind {
            "lexicon" => self.lexicon()?,
            "replay" => self.replay()?,
            "remote" => self.remote()?,
            other => return Err(value_err(format!("unknown backend {other:?}"))),
        })
    }

    fn asc(&mut self, kind: &str) -> PyResult<Arc<dyn AscBackend>> {
        Ok(match kind {
            "lexicon" => self.lexicon()?,
            "replay" => self.replay()?,
            "remote" => self.remote()?,
            other => return Err(value_err(format!("unknown backend {other:?}"))),
        })
    }
}

impl Pipeline {
    fn manifest(&self, corpus: &Corpus) -> RunManifest {
        let scored = ReportManifest {
            corpus: CorpusInfo {
                name: corpus.inner.name.clone(),
                split: corpus.inner.split,
                sha256: corpus.sha256.clone(),
            },
            backends: BackendIds { ate: self.ate.id(), asc: self.asc.id() },
            service_version: None,
            filter: self.filter.clone(),
            norm: self.filter.norm(),
            match_mode: MatchMode::Normalized,
            conflict_policy: ConflictPolicy::Drop,
            term_semantics: "multiset".into(),
            tool_version: TOOL_VERSION.into(),
        };
        RunManifest::now(corpus.inner.name.clone(), 1, scored)
    }

    fn records(&self, py: Python<'_>, corpus: &Corpus, parallelism: usize) -> PyResult<Vec<PredictionRecord>> {
        let outputs = py
            .detach(|| run_corpus(&*self.ate, &*self.asc, &corpus.inner, &self.filter, parallelism))
            .map_err(backend_err)?;
        Ok(outputs.iter().map(PredictionRecord::from).collect())
    }
}

#[pymethods]
impl Pipeline {
    #[new]
    #[pyo3(signature = (ate = "lexicon", asc = None, fixtures = None, endpoint = None, max_terms = None))]
    fn new(
        ate: &str,
        asc: Option<&str>,
        fixtures: Option<PathBuf>,
        endpoint: Option<String>,
        max_terms: Option<usize>,
    ) -> PyResult<Pipeline> {
        let mut pool = Pool { fixtures, endpoint, lexicon: None, replay: None, remote: None };
        let filter = FilterConfig { max_terms, ..FilterConfig::default() };
        filter.validate().map_err(value_err)?;
        Ok(Pipeline { ate: pool.ate(ate)?, asc: pool.asc(asc.unwrap_or(ate))?, filter })
    }

    #[getter]
    fn backends(&self) -> (String, String) {
        (self.ate.id(), self.asc.id())
    }

    /// `[(term, polarity), ...]` for one sentence.
    fn predict(&self, py: Python<'_>, text: &str) -> PyResult<Vec<(String, String)>> {
        let sentence = Sentence::new("input", text);
        let out = py.detach(|| run_pipeline(&*self.ate, &*self.asc, &sentence, &self.filter)).map_err(backend_err)?;
        Ok(out.labeled.into_iter().map(|l| (l.aspect.term, l.polarity.as_str().to_string())).collect())
    }

    /// One prediction record per sentence, in corpus order.
    #[pyo3(signature = (corpus, parallelism = 1))]
    fn run(&self, py: Python<'_>, corpus: &Corpus, parallelism: usize) -> PyResult<Py<PyAny>> {
        let records = self.records(py, corpus, parallelism)?;
        to_py(py, &records)
    }

    /// Runs the corpus and scores it. Conflict labels are dropped first.
    #[pyo3(signature = (corpus, parallelism = 1, gold_asc = true))]
    fn evaluate(&self, py: Python<'_>, corpus: &Corpus, parallelism: usize, gold_asc: bool) -> PyResult<Py<PyAny>> {
        let corpus = corpus.with_conflict_policy("drop")?;
        let records = self.records(py, &corpus, parallelism)?;
        let given = if gold_asc {
            Some(py.detach(|| score_asc_given_gold_par(&corpus.inner, &*self.asc, parallelism)).map_err(backend_err)?)
        } else {
            None
        };
        let report = evaluate(&corpus.inner, &records, &self.manifest(&corpus), given).map_err(value_err)?;
        to_py(py, &report)
    }
}

/// `(precision, recall, f1)` as fractions.
#[pyfunction]
#[pyo3(name = "prf")]
fn py_prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let s = metrics::prf(MatchCounts::new(tp, fp, fn_));
    (s.precision, s.recall, s.f1)
}

/// `(tp, fp, fn)` for multisets of terms after normalization.
#[pyfunction]
fn match_terms(gold: Vec<String>, pred: Vec<String>) -> (usize, usize, usize) {
    let c = metrics::match_terms(&gold, &pred, &NormConfig::default());
    (c.tp, c.fp, c.fn_)
}

/// `(tp, fp, fn)` for multisets of `(term, polarity)` pairs.
#[pyfunction]
fn match_pairs(gold: Vec<(String, String)>, pred: Vec<(String, String)>) -> PyResult<(usize, usize, usize)> {
    let convert = |pairs: Vec<(String, String)>| -> PyResult<Vec<(String, Polarity)>> {
        pairs.into_iter().map(|(t, p)| Ok((t, polarity(&p)?))).collect()
    };
    let c = metrics::match_pairs(&convert(gold)?, &convert(pred)?, &NormConfig::default());
    Ok((c.tp, c.fp, c.fn_))
}

#[pyfunction]
fn normalize_term(term: &str) -> String {
    metrics::normalize_term(term, &NormConfig::default())
}

/// Published reference numbers, one dict per entry.
#[pyfunction]
fn baselines(py: Python<'_>) -> PyResult<Py<PyAny>> {
    to_py(py, &PaperBaselines::published().entries())
}

/// Compares a report dict against the published numbers for `dataset`
/// (inferred from the corpus name when omitted).
#[pyfunction]
#[pyo3(signature = (report, dataset = None, tolerance = DEFAULT_TOLERANCE))]
fn compare(py: Python<'_>, report: &Bound<'_, PyAny>, dataset: Option<&str>, tolerance: f64) -> PyResult<Py<PyAny>> {
    let report: EvalReport = from_py(py, report)?;
    let dataset: Option<Dataset> = dataset.map(str::parse).transpose().map_err(value_err)?;
    let result = compare_to_baseline(&report, dataset, &PaperBaselines::published(), tolerance).map_err(value_err)?;
    let passed = result.passed();
    let out = to_py(py, &result)?;
    out.bind(py).set_item("passed", passed)?;
    Ok(out)
}

#[pymodule]
pub fn absa_harness(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", TOOL_VERSION)?;
    m.add("BackendError", m.py().get_type::<BackendError>())?;
    m.add_class::<Corpus>()?;
    m.add_class::<Pipeline>()?;
    m.add_function(wrap_pyfunction!(py_prf, m)?)?;
    m.add_function(wrap_pyfunction!(match_terms, m)?)?;
    m.add_function(wrap_pyfunction!(match_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_term, m)?)?;
    m.add_function(wrap_pyfunction!(baselines, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
