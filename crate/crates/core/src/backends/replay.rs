//! Record/replay fixtures.
//!
//! A fixture file is line-delimited JSON with two record kinds:
//!
//! ```text
//! {"kind":"ate","key":"<sha256(text)>","text":"...","terms":["..."]}
//! {"kind":"asc","key":"<sha256(text \0 normalized term)>","term":"...","polarity":"negative","scores":{...}}
//! ```
//!
//! Lookups are by content hash, so one fixture file serves any corpus that
//! contains the recorded texts. A missing key is always an error.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{asc_key, ate_key, short_hash, AscBackend, AscPrediction, AteBackend, BackendError, Scores};
use crate::corpus::Polarity;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FixtureRecord {
    Ate {
        key: String,
        text: String,
        terms: Vec<String>,
    },
    Asc {
        key: String,
        term: String,
        polarity: Polarity,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scores: Option<Scores>,
    },
}

impl FixtureRecord {
    pub fn key(&self) -> &str {
        match self {
            FixtureRecord::Ate { key, .. } | FixtureRecord::Asc { key, .. } => key,
        }
    }

    pub fn ate(text: &str, terms: &[String]) -> Self {
        FixtureRecord::Ate { key: ate_key(text), text: text.to_string(), terms: terms.to_vec() }
    }

    pub fn asc(text: &str, term: &str, prediction: &AscPrediction) -> Self {
        FixtureRecord::Asc {
            key: asc_key(text, term),
            term: term.to_string(),
            polarity: prediction.polarity,
            scores: prediction.scores.clone(),
        }
    }
}

/// Path of the marker written next to a fixture whose recording failed.
pub fn incomplete_marker(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".incomplete");
    path.with_file_name(name)
}

#[derive(Debug, Clone)]
pub struct ReplayStore {
    ate: HashMap<String, Vec<String>>,
    asc: HashMap<String, AscPrediction>,
    source: PathBuf,
    digest: String,
}

fn is_hex_digest(key: &str) -> bool {
    key.len() == 64 && key.bytes().all(|b| b.is_ascii_hexdigit())
}

impl ReplayStore {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let marker = incomplete_marker(path);
        if marker.exists() {
            return Err(BackendError::FixtureCorrupt {
                path: path.to_path_buf(),
                line: 0,
                detail: format!("recording did not finish (see {})", marker.display()),
            });
        }
        let bytes = std::fs::read(path).map_err(|source| BackendError::Io { path: path.to_path_buf(), source })?;
        Self::from_bytes(&bytes, path)
    }

    pub fn from_bytes(bytes: &[u8], source: &Path) -> Result<Self, BackendError> {
        let corrupt =
            |line: usize, detail: String| BackendError::FixtureCorrupt { path: source.to_path_buf(), line, detail };
        let text = std::str::from_utf8(bytes).map_err(|e| corrupt(0, e.to_string()))?;
        let mut store = ReplayStore {
            ate: HashMap::new(),
            asc: HashMap::new(),
            source: source.to_path_buf(),
            digest: short_hash(bytes),
        };
        for (index, line) in text.lines().enumerate() {
            let line_no = index + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(line).map_err(|e| corrupt(line_no, e.to_string()))?;
            if !is_hex_digest(record.key()) {
                return Err(corrupt(line_no, format!("key {:?} is not a SHA-256 hex digest", record.key())));
            }
            let duplicate = match record {
                FixtureRecord::Ate { key, text, terms } => {
                    if key != ate_key(&text) {
                        return Err(corrupt(line_no, "key does not hash the recorded text".into()));
                    }
                    store.ate.insert(key.clone(), terms).map(|_| key)
                }
                FixtureRecord::Asc { key, polarity, scores, .. } => {
                    let prediction = AscPrediction { polarity, scores };
                    prediction.validate().map_err(|e| corrupt(line_no, e))?;
                    store.asc.insert(key.clone(), prediction).map(|_| key)
                }
            };
            if let Some(key) = duplicate {
                return Err(BackendError::DuplicateKey { path: source.to_path_buf(), key });
            }
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.ate.len() + self.asc.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source(&self) -> &Path {
        &self.source
    }

    pub fn replay_ate(&self, text: &str) -> Result<Vec<String>, BackendError> {
        let key = ate_key(text);
        self.ate.get(&key).cloned().ok_or(BackendError::MissingFixture { kind: "ate", key })
    }

    pub fn replay_asc(&self, text: &str, term: &str) -> Result<AscPrediction, BackendError> {
        let key = asc_key(text, term);
        self.asc.get(&key).cloned().ok_or(BackendError::MissingFixture { kind: "asc", key })
    }
}

impl AteBackend for ReplayStore {
    fn id(&self) -> String {
        format!("replay:{}", self.digest)
    }

    fn extract(&self, text: &str) -> Result<Vec<String>, BackendError> {
        self.replay_ate(text)
    }
}

impl AscBackend for ReplayStore {
    fn id(&self) -> String {
        format!("replay:{}", self.digest)
    }

    fn classify(&self, text: &str, term: &str) -> Result<AscPrediction, BackendError> {
        self.replay_asc(text, term)
    }
}

/// Serialized appender shared by recording wrappers. Each key is written at
/// most once so the resulting file always loads.
#[derive(Debug)]
pub struct FixtureSink {
    path: PathBuf,
    state: Mutex<(BufWriter<File>, HashSet<String>)>,
}

impl FixtureSink {
    /// Starts a fresh fixture file, truncating any existing one.
    pub fn create(path: &Path) -> Result<Arc<Self>, BackendError> {
        let io = |source| BackendError::Io { path: path.to_path_buf(), source };
        let file = File::create(path).map_err(io)?;
        let marker = incomplete_marker(path);
        if marker.exists() {
            std::fs::remove_file(&marker).map_err(io)?;
        }
        Ok(Arc::new(FixtureSink {
            path: path.to_path_buf(),
            state: Mutex::new((BufWriter::new(file), HashSet::new())),
        }))
    }

    /// Appends to an existing fixture file, skipping keys it already holds.
    pub fn append(path: &Path) -> Result<Arc<Self>, BackendError> {
        let io = |source| BackendError::Io { path: path.to_path_buf(), source };
        let mut seen = HashSet::new();
        if path.exists() {
            let bytes = std::fs::read(path).map_err(io)?;
            for line in String::from_utf8_lossy(&bytes).lines().filter(|l| !l.trim().is_empty()) {
                if let Ok(record) = serde_json::from_str::<FixtureRecord>(line) {
                    seen.insert(record.key().to_string());
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        Ok(Arc::new(FixtureSink { path: path.to_path_buf(), state: Mutex::new((BufWriter::new(file), seen)) }))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&self, record: &FixtureRecord) -> Result<(), BackendError> {
        let mut line = serde_json::to_string(record).expect("fixture record serializes");
        line.push('\n');
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        let (writer, seen) = &mut *state;
        if !seen.insert(record.key().to_string()) {
            return Ok(());
        }
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.flush())
            .map_err(|source| BackendError::Io { path: self.path.clone(), source })
    }

    /// Flags the file as unusable for replay.
    pub fn mark_incomplete(&self, reason: &str) -> Result<(), BackendError> {
        let marker = incomplete_marker(&self.path);
        std::fs::write(&marker, format!("{reason}\n")).map_err(|source| BackendError::Io { path: marker, source })
    }
}

/// A backend that forwards to `inner` and records every answer.
#[derive(Debug)]
pub struct Recording<B> {
    inner: B,
    sink: Arc<FixtureSink>,
}

impl<B> Recording<B> {
    pub fn new(inner: B, sink: Arc<FixtureSink>) -> Self {
        Recording { inner, sink }
    }

    pub fn sink(&self) -> &Arc<FixtureSink> {
        &self.sink
    }
}

/// Wraps `inner` so its calls are appended to the fixture at `path`.
pub fn record_wrap<B>(inner: B, path: &Path) -> Result<Recording<B>, BackendError> {
    Ok(Recording::new(inner, FixtureSink::append(path)?))
}

impl<B: AteBackend> AteBackend for Recording<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn single_flight(&self) -> bool {
        self.inner.single_flight()
    }

    fn extract(&self, text: &str) -> Result<Vec<String>, BackendError> {
        let terms = self.inner.extract(text)?;
        self.sink.write(&FixtureRecord::ate(text, &terms))?;
        Ok(terms)
    }
}

impl<B: AscBackend> AscBackend for Recording<B> {
    fn id(&self) -> String {
        self.inner.id()
    }

    fn single_flight(&self) -> bool {
        self.inner.single_flight()
    }

    fn classify(&self, text: &str, term: &str) -> Result<AscPrediction, BackendError> {
        let prediction = self.inner.classify(text, term)?;
        self.sink.write(&FixtureRecord::asc(text, term, &prediction))?;
        Ok(prediction)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{LexiconBackend, LexiconConfig};
    use crate::corpus::SAMPLE_TEXT;

    fn sample_fixture() -> String {
        let ate = FixtureRecord::ate(SAMPLE_TEXT, &["price".into(), "restaurant".into()]);
        let asc = FixtureRecord::asc(SAMPLE_TEXT, "price", &AscPrediction::one_hot(Polarity::Negative));
        format!("{}\n{}\n", serde_json::to_string(&ate).unwrap(), serde_json::to_string(&asc).unwrap())
    }

    #[test]
    fn record_format() {
        let line = sample_fixture();
        let first = line.lines().next().unwrap();
        assert!(first.starts_with("{\"kind\":\"ate\",\"key\":\""));
        assert!(line.lines().nth(1).unwrap().starts_with("{\"kind\":\"asc\",\"key\":\""));
    }

    #[test]
    fn load_and_lookup() {
        let store = ReplayStore::from_bytes(sample_fixture().as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.replay_ate(SAMPLE_TEXT).unwrap(), ["price", "restaurant"]);
        assert_eq!(store.replay_asc(SAMPLE_TEXT, "price").unwrap().polarity, Polarity::Negative);
        assert!(matches!(store.replay_ate("unrecorded"), Err(BackendError::MissingFixture { kind: "ate", .. })));
        assert!(matches!(
            store.replay_asc(SAMPLE_TEXT, "restaurant"),
            Err(BackendError::MissingFixture { kind: "asc", .. })
        ));
    }

    #[test]
    fn empty_and_bad_files() {
        assert!(ReplayStore::from_bytes(b"", Path::new("mem")).unwrap().is_empty());
        let dup = format!("{0}{0}", sample_fixture());
        assert!(matches!(
            ReplayStore::from_bytes(dup.as_bytes(), Path::new("mem")),
            Err(BackendError::DuplicateKey { .. })
        ));
        assert!(matches!(
            ReplayStore::from_bytes(b"{\"kind\":\"ate\"}\n", Path::new("mem")),
            Err(BackendError::FixtureCorrupt { line: 1, .. })
        ));
        let tampered = sample_fixture().replacen("\"text\":\"The", "\"text\":\"A", 1);
        assert!(matches!(
            ReplayStore::from_bytes(tampered.as_bytes(), Path::new("mem")),
            Err(BackendError::FixtureCorrupt { .. })
        ));
    }

    #[test]
    fn recording_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.jsonl");
        let lexicon = LexiconBackend::new(LexiconConfig::builtin()).unwrap();
        let sink = FixtureSink::create(&path).unwrap();
        let recorder = Recording::new(lexicon.clone(), sink);
        let terms = recorder.extract(SAMPLE_TEXT).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
        // repeated call does not duplicate the key
        recorder.extract(SAMPLE_TEXT).unwrap();
        let label = recorder.classify(SAMPLE_TEXT, "price").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);

        let store = ReplayStore::load(&path).unwrap();
        assert_eq!(store.extract(SAMPLE_TEXT).unwrap(), terms);
        assert_eq!(store.classify(SAMPLE_TEXT, "price").unwrap(), label);

        FixtureSink::create(&path).unwrap().mark_incomplete("boom").unwrap();
        assert!(matches!(ReplayStore::load(&path), Err(BackendError::FixtureCorrupt { .. })));
        // a fresh recording clears the marker
        FixtureSink::create(&path).unwrap();
        assert!(ReplayStore::load(&path).unwrap().is_empty());
    }

    #[test]
    fn record_wrap_appends() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.jsonl");
        let lexicon = LexiconBackend::new(LexiconConfig::builtin()).unwrap();
        record_wrap(lexicon.clone(), &path).unwrap().extract(SAMPLE_TEXT).unwrap();
        let again = record_wrap(lexicon, &path).unwrap();
        again.extract(SAMPLE_TEXT).unwrap();
        again.extract("Great sushi.").unwrap();
        assert_eq!(ReplayStore::load(&path).unwrap().len(), 2);
    }
}
