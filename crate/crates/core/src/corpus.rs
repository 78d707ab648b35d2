//! SemEval-style annotated review corpora.
//!
//! Two on-disk layouts are understood: the 2014 flat `<sentences>` file and the
//! 2015/16 `<Reviews><Review><sentences>` nesting. Both are read into the same
//! [`Corpus`] model. Writing always produces the 2014 layout.
//!
//! Aspect offsets are counted in Unicode scalar values (`char`s), not bytes.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
    /// Only found in gold data; never produced by a pipeline.
    Conflict,
}

impl Polarity {
    /// The three labels a classifier may emit.
    pub const PREDICTABLE: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];
    pub const ALL: [Polarity; 4] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral, Polarity::Conflict];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
            Polarity::Conflict => "conflict",
        }
    }

    pub fn is_predictable(self) -> bool {
        self != Polarity::Conflict
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown polarity label {0:?}")]
pub struct UnknownPolarity(pub String);

impl FromStr for Polarity {
    type Err = UnknownPolarity;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Polarity::Positive),
            "negative" => Ok(Polarity::Negative),
            "neutral" => Ok(Polarity::Neutral),
            "conflict" => Ok(Polarity::Conflict),
            _ => Err(UnknownPolarity(s.to_string())),
        }
    }
}

/// Half-open character range `[from, to)` into a sentence text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub from: usize,
    pub to: usize,
}

impl Span {
    pub fn new(from: usize, to: usize) -> Self {
        Span { from, to }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAspect {
    pub term: String,
    pub span: Option<Span>,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub gold: Vec<GoldAspect>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Sentence { id: id.into(), text: text.into(), gold: Vec::new() }
    }

    pub fn with_aspect(mut self, term: &str, polarity: Polarity) -> Self {
        let span = char_find(&self.text, term).map(|from| Span::new(from, from + term.chars().count()));
        self.gold.push(GoldAspect { term: term.to_string(), span, polarity });
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    #[default]
    Other,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Other => "other",
        }
    }

    fn from_file_name(name: &str) -> Split {
        let lower = name.to_lowercase();
        if lower.contains("train") {
            Split::Train
        } else if lower.contains("test") {
            Split::Test
        } else {
            Split::Other
        }
    }
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "other" => Ok(Split::Other),
            _ => Err(CorpusError::schema(None, format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub split: Split,
    pub sentences: Vec<Sentence>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, sentences: Vec<Sentence>) -> Self {
        Corpus { name: name.into(), split: Split::Other, sentences }
    }

    pub fn aspect_count(&self) -> usize {
        self.sentences.iter().map(|s| s.gold.len()).sum()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("schema violation{}: {detail}", .sentence_id.as_ref().map(|id| format!(" in sentence {id}")).unwrap_or_default())]
    SchemaViolation { sentence_id: Option<String>, detail: String },
    #[error("sentence {sentence_id}: offsets {from}..{to} select {found:?} but the term is {term:?}")]
    OffsetMismatch { sentence_id: String, term: String, from: usize, to: usize, found: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn schema(sentence_id: Option<&str>, detail: impl Into<String>) -> Self {
        CorpusError::SchemaViolation { sentence_id: sentence_id.map(str::to_string), detail: detail.into() }
    }
}

/// A broken invariant found by [`validate_corpus`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub sentence_id: String,
    pub rule: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.sentence_id, self.rule, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub aspects: usize,
    pub histogram: BTreeMap<Polarity, usize>,
    pub no_aspect: usize,
    pub mean_aspects: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictPolicy {
    #[default]
    Drop,
    Keep,
    MapToNeutral,
}

impl ConflictPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            ConflictPolicy::Drop => "drop",
            ConflictPolicy::Keep => "keep",
            ConflictPolicy::MapToNeutral => "map_to_neutral",
        }
    }
}

impl FromStr for ConflictPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drop" => Ok(ConflictPolicy::Drop),
            "keep" => Ok(ConflictPolicy::Keep),
            "map_to_neutral" => Ok(ConflictPolicy::MapToNeutral),
            _ => Err(format!("unknown conflict policy {s:?} (expected drop, keep or map_to_neutral)")),
        }
    }
}

/// Minimal element tree; SemEval files are small enough to hold in memory.
#[derive(Debug, Default)]
struct Element {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Element>,
    text: String,
}

impl Element {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }
}

fn open_element(start: &BytesStart<'_>) -> Result<Element, CorpusError> {
    let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| CorpusError::MalformedXml(e.to_string()))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|e| CorpusError::MalformedXml(e.to_string()))?.into_owned();
        attrs.push((key, value));
    }
    Ok(Element { name, attrs, ..Default::default() })
}

fn read_tree(bytes: &[u8]) -> Result<Element, CorpusError> {
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(false);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    let mut buf = Vec::new();
    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| CorpusError::MalformedXml(format!("at byte {}: {e}", reader.buffer_position())))?;
        match event {
            Event::Start(start) => stack.push(open_element(&start)?),
            Event::Empty(start) => {
                let element = open_element(&start)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(element),
                    None if root.is_none() => root = Some(element),
                    None => return Err(CorpusError::MalformedXml("multiple root elements".into())),
                }
            }
            Event::End(_) => {
                let element = stack.pop().ok_or_else(|| CorpusError::MalformedXml("unbalanced closing tag".into()))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(element),
                    None if root.is_none() => root = Some(element),
                    None => return Err(CorpusError::MalformedXml("multiple root elements".into())),
                }
            }
            Event::Text(text) => {
                let text = text.unescape().map_err(|e| CorpusError::MalformedXml(e.to_string()))?;
                match stack.last_mut() {
                    Some(element) => element.text.push_str(&text),
                    None if text.trim().is_empty() => {}
                    None => return Err(CorpusError::MalformedXml("text outside the root element".into())),
                }
            }
            Event::CData(data) => {
                if let Some(element) = stack.last_mut() {
                    element.text.push_str(&String::from_utf8_lossy(&data));
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if !stack.is_empty() {
        return Err(CorpusError::MalformedXml(format!("unclosed element <{}>", stack[0].name)));
    }
    root.ok_or_else(|| CorpusError::MalformedXml("document has no root element".into()))
}

fn required<'a>(element: &'a Element, key: &str, sentence_id: Option<&str>) -> Result<&'a str, CorpusError> {
    element
        .attr(key)
        .ok_or_else(|| CorpusError::schema(sentence_id, format!("<{}> is missing attribute {key:?}", element.name)))
}

fn parse_polarity(raw: &str, sentence_id: &str) -> Result<Polarity, CorpusError> {
    raw.parse().map_err(|e: UnknownPolarity| CorpusError::schema(Some(sentence_id), e.to_string()))
}

fn parse_span(element: &Element, sentence_id: &str) -> Result<Option<Span>, CorpusError> {
    let offset = |key: &str| -> Result<Option<usize>, CorpusError> {
        element
            .attr(key)
            .map(|raw| {
                raw.trim()
                    .parse::<usize>()
                    .map_err(|_| CorpusError::schema(Some(sentence_id), format!("{key}={raw:?} is not an offset")))
            })
            .transpose()
    };
    match (offset("from")?, offset("to")?) {
        (Some(from), Some(to)) => Ok(Some(Span { from, to })),
        (None, None) => Ok(None),
        _ => Err(CorpusError::schema(Some(sentence_id), "only one of from/to is present")),
    }
}

fn sentence_text(element: &Element, id: &str) -> Result<String, CorpusError> {
    element
        .child("text")
        .map(|t| t.text.clone())
        .ok_or_else(|| CorpusError::schema(Some(id), "<sentence> has no <text>"))
}

fn parse_2014_sentence(element: &Element) -> Result<Sentence, CorpusError> {
    let id = required(element, "id", None)?.to_string();
    let text = sentence_text(element, &id)?;
    let mut gold = Vec::new();
    for terms in element.children_named("aspectTerms") {
        for term in terms.children_named("aspectTerm") {
            gold.push(GoldAspect {
                term: required(term, "term", Some(&id))?.to_string(),
                span: parse_span(term, &id)?,
                polarity: parse_polarity(required(term, "polarity", Some(&id))?, &id)?,
            });
        }
    }
    Ok(Sentence { id, text, gold })
}

fn parse_2015_sentence(element: &Element, review_id: Option<&str>) -> Result<Sentence, CorpusError> {
    let raw_id = required(element, "id", None)?;
    let id = match review_id {
        Some(rid) if !raw_id.starts_with(&format!("{rid}:")) => format!("{rid}:{raw_id}"),
        _ => raw_id.to_string(),
    };
    let text = sentence_text(element, &id)?;
    let mut gold: Vec<GoldAspect> = Vec::new();
    for opinions in element.children_named("Opinions") {
        for opinion in opinions.children_named("Opinion") {
            let target = opinion.attr("target").unwrap_or("NULL");
            if target == "NULL" {
                continue;
            }
            let aspect = GoldAspect {
                term: target.to_string(),
                span: parse_span(opinion, &id)?,
                polarity: parse_polarity(required(opinion, "polarity", Some(&id))?, &id)?,
            };
            // Opinions that differ only in category describe the same term.
            if !gold.contains(&aspect) {
                gold.push(aspect);
            }
        }
    }
    Ok(Sentence { id, text, gold })
}

fn apply_root_metadata(root: &Element, corpus: &mut Corpus) -> Result<(), CorpusError> {
    if let Some(name) = root.attr("name") {
        corpus.name = name.to_string();
    }
    if let Some(split) = root.attr("split") {
        corpus.split = split.parse()?;
    }
    Ok(())
}

/// Parses without checking offsets or uniqueness. [`validate_corpus`] reports
/// whatever this lets through.
pub fn parse_semeval_xml_unchecked(bytes: &[u8]) -> Result<Corpus, CorpusError> {
    let root = read_tree(bytes)?;
    let mut corpus = Corpus::default();
    apply_root_metadata(&root, &mut corpus)?;
    match root.name.as_str() {
        "sentences" => {
            for sentence in root.children_named("sentence") {
                corpus.sentences.push(parse_2014_sentence(sentence)?);
            }
        }
        "Reviews" => {
            for review in root.children_named("Review") {
                let rid = review.attr("rid");
                for sentences in review.children_named("sentences") {
                    for sentence in sentences.children_named("sentence") {
                        corpus.sentences.push(parse_2015_sentence(sentence, rid)?);
                    }
                }
            }
        }
        other => return Err(CorpusError::schema(None, format!("unknown root element <{other}>"))),
    }
    Ok(corpus)
}

/// Parses a SemEval 2014 or 2015/16 file, auto-detected from the root element,
/// and rejects any corpus that breaks a model invariant.
pub fn parse_semeval_xml(bytes: &[u8]) -> Result<Corpus, CorpusError> {
    let corpus = parse_semeval_xml_unchecked(bytes)?;
    if let Some(v) = validate_corpus(&corpus).into_iter().next() {
        return Err(violation_error(&corpus, v));
    }
    Ok(corpus)
}

fn violation_error(corpus: &Corpus, v: Violation) -> CorpusError {
    if v.rule == "offset-mismatch" || v.rule == "offset-range" {
        let sentence = corpus.sentences.iter().find(|s| s.id == v.sentence_id);
        let bad = sentence.and_then(|s| {
            s.gold
                .iter()
                .find(|g| g.span.is_some_and(|span| char_slice(&s.text, span).as_deref() != Some(g.term.as_str())))
                .map(|g| (s, g))
        });
        if let Some((s, g)) = bad {
            let span = g.span.expect("span checked above");
            return CorpusError::OffsetMismatch {
                sentence_id: s.id.clone(),
                term: g.term.clone(),
                from: span.from,
                to: span.to,
                found: char_slice(&s.text, span).unwrap_or_default(),
            };
        }
    }
    CorpusError::SchemaViolation { sentence_id: Some(v.sentence_id), detail: format!("{}: {}", v.rule, v.detail) }
}

/// A corpus read from disk, with the SHA-256 of the raw file.
#[derive(Debug, Clone)]
pub struct CorpusFile {
    pub path: PathBuf,
    pub sha256: String,
    pub corpus: Corpus,
}

pub fn read_corpus_bytes(path: &Path) -> Result<Vec<u8>, CorpusError> {
    std::fs::read(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Loads a corpus file. The corpus name defaults to the file stem and the
/// split is guessed from the file name unless the root element carries them.
pub fn load_corpus(path: &Path) -> Result<CorpusFile, CorpusError> {
    let bytes = read_corpus_bytes(path)?;
    let mut corpus = parse_semeval_xml(&bytes)?;
    fill_file_metadata(&mut corpus, path);
    Ok(CorpusFile { path: path.to_path_buf(), sha256: sha256_hex(&bytes), corpus })
}

pub fn fill_file_metadata(corpus: &mut Corpus, path: &Path) {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if corpus.name.is_empty() {
        corpus.name = stem.clone();
    }
    if corpus.split == Split::Other {
        corpus.split = Split::from_file_name(&stem);
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes the 2014 layout. Corpus name and split ride along as root attributes.
pub fn serialize_semeval_xml(corpus: &Corpus) -> Vec<u8> {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<sentences name=\"{}\" split=\"{}\">\n",
        escape(corpus.name.as_str()),
        corpus.split.as_str()
    ));
    for sentence in &corpus.sentences {
        out.push_str(&format!("    <sentence id=\"{}\">\n", escape(sentence.id.as_str())));
        out.push_str(&format!("        <text>{}</text>\n", escape(sentence.text.as_str())));
        if !sentence.gold.is_empty() {
            out.push_str("        <aspectTerms>\n");
            for aspect in &sentence.gold {
                out.push_str(&format!(
                    "            <aspectTerm term=\"{}\" polarity=\"{}\"",
                    escape(aspect.term.as_str()),
                    aspect.polarity
                ));
                if let Some(span) = aspect.span {
                    out.push_str(&format!(" from=\"{}\" to=\"{}\"", span.from, span.to));
                }
                out.push_str("/>\n");
            }
            out.push_str("        </aspectTerms>\n");
        }
        out.push_str("    </sentence>\n");
    }
    out.push_str("</sentences>\n");
    out.into_bytes()
}

/// Slices `text` by character offsets. `None` when the span is out of range.
pub fn char_slice(text: &str, span: Span) -> Option<String> {
    if span.from > span.to {
        return None;
    }
    let len = text.chars().count();
    if span.to > len {
        return None;
    }
    Some(text.chars().skip(span.from).take(span.to - span.from).collect())
}

/// Character offset of the first exact occurrence of `needle`.
pub fn char_find(text: &str, needle: &str) -> Option<usize> {
    text.find(needle).map(|byte| text[..byte].chars().count())
}

pub fn validate_corpus(corpus: &Corpus) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |id: &str, rule: &str, detail: String| {
        violations.push(Violation { sentence_id: id.to_string(), rule: rule.to_string(), detail })
    };
    for sentence in &corpus.sentences {
        let id = sentence.id.as_str();
        if id.is_empty() {
            push(id, "empty-id", "sentence id is empty".into());
        }
        if !seen.insert(id) {
            push(id, "duplicate-id", format!("sentence id {id:?} already used"));
        }
        if sentence.text.is_empty() {
            push(id, "empty-text", "sentence text is empty".into());
        }
        let len = sentence.text.chars().count();
        for aspect in &sentence.gold {
            if aspect.term.trim().is_empty() {
                push(id, "empty-term", format!("aspect term {:?} is blank", aspect.term));
            }
            let Some(span) = aspect.span else { continue };
            if span.from >= span.to || span.to > len {
                push(
                    id,
                    "offset-range",
                    format!("span {}..{} invalid for text of {len} chars (term {:?})", span.from, span.to, aspect.term),
                );
            } else {
                let found = char_slice(&sentence.text, span).unwrap_or_default();
                if found != aspect.term {
                    push(
                        id,
                        "offset-mismatch",
                        format!("span {}..{} selects {found:?}, term is {:?}", span.from, span.to, aspect.term),
                    );
                }
            }
        }
    }
    violations
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut histogram: BTreeMap<Polarity, usize> = Polarity::ALL.iter().map(|&p| (p, 0)).collect();
    let mut aspects = 0;
    let mut no_aspect = 0;
    for sentence in &corpus.sentences {
        if sentence.gold.is_empty() {
            no_aspect += 1;
        }
        for aspect in &sentence.gold {
            aspects += 1;
            *histogram.entry(aspect.polarity).or_default() += 1;
        }
    }
    let sentences = corpus.sentences.len();
    let mean_aspects = if sentences == 0 { 0.0 } else { aspects as f64 / sentences as f64 };
    CorpusStats { sentences, aspects, histogram, no_aspect, mean_aspects }
}

pub fn apply_conflict_policy(corpus: &Corpus, policy: ConflictPolicy) -> Corpus {
    let mut out = corpus.clone();
    match policy {
        ConflictPolicy::Keep => {}
        ConflictPolicy::Drop => {
            for sentence in &mut out.sentences {
                sentence.gold.retain(|a| a.polarity != Polarity::Conflict);
            }
        }
        ConflictPolicy::MapToNeutral => {
            for aspect in out.sentences.iter_mut().flat_map(|s| s.gold.iter_mut()) {
                if aspect.polarity == Polarity::Conflict {
                    aspect.polarity = Polarity::Neutral;
                }
            }
        }
    }
    out
}

/// The review sentence used throughout the tests and docs.
pub const SAMPLE_TEXT: &str = "The price was high, but the restaurant was breathtaking.";

/// One-sentence corpus: (price, negative), (restaurant, positive).
pub fn sample_corpus() -> Corpus {
    Corpus::new(
        "sample",
        vec![Sentence::new("S1", SAMPLE_TEXT)
            .with_aspect("price", Polarity::Negative)
            .with_aspect("restaurant", Polarity::Positive)],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE_2014: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<sentences>
    <sentence id="S1">
        <text>The price was high, but the restaurant was breathtaking.</text>
        <aspectTerms>
            <aspectTerm term="price" polarity="negative" from="4" to="9"/>
            <aspectTerm term="restaurant" polarity="positive" from="28" to="38"/>
        </aspectTerms>
    </sentence>
</sentences>"#;

    #[test]
    fn parses_sample_sentence() {
        let corpus = parse_semeval_xml(SAMPLE_2014.as_bytes()).unwrap();
        assert_eq!(corpus.sentences.len(), 1);
        let s = &corpus.sentences[0];
        assert_eq!(s.gold.len(), 2);
        assert_eq!(s.gold[0].term, "price");
        assert_eq!(s.gold[0].span, Some(Span::new(4, 9)));
        assert_eq!(s.gold[0].polarity, Polarity::Negative);
        assert_eq!(s.gold[1].polarity, Polarity::Positive);
        // hand-built model agrees with the file
        assert_eq!(corpus.sentences, sample_corpus().sentences);
    }

    #[test]
    fn missing_aspect_terms_gives_empty_gold() {
        let xml = r#"<sentences><sentence id="1"><text>Nice.</text></sentence><sentence id="2"><text>Ok.</text></sentence></sentences>"#;
        let corpus = parse_semeval_xml(xml.as_bytes()).unwrap();
        assert_eq!(corpus.sentences.len(), 2);
        assert!(corpus.sentences.iter().all(|s| s.gold.is_empty()));
    }

    #[test]
    fn offset_mismatch_names_sentence() {
        let xml = SAMPLE_2014.replace("from=\"4\" to=\"9\"", "from=\"3\" to=\"8\"");
        match parse_semeval_xml(xml.as_bytes()) {
            Err(CorpusError::OffsetMismatch { sentence_id, term, found, .. }) => {
                assert_eq!(sentence_id, "S1");
                assert_eq!(term, "price");
                assert_eq!(found, " pric");
            }
            other => panic!("expected OffsetMismatch, got {other:?}"),
        }
    }

    #[test]
    fn offsets_count_chars_not_bytes() {
        let xml = r#"<sentences><sentence id="u"><text>Café crème was lovely</text>
            <aspectTerms><aspectTerm term="crème" polarity="positive" from="5" to="10"/></aspectTerms>
            </sentence></sentences>"#;
        let corpus = parse_semeval_xml(xml.as_bytes()).unwrap();
        assert_eq!(corpus.sentences[0].gold[0].span, Some(Span::new(5, 10)));
    }

    #[test]
    fn entities_are_unescaped() {
        let xml = r#"<sentences><sentence id="e"><text>Fish &amp; chips &lt;3</text>
            <aspectTerms><aspectTerm term="Fish &amp; chips" polarity="positive" from="0" to="12"/></aspectTerms>
            </sentence></sentences>"#;
        let corpus = parse_semeval_xml(xml.as_bytes()).unwrap();
        assert_eq!(corpus.sentences[0].text, "Fish & chips <3");
        assert_eq!(corpus.sentences[0].gold[0].term, "Fish & chips");
        let again = parse_semeval_xml(&serialize_semeval_xml(&corpus)).unwrap();
        assert_eq!(again, corpus);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse_semeval_xml(b"<root/>"), Err(CorpusError::SchemaViolation { .. })));
        assert!(matches!(
            parse_semeval_xml(b"<sentences><sentence><text>x</text></sentence></sentences>"),
            Err(CorpusError::SchemaViolation { .. })
        ));
        assert!(matches!(parse_semeval_xml(b"<sentences><sentence id=\"1\">"), Err(CorpusError::MalformedXml(_))));
        assert!(matches!(parse_semeval_xml(b"not xml at all"), Err(CorpusError::MalformedXml(_))));
        let bad_polarity = r#"<sentences><sentence id="1"><text>x y</text><aspectTerms>
            <aspectTerm term="x" polarity="meh" from="0" to="1"/></aspectTerms></sentence></sentences>"#;
        assert!(matches!(parse_semeval_xml(bad_polarity.as_bytes()), Err(CorpusError::SchemaViolation { .. })));
    }

    #[test]
    fn parses_2015_reviews() {
        let xml = r#"<?xml version="1.0" encoding="UTF-8" standalone="yes"?>
<Reviews>
    <Review rid="1004293">
        <sentences>
            <sentence id="1004293:0">
                <text>Judging from previous posts this used to be a good place, but not any longer.</text>
                <Opinions>
                    <Opinion target="place" category="RESTAURANT#GENERAL" polarity="negative" from="51" to="56"/>
                </Opinions>
            </sentence>
            <sentence id="1">
                <text>The food was great and cheap.</text>
                <Opinions>
                    <Opinion target="food" category="FOOD#QUALITY" polarity="positive" from="4" to="8"/>
                    <Opinion target="food" category="FOOD#PRICES" polarity="positive" from="4" to="8"/>
                    <Opinion target="NULL" category="RESTAURANT#PRICES" polarity="positive" from="0" to="0"/>
                </Opinions>
            </sentence>
        </sentences>
    </Review>
</Reviews>"#;
        let corpus = parse_semeval_xml(xml.as_bytes()).unwrap();
        assert_eq!(corpus.sentences.len(), 2);
        assert_eq!(corpus.sentences[0].id, "1004293:0");
        assert_eq!(corpus.sentences[1].id, "1004293:1");
        assert_eq!(corpus.sentences[0].gold[0].term, "place");
        assert_eq!(corpus.sentences[1].gold.len(), 1);
    }

    #[test]
    fn serialize_roundtrip_and_empty() {
        let corpus = sample_corpus();
        assert_eq!(parse_semeval_xml(&serialize_semeval_xml(&corpus)).unwrap(), corpus);

        let empty = Corpus::default();
        let xml = serialize_semeval_xml(&empty);
        assert!(String::from_utf8_lossy(&xml).contains("<sentences"));
        assert_eq!(parse_semeval_xml(&xml).unwrap(), empty);

        let mut conflicted = sample_corpus();
        conflicted.sentences[0].gold[0].polarity = Polarity::Conflict;
        let xml = serialize_semeval_xml(&conflicted);
        assert!(String::from_utf8_lossy(&xml).contains("polarity=\"conflict\""));
        assert_eq!(parse_semeval_xml(&xml).unwrap(), conflicted);
    }

    #[test]
    fn validation_rules() {
        assert!(validate_corpus(&sample_corpus()).is_empty());

        let mut dup = sample_corpus();
        dup.sentences.push(dup.sentences[0].clone());
        dup.sentences.push(dup.sentences[0].clone());
        let v = validate_corpus(&dup);
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|v| v.rule == "duplicate-id"));

        let mut blank = sample_corpus();
        blank.sentences[0].gold.push(GoldAspect { term: "  ".into(), span: None, polarity: Polarity::Neutral });
        let v = validate_corpus(&blank);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "empty-term");
    }

    #[test]
    fn stats() {
        let s = corpus_stats(&sample_corpus());
        assert_eq!((s.sentences, s.aspects, s.no_aspect), (1, 2, 0));
        assert_eq!(s.histogram[&Polarity::Positive], 1);
        assert_eq!(s.histogram[&Polarity::Negative], 1);
        assert_eq!(s.histogram[&Polarity::Neutral], 0);
        assert_eq!(s.mean_aspects, 2.0);

        let e = corpus_stats(&Corpus::default());
        assert_eq!((e.sentences, e.aspects, e.no_aspect, e.mean_aspects), (0, 0, 0, 0.0));

        let corpus = Corpus::new(
            "three",
            vec![
                Sentence::new("a", "nothing here"),
                Sentence::new("b", "good food").with_aspect("food", Polarity::Positive),
                Sentence::new("c", "food service decor")
                    .with_aspect("food", Polarity::Neutral)
                    .with_aspect("service", Polarity::Negative)
                    .with_aspect("decor", Polarity::Conflict),
            ],
        );
        let s = corpus_stats(&corpus);
        assert_eq!(s.mean_aspects, 4.0 / 3.0);
        assert_eq!(s.no_aspect, 1);
        assert_eq!(s.histogram.values().sum::<usize>(), s.aspects);
    }

    #[test]
    fn conflict_policies() {
        let corpus = Corpus::new(
            "c",
            vec![Sentence::new("1", "food service decor")
                .with_aspect("food", Polarity::Positive)
                .with_aspect("service", Polarity::Conflict)
                .with_aspect("decor", Polarity::Negative)],
        );
        assert_eq!(apply_conflict_policy(&corpus, ConflictPolicy::Keep), corpus);
        assert_eq!(apply_conflict_policy(&corpus, ConflictPolicy::Drop).aspect_count(), 2);
        let mapped = apply_conflict_policy(&corpus, ConflictPolicy::MapToNeutral);
        let stats = corpus_stats(&mapped);
        assert_eq!(stats.aspects, 3);
        assert_eq!(stats.histogram[&Polarity::Conflict], 0);
        assert_eq!(stats.histogram[&Polarity::Neutral], 1);
    }
}
