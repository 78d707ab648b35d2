//! Keyword baseline. Aspects are lexicon entries found in the text; polarity
//! comes from the nearest sentiment cue within a token window, flipped by a
//! negator.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{short_hash, AscBackend, AscPrediction, AteBackend, BackendError};
use crate::corpus::Polarity;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LexiconConfig {
    pub aspect_terms: BTreeSet<String>,
    pub positive_cues: BTreeSet<String>,
    pub negative_cues: BTreeSet<String>,
    pub negators: BTreeSet<String>,
    pub window: usize,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        LexiconConfig {
            aspect_terms: BTreeSet::new(),
            positive_cues: BTreeSet::new(),
            negative_cues: BTreeSet::new(),
            negators: ["not", "no", "never", "n't"].iter().map(|s| s.to_string()).collect(),
            window: 3,
        }
    }
}

fn set(words: &[&str]) -> BTreeSet<String> {
    words.iter().map(|s| s.to_string()).collect()
}

impl LexiconConfig {
    /// A small restaurant/laptop lexicon for smoke runs.
    pub fn builtin() -> Self {
        LexiconConfig {
            aspect_terms: set(&[
                "ambience",
                "battery",
                "battery life",
                "decor",
                "dessert",
                "drinks",
                "food",
                "keyboard",
                "menu",
                "pizza",
                "price",
                "prices",
                "restaurant",
                "screen",
                "service",
                "staff",
                "sushi",
                "wine",
                "waiter",
            ]),
            positive_cues: set(&[
                "amazing",
                "awesome",
                "breathtaking",
                "delicious",
                "excellent",
                "fantastic",
                "friendly",
                "good",
                "great",
                "love",
                "loved",
                "nice",
                "perfect",
                "tasty",
                "wonderful",
            ]),
            negative_cues: set(&[
                "awful",
                "bad",
                "bland",
                "expensive",
                "high",
                "horrible",
                "poor",
                "rude",
                "slow",
                "terrible",
                "worst",
            ]),
            ..LexiconConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.window == 0 {
            return Err(BackendError::Config("lexicon window must be at least 1".into()));
        }
        if let Some(both) = self.positive_cues.intersection(&self.negative_cues).next() {
            return Err(BackendError::Config(format!("cue {both:?} is both positive and negative")));
        }
        Ok(())
    }
}

/// Lowercased word tokens. Punctuation separates tokens; a trailing "n't" or
/// "'s" becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut push_word = |word: &str| {
        let word = word.trim_matches('\'');
        if word.is_empty() {
            return;
        }
        for suffix in ["n't", "'s"] {
            if word.len() > suffix.len() && word.ends_with(suffix) {
                tokens.push(word[..word.len() - suffix.len()].to_string());
                tokens.push(suffix.to_string());
                return;
            }
        }
        tokens.push(word.to_string());
    };
    let mut word = String::new();
    for c in text.chars().flat_map(char::to_lowercase) {
        let c = if c == '\u{2019}' { '\'' } else { c };
        if c.is_alphanumeric() || c == '\'' {
            word.push(c);
        } else if !word.is_empty() {
            push_word(&word);
            word.clear();
        }
    }
    if !word.is_empty() {
        push_word(&word);
    }
    tokens
}

fn find_tokens(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// Lexicon entries present in the text, ordered by first occurrence (longer
/// entries first when two start at the same token).
pub fn lexicon_ate(cfg: &LexiconConfig, text: &str) -> Vec<String> {
    let tokens = tokenize(text);
    let mut hits: Vec<(usize, usize, &str)> = cfg
        .aspect_terms
        .iter()
        .filter_map(|entry| {
            let entry_tokens = tokenize(entry);
            find_tokens(&tokens, &entry_tokens).map(|pos| (pos, entry_tokens.len(), entry.trim()))
        })
        .collect();
    hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(b.2)));
    hits.into_iter().map(|(_, _, entry)| entry.to_string()).collect()
}

pub fn lexicon_asc(cfg: &LexiconConfig, text: &str, term: &str) -> Result<AscPrediction, BackendError> {
    let tokens = tokenize(text);
    let term_tokens = tokenize(term);
    let start =
        find_tokens(&tokens, &term_tokens).ok_or_else(|| BackendError::TermNotFound { term: term.to_string() })?;
    let end = start + term_tokens.len();

    let cue_polarity = |pos: usize| {
        let token = tokens[pos].as_str();
        if cfg.positive_cues.contains(token) {
            Some(Polarity::Positive)
        } else if cfg.negative_cues.contains(token) {
            Some(Polarity::Negative)
        } else {
            None
        }
    };

    // nearest cue wins; at equal distance the one before the term wins
    let mut decided = None;
    for distance in 1..=cfg.window {
        let left = start.checked_sub(distance);
        let right = Some(end - 1 + distance).filter(|&p| p < tokens.len());
        if let Some(hit) = [left, right].into_iter().flatten().find_map(|p| cue_polarity(p).map(|pol| (p, pol))) {
            decided = Some(hit);
            break;
        }
    }
    let Some((cue, polarity)) = decided else {
        return Ok(AscPrediction::one_hot(Polarity::Neutral));
    };

    let is_negator = |p: usize| cfg.negators.contains(tokens[p].as_str());
    let between = if cue < start { cue + 1..start } else { end..cue };
    let negated = (cue > 0 && is_negator(cue - 1)) || between.clone().any(is_negator);
    let polarity = match (polarity, negated) {
        (Polarity::Positive, true) => Polarity::Negative,
        (Polarity::Negative, true) => Polarity::Positive,
        (p, _) => p,
    };
    Ok(AscPrediction::one_hot(polarity))
}

#[derive(Debug, Clone)]
pub struct LexiconBackend {
    cfg: LexiconConfig,
    id: String,
}

impl LexiconBackend {
    pub fn new(cfg: LexiconConfig) -> Result<Self, BackendError> {
        cfg.validate()?;
        let digest = short_hash(&serde_json::to_vec(&cfg).expect("lexicon config serializes"));
        Ok(LexiconBackend { cfg, id: format!("lexicon:{digest}") })
    }

    pub fn config(&self) -> &LexiconConfig {
        &self.cfg
    }
}

impl AteBackend for LexiconBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn extract(&self, text: &str) -> Result<Vec<String>, BackendError> {
        Ok(lexicon_ate(&self.cfg, text))
    }
}

impl AscBackend for LexiconBackend {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn classify(&self, text: &str, term: &str) -> Result<AscPrediction, BackendError> {
        lexicon_asc(&self.cfg, text, term)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SAMPLE_TEXT;
    use proptest::prelude::*;

    fn cfg(aspects: &[&str], pos: &[&str], neg: &[&str]) -> LexiconConfig {
        LexiconConfig {
            aspect_terms: set(aspects),
            positive_cues: set(pos),
            negative_cues: set(neg),
            ..LexiconConfig::default()
        }
    }

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("PRICE!!"), ["price"]);
        assert_eq!(
            tokenize("I don't like the chef's pasta."),
            ["i", "do", "n't", "like", "the", "chef", "'s", "pasta"]
        );
        assert_eq!(
            tokenize(SAMPLE_TEXT),
            ["the", "price", "was", "high", "but", "the", "restaurant", "was", "breathtaking"]
        );
    }

    #[test]
    fn extraction() {
        let c = cfg(&["price", "restaurant"], &[], &[]);
        assert_eq!(lexicon_ate(&c, SAMPLE_TEXT), ["price", "restaurant"]);
        assert!(lexicon_ate(&cfg(&[], &[], &[]), SAMPLE_TEXT).is_empty());
        assert_eq!(lexicon_ate(&cfg(&["price"], &[], &[]), "PRICE!!"), ["price"]);
        let c = cfg(&["battery", "battery life", "life"], &[], &[]);
        assert_eq!(lexicon_ate(&c, "Battery life is short"), ["battery life", "battery", "life"]);
        assert!(lexicon_ate(&cfg(&["battery life"], &[], &[]), "life of the battery").is_empty());
    }

    #[test]
    fn classification() {
        let c = cfg(&[], &[], &["high"]);
        assert_eq!(lexicon_asc(&c, SAMPLE_TEXT, "price").unwrap().polarity, Polarity::Negative);

        let c = cfg(&[], &["good"], &[]);
        assert_eq!(lexicon_asc(&c, "not good battery", "battery").unwrap().polarity, Polarity::Negative);
        assert_eq!(lexicon_asc(&c, "good battery", "battery").unwrap().polarity, Polarity::Positive);
        assert_eq!(lexicon_asc(&c, "the battery lasts", "battery").unwrap().polarity, Polarity::Neutral);
        // cue beyond the window
        assert_eq!(lexicon_asc(&c, "battery a b c good", "battery").unwrap().polarity, Polarity::Neutral);
        // negator between term and cue
        assert_eq!(lexicon_asc(&c, "battery is not good", "battery").unwrap().polarity, Polarity::Negative);
        assert!(matches!(lexicon_asc(&c, "nothing here", "battery"), Err(BackendError::TermNotFound { .. })));

        let p = lexicon_asc(&c, "good battery", "battery").unwrap();
        assert!(p.validate().is_ok());
    }

    #[test]
    fn nearest_cue_decides() {
        let c = cfg(&[], &["great"], &["rude"]);
        let text = "great food but the staff rude";
        assert_eq!(lexicon_asc(&c, text, "staff").unwrap().polarity, Polarity::Negative);
        assert_eq!(lexicon_asc(&c, text, "food").unwrap().polarity, Polarity::Positive);
    }

    #[test]
    fn builtin_sample() {
        let c = LexiconConfig::builtin();
        c.validate().unwrap();
        assert_eq!(lexicon_ate(&c, SAMPLE_TEXT), ["price", "restaurant"]);
        assert_eq!(lexicon_asc(&c, SAMPLE_TEXT, "price").unwrap().polarity, Polarity::Negative);
        assert_eq!(lexicon_asc(&c, SAMPLE_TEXT, "restaurant").unwrap().polarity, Polarity::Positive);
    }

    #[test]
    fn bad_configs() {
        let mut c = cfg(&[], &["x"], &["x"]);
        assert!(c.validate().is_err());
        c.negative_cues.clear();
        c.window = 0;
        assert!(LexiconBackend::new(c).is_err());
    }

    proptest! {
        // one cue, one term, filler words that are neither
        #[test]
        fn negator_before_cue_flips(
            fillers in prop::collection::vec(prop::sample::select(vec!["the", "was", "quite", "and"]), 0..3),
            cue_first: bool,
            positive: bool,
        ) {
            let c = LexiconConfig { window: 10, ..cfg(&[], &["good"], &["bad"]) };
            let cue = if positive { "good" } else { "bad" };
            let middle = fillers.join(" ");
            let plain = if cue_first { format!("{cue} {middle} battery") } else { format!("battery {middle} {cue}") };
            let negated = plain.replacen(cue, &format!("not {cue}"), 1);
            let before = lexicon_asc(&c, &plain, "battery").unwrap().polarity;
            let after = lexicon_asc(&c, &negated, "battery").unwrap().polarity;
            let expected = if positive { Polarity::Positive } else { Polarity::Negative };
            prop_assert_eq!(before, expected);
            prop_assert_ne!(after, before);
            prop_assert!(after != Polarity::Neutral);
        }

        #[test]
        fn neutral_unaffected_by_negators(n in 0usize..3) {
            let c = cfg(&[], &["good"], &["bad"]);
            let text = format!("{} battery", "not ".repeat(n));
            prop_assert_eq!(lexicon_asc(&c, &text, "battery").unwrap().polarity, Polarity::Neutral);
        }
    }
}
