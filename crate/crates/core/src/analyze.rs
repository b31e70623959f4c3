//! Veracity-oriented analyses over extracted reviews: rating/comment
//! sentiment inconsistency, language annotation and translation,
//! authenticity labels, and the filter that acts on them.
//!
//! Every model-backed step sits behind a small trait. The in-repo
//! implementations are deterministic (a word lexicon, a stop-word table,
//! lookup tables) so the whole layer runs offline; real models plug in
//! through the same traits.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assemble::ReviewRecord;
use crate::backend::{BackendError, CallGate, Concurrency};
use crate::recognize::normalize_text;

/// Three-valued sentiment. Ordered `Negative < Neutral < Positive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Negative,
    Neutral,
    Positive,
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "negative" => Ok(Polarity::Negative),
            "neutral" => Ok(Polarity::Neutral),
            "positive" => Ok(Polarity::Positive),
            other => Err(format!("unknown polarity `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Authenticity {
    Genuine,
    Fake,
    Unknown,
}

impl FromStr for Authenticity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "genuine" => Ok(Authenticity::Genuine),
            "fake" => Ok(Authenticity::Fake),
            "unknown" => Ok(Authenticity::Unknown),
            other => Err(format!("unknown authenticity label `{other}`")),
        }
    }
}

/// Analysis results attached to a record. Absent fields mean the stage
/// did not run (or, for the inconsistency flag, had nothing to compare).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisFlags {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment_polarity: Option<Polarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating_polarity: Option<Polarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment_inconsistent: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translated_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authenticity: Option<Authenticity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("star rating {0} outside 1..=5")]
pub struct StarsOutOfRange(pub u8);

/// Polarity assigned to each star count, 1 through 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RatingPolarityMap(pub [Polarity; 5]);

impl Default for RatingPolarityMap {
    fn default() -> Self {
        use Polarity::*;
        Self([Negative, Negative, Neutral, Positive, Positive])
    }
}

impl RatingPolarityMap {
    pub fn polarity(&self, stars: u8) -> Result<Polarity, StarsOutOfRange> {
        match stars {
            1..=5 => Ok(self.0[stars as usize - 1]),
            _ => Err(StarsOutOfRange(stars)),
        }
    }
}

/// Default star-to-polarity mapping: 4 and 5 positive, 3 neutral, 1 and 2
/// negative.
pub fn rating_polarity(stars: u8) -> Result<Polarity, StarsOutOfRange> {
    RatingPolarityMap::default().polarity(stars)
}

/// True when rating and comment take opposite, non-neutral sides.
pub fn sentiment_inconsistency(rating: Polarity, comment: Polarity) -> bool {
    rating != Polarity::Neutral && comment != Polarity::Neutral && rating != comment
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sentiment {
    pub polarity: Polarity,
    /// Signed strength in `[-1, 1]`.
    pub score: f64,
}

pub trait SentimentClassifier: Send + Sync {
    fn name(&self) -> &str;
    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }
    fn classify(&self, text: &str) -> Result<Sentiment, BackendError>;
}

pub trait LanguageDetector: Send + Sync {
    fn name(&self) -> &str;
    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }
    /// Best-guess two-letter language code.
    fn detect(&self, text: &str) -> Result<String, BackendError>;
}

pub trait Translator: Send + Sync {
    fn name(&self) -> &str;
    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }
    /// Must return `text` unchanged when `source == target`.
    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, BackendError>;
}

pub trait AuthenticityClassifier: Send + Sync {
    fn name(&self) -> &str;
    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }
    fn classify(&self, text: &str) -> Result<Authenticity, BackendError>;
}

/// Lowercased word tokens; apostrophes inside words are kept.
fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|w| w.trim_matches('\'').to_lowercase())
        .filter(|w| !w.is_empty())
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Sentiment from counting hits against positive and negative word lists.
///
/// `score = (pos - neg) / max(1, pos + neg)`; the polarity is its sign.
#[derive(Debug, Clone)]
pub struct LexiconSentiment {
    positive: HashSet<String>,
    negative: HashSet<String>,
}

const BUILTIN_LEXICON: &str = include_str!("../lexicon/default.txt");

impl Default for LexiconSentiment {
    fn default() -> Self {
        Self::parse(BUILTIN_LEXICON).expect("built-in lexicon parses")
    }
}

impl LexiconSentiment {
    /// Parses a lexicon: one token per line under `[positive]` and
    /// `[negative]` headers. `#` starts a comment line.
    pub fn parse(content: &str) -> Result<Self, TableError> {
        let mut positive = HashSet::new();
        let mut negative = HashSet::new();
        let mut section: Option<bool> = None;
        for (i, line) in content.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.to_lowercase().as_str() {
                "[positive]" => section = Some(true),
                "[negative]" => section = Some(false),
                token => match section {
                    Some(true) => {
                        positive.insert(token.to_string());
                    }
                    Some(false) => {
                        negative.insert(token.to_string());
                    }
                    None => {
                        return Err(TableError::Format {
                            line: i + 1,
                            message: format!("token `{token}` before any section header"),
                        })
                    }
                },
            }
        }
        Ok(Self { positive, negative })
    }

    pub fn from_file(path: &Path) -> Result<Self, TableError> {
        Self::parse(&read_table_file(path)?)
    }

    pub fn score(&self, text: &str) -> Sentiment {
        let (mut pos, mut neg) = (0usize, 0usize);
        for w in words(text) {
            if self.positive.contains(&w) {
                pos += 1;
            } else if self.negative.contains(&w) {
                neg += 1;
            }
        }
        let score = (pos as f64 - neg as f64) / (pos + neg).max(1) as f64;
        let polarity = if score > 0.0 {
            Polarity::Positive
        } else if score < 0.0 {
            Polarity::Negative
        } else {
            Polarity::Neutral
        };
        Sentiment { polarity, score }
    }
}

impl SentimentClassifier for LexiconSentiment {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn classify(&self, text: &str) -> Result<Sentiment, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::new(self.name(), text, "empty text"));
        }
        Ok(self.score(text))
    }
}

/// ISO 639-1 two-letter codes.
const ISO_639_1: &[&str] = &[
    "aa", "ab", "ae", "af", "ak", "am", "an", "ar", "as", "av", "ay", "az", "ba", "be", "bg", "bh",
    "bi", "bm", "bn", "bo", "br", "bs", "ca", "ce", "ch", "co", "cr", "cs", "cu", "cv", "cy", "da",
    "de", "dv", "dz", "ee", "el", "en", "eo", "es", "et", "eu", "fa", "ff", "fi", "fj", "fo", "fr",
    "fy", "ga", "gd", "gl", "gn", "gu", "gv", "ha", "he", "hi", "ho", "hr", "ht", "hu", "hy", "hz",
    "ia", "id", "ie", "ig", "ii", "ik", "io", "is", "it", "iu", "ja", "jv", "ka", "kg", "ki", "kj",
    "kk", "kl", "km", "kn", "ko", "kr", "ks", "ku", "kv", "kw", "ky", "la", "lb", "lg", "li", "ln",
    "lo", "lt", "lu", "lv", "mg", "mh", "mi", "mk", "ml", "mn", "mr", "ms", "mt", "my", "na", "nb",
    "nd", "ne", "ng", "nl", "nn", "no", "nr", "nv", "ny", "oc", "oj", "om", "or", "os", "pa", "pi",
    "pl", "ps", "pt", "qu", "rm", "rn", "ro", "ru", "rw", "sa", "sc", "sd", "se", "sg", "si", "sk",
    "sl", "sm", "sn", "so", "sq", "sr", "ss", "st", "su", "sv", "sw", "ta", "te", "tg", "th", "ti",
    "tk", "tl", "tn", "to", "tr", "ts", "tt", "tw", "ty", "ug", "uk", "ur", "uz", "ve", "vi", "vo",
    "wa", "wo", "xh", "yi", "yo", "za", "zh", "zu",
];

pub fn is_language_code(code: &str) -> bool {
    ISO_639_1.binary_search(&code).is_ok()
}

/// Stop words per language. Earlier rows win ties.
const STOP_WORDS: &[(&str, &[&str])] = &[
    (
        "en",
        &[
            "the", "is", "and", "this", "it", "was", "very", "of", "to", "with", "for", "not", "i",
            "my", "are", "a", "an", "in", "but", "have", "that", "they", "would", "be",
        ],
    ),
    (
        "fr",
        &[
            "le", "la", "les", "est", "et", "ce", "cette", "très", "un", "une", "des", "du", "pas",
            "je", "il", "mais", "pour", "avec", "ne", "au", "sont", "c'est", "j'ai", "nous",
        ],
    ),
    (
        "de",
        &[
            "der", "die", "das", "ist", "und", "nicht", "sehr", "ein", "eine", "ich", "es", "mit",
            "für", "auf", "aber", "war", "zu", "sich", "auch", "wir",
        ],
    ),
    (
        "es",
        &[
            "el", "los", "las", "es", "y", "muy", "una", "no", "con", "para", "que", "pero", "del",
            "lo", "por", "está", "fue", "como", "su",
        ],
    ),
    (
        "it",
        &[
            "il", "è", "e", "molto", "uno", "non", "con", "per", "che", "ma", "gli", "della",
            "sono", "ho", "questo", "questa", "anche",
        ],
    ),
    (
        "pt",
        &[
            "o", "os", "é", "muito", "um", "uma", "não", "com", "para", "que", "mas", "do", "da",
            "em", "foi", "este", "esta", "eu",
        ],
    ),
    (
        "nl",
        &[
            "de", "het", "is", "en", "zeer", "een", "niet", "met", "voor", "dat", "maar", "ik",
            "was", "heel", "van", "ook", "zijn",
        ],
    ),
];

/// Picks the language whose stop words occur most often; `en` when none do.
#[derive(Debug, Clone, Default)]
pub struct StopWordLanguageDetector;

impl LanguageDetector for StopWordLanguageDetector {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn detect(&self, text: &str) -> Result<String, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::new(self.name(), text, "empty text"));
        }
        let tokens: Vec<String> = words(text).collect();
        let mut best = ("en", 0usize);
        for (code, list) in STOP_WORDS {
            let hits = tokens.iter().filter(|t| list.contains(&t.as_str())).count();
            if hits > best.1 {
                best = (code, hits);
            }
        }
        Ok(best.0.to_string())
    }
}

/// A `text -> output` table keyed by normalized text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LookupTable(BTreeMap<String, String>);

impl LookupTable {
    /// One `input<TAB>output` pair per line; blank lines are ignored.
    pub fn parse(content: &str) -> Result<Self, TableError> {
        let mut map = BTreeMap::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (input, output) = line.split_once('\t').ok_or_else(|| TableError::Format {
                line: i + 1,
                message: "expected `input<TAB>output`".to_string(),
            })?;
            map.insert(normalize_text(input), output.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn from_file(path: &Path) -> Result<Self, TableError> {
        Self::parse(&read_table_file(path)?)
    }

    pub fn get(&self, text: &str) -> Option<&str> {
        self.0.get(&normalize_text(text)).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn read_table_file(path: &Path) -> Result<String, TableError> {
    fs::read_to_string(path).map_err(|source| TableError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Language codes from a lookup table, falling back to another detector.
pub struct TableLanguageDetector {
    table: LookupTable,
    fallback: Box<dyn LanguageDetector>,
}

impl TableLanguageDetector {
    pub fn new(table: LookupTable, fallback: Box<dyn LanguageDetector>) -> Self {
        Self { table, fallback }
    }
}

impl LanguageDetector for TableLanguageDetector {
    fn name(&self) -> &str {
        "fixture"
    }

    fn detect(&self, text: &str) -> Result<String, BackendError> {
        match self.table.get(text) {
            Some(code) if is_language_code(code) => Ok(code.to_string()),
            Some(code) => Err(BackendError::new(
                self.name(),
                text,
                format!("table holds invalid language code `{code}`"),
            )),
            None => self.fallback.detect(text),
        }
    }
}

fn check_codes(backend: &str, text: &str, source: &str, target: &str) -> Result<(), BackendError> {
    for code in [source, target] {
        if !is_language_code(code) {
            return Err(BackendError::new(
                backend,
                text,
                format!("unknown language code `{code}`"),
            ));
        }
    }
    Ok(())
}

/// Passes text through untouched. The language flag on the record is the
/// only trace of the source language.
#[derive(Debug, Clone, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn name(&self) -> &str {
        "identity"
    }

    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, BackendError> {
        check_codes(self.name(), text, source, target)?;
        Ok(text.to_string())
    }
}

/// Translations looked up in a table; a missing entry is a failure.
#[derive(Debug, Clone, Default)]
pub struct TableTranslator {
    table: LookupTable,
}

impl TableTranslator {
    pub fn new(table: LookupTable) -> Self {
        Self { table }
    }
}

impl Translator for TableTranslator {
    fn name(&self) -> &str {
        "fixture"
    }

    fn translate(&self, text: &str, source: &str, target: &str) -> Result<String, BackendError> {
        check_codes(self.name(), text, source, target)?;
        if source == target {
            return Ok(text.to_string());
        }
        self.table.get(text).map(str::to_string).ok_or_else(|| {
            BackendError::new(
                self.name(),
                text,
                format!("no {source}->{target} translation in table"),
            )
        })
    }
}

/// Always answers `unknown`; stands in for an external model.
#[derive(Debug, Clone, Default)]
pub struct UnknownAuthenticity;

impl AuthenticityClassifier for UnknownAuthenticity {
    fn name(&self) -> &str {
        "unknown"
    }

    fn classify(&self, text: &str) -> Result<Authenticity, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::new(self.name(), text, "empty text"));
        }
        Ok(Authenticity::Unknown)
    }
}

/// Labels looked up in a table; texts not listed are `unknown`.
#[derive(Debug, Clone)]
pub struct TableAuthenticity {
    table: LookupTable,
}

impl TableAuthenticity {
    /// Fails when the table contains a label other than
    /// genuine/fake/unknown.
    pub fn new(table: LookupTable) -> Result<Self, TableError> {
        for (i, label) in table.0.values().enumerate() {
            label
                .parse::<Authenticity>()
                .map_err(|message| TableError::Format {
                    line: i + 1,
                    message,
                })?;
        }
        Ok(Self { table })
    }
}

impl AuthenticityClassifier for TableAuthenticity {
    fn name(&self) -> &str {
        "fixture"
    }

    fn classify(&self, text: &str) -> Result<Authenticity, BackendError> {
        match self.table.get(text) {
            Some(label) => label
                .parse()
                .map_err(|e: String| BackendError::new(self.name(), text, e)),
            None => Ok(Authenticity::Unknown),
        }
    }
}

/// Which flags cause a record to be dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    #[serde(default)]
    pub drop_inconsistent: bool,
    #[serde(default)]
    pub drop_fake: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("record {record_id}: flag `{flag}` required by the filter policy is missing")]
pub struct MissingFlag {
    pub record_id: String,
    pub flag: &'static str,
}

/// Removes records flagged inconsistent or fake, as the policy asks.
///
/// A record without stars can never be inconsistent, so for the
/// inconsistency axis it only needs a comment polarity. A rated record
/// needs the inconsistency flag itself.
pub fn veracity_filter(
    records: &[ReviewRecord],
    policy: FilterPolicy,
) -> Result<Vec<ReviewRecord>, MissingFlag> {
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let missing = |flag| MissingFlag {
            record_id: r.record_id().to_string(),
            flag,
        };
        let mut drop = false;
        if policy.drop_inconsistent {
            if r.flags.comment_polarity.is_none() {
                return Err(missing("comment_polarity"));
            }
            match (r.stars(), r.flags.sentiment_inconsistent) {
                (Some(_), None) => return Err(missing("sentiment_inconsistent")),
                (_, Some(true)) => drop = true,
                _ => {}
            }
        }
        if policy.drop_fake {
            match r.flags.authenticity {
                None => return Err(missing("authenticity")),
                Some(Authenticity::Fake) => drop = true,
                Some(_) => {}
            }
        }
        if !drop {
            out.push(r.clone());
        }
    }
    Ok(out)
}

/// The analysis backends wired together, each optional stage `None` when
/// disabled.
pub struct Analyzer {
    sentiment: Option<(Box<dyn SentimentClassifier>, CallGate)>,
    language: Option<(Box<dyn LanguageDetector>, CallGate)>,
    translator: (Box<dyn Translator>, CallGate),
    authenticity: Option<(Box<dyn AuthenticityClassifier>, CallGate)>,
    polarity_map: RatingPolarityMap,
    target_language: String,
}

impl fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Analyzer")
            .field("sentiment", &self.sentiment.as_ref().map(|s| s.0.name()))
            .field("language", &self.language.as_ref().map(|s| s.0.name()))
            .field("translator", &self.translator.0.name())
            .field(
                "authenticity",
                &self.authenticity.as_ref().map(|s| s.0.name()),
            )
            .field("polarity_map", &self.polarity_map)
            .finish()
    }
}

impl Default for Analyzer {
    fn default() -> Self {
        Self::new(
            Some(Box::new(LexiconSentiment::default())),
            Some(Box::new(StopWordLanguageDetector)),
            Box::new(IdentityTranslator),
            Some(Box::new(UnknownAuthenticity)),
            RatingPolarityMap::default(),
        )
    }
}

impl Analyzer {
    pub fn new(
        sentiment: Option<Box<dyn SentimentClassifier>>,
        language: Option<Box<dyn LanguageDetector>>,
        translator: Box<dyn Translator>,
        authenticity: Option<Box<dyn AuthenticityClassifier>>,
        polarity_map: RatingPolarityMap,
    ) -> Self {
        Self {
            sentiment: sentiment.map(|b| {
                let g = CallGate::new(b.concurrency());
                (b, g)
            }),
            language: language.map(|b| {
                let g = CallGate::new(b.concurrency());
                (b, g)
            }),
            translator: {
                let g = CallGate::new(translator.concurrency());
                (translator, g)
            },
            authenticity: authenticity.map(|b| {
                let g = CallGate::new(b.concurrency());
                (b, g)
            }),
            polarity_map,
            target_language: "en".to_string(),
        }
    }

    pub fn with_target_language(mut self, code: &str) -> Self {
        self.target_language = code.to_string();
        self
    }

    /// Recomputes every enabled flag of `record` from scratch.
    pub fn annotate(&self, record: &ReviewRecord) -> Result<ReviewRecord, BackendError> {
        let mut flags = AnalysisFlags::default();
        let text = record.text();

        if let Some((detector, gate)) = &self.language {
            let code = {
                let _g = gate.enter();
                detector.detect(text)?
            };
            let (translator, tgate) = &self.translator;
            let translated = {
                let _g = tgate.enter();
                translator.translate(text, &code, &self.target_language)?
            };
            flags.language = Some(code);
            flags.translated_text = Some(translated);
        }
        let working = flags.translated_text.as_deref().unwrap_or(text);

        if let Some((classifier, gate)) = &self.sentiment {
            let _g = gate.enter();
            flags.comment_polarity = Some(classifier.classify(working)?.polarity);
        }
        if let Some(stars) = record.stars() {
            let polarity = self
                .polarity_map
                .polarity(stars)
                .map_err(|e| BackendError::new("rating", record.record_id(), e.to_string()))?;
            flags.rating_polarity = Some(polarity);
        }
        if let (Some(r), Some(c)) = (flags.rating_polarity, flags.comment_polarity) {
            flags.sentiment_inconsistent = Some(sentiment_inconsistency(r, c));
        }
        if let Some((classifier, gate)) = &self.authenticity {
            let _g = gate.enter();
            flags.authenticity = Some(classifier.classify(working)?);
        }

        let mut out = record.clone();
        out.flags = flags;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;
    use proptest::prelude::*;

    fn bb() -> BoundingBox {
        BoundingBox::new(0.0, 0.0, 10.0, 10.0).unwrap()
    }

    fn rec(id: &str, text: &str, stars: Option<u8>) -> ReviewRecord {
        ReviewRecord::new(id, "page", None, text, bb(), stars.map(|s| (s, bb()))).unwrap()
    }

    #[test]
    fn rating_polarity_examples() {
        assert_eq!(rating_polarity(5), Ok(Polarity::Positive));
        assert_eq!(rating_polarity(4), Ok(Polarity::Positive));
        assert_eq!(rating_polarity(3), Ok(Polarity::Neutral));
        assert_eq!(rating_polarity(2), Ok(Polarity::Negative));
        assert_eq!(rating_polarity(1), Ok(Polarity::Negative));
        assert_eq!(rating_polarity(0), Err(StarsOutOfRange(0)));
        assert_eq!(rating_polarity(6), Err(StarsOutOfRange(6)));
    }

    #[test]
    fn rating_polarity_is_monotone() {
        for s in 1..5 {
            assert!(rating_polarity(s).unwrap() <= rating_polarity(s + 1).unwrap());
        }
    }

    #[test]
    fn lexicon_examples() {
        let lex = LexiconSentiment::default();
        // both words sit in the positive section of the shipped lexicon
        assert!(lex.positive.contains("great") && lex.positive.contains("excellent"));
        assert_eq!(
            lex.classify("great excellent").unwrap(),
            Sentiment {
                polarity: Polarity::Positive,
                score: 1.0
            }
        );
        assert!(lex.negative.contains("terrible") && lex.negative.contains("awful"));
        assert_eq!(
            lex.classify("terrible awful").unwrap(),
            Sentiment {
                polarity: Polarity::Negative,
                score: -1.0
            }
        );
        assert_eq!(
            lex.classify("the box arrived").unwrap(),
            Sentiment {
                polarity: Polarity::Neutral,
                score: 0.0
            }
        );
        assert_eq!(
            lex.classify("Great, but awful battery. Terrible!")
                .unwrap()
                .score,
            -1.0 / 3.0
        );
        assert!(lex.classify("  ").is_err());
    }

    #[test]
    fn lexicon_lists_are_disjoint() {
        let lex = LexiconSentiment::default();
        assert!(lex.positive.is_disjoint(&lex.negative));
    }

    #[test]
    fn lexicon_parse() {
        let lex = LexiconSentiment::parse("# c\n[positive]\nYay\n\n[negative]\nboo\n").unwrap();
        assert_eq!(lex.score("yay yay boo").score, 1.0 / 3.0);
        assert!(LexiconSentiment::parse("orphan\n").is_err());
    }

    #[test]
    fn inconsistency_examples() {
        use Polarity::*;
        assert!(sentiment_inconsistency(Positive, Negative));
        assert!(!sentiment_inconsistency(Positive, Positive));
        assert!(!sentiment_inconsistency(Neutral, Negative));
        for a in [Negative, Neutral, Positive] {
            for b in [Negative, Neutral, Positive] {
                assert_eq!(sentiment_inconsistency(a, b), sentiment_inconsistency(b, a));
            }
        }
    }

    #[test]
    fn language_examples() {
        let d = StopWordLanguageDetector;
        assert_eq!(d.detect("this is a great product").unwrap(), "en");
        assert_eq!(d.detect("ce produit est excellent").unwrap(), "fr");
        assert_eq!(d.detect("das ist sehr gut").unwrap(), "de");
        assert_eq!(d.detect("xyzzy").unwrap(), "en");
        assert!(d.detect("").is_err());
    }

    #[test]
    fn iso_table_is_sorted() {
        assert!(ISO_639_1.windows(2).all(|w| w[0] < w[1]));
        assert!(is_language_code("fr"));
        assert!(!is_language_code("xx"));
    }

    #[test]
    fn translation_examples() {
        assert_eq!(
            IdentityTranslator.translate("good", "en", "en").unwrap(),
            "good"
        );
        let t = TableTranslator::new(LookupTable::parse("bien\tgood\n").unwrap());
        assert_eq!(t.translate("bien", "fr", "en").unwrap(), "good");
        assert_eq!(t.translate("good", "en", "en").unwrap(), "good");
        assert!(t.translate("bien", "zz", "en").is_err());
        assert!(IdentityTranslator.translate("bien", "fr", "qq").is_err());
        assert!(t.translate("inconnu", "fr", "en").is_err());
    }

    #[test]
    fn authenticity_examples() {
        assert_eq!(
            UnknownAuthenticity.classify("anything").unwrap(),
            Authenticity::Unknown
        );
        let t = TableAuthenticity::new(
            LookupTable::parse(
                "buy now best ever!!!\tfake\nsolid phone, battery lasts two days\tgenuine\n",
            )
            .unwrap(),
        )
        .unwrap();
        assert_eq!(
            t.classify("buy now best ever!!!").unwrap(),
            Authenticity::Fake
        );
        assert_eq!(
            t.classify("solid phone,  battery lasts two days").unwrap(),
            Authenticity::Genuine
        );
        assert_eq!(t.classify("not listed").unwrap(), Authenticity::Unknown);
        assert!(TableAuthenticity::new(LookupTable::parse("x\tmaybe\n").unwrap()).is_err());
    }

    #[test]
    fn lookup_table_rejects_lines_without_tab() {
        assert!(matches!(
            LookupTable::parse("a\tb\nno tab here\n"),
            Err(TableError::Format { line: 2, .. })
        ));
    }

    fn fig8_records() -> Vec<ReviewRecord> {
        let analyzer = Analyzer::default();
        vec![
            analyzer
                .annotate(&rec("p#000", "Excellent phone, love the camera", Some(5)))
                .unwrap(),
            analyzer
                .annotate(&rec(
                    "p#001",
                    "Stopped working after a week, very disappointed",
                    Some(4),
                ))
                .unwrap(),
        ]
    }

    #[test]
    fn fig8_scenario() {
        let recs = fig8_records();
        assert_eq!(recs[0].flags.sentiment_inconsistent, Some(false));
        assert_eq!(recs[1].flags.sentiment_inconsistent, Some(true));
        let kept = veracity_filter(
            &recs,
            FilterPolicy {
                drop_inconsistent: true,
                drop_fake: false,
            },
        )
        .unwrap();
        assert_eq!(kept, vec![recs[0].clone()]);
        assert_eq!(
            veracity_filter(&recs, FilterPolicy::default()).unwrap(),
            recs
        );
    }

    #[test]
    fn unknown_is_not_dropped_as_fake() {
        let recs = fig8_records();
        let policy = FilterPolicy {
            drop_inconsistent: false,
            drop_fake: true,
        };
        assert_eq!(veracity_filter(&recs, policy).unwrap(), recs);
    }

    #[test]
    fn missing_flags_are_errors() {
        let bare = rec("p#000", "fine", Some(3));
        let err = veracity_filter(
            std::slice::from_ref(&bare),
            FilterPolicy {
                drop_inconsistent: true,
                drop_fake: false,
            },
        )
        .unwrap_err();
        assert_eq!(err.flag, "comment_polarity");
        let err = veracity_filter(
            &[bare],
            FilterPolicy {
                drop_inconsistent: false,
                drop_fake: true,
            },
        )
        .unwrap_err();
        assert_eq!(err.flag, "authenticity");
    }

    #[test]
    fn unrated_records_never_inconsistent() {
        let r = Analyzer::default()
            .annotate(&rec("p#000", "awful", None))
            .unwrap();
        assert_eq!(r.flags.rating_polarity, None);
        assert_eq!(r.flags.sentiment_inconsistent, None);
        let kept = veracity_filter(
            std::slice::from_ref(&r),
            FilterPolicy {
                drop_inconsistent: true,
                drop_fake: false,
            },
        )
        .unwrap();
        assert_eq!(kept, vec![r]);
    }

    #[test]
    fn translation_feeds_sentiment() {
        let analyzer = Analyzer::new(
            Some(Box::new(LexiconSentiment::default())),
            Some(Box::new(StopWordLanguageDetector)),
            Box::new(TableTranslator::new(
                LookupTable::parse("le produit est très mauvais\tthe product is very bad\n")
                    .unwrap(),
            )),
            None,
            RatingPolarityMap::default(),
        );
        let r = analyzer
            .annotate(&rec("p#000", "le produit est très mauvais", Some(5)))
            .unwrap();
        assert_eq!(r.flags.language.as_deref(), Some("fr"));
        assert_eq!(
            r.flags.translated_text.as_deref(),
            Some("the product is very bad")
        );
        assert_eq!(r.flags.comment_polarity, Some(Polarity::Negative));
        assert_eq!(r.flags.sentiment_inconsistent, Some(true));
        assert_eq!(r.text(), "le produit est très mauvais");
    }

    fn arb_flagged() -> impl Strategy<Value = ReviewRecord> {
        (
            proptest::option::of(1u8..=5),
            prop::sample::select(vec![
                Polarity::Negative,
                Polarity::Neutral,
                Polarity::Positive,
            ]),
            prop::sample::select(vec![
                Authenticity::Genuine,
                Authenticity::Fake,
                Authenticity::Unknown,
            ]),
        )
            .prop_map(|(stars, comment, auth)| {
                let mut r = rec("r", "text", stars);
                r.flags.comment_polarity = Some(comment);
                if let Some(s) = stars {
                    let rp = rating_polarity(s).unwrap();
                    r.flags.rating_polarity = Some(rp);
                    r.flags.sentiment_inconsistent = Some(sentiment_inconsistency(rp, comment));
                }
                r.flags.authenticity = Some(auth);
                r
            })
    }

    proptest! {
        #[test]
        fn filter_subsequence_and_idempotent(
            recs in proptest::collection::vec(arb_flagged(), 0..12),
            drop_inconsistent: bool,
            drop_fake: bool,
        ) {
            let policy = FilterPolicy { drop_inconsistent, drop_fake };
            let once = veracity_filter(&recs, policy).unwrap();
            prop_assert_eq!(&veracity_filter(&once, policy).unwrap(), &once);
            let mut it = recs.iter();
            for r in &once {
                prop_assert!(it.any(|x| x == r));
            }
        }
    }
}
