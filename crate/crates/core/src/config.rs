//! Pipeline configuration: a single TOML file exposing every threshold,
//! backend choice and output path.
//!
//! ```toml
//! input_dir = "pages"
//! workers = 4
//! conf_threshold = 0.8
//! nms_iou = 0.5
//! pad_px = 2.0
//! jaccard_tau = 0.9
//! rating_polarity = ["negative", "negative", "neutral", "positive", "positive"]
//!
//! [backends]
//! detector = "fixture"      # fixture | fixture-raw
//! ocr = "fixture"
//! sentiment = "lexicon"     # lexicon | none
//! language = "heuristic"    # heuristic | fixture | none
//! translation = "identity"  # identity | fixture
//! authenticity = "unknown"  # unknown | fixture | none
//!
//! [tables]
//! translation = "tables/translation.tsv"
//!
//! [filter]
//! drop_inconsistent = true
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyze::{
    Analyzer, AuthenticityClassifier, FilterPolicy, IdentityTranslator, LanguageDetector,
    LexiconSentiment, LookupTable, RatingPolarityMap, SentimentClassifier,
    StopWordLanguageDetector, TableAuthenticity, TableError, TableLanguageDetector,
    TableTranslator, Translator, UnknownAuthenticity,
};
use crate::assemble::DEFAULT_JACCARD_TAU;
use crate::detect::{ConfidenceThresholds, Detector, FixtureDetector, ObjectClass};
use crate::evaluate::{EvaluationSettings, DEFAULT_CONF_THRESHOLD, DEFAULT_PRECISION_IOU};
use crate::recognize::{FixtureRecognizer, Recognizer, DEFAULT_PAD_PX};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{key} = {value} is outside [0, 1]")]
    Threshold { key: String, value: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown {kind} backend `{name}`")]
    UnknownBackend { kind: &'static str, name: String },
    #[error("backend {kind} = \"fixture\" needs [tables].{kind}")]
    MissingTable { kind: &'static str },
    #[error("table {path}: {source}")]
    Table { path: PathBuf, source: TableError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSelection {
    pub detector: String,
    pub ocr: String,
    pub sentiment: String,
    pub language: String,
    pub translation: String,
    pub authenticity: String,
}

impl Default for BackendSelection {
    fn default() -> Self {
        Self {
            detector: "fixture".into(),
            ocr: "fixture".into(),
            sentiment: "lexicon".into(),
            language: "heuristic".into(),
            translation: "identity".into(),
            authenticity: "unknown".into(),
        }
    }
}

/// Data files backing the table-driven backends.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TablePaths {
    pub lexicon: Option<PathBuf>,
    pub language: Option<PathBuf>,
    pub translation: Option<PathBuf>,
    pub authenticity: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub records: Option<PathBuf>,
    pub annotated: Option<PathBuf>,
    pub filtered: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub conf_threshold: f64,
    pub precision_iou: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            precision_iou: DEFAULT_PRECISION_IOU,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input_dir: Option<PathBuf>,
    pub workers: usize,
    pub conf_threshold: f64,
    pub class_conf_thresholds: BTreeMap<ObjectClass, f64>,
    pub nms_iou: f64,
    pub pad_px: f64,
    pub jaccard_tau: f64,
    pub rating_polarity: RatingPolarityMap,
    pub target_language: String,
    pub backends: BackendSelection,
    pub tables: TablePaths,
    pub filter: FilterPolicy,
    pub evaluation: EvaluationConfig,
    pub outputs: OutputPaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input_dir: None,
            workers: 1,
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            class_conf_thresholds: BTreeMap::new(),
            nms_iou: 0.5,
            pad_px: DEFAULT_PAD_PX,
            jaccard_tau: DEFAULT_JACCARD_TAU,
            rating_polarity: RatingPolarityMap::default(),
            target_language: "en".into(),
            backends: BackendSelection::default(),
            tables: TablePaths::default(),
            filter: FilterPolicy::default(),
            evaluation: EvaluationConfig::default(),
            outputs: OutputPaths::default(),
        }
    }
}

fn check_unit(key: &str, value: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ConfigError::Threshold {
            key: key.to_string(),
            value,
        })
    }
}

impl PipelineConfig {
    pub fn parse(content: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: PipelineConfig =
            toml::from_str(content).map_err(|source| ConfigError::Toml {
                path: path.to_path_buf(),
                source,
            })?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let content = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&content, path)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.input_dir);
        fix(&mut self.tables.lexicon);
        fix(&mut self.tables.language);
        fix(&mut self.tables.translation);
        fix(&mut self.tables.authenticity);
        fix(&mut self.outputs.records);
        fix(&mut self.outputs.annotated);
        fix(&mut self.outputs.filtered);
        fix(&mut self.outputs.report);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check_unit("conf_threshold", self.conf_threshold)?;
        for (class, t) in &self.class_conf_thresholds {
            check_unit(&format!("class_conf_thresholds.{class}"), *t)?;
        }
        check_unit("nms_iou", self.nms_iou)?;
        check_unit("jaccard_tau", self.jaccard_tau)?;
        check_unit("evaluation.conf_threshold", self.evaluation.conf_threshold)?;
        check_unit("evaluation.precision_iou", self.evaluation.precision_iou)?;
        if !(self.pad_px >= 0.0 && self.pad_px.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "pad_px = {} must be >= 0",
                self.pad_px
            )));
        }
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if !crate::analyze::is_language_code(&self.target_language) {
            return Err(ConfigError::Invalid(format!(
                "target_language `{}` is not a two-letter language code",
                self.target_language
            )));
        }
        let b = &self.backends;
        let known: [(&'static str, &str, &[&str]); 6] = [
            ("detector", &b.detector, &["fixture", "fixture-raw"]),
            ("ocr", &b.ocr, &["fixture"]),
            ("sentiment", &b.sentiment, &["lexicon", "none"]),
            ("language", &b.language, &["heuristic", "fixture", "none"]),
            ("translation", &b.translation, &["identity", "fixture"]),
            (
                "authenticity",
                &b.authenticity,
                &["unknown", "fixture", "none"],
            ),
        ];
        for (kind, name, allowed) in known {
            if !allowed.contains(&name) {
                return Err(ConfigError::UnknownBackend {
                    kind,
                    name: name.to_string(),
                });
            }
        }
        let t = &self.tables;
        for (kind, name, table) in [
            ("language", &b.language, &t.language),
            ("translation", &b.translation, &t.translation),
            ("authenticity", &b.authenticity, &t.authenticity),
        ] {
            if name == "fixture" && table.is_none() {
                return Err(ConfigError::MissingTable { kind });
            }
        }
        Ok(())
    }

    pub fn confidence_thresholds(&self) -> ConfidenceThresholds {
        ConfidenceThresholds {
            default: self.conf_threshold,
            per_class: self.class_conf_thresholds.clone(),
        }
    }

    pub fn evaluation_settings(&self) -> EvaluationSettings {
        EvaluationSettings::new(
            self.evaluation.conf_threshold,
            self.evaluation.precision_iou,
        )
    }

    pub fn build_detector(&self) -> Result<Box<dyn Detector>, ConfigError> {
        match self.backends.detector.as_str() {
            "fixture" => Ok(Box::new(FixtureDetector::new())),
            "fixture-raw" => Ok(Box::new(FixtureDetector::raw())),
            other => Err(ConfigError::UnknownBackend {
                kind: "detector",
                name: other.into(),
            }),
        }
    }

    pub fn build_recognizer(&self) -> Result<Box<dyn Recognizer>, ConfigError> {
        match self.backends.ocr.as_str() {
            "fixture" => Ok(Box::new(FixtureRecognizer)),
            other => Err(ConfigError::UnknownBackend {
                kind: "ocr",
                name: other.into(),
            }),
        }
    }

    pub fn build_analyzer(&self) -> Result<Analyzer, ConfigError> {
        let table = |path: &Option<PathBuf>| -> Result<LookupTable, ConfigError> {
            let path = path.as_ref().expect("validated");
            LookupTable::from_file(path).map_err(|source| ConfigError::Table {
                path: path.clone(),
                source,
            })
        };
        let b = &self.backends;
        let sentiment: Option<Box<dyn SentimentClassifier>> = match b.sentiment.as_str() {
            "none" => None,
            _ => Some(Box::new(match &self.tables.lexicon {
                Some(path) => {
                    LexiconSentiment::from_file(path).map_err(|source| ConfigError::Table {
                        path: path.clone(),
                        source,
                    })?
                }
                None => LexiconSentiment::default(),
            })),
        };
        let language: Option<Box<dyn LanguageDetector>> = match b.language.as_str() {
            "none" => None,
            "fixture" => Some(Box::new(TableLanguageDetector::new(
                table(&self.tables.language)?,
                Box::new(StopWordLanguageDetector),
            ))),
            _ => Some(Box::new(StopWordLanguageDetector)),
        };
        let translator: Box<dyn Translator> = match b.translation.as_str() {
            "fixture" => Box::new(TableTranslator::new(table(&self.tables.translation)?)),
            _ => Box::new(IdentityTranslator),
        };
        let authenticity: Option<Box<dyn AuthenticityClassifier>> = match b.authenticity.as_str() {
            "none" => None,
            "fixture" => {
                let path = self.tables.authenticity.clone().expect("validated");
                Some(Box::new(
                    TableAuthenticity::new(table(&self.tables.authenticity)?)
                        .map_err(|source| ConfigError::Table { path, source })?,
                ))
            }
            _ => Some(Box::new(UnknownAuthenticity)),
        };
        Ok(Analyzer::new(
            sentiment,
            language,
            translator,
            authenticity,
            self.rating_polarity,
        )
        .with_target_language(&self.target_language))
    }
}
