//! Detection vocabulary, detector backends, the detection interchange
//! format, confidence filtering and class-wise non-maximum suppression.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, Concurrency, ImageRef};
use crate::geometry::{BoundingBox, BoxError};

/// The six areas of interest a detector is trained to find: one class per
/// star rating and one for the review text itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectClass {
    #[serde(rename = "rating_1")]
    Rating1,
    #[serde(rename = "rating_2")]
    Rating2,
    #[serde(rename = "rating_3")]
    Rating3,
    #[serde(rename = "rating_4")]
    Rating4,
    #[serde(rename = "rating_5")]
    Rating5,
    ReviewText,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 6] = [
        ObjectClass::Rating1,
        ObjectClass::Rating2,
        ObjectClass::Rating3,
        ObjectClass::Rating4,
        ObjectClass::Rating5,
        ObjectClass::ReviewText,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Rating1 => "rating_1",
            ObjectClass::Rating2 => "rating_2",
            ObjectClass::Rating3 => "rating_3",
            ObjectClass::Rating4 => "rating_4",
            ObjectClass::Rating5 => "rating_5",
            ObjectClass::ReviewText => "review_text",
        }
    }

    pub fn is_rating(self) -> bool {
        self != ObjectClass::ReviewText
    }

    /// Star count carried by a rating class.
    pub fn stars(self) -> Option<u8> {
        match self {
            ObjectClass::ReviewText => None,
            rating => Some(rating.code() + 1),
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectionError {
    #[error("image id must not be empty")]
    EmptyImageId,
    #[error("confidence {0} is outside [0, 1]")]
    Confidence(f64),
}

/// One area of interest found by a detector in one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    image_id: String,
    class: ObjectClass,
    confidence: f64,
    bbox: BoundingBox,
}

impl Detection {
    pub fn new(
        image_id: impl Into<String>,
        class: ObjectClass,
        confidence: f64,
        bbox: BoundingBox,
    ) -> Result<Self, DetectionError> {
        let image_id = image_id.into();
        if image_id.is_empty() {
            return Err(DetectionError::EmptyImageId);
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(DetectionError::Confidence(confidence));
        }
        Ok(Self {
            image_id,
            class,
            confidence,
            bbox,
        })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn class(&self) -> ObjectClass {
        self.class
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }
}

/// Where in a detection file a bad entry sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryPos {
    /// 1-based index into a JSON array.
    Entry(usize),
    /// 1-based line of a newline-delimited file.
    Line(usize),
}

impl fmt::Display for EntryPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntryPos::Entry(n) => write!(f, "entry {n}"),
            EntryPos::Line(n) => write!(f, "line {n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{pos}: malformed entry: {message}")]
    Malformed { pos: EntryPos, message: String },
    #[error("{pos}: unknown class `{class}`")]
    UnknownClass { pos: EntryPos, class: String },
    #[error("{pos}: invalid box: {source}")]
    InvalidBox { pos: EntryPos, source: BoxError },
    #[error("{pos}: {source}")]
    InvalidDetection {
        pos: EntryPos,
        source: DetectionError,
    },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    class: String,
    confidence: f64,
    bbox: [f64; 4],
}

fn from_raw(
    raw: serde_json::Value,
    pos: EntryPos,
    image_id: &str,
) -> Result<Detection, ParseError> {
    let raw: RawDetection = serde_json::from_value(raw).map_err(|e| ParseError::Malformed {
        pos,
        message: e.to_string(),
    })?;
    let class = raw
        .class
        .parse::<ObjectClass>()
        .map_err(|class| ParseError::UnknownClass { pos, class })?;
    let bbox =
        BoundingBox::try_from(raw.bbox).map_err(|source| ParseError::InvalidBox { pos, source })?;
    Detection::new(image_id, class, raw.confidence, bbox)
        .map_err(|source| ParseError::InvalidDetection { pos, source })
}

/// Parses a detection file: either one JSON array or one object per line.
pub fn parse_detection_file(content: &str, image_id: &str) -> Result<Vec<Detection>, ParseError> {
    let trimmed = content.trim_start_matches('\u{feff}').trim();
    if trimmed.starts_with('[') {
        let entries: Vec<serde_json::Value> =
            serde_json::from_str(trimmed).map_err(|e| ParseError::Malformed {
                pos: EntryPos::Line(e.line()),
                message: e.to_string(),
            })?;
        entries
            .into_iter()
            .enumerate()
            .map(|(i, v)| from_raw(v, EntryPos::Entry(i + 1), image_id))
            .collect()
    } else {
        content
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| {
                let pos = EntryPos::Line(i + 1);
                let v = serde_json::from_str(line.trim().trim_start_matches('\u{feff}')).map_err(
                    |e| ParseError::Malformed {
                        pos,
                        message: e.to_string(),
                    },
                )?;
                from_raw(v, pos, image_id)
            })
            .collect()
    }
}

/// Writes detections as a JSON array with one object per line.
pub fn serialize_detections(dets: &[Detection]) -> String {
    if dets.is_empty() {
        return "[]\n".to_string();
    }
    let lines: Vec<String> = dets
        .iter()
        .map(|d| {
            serde_json::to_string(&RawDetection {
                class: d.class.name().to_string(),
                confidence: d.confidence,
                bbox: d.bbox.to_array(),
            })
            .expect("detection serializes")
        })
        .collect();
    format!("[\n{}\n]\n", lines.join(",\n"))
}

/// Keeps detections with confidence at or above `tau`, in input order.
pub fn filter_confidence(dets: &[Detection], tau: f64) -> Vec<Detection> {
    dets.iter()
        .filter(|d| d.confidence >= tau)
        .cloned()
        .collect()
}

/// A default confidence cutoff with optional per-class overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceThresholds {
    pub default: f64,
    #[serde(default)]
    pub per_class: BTreeMap<ObjectClass, f64>,
}

impl Default for ConfidenceThresholds {
    fn default() -> Self {
        Self {
            default: 0.8,
            per_class: BTreeMap::new(),
        }
    }
}

impl ConfidenceThresholds {
    pub fn uniform(tau: f64) -> Self {
        Self {
            default: tau,
            per_class: BTreeMap::new(),
        }
    }

    pub fn for_class(&self, class: ObjectClass) -> f64 {
        self.per_class.get(&class).copied().unwrap_or(self.default)
    }

    pub fn apply(&self, dets: &[Detection]) -> Vec<Detection> {
        dets.iter()
            .filter(|d| d.confidence >= self.for_class(d.class))
            .cloned()
            .collect()
    }
}

/// Class-wise greedy non-maximum suppression.
///
/// Within each class the most confident remaining detection is kept and
/// every same-class detection overlapping it with IoU >= `iou_tau` is
/// dropped. Confidence ties go to the earlier input. Survivors are returned
/// in input order.
pub fn nms(dets: &[Detection], iou_tau: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .confidence
            .total_cmp(&dets[i].confidence)
            .then(i.cmp(&j))
    });
    let mut keep = vec![false; dets.len()];
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let suppressed = kept
            .iter()
            .any(|&k| dets[k].class == dets[i].class && dets[k].bbox.iou(&dets[i].bbox) >= iou_tau);
        if !suppressed {
            keep[i] = true;
            kept.push(i);
        }
    }
    dets.iter()
        .zip(keep)
        .filter(|&(_d, k)| k)
        .map(|(d, _k)| d.clone())
        .collect()
}

/// A source of detections for one image.
pub trait Detector: Send + Sync {
    fn name(&self) -> &str;

    /// Whether returned detections are already suppressed.
    fn nms_applied(&self) -> bool;

    fn concurrency(&self) -> Concurrency {
        Concurrency::Concurrent
    }

    fn detect(&self, image: &ImageRef) -> Result<Vec<Detection>, BackendError>;
}

/// Reads `<image-stem>.detections.json` beside each image.
#[derive(Debug, Clone, Default)]
pub struct FixtureDetector {
    nms_applied: bool,
}

impl FixtureDetector {
    pub const SUFFIX: &'static str = ".detections.json";

    pub fn new() -> Self {
        Self { nms_applied: true }
    }

    /// Declare the sidecars as raw, unsuppressed model output.
    pub fn raw() -> Self {
        Self { nms_applied: false }
    }
}

impl Detector for FixtureDetector {
    fn name(&self) -> &str {
        "fixture"
    }

    fn nms_applied(&self) -> bool {
        self.nms_applied
    }

    fn detect(&self, image: &ImageRef) -> Result<Vec<Detection>, BackendError> {
        let path = image.sidecar(Self::SUFFIX);
        let content = fs::read_to_string(&path).map_err(|e| {
            BackendError::new(
                self.name(),
                image.image_id(),
                format!("{}: {e}", path.display()),
            )
        })?;
        parse_detection_file(&content, image.image_id()).map_err(|e| {
            BackendError::new(
                self.name(),
                image.image_id(),
                format!("{}: {e}", path.display()),
            )
        })
    }
}
