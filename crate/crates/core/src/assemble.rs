//! Turning one image's detections and recognized texts into ordered review
//! records, and removing reviews repeated across consecutive frames.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyze::AnalysisFlags;
use crate::detect::{Detection, ObjectClass};
use crate::geometry::{reading_order, BoundingBox};

/// Minimum share of a rating's width that must sit over a review text.
pub const MIN_HORIZONTAL_OVERLAP: f64 = 0.5;
/// How far (as a fraction of its own height) a rating may dip into its text.
pub const MAX_VERTICAL_INTRUSION: f64 = 0.5;
pub const DEFAULT_JACCARD_TAU: f64 = 0.9;

pub fn stars_of(class: ObjectClass) -> Option<u8> {
    class.stars()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("record text is empty")]
    EmptyText,
    #[error("stars {0} outside 1..=5")]
    Stars(u8),
    #[error("stars and rating_box must be both present or both absent")]
    RatingMismatch,
    #[error("sentiment_inconsistent is set without both polarities")]
    InconsistencyWithoutPolarities,
}

/// One extracted review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRecord", into = "RawRecord")]
pub struct ReviewRecord {
    record_id: String,
    image_id: String,
    platform: Option<String>,
    text: String,
    stars: Option<u8>,
    text_box: BoundingBox,
    rating_box: Option<BoundingBox>,
    pub flags: AnalysisFlags,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    record_id: String,
    image_id: String,
    platform: Option<String>,
    text: String,
    stars: Option<u8>,
    text_box: BoundingBox,
    rating_box: Option<BoundingBox>,
    flags: AnalysisFlags,
}

impl TryFrom<RawRecord> for ReviewRecord {
    type Error = RecordError;

    fn try_from(r: RawRecord) -> Result<Self, Self::Error> {
        let rating = match (r.stars, r.rating_box) {
            (Some(s), Some(b)) => Some((s, b)),
            (None, None) => None,
            _ => return Err(RecordError::RatingMismatch),
        };
        let flags = r.flags;
        if flags.sentiment_inconsistent.is_some()
            && (flags.comment_polarity.is_none() || flags.rating_polarity.is_none())
        {
            return Err(RecordError::InconsistencyWithoutPolarities);
        }
        let mut rec = ReviewRecord::new(
            r.record_id,
            r.image_id,
            r.platform,
            r.text,
            r.text_box,
            rating,
        )?;
        rec.flags = flags;
        Ok(rec)
    }
}

impl From<ReviewRecord> for RawRecord {
    fn from(r: ReviewRecord) -> Self {
        RawRecord {
            record_id: r.record_id,
            image_id: r.image_id,
            platform: r.platform,
            text: r.text,
            stars: r.stars,
            text_box: r.text_box,
            rating_box: r.rating_box,
            flags: r.flags,
        }
    }
}

impl ReviewRecord {
    pub fn new(
        record_id: impl Into<String>,
        image_id: impl Into<String>,
        platform: Option<String>,
        text: impl Into<String>,
        text_box: BoundingBox,
        rating: Option<(u8, BoundingBox)>,
    ) -> Result<Self, RecordError> {
        let text = text.into();
        if text.is_empty() {
            return Err(RecordError::EmptyText);
        }
        if let Some((s, _)) = rating {
            if !(1..=5).contains(&s) {
                return Err(RecordError::Stars(s));
            }
        }
        Ok(Self {
            record_id: record_id.into(),
            image_id: image_id.into(),
            platform,
            text,
            stars: rating.map(|(s, _)| s),
            text_box,
            rating_box: rating.map(|(_, b)| b),
            flags: AnalysisFlags::default(),
        })
    }

    pub fn record_id(&self) -> &str {
        &self.record_id
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn platform(&self) -> Option<&str> {
        self.platform.as_deref()
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn stars(&self) -> Option<u8> {
        self.stars
    }

    pub fn text_box(&self) -> &BoundingBox {
        &self.text_box
    }

    pub fn rating_box(&self) -> Option<&BoundingBox> {
        self.rating_box.as_ref()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

#[derive(Debug, Error)]
pub enum RecordFileError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads a newline-delimited record file. Blank lines are skipped.
pub fn read_records<R: BufRead>(reader: R) -> Result<Vec<ReviewRecord>, RecordFileError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|source| RecordFileError::Parse {
            line: i + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_records(content: &str) -> Result<Vec<ReviewRecord>, RecordFileError> {
    read_records(content.as_bytes())
}

pub fn write_records<W: Write>(mut w: W, records: &[ReviewRecord]) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json_line())?;
    }
    Ok(())
}

pub fn serialize_records(records: &[ReviewRecord]) -> String {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("records are utf-8")
}

/// A review text and the rating (if any) associated with it.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub text: Detection,
    pub rating: Option<Detection>,
}

/// Whether `rating` may belong to `text`: it covers at least half its own
/// width over the text and sits above it, dipping in by at most half its
/// own height.
pub fn is_candidate(rating: &BoundingBox, text: &BoundingBox) -> bool {
    rating.horizontal_overlap_ratio(text) >= MIN_HORIZONTAL_OVERLAP
        && rating.vertical_gap(text) >= -MAX_VERTICAL_INTRUSION * rating.height()
}

fn pair_cost(rating: &BoundingBox, text: &BoundingBox) -> f64 {
    rating.vertical_gap(text).abs()
}

fn det_cmp(a: &Detection, b: &Detection) -> Ordering {
    a.bbox()
        .coord_cmp(b.bbox())
        .then(a.class().cmp(&b.class()))
        .then(b.confidence().total_cmp(&a.confidence()))
}

/// Associates star ratings with review texts from one image.
///
/// Candidate pairs are accepted greedily by ascending vertical gap; each
/// rating and each text is used at most once. Results follow the reading
/// order of the text boxes.
pub fn associate(dets: &[Detection]) -> Vec<Pairing> {
    let mut texts: Vec<&Detection> = dets
        .iter()
        .filter(|d| d.class() == ObjectClass::ReviewText)
        .collect();
    let mut ratings: Vec<&Detection> = dets.iter().filter(|d| d.class().is_rating()).collect();
    // canonical order so the outcome does not depend on input order
    texts.sort_by(|a, b| det_cmp(a, b));
    ratings.sort_by(|a, b| det_cmp(a, b));

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (ri, r) in ratings.iter().enumerate() {
        for (ti, t) in texts.iter().enumerate() {
            if is_candidate(r.bbox(), t.bbox()) {
                candidates.push((pair_cost(r.bbox(), t.bbox()), ri, ti));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(
                ratings[a.1]
                    .bbox()
                    .x_min()
                    .total_cmp(&ratings[b.1].bbox().x_min()),
            )
            .then(
                texts[a.2]
                    .bbox()
                    .x_min()
                    .total_cmp(&texts[b.2].bbox().x_min()),
            )
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut rating_used = vec![false; ratings.len()];
    let mut text_rating: Vec<Option<usize>> = vec![None; texts.len()];
    for (_, ri, ti) in candidates {
        if !rating_used[ri] && text_rating[ti].is_none() {
            rating_used[ri] = true;
            text_rating[ti] = Some(ri);
        }
    }

    let boxes: Vec<BoundingBox> = texts.iter().map(|t| *t.bbox()).collect();
    reading_order(&boxes)
        .into_iter()
        .map(|ti| Pairing {
            text: texts[ti].clone(),
            rating: text_rating[ti].map(|ri| ratings[ri].clone()),
        })
        .collect()
}

/// Builds records for one image. `texts[i]` is the normalized text
/// recognized for `pairs[i].text`; pairs with empty text are dropped.
/// Record ids are `<image_id>#<reading-order index>`.
pub fn build_records(
    image_id: &str,
    platform: Option<&str>,
    pairs: &[Pairing],
    texts: &[String],
) -> Vec<ReviewRecord> {
    assert_eq!(pairs.len(), texts.len(), "one recognized text per pairing");
    let boxes: Vec<BoundingBox> = pairs.iter().map(|p| *p.text.bbox()).collect();
    reading_order(&boxes)
        .into_iter()
        .enumerate()
        .filter(|&(_, i)| !texts[i].is_empty())
        .map(|(rank, i)| {
            let pair = &pairs[i];
            let rating = pair
                .rating
                .as_ref()
                .and_then(|r| stars_of(r.class()).map(|s| (s, *r.bbox())));
            ReviewRecord::new(
                format!("{image_id}#{rank:03}"),
                image_id,
                platform.map(str::to_string),
                texts[i].clone(),
                *pair.text.bbox(),
                rating,
            )
            .expect("non-empty text and rating classes carry valid stars")
        })
        .collect()
}

/// Lowercased alphanumeric word set of a text.
pub fn token_set(text: &str) -> BTreeSet<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Jaccard similarity of two token sets; two empty sets are identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

/// Drops a record when an earlier kept record has the same stars and a
/// token-set Jaccard similarity of at least `jaccard_tau`.
pub fn dedup(records: &[ReviewRecord], jaccard_tau: f64) -> Vec<ReviewRecord> {
    let mut kept: Vec<(Option<u8>, BTreeSet<String>)> = Vec::new();
    let mut out = Vec::new();
    for r in records {
        let tokens = token_set(&r.text);
        let duplicate = kept
            .iter()
            .any(|(stars, t)| *stars == r.stars && jaccard(t, &tokens) >= jaccard_tau);
        if !duplicate {
            kept.push((r.stars, tokens));
            out.push(r.clone());
        }
    }
    out
}
