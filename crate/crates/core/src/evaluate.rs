//! Detector evaluation: YOLO ground truth, greedy prediction matching,
//! review-text precision, 101-point interpolated AP and mAP over the IoU
//! sweep 0.50..=0.95.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::detect::{parse_detection_file, Detection, FixtureDetector, ObjectClass, ParseError};
use crate::geometry::{BoundingBox, BoxError};

pub const DEFAULT_CONF_THRESHOLD: f64 = 0.8;
pub const DEFAULT_PRECISION_IOU: f64 = 0.8;
pub const RECALL_POINTS: usize = 101;
pub const MANIFEST_FILE: &str = "manifest.txt";

/// 0.50, 0.55, ..., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

/// Normalized coordinates may overshoot the unit interval by this much
/// (annotation tools round) before a box counts as out of bounds.
const BOUNDS_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthBox {
    pub image_id: String,
    pub class: ObjectClass,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum YoloError {
    #[error("malformed line: {0}")]
    Malformed(String),
    #[error("class id {0} outside 0..=5")]
    ClassOutOfRange(i64),
    #[error("box {0:?} leaves the image")]
    OutOfBounds([f64; 4]),
    #[error(transparent)]
    InvalidBox(#[from] BoxError),
}

/// Parses `<class_id> <cx> <cy> <w> <h>` (normalized) into a pixel box.
pub fn parse_yolo_line(
    line: &str,
    image_id: &str,
    image_w: f64,
    image_h: f64,
) -> Result<GroundTruthBox, YoloError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(YoloError::Malformed(format!(
            "expected 5 fields, found {}",
            fields.len()
        )));
    }
    let class_id: i64 = fields[0]
        .parse()
        .map_err(|_| YoloError::Malformed(format!("class id `{}`", fields[0])))?;
    let class = u8::try_from(class_id)
        .ok()
        .and_then(ObjectClass::from_code)
        .ok_or(YoloError::ClassOutOfRange(class_id))?;
    let mut v = [0.0f64; 4];
    for (slot, field) in v.iter_mut().zip(&fields[1..]) {
        *slot = field
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| YoloError::Malformed(format!("number `{field}`")))?;
    }
    let [cx, cy, w, h] = v;
    let norm = [cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0];
    if norm
        .iter()
        .any(|&c| !(-BOUNDS_SLACK..=1.0 + BOUNDS_SLACK).contains(&c))
    {
        return Err(YoloError::OutOfBounds(norm));
    }
    let bbox = BoundingBox::new(
        (norm[0] * image_w).clamp(0.0, image_w),
        (norm[1] * image_h).clamp(0.0, image_h),
        (norm[2] * image_w).clamp(0.0, image_w),
        (norm[3] * image_h).clamp(0.0, image_h),
    )?;
    Ok(GroundTruthBox {
        image_id: image_id.to_string(),
        class,
        bbox,
    })
}

/// Per-prediction outcome of greedy matching, indexed like the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchOutcome {
    pub is_tp: Vec<bool>,
    pub false_negatives: usize,
}

impl MatchOutcome {
    pub fn tp(&self) -> usize {
        self.is_tp.iter().filter(|&&t| t).count()
    }

    pub fn fp(&self) -> usize {
        self.is_tp.len() - self.tp()
    }
}

/// Indices of `preds` by descending confidence, ties in input order.
fn confidence_rank(preds: &[&Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        preds[j]
            .confidence()
            .total_cmp(&preds[i].confidence())
            .then(i.cmp(&j))
    });
    order
}

fn match_refs(preds: &[&Detection], gts: &[&GroundTruthBox], iou_tau: f64) -> MatchOutcome {
    let mut gt_used = vec![false; gts.len()];
    let mut is_tp = vec![false; preds.len()];
    for i in confidence_rank(preds) {
        let p = preds[i];
        let mut best: Option<(f64, usize)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_used[g] || gt.class != p.class() || gt.image_id != p.image_id() {
                continue;
            }
            let overlap = gt.bbox.iou(p.bbox());
            if best.is_none_or(|(b, _)| overlap > b) {
                best = Some((overlap, g));
            }
        }
        if let Some((overlap, g)) = best {
            if overlap >= iou_tau {
                gt_used[g] = true;
                is_tp[i] = true;
            }
        }
    }
    MatchOutcome {
        is_tp,
        false_negatives: gt_used.iter().filter(|&&u| !u).count(),
    }
}

/// Greedy matching: predictions in descending confidence each claim the
/// unclaimed same-class, same-image ground truth of highest IoU, if that
/// IoU reaches `iou_tau`.
pub fn match_detections(preds: &[Detection], gts: &[GroundTruthBox], iou_tau: f64) -> MatchOutcome {
    let preds: Vec<&Detection> = preds.iter().collect();
    let gts: Vec<&GroundTruthBox> = gts.iter().collect();
    match_refs(&preds, &gts, iou_tau)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionResult {
    pub precision: f64,
    pub tp: usize,
    pub fp: usize,
    pub false_negatives: usize,
}

/// `TP / (TP + FP)` for review-text boxes at the given confidence and IoU
/// cutoffs; 1.0 when no prediction survives the confidence cutoff.
pub fn precision_review_text(
    preds: &[Detection],
    gts: &[GroundTruthBox],
    conf_tau: f64,
    iou_tau: f64,
) -> PrecisionResult {
    let preds: Vec<&Detection> = preds
        .iter()
        .filter(|d| d.class() == ObjectClass::ReviewText && d.confidence() >= conf_tau)
        .collect();
    let gts: Vec<&GroundTruthBox> = gts
        .iter()
        .filter(|g| g.class == ObjectClass::ReviewText)
        .collect();
    let outcome = match_refs(&preds, &gts, iou_tau);
    let (tp, fp) = (outcome.tp(), outcome.fp());
    PrecisionResult {
        precision: if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        },
        tp,
        fp,
        false_negatives: outcome.false_negatives,
    }
}

/// 101-point interpolated AP of one class at one IoU threshold, or `None`
/// when the class has no ground truth.
pub fn average_precision(
    preds: &[Detection],
    gts: &[GroundTruthBox],
    class: ObjectClass,
    iou_tau: f64,
) -> Option<f64> {
    let preds: Vec<&Detection> = preds.iter().filter(|d| d.class() == class).collect();
    let gts: Vec<&GroundTruthBox> = gts.iter().filter(|g| g.class == class).collect();
    let npos = gts.len();
    if npos == 0 {
        return None;
    }
    let outcome = match_refs(&preds, &gts, iou_tau);
    let ranked = confidence_rank(&preds);

    // cumulative tp count and precision after each ranked prediction
    let mut tp_cum = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    let mut tp = 0usize;
    for (k, &i) in ranked.iter().enumerate() {
        if outcome.is_tp[i] {
            tp += 1;
        }
        tp_cum.push(tp);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    // envelope: best precision at this rank or any later one
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }

    let mut sum = 0.0;
    let mut k = 0usize;
    for point in 0..RECALL_POINTS {
        // recall tp/npos >= point/100, compared exactly in integers
        while k < tp_cum.len() && tp_cum[k] * 100 < point * npos {
            k += 1;
        }
        if k < tp_cum.len() {
            sum += precision[k];
        }
    }
    Some(sum / RECALL_POINTS as f64)
}

/// AP of every class with ground truth, at each IoU threshold.
pub fn per_class_ap(
    preds: &[Detection],
    gts: &[GroundTruthBox],
) -> BTreeMap<ObjectClass, Vec<(f64, f64)>> {
    let mut out = BTreeMap::new();
    for class in ObjectClass::ALL {
        let aps: Option<Vec<(f64, f64)>> = iou_thresholds()
            .iter()
            .map(|&t| average_precision(preds, gts, class, t).map(|ap| (t, ap)))
            .collect();
        if let Some(aps) = aps {
            out.insert(class, aps);
        }
    }
    out
}

/// Mean over classes with ground truth of each class's AP averaged over
/// the ten IoU thresholds. Zero when there is no ground truth at all.
pub fn mean_ap(preds: &[Detection], gts: &[GroundTruthBox]) -> f64 {
    map_from_per_class(&per_class_ap(preds, gts))
}

fn map_from_per_class(per_class: &BTreeMap<ObjectClass, Vec<(f64, f64)>>) -> f64 {
    if per_class.is_empty() {
        return 0.0;
    }
    let class_means: Vec<f64> = per_class
        .values()
        .map(|aps| aps.iter().map(|(_, ap)| ap).sum::<f64>() / aps.len() as f64)
        .collect();
    class_means.iter().sum::<f64>() / class_means.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSettings {
    pub conf_threshold: f64,
    pub precision_iou: f64,
    pub iou_thresholds: Vec<f64>,
    pub interpolation: String,
    pub class_averaging: String,
    pub empty_precision: f64,
}

impl EvaluationSettings {
    pub fn new(conf_threshold: f64, precision_iou: f64) -> Self {
        Self {
            conf_threshold,
            precision_iou,
            iou_thresholds: iou_thresholds().to_vec(),
            interpolation: format!("{RECALL_POINTS}-point"),
            class_averaging:
                "per-class mean over IoU thresholds, then mean over classes with ground truth"
                    .to_string(),
            empty_precision: 1.0,
        }
    }
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        Self::new(DEFAULT_CONF_THRESHOLD, DEFAULT_PRECISION_IOU)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationReport {
    pub map: f64,
    /// class -> IoU threshold (two decimals) -> AP
    pub per_class_ap: BTreeMap<ObjectClass, BTreeMap<String, f64>>,
    pub precision_review_text: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub false_negatives: usize,
    pub settings: EvaluationSettings,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

pub fn evaluate(
    preds: &[Detection],
    gts: &[GroundTruthBox],
    settings: EvaluationSettings,
) -> EvaluationReport {
    let per_class = per_class_ap(preds, gts);
    let precision =
        precision_review_text(preds, gts, settings.conf_threshold, settings.precision_iou);
    EvaluationReport {
        map: map_from_per_class(&per_class),
        per_class_ap: per_class
            .iter()
            .map(|(c, aps)| {
                (
                    *c,
                    aps.iter().map(|(t, ap)| (format!("{t:.2}"), *ap)).collect(),
                )
            })
            .collect(),
        precision_review_text: precision.precision,
        tp: precision.tp,
        fp: precision.fp,
        false_negatives: precision.false_negatives,
        settings,
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: {source}")]
    Annotation {
        path: PathBuf,
        line: usize,
        source: YoloError,
    },
    #[error("{path}: {source}")]
    Predictions { path: PathBuf, source: ParseError },
    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),
}

fn read(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Image id to `(width, height)` in pixels.
pub type Manifest = BTreeMap<String, (u32, u32)>;

/// `image_id width height` per line.
pub fn parse_manifest(content: &str, path: &Path) -> Result<Manifest, EvalError> {
    let mut out = BTreeMap::new();
    for (i, line) in content.lines().enumerate() {
        let err = |message: String| EvalError::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [id, w, h] => {
                let dim = |s: &str| s.parse::<u32>().ok().filter(|&d| d > 0);
                let (w, h) = dim(w)
                    .zip(dim(h))
                    .ok_or_else(|| err(format!("bad dimensions `{w} {h}`")))?;
                if out.insert(id.to_string(), (w, h)).is_some() {
                    return Err(err(format!("duplicate image `{id}`")));
                }
            }
            _ => return Err(err("expected `image_id width height`".to_string())),
        }
    }
    Ok(out)
}

/// Relative path of `path` under `root` with `suffix` removed, `/`-joined.
fn image_id_of(root: &Path, path: &Path, suffix: &str) -> Option<String> {
    let rel = path.strip_prefix(root).ok()?;
    let s = rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/");
    s.strip_suffix(suffix).map(str::to_string)
}

fn files_with_suffix(root: &Path, suffix: &str) -> Result<BTreeMap<String, PathBuf>, EvalError> {
    let mut out = BTreeMap::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| EvalError::Io {
            path: root.to_path_buf(),
            source: e.into(),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        if let Some(id) = image_id_of(root, entry.path(), suffix) {
            out.insert(id, entry.path().to_path_buf());
        }
    }
    Ok(out)
}

/// Loads `<image_id>.txt` annotations under `dir`, checked against
/// `dir/manifest.txt`.
pub fn load_ground_truth(dir: &Path) -> Result<(Manifest, Vec<GroundTruthBox>), EvalError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = parse_manifest(&read(&manifest_path)?, &manifest_path)?;
    let mut files = files_with_suffix(dir, ".txt")?;
    files.remove("manifest");

    let listed: BTreeSet<&String> = manifest.keys().collect();
    let found: BTreeSet<&String> = files.keys().collect();
    if let Some(id) = found.difference(&listed).next() {
        return Err(EvalError::ManifestMismatch(format!(
            "annotation `{id}.txt` has no manifest entry"
        )));
    }
    if let Some(id) = listed.difference(&found).next() {
        return Err(EvalError::ManifestMismatch(format!(
            "manifest lists `{id}` but `{id}.txt` is missing"
        )));
    }

    let mut gts = Vec::new();
    for (id, path) in &files {
        let (w, h) = manifest[id];
        for (i, line) in read(path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let gt = parse_yolo_line(line, id, w as f64, h as f64).map_err(|source| {
                EvalError::Annotation {
                    path: path.clone(),
                    line: i + 1,
                    source,
                }
            })?;
            gts.push(gt);
        }
    }
    Ok((manifest, gts))
}

/// Loads `<image_id>.detections.json` files under `dir`. Images without a
/// file have no predictions; files for images outside the manifest are
/// errors.
pub fn load_predictions(dir: &Path, manifest: &Manifest) -> Result<Vec<Detection>, EvalError> {
    let mut preds = Vec::new();
    for (id, path) in files_with_suffix(dir, FixtureDetector::SUFFIX)? {
        if !manifest.contains_key(&id) {
            return Err(EvalError::ManifestMismatch(format!(
                "predictions for unknown image `{id}`"
            )));
        }
        let dets = parse_detection_file(&read(&path)?, &id)
            .map_err(|source| EvalError::Predictions { path, source })?;
        preds.extend(dets);
    }
    Ok(preds)
}

pub fn evaluate_dirs(
    predictions_dir: &Path,
    ground_truth_dir: &Path,
    settings: EvaluationSettings,
) -> Result<EvaluationReport, EvalError> {
    let (manifest, gts) = load_ground_truth(ground_truth_dir)?;
    let preds = load_predictions(predictions_dir, &manifest)?;
    Ok(evaluate(&preds, &gts, settings))
}
