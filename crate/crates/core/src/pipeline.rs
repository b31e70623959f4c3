//! Stage wiring for the three commands. Images and records fan out over a
//! bounded worker pool; every merge happens in image-id order so output
//! does not depend on scheduling.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use thiserror::Error;
use walkdir::WalkDir;

use crate::analyze::{veracity_filter, Analyzer, Authenticity, MissingFlag};
use crate::assemble::{
    associate, build_records, dedup, read_records, serialize_records, RecordFileError, ReviewRecord,
};
use crate::backend::{BackendError, CallGate, ImageRef};
use crate::config::{ConfigError, PipelineConfig};
use crate::detect::{nms, ConfidenceThresholds, Detector};
use crate::evaluate::{evaluate_dirs, EvalError, EvaluationReport};
use crate::recognize::{recognize_region, Recognizer};

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("input directory {0} is not readable")]
    InputDir(PathBuf),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Records {
        path: PathBuf,
        source: RecordFileError,
    },
    #[error(transparent)]
    Evaluation(#[from] EvalError),
    #[error(transparent)]
    Filter(#[from] MissingFlag),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A per-image or per-record failure that was logged and skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct StageFailure {
    pub subject: String,
    pub message: String,
}

/// One screenshot found in the input directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    /// Relative path without extension, `/`-separated.
    pub image_id: String,
    pub path: PathBuf,
    /// First directory below the input root, when the image is nested.
    pub platform: Option<String>,
}

/// Lists images under `dir`, sorted by image id.
pub fn discover_pages(dir: &Path) -> Result<Vec<Page>, PipelineError> {
    if !dir.is_dir() {
        return Err(PipelineError::InputDir(dir.to_path_buf()));
    }
    let mut pages = Vec::new();
    for entry in WalkDir::new(dir).follow_links(true) {
        let entry = entry.map_err(|_| PipelineError::InputDir(dir.to_path_buf()))?;
        let path = entry.path();
        let is_image = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if !entry.file_type().is_file() || !is_image {
            continue;
        }
        let rel = path
            .strip_prefix(dir)
            .expect("walk stays under root")
            .with_extension("");
        let parts: Vec<String> = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect();
        pages.push(Page {
            image_id: parts.join("/"),
            path: path.to_path_buf(),
            platform: (parts.len() > 1).then(|| parts[0].clone()),
        });
    }
    pages.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    Ok(pages)
}

/// Detection and recognition backends plus the per-image settings.
pub struct Extractor {
    detector: Box<dyn Detector>,
    detector_gate: CallGate,
    recognizer: Box<dyn Recognizer>,
    recognizer_gate: CallGate,
    thresholds: ConfidenceThresholds,
    nms_iou: f64,
    pad_px: f64,
}

impl Extractor {
    pub fn new(
        detector: Box<dyn Detector>,
        recognizer: Box<dyn Recognizer>,
        thresholds: ConfidenceThresholds,
        nms_iou: f64,
        pad_px: f64,
    ) -> Self {
        Self {
            detector_gate: CallGate::new(detector.concurrency()),
            recognizer_gate: CallGate::new(recognizer.concurrency()),
            detector,
            recognizer,
            thresholds,
            nms_iou,
            pad_px,
        }
    }

    pub fn from_config(cfg: &PipelineConfig) -> Result<Self, ConfigError> {
        Ok(Self::new(
            cfg.build_detector()?,
            cfg.build_recognizer()?,
            cfg.confidence_thresholds(),
            cfg.nms_iou,
            cfg.pad_px,
        ))
    }

    /// detect -> filter -> NMS (if the backend did not) -> associate ->
    /// crop + recognize -> records.
    pub fn process(&self, page: &Page) -> Result<Vec<ReviewRecord>, BackendError> {
        let image = ImageRef::open(&page.image_id, &page.path)?;
        let detections = {
            let _g = self.detector_gate.enter();
            self.detector.detect(&image)?
        };
        let mut detections = self.thresholds.apply(&detections);
        if !self.detector.nms_applied() {
            detections = nms(&detections, self.nms_iou);
        }
        let pairs = associate(&detections);
        let texts = pairs
            .iter()
            .map(|p| {
                let _g = self.recognizer_gate.enter();
                recognize_region(self.recognizer.as_ref(), &image, p.text.bbox(), self.pad_px)
                    .map(|region| region.normalized_text)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(build_records(
            &page.image_id,
            page.platform.as_deref(),
            &pairs,
            &texts,
        ))
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractOutcome {
    pub records: Vec<ReviewRecord>,
    pub failures: Vec<StageFailure>,
}

/// Extracts deduplicated records from every image under `input_dir`.
pub fn extract(cfg: &PipelineConfig, input_dir: &Path) -> Result<ExtractOutcome, PipelineError> {
    let pages = discover_pages(input_dir)?;
    let extractor = Extractor::from_config(cfg)?;
    info!("extract: images={} workers={}", pages.len(), cfg.workers);
    let results: Vec<Result<Vec<ReviewRecord>, BackendError>> =
        pool(cfg.workers)?.install(|| pages.par_iter().map(|p| extractor.process(p)).collect());

    let mut outcome = ExtractOutcome::default();
    let mut all = Vec::new();
    for (page, result) in pages.iter().zip(results) {
        match result {
            Ok(records) => all.extend(records),
            Err(e) => {
                warn!("extract: image={} skipped error=\"{e}\"", page.image_id);
                outcome.failures.push(StageFailure {
                    subject: page.image_id.clone(),
                    message: e.to_string(),
                });
            }
        }
    }
    let before = all.len();
    outcome.records = dedup(&all, cfg.jaccard_tau);
    info!(
        "extract: records={} duplicates_removed={} failed_images={}",
        outcome.records.len(),
        before - outcome.records.len(),
        outcome.failures.len()
    );
    Ok(outcome)
}

fn write_file(path: &Path, content: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, content).map_err(io_err(path))
}

pub fn run_extract(
    cfg: &PipelineConfig,
    input_dir: &Path,
    output: &Path,
) -> Result<ExtractOutcome, PipelineError> {
    let outcome = extract(cfg, input_dir)?;
    write_file(output, &serialize_records(&outcome.records))?;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalyzeSummary {
    pub total: usize,
    pub annotated: usize,
    pub inconsistent: usize,
    pub fake: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalyzeOutcome {
    pub annotated: Vec<ReviewRecord>,
    pub filtered: Vec<ReviewRecord>,
    pub failures: Vec<StageFailure>,
    pub summary: AnalyzeSummary,
}

/// Annotates every record, then applies the configured veracity filter.
pub fn analyze(
    cfg: &PipelineConfig,
    records: &[ReviewRecord],
) -> Result<AnalyzeOutcome, PipelineError> {
    let analyzer: Analyzer = cfg.build_analyzer()?;
    let results: Vec<Result<ReviewRecord, BackendError>> =
        pool(cfg.workers)?.install(|| records.par_iter().map(|r| analyzer.annotate(r)).collect());

    let mut outcome = AnalyzeOutcome::default();
    for (record, result) in records.iter().zip(results) {
        match result {
            Ok(r) => outcome.annotated.push(r),
            Err(e) => {
                warn!(
                    "analyze: record={} skipped error=\"{e}\"",
                    record.record_id()
                );
                outcome.failures.push(StageFailure {
                    subject: record.record_id().to_string(),
                    message: e.to_string(),
                });
            }
        }
    }
    outcome.filtered = veracity_filter(&outcome.annotated, cfg.filter)?;
    outcome.summary = AnalyzeSummary {
        total: records.len(),
        annotated: outcome.annotated.len(),
        inconsistent: outcome
            .annotated
            .iter()
            .filter(|r| r.flags.sentiment_inconsistent == Some(true))
            .count(),
        fake: outcome
            .annotated
            .iter()
            .filter(|r| r.flags.authenticity == Some(Authenticity::Fake))
            .count(),
        kept: outcome.filtered.len(),
    };
    Ok(outcome)
}

pub fn read_record_file(path: &Path) -> Result<Vec<ReviewRecord>, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_records(BufReader::new(file)).map_err(|source| PipelineError::Records {
        path: path.to_path_buf(),
        source,
    })
}

/// `records.jsonl` -> `records.filtered.jsonl`
pub fn default_filtered_path(annotated: &Path) -> PathBuf {
    let stem = annotated
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "records".into());
    annotated.with_file_name(format!("{stem}.filtered.jsonl"))
}

pub fn run_analyze(
    cfg: &PipelineConfig,
    input: &Path,
    annotated_out: &Path,
    filtered_out: &Path,
) -> Result<AnalyzeOutcome, PipelineError> {
    let records = read_record_file(input)?;
    let outcome = analyze(cfg, &records)?;
    write_file(annotated_out, &serialize_records(&outcome.annotated))?;
    write_file(filtered_out, &serialize_records(&outcome.filtered))?;
    let s = outcome.summary;
    info!(
        "analyze: total={} annotated={} inconsistent={} fake={} kept={} failed={}",
        s.total,
        s.annotated,
        s.inconsistent,
        s.fake,
        s.kept,
        outcome.failures.len()
    );
    Ok(outcome)
}

/// Extraction and analysis in one pass, without the intermediate file.
pub fn run_fused(
    cfg: &PipelineConfig,
    input_dir: &Path,
) -> Result<(ExtractOutcome, AnalyzeOutcome), PipelineError> {
    let extracted = extract(cfg, input_dir)?;
    let analyzed = analyze(cfg, &extracted.records)?;
    Ok((extracted, analyzed))
}

pub fn run_evaluate(
    cfg: &PipelineConfig,
    predictions_dir: &Path,
    ground_truth_dir: &Path,
    output: &Path,
) -> Result<EvaluationReport, PipelineError> {
    let report = evaluate_dirs(predictions_dir, ground_truth_dir, cfg.evaluation_settings())?;
    write_file(output, &report.to_json())?;
    info!(
        "evaluate: map={:.4} precision_review_text={:.4} tp={} fp={} fn={}",
        report.map, report.precision_review_text, report.tp, report.fp, report.false_negatives
    );
    Ok(report)
}
