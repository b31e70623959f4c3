//! C interface to reviewscope.
//!
//! Every fallible function returns an [`RvsStatus`] and writes its result
//! through an out pointer. On failure a message is kept per thread and can
//! be read with [`rvs_last_error_message`]. Strings returned to the caller
//! are owned by the caller and released with [`rvs_string_free`]. Handles
//! are not synchronized; use one handle per thread or lock externally.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use reviewscope::analyze::{rating_polarity, sentiment_inconsistency};
use reviewscope::config::PipelineConfig;
use reviewscope::evaluate::{evaluate, evaluate_dirs, iou_thresholds, EvaluationSettings};
use reviewscope::pipeline::{default_filtered_path, run_analyze, run_extract};
use reviewscope::{
    BoundingBox, Detection, EvaluationReport, GroundTruthBox, ObjectClass, Polarity,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RvsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Parse = 4,
    Io = 5,
    Backend = 6,
    Panic = 7,
    /// The call completed and wrote its outputs, but some inputs were skipped.
    Partial = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RvsPolarity {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

impl From<Polarity> for RvsPolarity {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Negative => Self::Negative,
            Polarity::Neutral => Self::Neutral,
            Polarity::Positive => Self::Positive,
        }
    }
}

impl From<RvsPolarity> for Polarity {
    fn from(p: RvsPolarity) -> Self {
        match p {
            RvsPolarity::Negative => Self::Negative,
            RvsPolarity::Neutral => Self::Neutral,
            RvsPolarity::Positive => Self::Positive,
        }
    }
}

/// Pixel box, `x_min < x_max`, `y_min < y_max`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RvsBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RvsAnalyzeSummary {
    pub total: usize,
    pub annotated: usize,
    pub inconsistent: usize,
    pub fake: usize,
    pub kept: usize,
    pub failed: usize,
}

/// Accumulates predictions and ground truth for an in-memory evaluation.
pub struct RvsEvaluator {
    settings: EvaluationSettings,
    predictions: Vec<Detection>,
    ground_truth: Vec<GroundTruthBox>,
}

pub struct RvsReport(EvaluationReport);

/// A loaded configuration.
pub struct RvsPipeline(PipelineConfig);

struct Failure(RvsStatus, String);

type FfiResult<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<RvsStatus>) -> RvsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {message}"));
            RvsStatus::Panic
        }
    }
}

fn fail(status: RvsStatus, message: impl ToString) -> Failure {
    Failure(status, message.to_string())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| fail(RvsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut()
        .ok_or_else(|| fail(RvsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(fail(RvsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RvsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn path(p: *const c_char, what: &str) -> FfiResult<PathBuf> {
    string(p, what).map(PathBuf::from)
}

fn to_bbox(b: &RvsBox) -> FfiResult<BoundingBox> {
    BoundingBox::new(b.x_min, b.y_min, b.x_max, b.y_max)
        .map_err(|e| fail(RvsStatus::InvalidArgument, e))
}

fn to_class(code: u8) -> FfiResult<ObjectClass> {
    ObjectClass::from_code(code).ok_or_else(|| {
        fail(
            RvsStatus::InvalidArgument,
            format!("class code {code} out of range"),
        )
    })
}

fn pipeline_status(e: reviewscope::pipeline::PipelineError) -> Failure {
    use reviewscope::config::ConfigError as C;
    use reviewscope::evaluate::EvalError as V;
    use reviewscope::pipeline::PipelineError as E;
    let status = match &e {
        E::Io { .. } | E::InputDir(_) | E::Config(C::Io { .. }) | E::Evaluation(V::Io { .. }) => {
            RvsStatus::Io
        }
        E::Config(
            C::Threshold { .. } | C::Invalid(_) | C::UnknownBackend { .. } | C::MissingTable { .. },
        ) => RvsStatus::InvalidArgument,
        E::Config(_) | E::Records { .. } | E::Evaluation(_) => RvsStatus::Parse,
        E::Filter(_) => RvsStatus::InvalidArgument,
        E::Pool(_) => RvsStatus::Backend,
    };
    fail(status, e)
}

fn into_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(RvsStatus::InvalidArgument, "string contains NUL"))
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rvs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn rvs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, statically allocated.
#[no_mangle]
pub extern "C" fn rvs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// Pointers must be null or valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn rvs_iou(a: *const RvsBox, b: *const RvsBox, out: *mut f64) -> RvsStatus {
    guard(|| {
        let a = to_bbox(deref(a, "a")?)?;
        let b = to_bbox(deref(b, "b")?)?;
        *deref_mut(out, "out")? = a.iou(&b);
        Ok(RvsStatus::Ok)
    })
}

/// Default star-to-polarity mapping for `stars` in 1..=5.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rvs_rating_polarity(stars: u8, out: *mut RvsPolarity) -> RvsStatus {
    guard(|| {
        let p = rating_polarity(stars).map_err(|e| fail(RvsStatus::InvalidArgument, e))?;
        *deref_mut(out, "out")? = p.into();
        Ok(RvsStatus::Ok)
    })
}

/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rvs_sentiment_inconsistency(
    rating: RvsPolarity,
    comment: RvsPolarity,
    out: *mut bool,
) -> RvsStatus {
    guard(|| {
        *deref_mut(out, "out")? = sentiment_inconsistency(rating.into(), comment.into());
        Ok(RvsStatus::Ok)
    })
}

/// New evaluator with the given review-text confidence and IoU thresholds.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rvs_evaluator_new(
    conf_threshold: f64,
    precision_iou: f64,
    out: *mut *mut RvsEvaluator,
) -> RvsStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        for (name, v) in [
            ("conf_threshold", conf_threshold),
            ("precision_iou", precision_iou),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(fail(
                    RvsStatus::InvalidArgument,
                    format!("{name} {v} outside [0, 1]"),
                ));
            }
        }
        *out = Box::into_raw(Box::new(RvsEvaluator {
            settings: EvaluationSettings::new(conf_threshold, precision_iou),
            predictions: Vec::new(),
            ground_truth: Vec::new(),
        }));
        Ok(RvsStatus::Ok)
    })
}

/// # Safety
/// `ev` must come from [`rvs_evaluator_new`]; other pointers must be null
/// or valid.
#[no_mangle]
pub unsafe extern "C" fn rvs_evaluator_add_prediction(
    ev: *mut RvsEvaluator,
    image_id: *const c_char,
    class_code: u8,
    confidence: f64,
    bbox: *const RvsBox,
) -> RvsStatus {
    guard(|| {
        let ev = deref_mut(ev, "evaluator")?;
        let det = Detection::new(
            string(image_id, "image_id")?,
            to_class(class_code)?,
            confidence,
            to_bbox(deref(bbox, "bbox")?)?,
        )
        .map_err(|e| fail(RvsStatus::InvalidArgument, e))?;
        ev.predictions.push(det);
        Ok(RvsStatus::Ok)
    })
}

/// # Safety
/// As for [`rvs_evaluator_add_prediction`].
#[no_mangle]
pub unsafe extern "C" fn rvs_evaluator_add_ground_truth(
    ev: *mut RvsEvaluator,
    image_id: *const c_char,
    class_code: u8,
    bbox: *const RvsBox,
) -> RvsStatus {
    guard(|| {
        let ev = deref_mut(ev, "evaluator")?;
        ev.ground_truth.push(GroundTruthBox {
            image_id: string(image_id, "image_id")?.to_string(),
            class: to_class(class_code)?,
            bbox: to_bbox(deref(bbox, "bbox")?)?,
        });
        Ok(RvsStatus::Ok)
    })
}

/// Scores everything added so far. The evaluator stays usable.
///
/// # Safety
/// `ev` must come from [`rvs_evaluator_new`]; `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn rvs_evaluator_compute(
    ev: *const RvsEvaluator,
    out: *mut *mut RvsReport,
) -> RvsStatus {
    guard(|| {
        let ev = deref(ev, "evaluator")?;
        let out = deref_mut(out, "out")?;
        let report = evaluate(&ev.predictions, &ev.ground_truth, ev.settings.clone());
        *out = Box::into_raw(Box::new(RvsReport(report)));
        Ok(RvsStatus::Ok)
    })
}

/// # Safety
/// `ev` must be null or come from [`rvs_evaluator_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rvs_evaluator_free(ev: *mut RvsEvaluator) {
    if !ev.is_null() {
        drop(Box::from_raw(ev));
    }
}

/// Scores a directory of detection files against a YOLO annotation
/// directory with default settings.
///
/// # Safety
/// Pointers must be null or valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rvs_evaluate_dirs(
    predictions_dir: *const c_char,
    ground_truth_dir: *const c_char,
    out: *mut *mut RvsReport,
) -> RvsStatus {
    guard(|| {
        let preds = path(predictions_dir, "predictions_dir")?;
        let gt = path(ground_truth_dir, "ground_truth_dir")?;
        let out = deref_mut(out, "out")?;
        let report = evaluate_dirs(&preds, &gt, EvaluationSettings::default())
            .map_err(|e| pipeline_status(e.into()))?;
        *out = Box::into_raw(Box::new(RvsReport(report)));
        Ok(RvsStatus::Ok)
    })
}

/// # Safety
/// `report` must come from this library; `out` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn rvs_report_map(report: *const RvsReport, out: *mut f64) -> RvsStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(report, "report")?.0.map;
        Ok(RvsStatus::Ok)
    })
}

/// # Safety
/// As for [`rvs_report_map`].
#[no_mangle]
pub unsafe extern "C" fn rvs_report_precision(
    report: *const RvsReport,
    out: *mut f64,
) -> RvsStatus {
    guard(|| {
        *deref_mut(out, "out")? = deref(report, "report")?.0.precision_review_text;
        Ok(RvsStatus::Ok)
    })
}

/// True positives, false positives and false negatives behind the
/// review-text precision.
///
/// # Safety
/// As for [`rvs_report_map`].
#[no_mangle]
pub unsafe extern "C" fn rvs_report_counts(
    report: *const RvsReport,
    tp: *mut usize,
    fp: *mut usize,
    false_negatives: *mut usize,
) -> RvsStatus {
    guard(|| {
        let r = &deref(report, "report")?.0;
        *deref_mut(tp, "tp")? = r.tp;
        *deref_mut(fp, "fp")? = r.fp;
        *deref_mut(false_negatives, "false_negatives")? = r.false_negatives;
        Ok(RvsStatus::Ok)
    })
}

/// AP of one class at IoU threshold `0.50 + 0.05 * threshold_index`.
/// Classes without ground truth have no AP and give `InvalidArgument`.
///
/// # Safety
/// As for [`rvs_report_map`].
#[no_mangle]
pub unsafe extern "C" fn rvs_report_class_ap(
    report: *const RvsReport,
    class_code: u8,
    threshold_index: usize,
    out: *mut f64,
) -> RvsStatus {
    guard(|| {
        let r = &deref(report, "report")?.0;
        let class = to_class(class_code)?;
        let t = iou_thresholds()
            .get(threshold_index)
            .copied()
            .ok_or_else(|| {
                fail(
                    RvsStatus::InvalidArgument,
                    format!("threshold index {threshold_index}"),
                )
            })?;
        let ap = r
            .per_class_ap
            .get(&class)
            .and_then(|aps| aps.get(&format!("{t:.2}")))
            .ok_or_else(|| {
                fail(
                    RvsStatus::InvalidArgument,
                    format!("no ground truth for {class}"),
                )
            })?;
        *deref_mut(out, "out")? = *ap;
        Ok(RvsStatus::Ok)
    })
}

/// Report as JSON; free the result with [`rvs_string_free`].
///
/// # Safety
/// As for [`rvs_report_map`].
#[no_mangle]
pub unsafe extern "C" fn rvs_report_to_json(
    report: *const RvsReport,
    out: *mut *mut c_char,
) -> RvsStatus {
    guard(|| {
        let json = deref(report, "report")?.0.to_json();
        *deref_mut(out, "out")? = into_c_string(json)?;
        Ok(RvsStatus::Ok)
    })
}

/// # Safety
/// `report` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rvs_report_free(report: *mut RvsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Loads a TOML configuration, or the defaults when `config_path` is null.
///
/// # Safety
/// `config_path` must be null or a NUL-terminated string; `out` must be
/// null or valid.
#[no_mangle]
pub unsafe extern "C" fn rvs_pipeline_new(
    config_path: *const c_char,
    out: *mut *mut RvsPipeline,
) -> RvsStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let cfg = if config_path.is_null() {
            PipelineConfig::default()
        } else {
            PipelineConfig::load(&path(config_path, "config_path")?)
                .map_err(|e| pipeline_status(e.into()))?
        };
        cfg.validate().map_err(|e| pipeline_status(e.into()))?;
        *out = Box::into_raw(Box::new(RvsPipeline(cfg)));
        Ok(RvsStatus::Ok)
    })
}

/// # Safety
/// `pipeline` must come from [`rvs_pipeline_new`].
#[no_mangle]
pub unsafe extern "C" fn rvs_pipeline_set_workers(
    pipeline: *mut RvsPipeline,
    workers: usize,
) -> RvsStatus {
    guard(|| {
        if workers == 0 {
            return Err(fail(
                RvsStatus::InvalidArgument,
                "workers must be at least 1",
            ));
        }
        deref_mut(pipeline, "pipeline")?.0.workers = workers;
        Ok(RvsStatus::Ok)
    })
}

/// Extracts records from the images under `input_dir` into `output_path`.
/// Returns `Partial` when some images were skipped. `records_out` may be
/// null.
///
/// # Safety
/// `pipeline` must come from [`rvs_pipeline_new`]; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rvs_pipeline_extract(
    pipeline: *const RvsPipeline,
    input_dir: *const c_char,
    output_path: *const c_char,
    records_out: *mut usize,
) -> RvsStatus {
    guard(|| {
        let cfg = &deref(pipeline, "pipeline")?.0;
        let input = path(input_dir, "input_dir")?;
        let output = path(output_path, "output_path")?;
        let outcome = run_extract(cfg, &input, &output).map_err(pipeline_status)?;
        if let Some(n) = records_out.as_mut() {
            *n = outcome.records.len();
        }
        if outcome.failures.is_empty() {
            Ok(RvsStatus::Ok)
        } else {
            set_last_error(&format!(
                "{} image(s) skipped, first: {}",
                outcome.failures.len(),
                outcome.failures[0].message
            ));
            Ok(RvsStatus::Partial)
        }
    })
}

/// Annotates `input_path` into `annotated_path` and writes the filtered
/// records to `filtered_path` (or `<annotated stem>.filtered.jsonl` when
/// null). `summary` may be null.
///
/// # Safety
/// `pipeline` must come from [`rvs_pipeline_new`]; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn rvs_pipeline_analyze(
    pipeline: *const RvsPipeline,
    input_path: *const c_char,
    annotated_path: *const c_char,
    filtered_path: *const c_char,
    drop_inconsistent: bool,
    drop_fake: bool,
    summary: *mut RvsAnalyzeSummary,
) -> RvsStatus {
    guard(|| {
        let mut cfg = deref(pipeline, "pipeline")?.0.clone();
        cfg.filter.drop_inconsistent |= drop_inconsistent;
        cfg.filter.drop_fake |= drop_fake;
        let input = path(input_path, "input_path")?;
        let annotated = path(annotated_path, "annotated_path")?;
        let filtered = if filtered_path.is_null() {
            default_filtered_path(&annotated)
        } else {
            path(filtered_path, "filtered_path")?
        };
        let outcome = run_analyze(&cfg, &input, &annotated, &filtered).map_err(pipeline_status)?;
        if let Some(s) = summary.as_mut() {
            let o = outcome.summary;
            *s = RvsAnalyzeSummary {
                total: o.total,
                annotated: o.annotated,
                inconsistent: o.inconsistent,
                fake: o.fake,
                kept: o.kept,
                failed: outcome.failures.len(),
            };
        }
        if outcome.failures.is_empty() {
            Ok(RvsStatus::Ok)
        } else {
            set_last_error(&format!(
                "{} record(s) skipped, first: {}",
                outcome.failures.len(),
                outcome.failures[0].message
            ));
            Ok(RvsStatus::Partial)
        }
    })
}

/// # Safety
/// `pipeline` must be null or come from [`rvs_pipeline_new`] and not be
/// used again.
#[no_mangle]
pub unsafe extern "C" fn rvs_pipeline_free(pipeline: *mut RvsPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}
