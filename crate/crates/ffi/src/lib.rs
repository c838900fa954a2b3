//! C ABI over the fairdistill toolkit. Conventions:
//!
//! - every fallible function returns an [`FdStatus`] code and writes its
//!   result through out-pointers;
//! - `FD_OK` (0) is success, everything else is an error and leaves a
//!   human-readable detail retrievable via [`fd_last_error_message`]
//!   (thread-local);
//! - prediction sets are opaque handles created and destroyed by this
//!   library; never free them with anything but [`fd_prediction_set_free`];
//! - no function panics across the boundary.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use fairdistill::cli::{self, EvaluateInput, TrainConfig, TrainMethod};
use fairdistill::datagen::GenSpec;
use fairdistill::error::Error;
use fairdistill::fis;
use fairdistill::metrics::{self, ClassificationRecord, PredictionSet, Task};
use fairdistill::stats::{self, Alpha, RankTable};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidArgument = -2,
    UndefinedMetric = -3,
    IoError = -4,
    InternalError = -5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_from_error(err: &Error) -> FdStatus {
    set_last_error(&err.to_string());
    match err {
        Error::UndefinedMetric(_) => FdStatus::UndefinedMetric,
        Error::Io(_) => FdStatus::IoError,
        Error::Numeric(_) => FdStatus::InternalError,
        _ => FdStatus::InvalidArgument,
    }
}

fn guard(body: impl FnOnce() -> FdStatus) -> FdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            FdStatus::InternalError
        }
    }
}

/// Library version as a NUL-terminated static string.
#[no_mangle]
pub extern "C" fn fd_version() -> *const c_char {
    static VERSION: &str = concat!("fairdistill ", env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Detail message for the most recent error on this thread. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

unsafe fn slice_arg<'a, T>(ptr: *const T, len: usize) -> Option<&'a [T]> {
    if ptr.is_null() {
        None
    } else {
        Some(unsafe { std::slice::from_raw_parts(ptr, len) })
    }
}

fn require<T>(opt: Option<T>, what: &str) -> Result<T, FdStatus> {
    opt.ok_or_else(|| {
        set_last_error(&format!("{what} must not be NULL"));
        FdStatus::NullPointer
    })
}

fn group_map(values: &[f64]) -> BTreeMap<u32, f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| (i as u32, v))
        .collect()
}

/// AUC as the Mann–Whitney statistic (ties credited 0.5). Labels are 0/1.
///
/// # Safety
/// `scores` and `labels` must point to `len` readable elements; `out` must
/// be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn fd_auc(
    scores: *const f64,
    labels: *const u8,
    len: usize,
    out: *mut f64,
) -> FdStatus {
    guard(|| {
        let (scores, labels, out) = match (|| {
            Ok((
                require(unsafe { slice_arg(scores, len) }, "scores")?,
                require(unsafe { slice_arg(labels, len) }, "labels")?,
                require(unsafe { out.as_mut() }, "out")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        match metrics::auc(scores, labels) {
            Ok(v) => {
                *out = v;
                FdStatus::Ok
            }
            Err(e) => status_from_error(&e),
        }
    })
}

/// Exact 1-Wasserstein distance between two empirical distributions.
///
/// # Safety
/// `a`/`b` must point to `a_len`/`b_len` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_wasserstein_1d(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    out: *mut f64,
) -> FdStatus {
    guard(|| {
        let (a, b, out) = match (|| {
            Ok((
                require(unsafe { slice_arg(a, a_len) }, "a")?,
                require(unsafe { slice_arg(b, b_len) }, "b")?,
                require(unsafe { out.as_mut() }, "out")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        match fis::wasserstein_1d(a, b) {
            Ok(v) => {
                *out = v;
                FdStatus::Ok
            }
            Err(e) => status_from_error(&e),
        }
    })
}

/// Equity-scaled AUC: overall / (1 + mean |overall − group|).
///
/// # Safety
/// `group_values` must point to `n_groups` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_es_auc(
    overall: f64,
    group_values: *const f64,
    n_groups: usize,
    out: *mut f64,
) -> FdStatus {
    guard(|| {
        let (groups, out) = match (|| {
            Ok((
                require(unsafe { slice_arg(group_values, n_groups) }, "group_values")?,
                require(unsafe { out.as_mut() }, "out")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        match metrics::es_auc(overall, &group_map(groups)) {
            Ok(v) => {
                *out = v;
                FdStatus::Ok
            }
            Err(e) => status_from_error(&e),
        }
    })
}

/// Equity-scaled overlap score: overall / (1 + Δ) with Δ the summed
/// per-group discrepancy (Dice/IoU convention).
///
/// # Safety
/// `group_values` must point to `n_groups` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fd_es_overlap(
    overall: f64,
    group_values: *const f64,
    n_groups: usize,
    out: *mut f64,
) -> FdStatus {
    guard(|| {
        let (groups, out) = match (|| {
            Ok((
                require(unsafe { slice_arg(group_values, n_groups) }, "group_values")?,
                require(unsafe { out.as_mut() }, "out")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        match metrics::es_overlap(overall, &group_map(groups)) {
            Ok(v) => {
                *out = v;
                FdStatus::Ok
            }
            Err(e) => status_from_error(&e),
        }
    })
}

/// Performance-scaled disparities: population std of the group values and
/// their range, both divided by the overall score.
///
/// # Safety
/// `group_values` must point to `n_groups` readable doubles; both out
/// pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_psd(
    overall: f64,
    group_values: *const f64,
    n_groups: usize,
    out_mean_psd: *mut f64,
    out_max_psd: *mut f64,
) -> FdStatus {
    guard(|| {
        let (groups, out_mean, out_max) = match (|| {
            Ok((
                require(unsafe { slice_arg(group_values, n_groups) }, "group_values")?,
                require(unsafe { out_mean_psd.as_mut() }, "out_mean_psd")?,
                require(unsafe { out_max_psd.as_mut() }, "out_max_psd")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        match metrics::psd(overall, &group_map(groups)) {
            Ok((mean, max)) => {
                *out_mean = mean;
                *out_max = max;
                FdStatus::Ok
            }
            Err(e) => status_from_error(&e),
        }
    })
}

/// Friedman test over a row-major tasks × algorithms score matrix.
///
/// # Safety
/// `scores` must point to `n_tasks * n_algorithms` readable doubles; both
/// out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_friedman(
    scores: *const f64,
    n_tasks: usize,
    n_algorithms: usize,
    higher_is_better: bool,
    out_chi2: *mut f64,
    out_p: *mut f64,
) -> FdStatus {
    guard(|| {
        let (flat, out_chi2, out_p) = match (|| {
            Ok((
                require(
                    unsafe { slice_arg(scores, n_tasks.saturating_mul(n_algorithms)) },
                    "scores",
                )?,
                require(unsafe { out_chi2.as_mut() }, "out_chi2")?,
                require(unsafe { out_p.as_mut() }, "out_p")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let rows: Vec<Vec<f64>> = flat.chunks(n_algorithms).map(<[f64]>::to_vec).collect();
        let table = match RankTable::new(
            (0..n_algorithms).map(|i| format!("algo{i}")).collect(),
            (0..n_tasks).map(|i| format!("task{i}")).collect(),
            rows,
            higher_is_better,
        ) {
            Ok(t) => t,
            Err(e) => return status_from_error(&e),
        };
        match stats::friedman(&table) {
            Ok(result) => {
                *out_chi2 = result.chi2;
                *out_p = result.p_value;
                FdStatus::Ok
            }
            Err(e) => status_from_error(&e),
        }
    })
}

/// Nemenyi critical difference for k algorithms over N tasks at
/// alpha ∈ {0.05, 0.10}.
///
/// # Safety
/// `out` must be a valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn fd_nemenyi_cd(
    n_algorithms: usize,
    n_tasks: usize,
    alpha: f64,
    out: *mut f64,
) -> FdStatus {
    guard(|| {
        let out = match require(unsafe { out.as_mut() }, "out") {
            Ok(v) => v,
            Err(status) => return status,
        };
        let alpha = match Alpha::from_f64(alpha) {
            Ok(a) => a,
            Err(e) => return status_from_error(&e),
        };
        match stats::nemenyi_cd(n_algorithms, n_tasks, alpha) {
            Ok(cd) => {
                *out = cd;
                FdStatus::Ok
            }
            Err(e) => status_from_error(&e),
        }
    })
}

/// Opaque classification prediction set.
pub struct FdPredictionSet {
    records: Vec<ClassificationRecord>,
}

/// Derived fairness metrics of a classification prediction set.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FdClassificationReport {
    pub overall_auc: f64,
    pub worst_case_auc: f64,
    pub auc_gap: f64,
    pub es_auc: f64,
    pub mean_psd: f64,
    pub max_psd: f64,
    pub n_groups: usize,
}

/// Creates an empty prediction set. Free with [`fd_prediction_set_free`].
#[no_mangle]
pub extern "C" fn fd_prediction_set_new() -> *mut FdPredictionSet {
    Box::into_raw(Box::new(FdPredictionSet {
        records: Vec::new(),
    }))
}

/// Destroys a prediction set. NULL is ignored.
///
/// # Safety
/// `set` must be NULL or a pointer from [`fd_prediction_set_new`] that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn fd_prediction_set_free(set: *mut FdPredictionSet) {
    if !set.is_null() {
        drop(unsafe { Box::from_raw(set) });
    }
}

/// Appends one prediction (score in [0,1], binary label, cohort id).
///
/// # Safety
/// `set` must be a live pointer from [`fd_prediction_set_new`].
#[no_mangle]
pub unsafe extern "C" fn fd_prediction_set_push(
    set: *mut FdPredictionSet,
    score: f64,
    label: u8,
    attribute: u32,
) -> FdStatus {
    guard(|| {
        let set = match require(unsafe { set.as_mut() }, "set") {
            Ok(v) => v,
            Err(status) => return status,
        };
        if !(0.0..=1.0).contains(&score) || !score.is_finite() {
            set_last_error(&format!("score {score} outside [0,1]"));
            return FdStatus::InvalidArgument;
        }
        if label > 1 {
            set_last_error(&format!("label {label} must be 0 or 1"));
            return FdStatus::InvalidArgument;
        }
        let id = set.records.len().to_string();
        set.records.push(ClassificationRecord {
            id,
            score,
            label,
            attribute,
        });
        FdStatus::Ok
    })
}

/// Number of predictions pushed so far.
///
/// # Safety
/// `set` must be NULL or a live pointer from [`fd_prediction_set_new`].
#[no_mangle]
pub unsafe extern "C" fn fd_prediction_set_len(set: *const FdPredictionSet) -> usize {
    unsafe { set.as_ref() }.map_or(0, |s| s.records.len())
}

/// Full fairness report over the prediction set.
///
/// # Safety
/// `set` must be a live pointer; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_prediction_set_report(
    set: *const FdPredictionSet,
    out: *mut FdClassificationReport,
) -> FdStatus {
    guard(|| {
        let (set, out) = match (|| {
            Ok((
                require(unsafe { set.as_ref() }, "set")?,
                require(unsafe { out.as_mut() }, "out")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let preds = PredictionSet::Classification(set.records.clone());
        match metrics::report(&preds, Task::Classification) {
            Ok(report) => {
                let p = &report.primary;
                *out = FdClassificationReport {
                    overall_auc: p.overall,
                    worst_case_auc: p.worst_case,
                    auc_gap: p.gap,
                    es_auc: p.equity_scaled,
                    mean_psd: p.mean_psd.unwrap_or(0.0),
                    max_psd: p.max_psd.unwrap_or(0.0),
                    n_groups: p.per_group.len(),
                };
                FdStatus::Ok
            }
            Err(e) => status_from_error(&e),
        }
    })
}

/// AUC restricted to one cohort of the prediction set.
///
/// # Safety
/// `set` must be a live pointer; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fd_prediction_set_group_auc(
    set: *const FdPredictionSet,
    attribute: u32,
    out: *mut f64,
) -> FdStatus {
    guard(|| {
        let (set, out) = match (|| {
            Ok((
                require(unsafe { set.as_ref() }, "set")?,
                require(unsafe { out.as_mut() }, "out")?,
            ))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for r in set.records.iter().filter(|r| r.attribute == attribute) {
            scores.push(r.score);
            labels.push(r.label);
        }
        if scores.is_empty() {
            set_last_error(&format!("no predictions for attribute {attribute}"));
            return FdStatus::InvalidArgument;
        }
        match metrics::auc(&scores, &labels) {
            Ok(v) => {
                *out = v;
                FdStatus::Ok
            }
            Err(e) => status_from_error(&e),
        }
    })
}

unsafe fn path_arg(ptr: *const c_char, what: &str) -> Result<PathBuf, FdStatus> {
    let cstr = require(unsafe { ptr.as_ref() }, what)?;
    let cstr = unsafe { CStr::from_ptr(cstr) };
    match cstr.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_last_error(&format!("{what} is not valid UTF-8"));
            Err(FdStatus::InvalidArgument)
        }
    }
}

/// Generates a synthetic benchmark into `out_dir`. `spec_json` is either
/// NULL (defaults) or a JSON object with generator-spec fields.
///
/// # Safety
/// `spec_json` must be NULL or a NUL-terminated string; `out_dir` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fd_generate(
    spec_json: *const c_char,
    out_dir: *const c_char,
) -> FdStatus {
    guard(|| {
        let out_dir = match unsafe { path_arg(out_dir, "out_dir") } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let spec: GenSpec = if spec_json.is_null() {
            GenSpec::default()
        } else {
            let text = unsafe { CStr::from_ptr(spec_json) };
            let Ok(text) = text.to_str() else {
                set_last_error("spec_json is not valid UTF-8");
                return FdStatus::InvalidArgument;
            };
            match serde_json::from_str(text) {
                Ok(spec) => spec,
                Err(e) => {
                    set_last_error(&format!("bad spec JSON: {e}"));
                    return FdStatus::InvalidArgument;
                }
            }
        };
        match cli::cmd_generate(&spec, &out_dir) {
            Ok(()) => FdStatus::Ok,
            Err(e) => status_from_error(&e),
        }
    })
}

/// Trains `method` ("erm", "fis", or "fairdi") on a dataset CSV, writing
/// checkpoints and records under `out_dir`.
///
/// # Safety
/// `dataset_csv`, `method`, and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn fd_train(
    dataset_csv: *const c_char,
    method: *const c_char,
    out_dir: *const c_char,
    seed: u64,
    max_epochs: usize,
) -> FdStatus {
    guard(|| {
        let (dataset, method, out_dir) = match (|| {
            let dataset = unsafe { path_arg(dataset_csv, "dataset_csv") }?;
            let method = unsafe { path_arg(method, "method") }?;
            let out_dir = unsafe { path_arg(out_dir, "out_dir") }?;
            Ok((dataset, method, out_dir))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        let method = match TrainMethod::parse(&method.to_string_lossy()) {
            Ok(m) => m,
            Err(e) => return status_from_error(&e),
        };
        let mut cfg = TrainConfig::new(dataset, out_dir, method, seed);
        if max_epochs > 0 {
            cfg.stage0.max_epochs = max_epochs;
            cfg.stage1.max_epochs = max_epochs;
            cfg.stage2.max_epochs = max_epochs;
        }
        match cli::cmd_train(&cfg) {
            Ok(()) => FdStatus::Ok,
            Err(e) => status_from_error(&e),
        }
    })
}

/// Evaluates a classification predictions CSV into report files under
/// `out_dir`.
///
/// # Safety
/// `predictions_csv` and `out_dir` must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn fd_evaluate_predictions(
    predictions_csv: *const c_char,
    out_dir: *const c_char,
) -> FdStatus {
    guard(|| {
        let (preds, out_dir) = match (|| {
            let preds = unsafe { path_arg(predictions_csv, "predictions_csv") }?;
            let out_dir = unsafe { path_arg(out_dir, "out_dir") }?;
            Ok((preds, out_dir))
        })() {
            Ok(v) => v,
            Err(status) => return status,
        };
        match cli::cmd_evaluate(&EvaluateInput::Predictions(preds), Path::new(&out_dir)) {
            Ok(()) => FdStatus::Ok,
            Err(e) => status_from_error(&e),
        }
    })
}
