//! C ABI over `axle-eval`.
//!
//! Conventions:
//! * Every fallible function returns an [`AxleStatus`]; results go through
//!   out-pointers, which are left untouched on failure.
//! * On failure, [`axle_last_error_message`] describes the error for the
//!   calling thread.
//! * Datasets and matrices are opaque handles released with their `_free`
//!   function. Strings returned by the library are released with
//!   [`axle_string_free`].
//! * Panics never cross the boundary; they surface as `AXLE_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use axle_eval::annotations::{dataset_stats, load_dataset, BoundingBox, Dataset};
use axle_eval::cli::evaluate;
use axle_eval::error::Error;
use axle_eval::matching::ConfusionCounts;
use axle_eval::metrics::{self, Interpolation};
use axle_eval::report::{self, ExperimentMatrix, Format, Report};
use axle_eval::stats::{self, Decision, PMethod, Sample};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Io = 4,
    /// Well-formed input that cannot be processed (duplicate ids, unknown
    /// categories, unbalanced matrices, missing mAP).
    Input = 5,
    /// Statistical preconditions not met (ties for the exact test, zero
    /// variance, no critical value).
    Statistics = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxleFormat {
    Csv = 0,
    Json = 1,
    Markdown = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxleInterpolation {
    AllPoint = 0,
    ElevenPoint = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxleDecision {
    Reject = 0,
    FailToReject = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxlePMethod {
    Exact = 0,
    NormalApproximation = 1,
}

/// Normalized center-format box.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AxleCounts {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

/// Percentages rounded half-up to two decimals.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AxleMetrics {
    pub recall_pct: f64,
    pub precision_pct: f64,
    pub f1_pct: f64,
    /// A zero denominator was reported as 0.
    pub degenerate: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleUTest {
    pub n1: usize,
    pub n2: usize,
    /// U of the first sample.
    pub u1: f64,
    pub u2: f64,
    /// min(u1, u2)
    pub u: f64,
    pub p_two_tailed: f64,
    pub p_method: AxlePMethod,
    pub has_critical_value: bool,
    pub critical_value: u32,
    pub alpha: f64,
    pub decision: AxleDecision,
}

/// Opaque loaded dataset.
pub struct AxleDataset(Dataset);

/// Opaque experiment matrix.
pub struct AxleMatrix(ExperimentMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> AxleStatus {
    match e {
        Error::Parse { .. } | Error::Manifest { .. } => AxleStatus::Parse,
        Error::Io { .. } => AxleStatus::Io,
        Error::InvalidArgument(_) | Error::InvalidBox(_) => AxleStatus::InvalidArgument,
        Error::TiesPresent | Error::ZeroVariance | Error::NoCriticalValue { .. } => {
            AxleStatus::Statistics
        }
        Error::Json(_) | Error::Csv(_) => AxleStatus::Internal,
        _ => AxleStatus::Input,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

struct Failure(AxleStatus, String);

fn fail(status: AxleStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

/// Runs `body`, recording errors and containing panics.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AxleStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AxleStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside axle-eval");
            AxleStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(fail(AxleStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    non_null(p, "path")?;
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AxleStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn dataset_ref<'a>(ds: *const AxleDataset) -> Result<&'a Dataset, Failure> {
    non_null(ds, "dataset")?;
    Ok(&(*ds).0)
}

/// Message for the last failed call on this thread, or NULL. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn axle_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a dataset manifest and every annotation file it lists.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn axle_dataset_load(
    path: *const c_char,
    out: *mut *mut AxleDataset,
) -> AxleStatus {
    guard(|| {
        non_null(out, "out")?;
        let d = load_dataset(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(AxleDataset(d)));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from [`axle_dataset_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn axle_dataset_free(ds: *mut AxleDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn axle_dataset_image_count(
    ds: *const AxleDataset,
    out: *mut usize,
) -> AxleStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = dataset_ref(ds)?.images.len();
        Ok(())
    })
}

/// Ground-truth objects of one category (0 when the category has none).
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn axle_dataset_object_count(
    ds: *const AxleDataset,
    category_id: u32,
    out: *mut usize,
) -> AxleStatus {
    guard(|| {
        non_null(out, "out")?;
        let s = dataset_stats(dataset_ref(ds)?);
        *out = s
            .object_count_per_category
            .get(&category_id)
            .copied()
            .unwrap_or(0);
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn axle_iou(a: AxleBox, b: AxleBox, out: *mut f64) -> AxleStatus {
    guard(|| {
        non_null(out, "out")?;
        let to_box = |x: AxleBox| BoundingBox {
            cx: x.cx,
            cy: x.cy,
            w: x.w,
            h: x.h,
        };
        let v = axle_eval::matching::iou(&to_box(a), &to_box(b))?;
        *out = v;
        Ok(())
    })
}

/// TP/FP/FN summed over all images and categories.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn axle_evaluate(
    ds: *const AxleDataset,
    iou_threshold: f64,
    confidence_threshold: f64,
    out: *mut AxleCounts,
) -> AxleStatus {
    guard(|| {
        non_null(out, "out")?;
        let (c, _) = evaluate(
            dataset_ref(ds)?,
            iou_threshold,
            confidence_threshold,
            Interpolation::AllPoint,
        )?;
        *out = AxleCounts {
            true_positives: c.tp,
            false_positives: c.fp,
            false_negatives: c.fn_,
        };
        Ok(())
    })
}

/// AP of one category over all detections in the dataset.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn axle_average_precision(
    ds: *const AxleDataset,
    category_id: u32,
    iou_threshold: f64,
    interpolation: AxleInterpolation,
    out: *mut f64,
) -> AxleStatus {
    guard(|| {
        non_null(out, "out")?;
        let (ranked, gt_total) =
            metrics::rank_detections(dataset_ref(ds)?, category_id, iou_threshold)?;
        let curve = metrics::pr_curve(&ranked, gt_total)?;
        let interpolation = match interpolation {
            AxleInterpolation::AllPoint => Interpolation::AllPoint,
            AxleInterpolation::ElevenPoint => Interpolation::ElevenPoint,
        };
        *out = metrics::average_precision(&curve, interpolation);
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn axle_metrics_from_counts(
    counts: AxleCounts,
    out: *mut AxleMetrics,
) -> AxleStatus {
    guard(|| {
        non_null(out, "out")?;
        let c = ConfusionCounts::new(
            counts.true_positives,
            counts.false_positives,
            counts.false_negatives,
        );
        let row = metrics::metrics_row(&c, None);
        *out = AxleMetrics {
            recall_pct: row.recall_pct,
            precision_pct: row.precision_pct,
            f1_pct: row.f1_pct,
            degenerate: row.degenerate,
        };
        Ok(())
    })
}

unsafe fn values<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Err(fail(
            AxleStatus::InvalidArgument,
            format!("{what} is empty"),
        ));
    }
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, n))
}

/// Two-tailed Mann-Whitney U test of sample `a` against sample `b`.
///
/// # Safety
/// `a` and `b` must point to `n1` and `n2` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn axle_mann_whitney(
    a: *const f64,
    n1: usize,
    b: *const f64,
    n2: usize,
    alpha: f64,
    out: *mut AxleUTest,
) -> AxleStatus {
    guard(|| {
        non_null(out, "out")?;
        let a = Sample::new("a", values(a, n1, "a")?.to_vec())?;
        let b = Sample::new("b", values(b, n2, "b")?.to_vec())?;
        let t = stats::mann_whitney_test(&a, &b, alpha)?;
        *out = AxleUTest {
            n1: t.n1,
            n2: t.n2,
            u1: t.u1,
            u2: t.u2,
            u: t.u,
            p_two_tailed: t.p_two_tailed,
            p_method: match t.p_method {
                PMethod::Exact => AxlePMethod::Exact,
                PMethod::NormalApproximation => AxlePMethod::NormalApproximation,
            },
            has_critical_value: t.critical_value.is_some(),
            critical_value: t.critical_value.unwrap_or(0),
            alpha: t.alpha,
            decision: match t.decision {
                Decision::Reject => AxleDecision::Reject,
                Decision::FailToReject => AxleDecision::FailToReject,
            },
        };
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn axle_matrix_load(
    path: *const c_char,
    out: *mut *mut AxleMatrix,
) -> AxleStatus {
    guard(|| {
        non_null(out, "out")?;
        let m = report::load_matrix(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(AxleMatrix(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`axle_matrix_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn axle_matrix_free(m: *mut AxleMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live matrix handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn axle_matrix_row_count(
    m: *const AxleMatrix,
    out: *mut usize,
) -> AxleStatus {
    guard(|| {
        non_null(m, "matrix")?;
        non_null(out, "out")?;
        *out = (*m).0.rows.len();
        Ok(())
    })
}

/// Renders the full report (metrics plus both hypothesis batteries).
///
/// CSV output consists of several files (`metrics.csv`,
/// `hypothesis_tests.csv`, `series.csv`); `file_name` selects one. Pass
/// NULL to get the first file in name order. The string written to `out`
/// must be released with [`axle_string_free`].
///
/// # Safety
/// `m` must be a live matrix handle, `file_name` NULL or NUL-terminated,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn axle_report_render(
    m: *const AxleMatrix,
    alpha: f64,
    format: AxleFormat,
    file_name: *const c_char,
    out: *mut *mut c_char,
) -> AxleStatus {
    guard(|| {
        non_null(m, "matrix")?;
        non_null(out, "out")?;
        let format = match format {
            AxleFormat::Csv => Format::Csv,
            AxleFormat::Json => Format::Json,
            AxleFormat::Markdown => Format::Markdown,
        };
        let rendered = report::render(&Report::build(&(*m).0, alpha)?, format)?;
        let contents = if file_name.is_null() {
            rendered.values().next().cloned().unwrap_or_default()
        } else {
            let name = CStr::from_ptr(file_name).to_string_lossy();
            rendered.get(name.as_ref()).cloned().ok_or_else(|| {
                fail(
                    AxleStatus::InvalidArgument,
                    format!("no rendered file `{name}`"),
                )
            })?
        };
        let c = CString::new(contents)
            .map_err(|_| fail(AxleStatus::Internal, "report contains NUL"))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn axle_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message() -> String {
        unsafe { CStr::from_ptr(axle_last_error_message()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn guard_contains_panics() {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let status = guard(|| panic!("boom"));
        std::panic::set_hook(prev);
        assert_eq!(status, AxleStatus::Panic);
        assert_eq!(message(), "panic inside axle-eval");
    }

    #[test]
    fn errors_map_to_statuses() {
        assert_eq!(status_of(&Error::TiesPresent), AxleStatus::Statistics);
        assert_eq!(
            status_of(&Error::DuplicateImage("a".into())),
            AxleStatus::Input
        );
        assert_eq!(
            status_of(&Error::InvalidBox("b".into())),
            AxleStatus::InvalidArgument
        );
        let status = guard(|| Err(fail(AxleStatus::Parse, "bad\0line")));
        assert_eq!(status, AxleStatus::Parse);
        assert_eq!(message(), "bad line");
    }

    #[test]
    fn success_keeps_previous_message() {
        set_last_error("earlier");
        assert_eq!(guard(|| Ok(())), AxleStatus::Ok);
        assert_eq!(message(), "earlier");
    }
}
