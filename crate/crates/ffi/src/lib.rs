//! C ABI over the `btl-cpd` library.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every entry point returns a [`BtlStatus`]
//! (or a sentinel) and records a message readable through
//! [`btl_last_error`] on the calling thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use btl_cpd::detect::{run_method, DetectOptions, Method};
use btl_cpd::dp::Segmentation;
use btl_cpd::eval::hausdorff;
use btl_cpd::io::{read_observations, IngestOptions};
use btl_cpd::model::{ComparisonGraph, ObservationSeries, Span};
use btl_cpd::refine::refine;
use btl_cpd::solver::{fit_interval, SolverConfig};
use btl_cpd::wbs::Statistic;
use btl_cpd::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BtlStatus {
    Ok = 0,
    NullPointer = 1,
    MalformedInput = 2,
    DisconnectedGraph = 3,
    NonConvergence = 4,
    Internal = 5,
    Panic = 6,
    BufferTooSmall = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BtlMethod {
    Dp = 0,
    Dplr = 1,
    WbsGlr = 2,
    WbsSst = 3,
    WbsBorda = 4,
}

impl From<BtlMethod> for Method {
    fn from(m: BtlMethod) -> Self {
        match m {
            BtlMethod::Dp => Method::Dp,
            BtlMethod::Dplr => Method::Dplr,
            BtlMethod::WbsGlr => Method::Wbs(Statistic::Glr),
            BtlMethod::WbsSst => Method::Wbs(Statistic::Sst),
            BtlMethod::WbsBorda => Method::Wbs(Statistic::Borda),
        }
    }
}

/// A validated comparison stream.
pub struct BtlSeries {
    inner: ObservationSeries,
}

/// A set of change points on `1..=t_max`.
pub struct BtlSegmentation {
    inner: Segmentation,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> BtlStatus {
    match e {
        Error::DisconnectedGraph => BtlStatus::DisconnectedGraph,
        Error::NonConvergence { .. } => BtlStatus::NonConvergence,
        Error::NonFinite(_) => BtlStatus::Internal,
        _ => BtlStatus::MalformedInput,
    }
}

struct Failure(BtlStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(BtlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BtlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            BtlStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BtlStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null only when `len == 0`, else valid for `len` reads.
unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Builds a series over the complete graph on `n` items; record `k` says
/// `winners[k]` beat `losers[k]` at time `k + 1`.
///
/// # Safety
/// `winners` and `losers` must be valid for `len` reads; `out` must be a
/// valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn btl_series_new(
    n: usize,
    winners: *const usize,
    losers: *const usize,
    len: usize,
    out: *mut *mut BtlSeries,
) -> BtlStatus {
    btl_series_with_edges(n, ptr::null(), ptr::null(), 0, winners, losers, len, out)
}

/// Like [`btl_series_new`] but restricted to the graph with edges
/// `(edge_a[k], edge_b[k])`. With `edge_count == 0` the graph is complete.
///
/// # Safety
/// Every array must be valid for its stated length; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn btl_series_with_edges(
    n: usize,
    edge_a: *const usize,
    edge_b: *const usize,
    edge_count: usize,
    winners: *const usize,
    losers: *const usize,
    len: usize,
    out: *mut *mut BtlSeries,
) -> BtlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let a = slice(edge_a, edge_count, "edge_a")?;
        let b = slice(edge_b, edge_count, "edge_b")?;
        let w = slice(winners, len, "winners")?;
        let l = slice(losers, len, "losers")?;
        let graph = if edge_count == 0 {
            ComparisonGraph::complete(n)?
        } else {
            ComparisonGraph::new(n, a.iter().copied().zip(b.iter().copied()))?
        };
        let pairs: Vec<(usize, usize)> = w.iter().copied().zip(l.iter().copied()).collect();
        let inner = ObservationSeries::from_pairs(graph, &pairs)?;
        put(out, BtlSeries { inner });
        Ok(())
    })
}

/// Reads a `t,winner,loser` CSV file; labels map to indices by first
/// appearance and the graph is complete.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn btl_series_from_csv(path: *const c_char, out: *mut *mut BtlSeries) -> BtlStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(BtlStatus::MalformedInput, "path is not UTF-8".to_string()))?;
        let file = std::fs::File::open(path).map_err(|e| Failure(BtlStatus::MalformedInput, format!("{path}: {e}")))?;
        let ls = read_observations(std::io::BufReader::new(file), &IngestOptions::default())?;
        put(out, BtlSeries { inner: ls.series });
        Ok(())
    })
}

/// Series length `T`, or 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn btl_series_len(series: *const BtlSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.len())
}

/// Number of items, or 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn btl_series_items(series: *const BtlSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.n())
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn btl_series_free(series: *mut BtlSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Detects change points with penalty (or threshold) `gamma` using the
/// default ridge solver and method defaults; `seed` drives WBS sampling.
///
/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn btl_detect(
    series: *const BtlSeries,
    method: BtlMethod,
    gamma: f64,
    seed: u64,
    out: *mut *mut BtlSegmentation,
) -> BtlStatus {
    guard(|| {
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = DetectOptions {
            seed,
            ..DetectOptions::default()
        };
        let inner = run_method(&s.inner, method.into(), gamma, &SolverConfig::default(), &opts)?;
        put(out, BtlSegmentation { inner });
        Ok(())
    })
}

/// Locally refines `prelim`.
///
/// # Safety
/// `series` and `prelim` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn btl_refine(
    series: *const BtlSeries,
    prelim: *const BtlSegmentation,
    out: *mut *mut BtlSegmentation,
) -> BtlStatus {
    guard(|| {
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        let p = prelim.as_ref().ok_or_else(|| null("prelim"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = refine(&s.inner, &p.inner, &SolverConfig::default())?;
        put(out, BtlSegmentation { inner });
        Ok(())
    })
}

/// Builds a segmentation from strictly increasing points in `(1, t_max]`.
///
/// # Safety
/// `points` must be valid for `count` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn btl_segmentation_new(
    t_max: usize,
    points: *const usize,
    count: usize,
    out: *mut *mut BtlSegmentation,
) -> BtlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let pts = slice(points, count, "points")?;
        let inner = Segmentation::new(t_max, pts.to_vec())?;
        put(out, BtlSegmentation { inner });
        Ok(())
    })
}

/// Number of change points, or 0 for a null handle.
///
/// # Safety
/// `seg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn btl_segmentation_count(seg: *const BtlSegmentation) -> usize {
    seg.as_ref().map_or(0, |s| s.inner.len())
}

/// # Safety
/// `seg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn btl_segmentation_t_max(seg: *const BtlSegmentation) -> usize {
    seg.as_ref().map_or(0, |s| s.inner.t_max())
}

/// Copies the change points into `buf`. `*written` receives the number of
/// points; when `capacity` is too small nothing is copied and
/// `BufferTooSmall` is returned with the required count in `*written`.
///
/// # Safety
/// `seg` must be a live handle, `buf` valid for `capacity` writes and
/// `written` writable.
#[no_mangle]
pub unsafe extern "C" fn btl_segmentation_points(
    seg: *const BtlSegmentation,
    buf: *mut usize,
    capacity: usize,
    written: *mut usize,
) -> BtlStatus {
    guard(|| {
        let s = seg.as_ref().ok_or_else(|| null("segmentation"))?;
        if written.is_null() {
            return Err(null("written"));
        }
        let pts = s.inner.change_points();
        *written = pts.len();
        if pts.len() > capacity {
            return Err(Failure(
                BtlStatus::BufferTooSmall,
                format!("{} points do not fit in a buffer of {capacity}", pts.len()),
            ));
        }
        if !pts.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(pts.as_ptr(), buf, pts.len());
        }
        Ok(())
    })
}

/// # Safety
/// `seg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn btl_segmentation_free(seg: *mut BtlSegmentation) {
    if !seg.is_null() {
        drop(Box::from_raw(seg));
    }
}

/// Hausdorff distance between two segmentations: `INFINITY` when exactly
/// one is empty, `NAN` for a null handle.
///
/// # Safety
/// Both pointers must be null or live handles.
#[no_mangle]
pub unsafe extern "C" fn btl_hausdorff(a: *const BtlSegmentation, b: *const BtlSegmentation) -> f64 {
    match (a.as_ref(), b.as_ref()) {
        (Some(a), Some(b)) => hausdorff(&a.inner, &b.inner),
        _ => f64::NAN,
    }
}

/// Fits scores on the inclusive interval `[first, last]` with the default
/// solver. `theta` receives one score per item; `objective` (optional)
/// receives the negative log-likelihood.
///
/// # Safety
/// `series` must be a live handle, `theta` valid for `capacity` writes and
/// `objective` null or writable.
#[no_mangle]
pub unsafe extern "C" fn btl_fit(
    series: *const BtlSeries,
    first: usize,
    last: usize,
    theta: *mut f64,
    capacity: usize,
    objective: *mut f64,
) -> BtlStatus {
    guard(|| {
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        let n = s.inner.n();
        if capacity < n {
            return Err(Failure(BtlStatus::BufferTooSmall, format!("need room for {n} scores, got {capacity}")));
        }
        if theta.is_null() {
            return Err(null("theta"));
        }
        let fit = fit_interval(&s.inner, Span::new(first, last), &SolverConfig::default())?;
        ptr::copy_nonoverlapping(fit.theta_hat.scores().as_ptr(), theta, n);
        if !objective.is_null() {
            *objective = fit.objective;
        }
        Ok(())
    })
}

/// Copies the calling thread's last error message (NUL-terminated,
/// truncated to fit) into `buf` and returns the full message length
/// excluding the terminator. An empty message means the last call
/// succeeded.
///
/// # Safety
/// `buf` must be null or valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn btl_last_error(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && capacity > 0 {
            let n = msg.len().min(capacity - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
