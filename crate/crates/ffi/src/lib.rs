//! C ABI over the collar library.
//!
//! Metrics and reports are opaque heap handles released with their `_free`
//! function. Every fallible call returns a [`CollarStatus`]; on failure the
//! message is available from [`collar_last_error`] on the same thread.
//! Strings returned by the library are freed with [`collar_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use collar::config::{load_metric, preset, save_metric, RunConfig};
use collar::curvature::{sectional_curvature, verify_lemma_bounds, GridSpec, TangentPlane};
use collar::profile::{scan_kappa_min, FeasibilityCondition};
use collar::report::VerificationReport;
use collar::CollarError;
use nalgebra::DVector;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollarStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    InfeasibleBridge = 4,
    Numerical = 5,
    Io = 6,
    Unsupported = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollarPlaneMode {
    /// `span(X, ∂_t)`.
    Xt = 0,
    /// `span(X, Y)`.
    Xy = 1,
    /// `span(X + a ∂_t, Y)`.
    Mixed = 2,
}

/// Opaque collar metric.
pub struct CollarMetric {
    inner: collar::curvature::CollarMetric,
}

/// Opaque verification report.
pub struct CollarReport {
    inner: VerificationReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &CollarError) -> CollarStatus {
    match e {
        CollarError::InvalidParameter(_) | CollarError::NonOrthonormalPlane { .. } | CollarError::OutsideDomain(_) => {
            CollarStatus::InvalidArgument
        }
        CollarError::InfeasibleBridge { .. } | CollarError::InsufficientHeadroom { .. } => {
            CollarStatus::InfeasibleBridge
        }
        CollarError::StepTooSmall { .. } | CollarError::StepRejected { .. } => CollarStatus::Numerical,
        CollarError::Config(_) | CollarError::Parse(_) | CollarError::ConfigMismatch { .. } => CollarStatus::Config,
        CollarError::Io(_) => CollarStatus::Io,
        CollarError::NotFrozen { .. } | CollarError::Unsupported(_) => CollarStatus::Unsupported,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (CollarStatus, String)>) -> CollarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CollarStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CollarStatus::Panic
        }
    }
}

fn lib_err(e: CollarError) -> (CollarStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (CollarStatus, String) {
    (CollarStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (CollarStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (CollarStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn metric_arg<'a>(m: *const CollarMetric) -> Result<&'a collar::curvature::CollarMetric, (CollarStatus, String)> {
    m.as_ref().map(|h| &h.inner).ok_or_else(|| null("metric"))
}

unsafe fn emit_metric(out: *mut *mut CollarMetric, inner: collar::curvature::CollarMetric) {
    *out = Box::into_raw(Box::new(CollarMetric { inner }));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn collar_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread (empty after a success).
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn collar_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds the metric of a shipped preset at the given `kappa`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn collar_metric_from_preset(
    name: *const c_char,
    kappa: f64,
    out: *mut *mut CollarMetric,
) -> CollarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = preset(str_arg(name, "name")?).map_err(lib_err)?;
        cfg.collar.kappa = kappa;
        cfg.validate().map_err(lib_err)?;
        emit_metric(out, cfg.build_metric().map_err(lib_err)?);
        Ok(())
    })
}

/// Builds the metric described by a TOML run configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn collar_metric_from_config(toml: *const c_char, out: *mut *mut CollarMetric) -> CollarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = RunConfig::from_toml(str_arg(toml, "toml")?).map_err(lib_err)?;
        emit_metric(out, cfg.build_metric().map_err(lib_err)?);
        Ok(())
    })
}

/// Loads a metric artifact written by `collar build` or [`collar_metric_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn collar_metric_load(path: *const c_char, out: *mut *mut CollarMetric) -> CollarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        emit_metric(out, load_metric(Path::new(path)).map_err(lib_err)?);
        Ok(())
    })
}

/// # Safety
/// `metric` must come from this library; `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn collar_metric_save(metric: *const CollarMetric, path: *const c_char) -> CollarStatus {
    guard(|| {
        let m = metric_arg(metric)?;
        save_metric(m, Path::new(str_arg(path, "path")?)).map_err(lib_err)
    })
}

/// # Safety
/// `metric` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn collar_metric_free(metric: *mut CollarMetric) {
    if !metric.is_null() {
        drop(Box::from_raw(metric));
    }
}

/// `kappa` of the far field, NaN for a null handle.
///
/// # Safety
/// `metric` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn collar_metric_kappa(metric: *const CollarMetric) -> f64 {
    metric.as_ref().map_or(f64::NAN, |h| h.inner.kappa())
}

/// Start of the far field `t0`, NaN for a null handle.
///
/// # Safety
/// `metric` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn collar_metric_t0(metric: *const CollarMetric) -> f64 {
    metric.as_ref().map_or(f64::NAN, |h| h.inner.t0())
}

/// Dimension of the slices, 0 for a null handle.
///
/// # Safety
/// `metric` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn collar_metric_slice_dim(metric: *const CollarMetric) -> usize {
    metric.as_ref().map_or(0, |h| h.inner.slice.dim())
}

/// Writes `f(t), f'(t), f''(t)` to `out[0..3]`.
///
/// # Safety
/// `metric` must come from this library; `out` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn collar_profile_eval(metric: *const CollarMetric, t: f64, out: *mut f64) -> CollarStatus {
    guard(|| {
        let m = metric_arg(metric)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (f, df, ddf) = m.profile.eval(t);
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(&[f, df, ddf]);
        Ok(())
    })
}

/// Sectional curvature of a plane in normal form at `(t, x)`. `x`, `u`
/// and `v` hold `dim` chart components each (`v` may be null for `XT`);
/// `u`, `v` must be `g_t`-orthonormal.
///
/// # Safety
/// Array arguments must point to `dim` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn collar_sectional_curvature(
    metric: *const CollarMetric,
    mode: CollarPlaneMode,
    t: f64,
    x: *const f64,
    u: *const f64,
    v: *const f64,
    a: f64,
    dim: usize,
    out: *mut f64,
) -> CollarStatus {
    guard(|| {
        let m = metric_arg(metric)?;
        if x.is_null() || u.is_null() || out.is_null() || (v.is_null() && mode != CollarPlaneMode::Xt) {
            return Err(null("array argument"));
        }
        if dim != m.slice.dim() {
            return Err((CollarStatus::InvalidArgument, format!("dim must be {}", m.slice.dim())));
        }
        let x = std::slice::from_raw_parts(x, dim);
        let u = DVector::from_column_slice(std::slice::from_raw_parts(u, dim));
        let v = if v.is_null() { DVector::zeros(dim) } else { DVector::from_column_slice(std::slice::from_raw_parts(v, dim)) };
        let plane = match mode {
            CollarPlaneMode::Xt => TangentPlane::xt(t, x, u),
            CollarPlaneMode::Xy => TangentPlane::xy(t, x, u, v),
            CollarPlaneMode::Mixed => TangentPlane::mixed(t, x, u, v, a),
        };
        *out = sectional_curvature(m, &plane).map_err(lib_err)?;
        Ok(())
    })
}

/// Samples the lemma bounds on the default grid.
///
/// # Safety
/// `metric` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn collar_verify_lemma_bounds(metric: *const CollarMetric, out: *mut *mut CollarReport) -> CollarStatus {
    guard(|| {
        let m = metric_arg(metric)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = verify_lemma_bounds(m, &GridSpec::default());
        *out = Box::into_raw(Box::new(CollarReport { inner }));
        Ok(())
    })
}

/// 1 if every check passed, 0 if one failed, -1 for a null handle.
///
/// # Safety
/// `report` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn collar_report_passed(report: *const CollarReport) -> c_int {
    report.as_ref().map_or(-1, |r| c_int::from(r.inner.pass()))
}

/// # Safety
/// `report` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn collar_report_check_count(report: *const CollarReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.checks.len())
}

/// The report as CSV; free with [`collar_string_free`]. Null on a null handle.
///
/// # Safety
/// `report` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn collar_report_csv(report: *const CollarReport) -> *mut c_char {
    match report.as_ref() {
        Some(r) => CString::new(r.inner.to_csv()).map_or(std::ptr::null_mut(), CString::into_raw),
        None => std::ptr::null_mut(),
    }
}

/// # Safety
/// `report` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn collar_report_free(report: *mut CollarReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn collar_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Smallest `kappa` in `[lo, hi]` above which the bridge condition holds at
/// `t0 = 1/sqrt(kappa)` for the preset's slice. `tangent_only` selects the
/// tangent condition alone; otherwise `f_cc(t0) > 1` is also required.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn collar_scan_kappa_min(
    name: *const c_char,
    lo: f64,
    hi: f64,
    n: usize,
    tangent_only: bool,
    out: *mut f64,
) -> CollarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let case = preset(str_arg(name, "name")?).and_then(|c| c.curvature_case()).map_err(lib_err)?;
        let cond = if tangent_only { FeasibilityCondition::Tangent } else { FeasibilityCondition::Full };
        *out = scan_kappa_min(case, lo, hi, n, cond).map_err(lib_err)?.kappa_min;
        Ok(())
    })
}
