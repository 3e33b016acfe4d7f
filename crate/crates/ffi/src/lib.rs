//! C ABI over the `aglq` estimator.
//!
//! Every fallible call returns an [`AglqStatus`]; on failure the message is
//! kept per thread and read with [`aglq_last_error`]. Designs and fits are
//! opaque handles released with their `_free` function. Matrices are
//! row-major `n x r`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use aglq::design::{GroupSpec, GroupedDesign};
use aglq::inference::sandwich_covariance;
use aglq::loss::{self, estimate_tau_with, LossSpec, TauScale};
use aglq::solver::{adaptive_weights, fit_penalized, fit_unpenalized, FitResult, PenaltySpec, SolverOptions};
use aglq::tuning::{self, check_conditions, RegimeSpec, Schedule};
use aglq::Error;
use nalgebra::{DMatrix, DVector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AglqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidSpec = 2,
    Domain = 3,
    DegenerateSample = 4,
    DimensionMismatch = 5,
    IllConditioned = 6,
    RankDeficient = 7,
    EmptyActiveSet = 8,
    StepUnderflow = 9,
    Data = 10,
    Io = 11,
    /// Output buffer shorter than required.
    BufferTooSmall = 12,
    Panic = 13,
}

impl From<&Error> for AglqStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidSpec(_) => AglqStatus::InvalidSpec,
            Error::Domain { .. } => AglqStatus::Domain,
            Error::DegenerateSample(_) => AglqStatus::DegenerateSample,
            Error::DimensionMismatch { .. } => AglqStatus::DimensionMismatch,
            Error::IllConditioned { .. } => AglqStatus::IllConditioned,
            Error::RankDeficient { .. } => AglqStatus::RankDeficient,
            Error::EmptyActiveSet => AglqStatus::EmptyActiveSet,
            Error::StepUnderflow { .. } => AglqStatus::StepUnderflow,
            Error::Data(_) | Error::Csv(_) | Error::Json(_) => AglqStatus::Data,
            Error::Io(_) => AglqStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(AglqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure((&e).into(), e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn null(what: &str) -> Failure {
    Failure(AglqStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Outcome) -> AglqStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AglqStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AglqStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> std::result::Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn write<T: Copy>(out: *mut T, value: T, what: &str) -> Outcome {
    if out.is_null() {
        return Err(null(what));
    }
    *out = value;
    Ok(())
}

unsafe fn write_slice<T: Copy>(out: *mut T, len: usize, values: &[T]) -> Outcome {
    if len < values.len() {
        return Err(Failure(
            AglqStatus::BufferTooSmall,
            format!("buffer holds {len}, need {}", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn aglq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn aglq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn aglq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- loss --------------------------------------------------------------

/// `rho_tau(u; q)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aglq_rho(u: f64, tau: f64, q: f64, out: *mut f64) -> AglqStatus {
    guard(|| write(out, loss::rho(u, &LossSpec::new(tau, q)?)?, "out"))
}

/// Score `g(eps) = -rho'(eps)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aglq_g(eps: f64, tau: f64, q: f64, out: *mut f64) -> AglqStatus {
    guard(|| write(out, loss::g(eps, &LossSpec::new(tau, q)?)?, "out"))
}

/// Curvature `h(eps) = rho''(eps)`, floored at `floor` near zero for `q < 2`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aglq_h(eps: f64, tau: f64, q: f64, floor: f64, out: *mut f64) -> AglqStatus {
    guard(|| write(out, loss::h(eps, &LossSpec::new(tau, q)?, floor)?, "out"))
}

/// Asymmetry index of a sample. `raw != 0` skips standardization.
///
/// # Safety
/// `sample` must hold `len` values; `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aglq_estimate_tau(sample: *const f64, len: usize, raw: bool, out: *mut f64) -> AglqStatus {
    guard(|| {
        let sample = input(sample, len, "sample")?;
        let scale = if raw { TauScale::Raw } else { TauScale::Standardized };
        write(out, estimate_tau_with(sample, scale)?, "out")
    })
}

// ---- tuning ------------------------------------------------------------

/// `lambda_n = n^(-1/2 - gamma/4)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aglq_lambda_schedule(n: usize, gamma: f64, out: *mut f64) -> AglqStatus {
    guard(|| write(out, tuning::lambda_schedule(n, gamma, Schedule::FixedP)?, "out"))
}

/// Evaluates the rate conditions of a regime given as JSON
/// (`{"c":..,"alpha":..,"gamma":..,"lambda_exponent":..}`) and stores a JSON
/// report in `*out`, to be released with [`aglq_string_free`].
///
/// # Safety
/// `regime_json` must be a nul-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aglq_check_conditions(regime_json: *const c_char, out: *mut *mut c_char) -> AglqStatus {
    guard(|| {
        if regime_json.is_null() {
            return Err(null("regime_json"));
        }
        let text = CStr::from_ptr(regime_json)
            .to_str()
            .map_err(|_| Failure(AglqStatus::Data, "regime_json is not UTF-8".into()))?;
        let regime: RegimeSpec = serde_json::from_str(text).map_err(Error::from)?;
        let report = check_conditions(&regime)?;
        let json = serde_json::to_string(&report).map_err(Error::from)?;
        write(out, to_c_string(json), "out")
    })
}

// ---- design ------------------------------------------------------------

/// Opaque grouped design matrix.
pub struct AglqDesign(GroupedDesign);

/// Builds a design from a row-major `n x r` matrix and `p` group sizes
/// summing to `r`.
///
/// # Safety
/// `x` must hold `n * r` values and `group_sizes` `p` values; `out` must be
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aglq_design_new(
    x: *const f64,
    n: usize,
    r: usize,
    group_sizes: *const usize,
    p: usize,
    out: *mut *mut AglqDesign,
) -> AglqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n.checked_mul(r).ok_or_else(|| Failure(AglqStatus::InvalidSpec, "n * r overflows".into()))?;
        let values = input(x, len, "x")?;
        let sizes = input(group_sizes, p, "group_sizes")?;
        let matrix = DMatrix::from_row_slice(n, r, values);
        let design = GroupedDesign::new(matrix, GroupSpec::new(sizes.to_vec())?)?;
        *out = Box::into_raw(Box::new(AglqDesign(design)));
        Ok(())
    })
}

/// # Safety
/// `design` must come from [`aglq_design_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn aglq_design_free(design: *mut AglqDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// # Safety
/// `design` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_design_rows(design: *const AglqDesign) -> usize {
    design.as_ref().map_or(0, |d| d.0.n())
}

/// # Safety
/// `design` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_design_columns(design: *const AglqDesign) -> usize {
    design.as_ref().map_or(0, |d| d.0.r())
}

/// # Safety
/// `design` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_design_groups(design: *const AglqDesign) -> usize {
    design.as_ref().map_or(0, |d| d.0.p())
}

// ---- estimation --------------------------------------------------------

/// Estimator settings. Start from [`aglq_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AglqOptions {
    /// Asymmetry index in (0, 1); NaN estimates it from the response.
    pub tau: f64,
    /// Estimate tau on the raw response instead of the standardized one.
    pub tau_raw: bool,
    /// Loss exponent, >= 1.
    pub q: f64,
    /// Adaptive-weight exponent, > 0.
    pub gamma: f64,
    /// Penalty level; NaN uses `n^(-1/2 - gamma/4)`.
    pub lambda: f64,
    /// Weight cap; NaN pins zero pilot groups instead.
    pub weight_cap: f64,
    pub max_iter: usize,
    pub tol_kkt: f64,
    /// Also compute standard errors of the active coefficients.
    pub std_errors: bool,
}

#[no_mangle]
pub extern "C" fn aglq_options_default() -> AglqOptions {
    let solver = SolverOptions::default();
    AglqOptions {
        tau: 0.5,
        tau_raw: false,
        q: 2.0,
        gamma: 1.0,
        lambda: f64::NAN,
        weight_cap: f64::NAN,
        max_iter: solver.max_iter,
        tol_kkt: solver.tol_kkt,
        std_errors: true,
    }
}

/// Opaque result of one adaptive fit.
pub struct AglqFit {
    fit: FitResult,
    pilot_converged: bool,
    tau: f64,
    lambda: f64,
    std_errors: Option<Vec<f64>>,
}

fn estimate(design: &GroupedDesign, y: &[f64], opts: &AglqOptions) -> Result<AglqFit, Failure> {
    if y.len() != design.n() {
        return Err(Error::DimensionMismatch {
            what: "response",
            expected: design.n(),
            found: y.len(),
        }
        .into());
    }
    let y = DVector::from_column_slice(y);
    let tau = if opts.tau.is_nan() {
        let scale = if opts.tau_raw { TauScale::Raw } else { TauScale::Standardized };
        estimate_tau_with(y.as_slice(), scale)?
    } else {
        opts.tau
    };
    let spec = LossSpec::new(tau, opts.q)?;
    let solver = SolverOptions {
        max_iter: opts.max_iter,
        tol_kkt: opts.tol_kkt,
        ..SolverOptions::default()
    };
    let lambda = if opts.lambda.is_nan() {
        tuning::lambda_schedule(design.n(), opts.gamma, Schedule::FixedP)?
    } else {
        opts.lambda
    };
    let cap = (!opts.weight_cap.is_nan()).then_some(opts.weight_cap);

    let pilot = fit_unpenalized(design, &y, &spec, &solver)?;
    let weights = adaptive_weights(&pilot.beta, opts.gamma, cap)?;
    let pen = PenaltySpec::new(lambda, opts.gamma, weights, cap.is_some())?;
    let fit = fit_penalized(design, &y, &spec, &pen, &solver, Some(&pilot.beta))?;
    let std_errors = if opts.std_errors && !fit.active.is_empty() {
        let cov = sandwich_covariance(design, &y, &fit, &spec)?;
        Some((0..design.r()).map(|k| cov.std_error_of(k).unwrap_or(f64::NAN)).collect())
    } else {
        None
    };
    Ok(AglqFit {
        fit,
        pilot_converged: pilot.converged,
        tau,
        lambda,
        std_errors,
    })
}

/// Pilot fit, adaptive weights and the penalized fit. A fit that hits the
/// iteration limit is still returned; check [`aglq_fit_converged`].
///
/// # Safety
/// `design` must be a live handle, `y` must hold `n` values, `opts` may be
/// null for the defaults and `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit(
    design: *const AglqDesign,
    y: *const f64,
    n: usize,
    opts: *const AglqOptions,
    out: *mut *mut AglqFit,
) -> AglqStatus {
    guard(|| {
        let design = design.as_ref().ok_or_else(|| null("design"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let y = input(y, n, "y")?;
        let opts = opts.as_ref().copied().unwrap_or_else(|| aglq_options_default());
        let fit = estimate(&design.0, y, &opts)?;
        *out = Box::into_raw(Box::new(fit));
        Ok(())
    })
}

/// # Safety
/// `fit` must come from [`aglq_fit`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_free(fit: *mut AglqFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Number of coefficients `r`.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_len(fit: *const AglqFit) -> usize {
    fit.as_ref().map_or(0, |f| f.fit.beta.as_slice().len())
}

/// Number of selected groups.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_active_len(fit: *const AglqFit) -> usize {
    fit.as_ref().map_or(0, |f| f.fit.active.len())
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_converged(fit: *const AglqFit) -> bool {
    fit.as_ref().is_some_and(|f| f.fit.converged)
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_pilot_converged(fit: *const AglqFit) -> bool {
    fit.as_ref().is_some_and(|f| f.pilot_converged)
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_iterations(fit: *const AglqFit) -> usize {
    fit.as_ref().map_or(0, |f| f.fit.iterations)
}

/// Objective, KKT residual, tau and lambda; NaN for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_objective(fit: *const AglqFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.fit.objective)
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_kkt_residual(fit: *const AglqFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.fit.kkt_residual)
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_tau(fit: *const AglqFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.tau)
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_lambda(fit: *const AglqFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.lambda)
}

/// Copies the `r` coefficients into `out`.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_coefficients(fit: *const AglqFit, out: *mut f64, len: usize) -> AglqStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        write_slice(out, len, fit.fit.beta.as_slice())
    })
}

/// Copies the 0-based indices of the selected groups into `out`.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_active(fit: *const AglqFit, out: *mut usize, len: usize) -> AglqStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        write_slice(out, len, fit.fit.active.indices())
    })
}

/// Copies `r` standard errors into `out`; NaN for inactive columns.
/// Fails with `EmptyActiveSet` when nothing was selected or standard errors
/// were not requested.
///
/// # Safety
/// `fit` must be a live handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn aglq_fit_std_errors(fit: *const AglqFit, out: *mut f64, len: usize) -> AglqStatus {
    guard(|| {
        let fit = fit.as_ref().ok_or_else(|| null("fit"))?;
        let se = fit.std_errors.as_deref().ok_or_else(|| {
            Failure(AglqStatus::EmptyActiveSet, "no standard errors: empty active set or not requested".into())
        })?;
        write_slice(out, len, se)
    })
}
