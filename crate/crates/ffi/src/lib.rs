//! C ABI over the `extremeq` library.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns an
//! [`ExqStatus`]; on failure [`exq_last_error`] holds a message for the
//! calling thread. Results are written through out-pointers only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use extremeq::pinball::{fit_quantile_model, ModelKind, QuantileModel, RegressionData, TrainConfig};
use extremeq::{Error, Sample, StudyDist, TailModel};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExqStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    InsufficientData = 3,
    DegenerateSample = 4,
    Convergence = 5,
    Aggregation = 6,
    InvalidString = 7,
    Panic = 8,
}

/// Model families accepted by [`exq_quantile_model_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExqModelKind {
    Constant = 0,
    Linear = 1,
    Mlp = 2,
}

/// Finite real sample.
pub struct ExqSample(Sample);

/// Fitted peaks-over-threshold model.
pub struct ExqTailModel(TailModel);

/// Fitted conditional quantile model.
pub struct ExqQuantileModel(QuantileModel);

/// Plain-data view of a tail model.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ExqTailSummary {
    pub u: f64,
    pub zeta_u: f64,
    pub sigma: f64,
    pub xi: f64,
    pub log_likelihood: f64,
    pub n_exc: usize,
    pub n: usize,
    pub boundary: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> ExqStatus {
    match err {
        Error::Domain(_) => ExqStatus::Domain,
        Error::InsufficientData { .. } => ExqStatus::InsufficientData,
        Error::DegenerateSample(_) => ExqStatus::DegenerateSample,
        Error::Convergence { .. } => ExqStatus::Convergence,
        Error::Aggregation { .. } => ExqStatus::Aggregation,
    }
}

struct Fail(ExqStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(ExqStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ExqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ExqStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ExqStatus::Panic
        }
    }
}

unsafe fn slice<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(v);
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn exq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn exq_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Copies `len` values into a new sample.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exq_sample_new(values: *const f64, len: usize, out: *mut *mut ExqSample) -> ExqStatus {
    guard(|| {
        let v = slice(values, len, "values")?.to_vec();
        let s = Sample::new(v)?;
        write(out, Box::into_raw(Box::new(ExqSample(s))))
    })
}

/// # Safety
/// `sample` must be null or a handle from [`exq_sample_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn exq_sample_free(sample: *mut ExqSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Number of observations, or 0 for a null handle.
///
/// # Safety
/// `sample` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn exq_sample_len(sample: *const ExqSample) -> usize {
    sample.as_ref().map_or(0, |s| s.0.len())
}

/// Left-continuous empirical `tau`-quantile.
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exq_empirical_quantile(sample: *const ExqSample, tau: f64, out: *mut f64) -> ExqStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        write(out, extremeq::empirical_quantile(&s.0, tau)?)
    })
}

/// Fits a GP tail above the empirical `level`-quantile (0 uses the minimum).
///
/// # Safety
/// `sample` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exq_fit_tail(sample: *const ExqSample, level: f64, out: *mut *mut ExqTailModel) -> ExqStatus {
    guard(|| {
        let s = deref(sample, "sample")?;
        let m = extremeq::fit_tail(&s.0, level)?;
        write(out, Box::into_raw(Box::new(ExqTailModel(m))))
    })
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exq_tail_model_summary(model: *const ExqTailModel, out: *mut ExqTailSummary) -> ExqStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        write(
            out,
            ExqTailSummary {
                u: m.u,
                zeta_u: m.zeta_u,
                sigma: m.gp.sigma,
                xi: m.gp.xi,
                log_likelihood: m.log_likelihood,
                n_exc: m.n_exc,
                n: m.n,
                boundary: m.boundary,
            },
        )
    })
}

/// Extrapolated `tau`-quantile of a fitted tail.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exq_tail_quantile(model: *const ExqTailModel, tau: f64, out: *mut f64) -> ExqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, m.0.quantile(tau)?)
    })
}

/// # Safety
/// `model` must be null or a handle from [`exq_fit_tail`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn exq_tail_model_free(model: *mut ExqTailModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// POT extrapolation from explicit parameters.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exq_gp_quantile(u: f64, zeta_u: f64, sigma: f64, xi: f64, tau: f64, out: *mut f64) -> ExqStatus {
    guard(|| {
        let gp = extremeq::GpParams::new(sigma, xi)?;
        write(out, extremeq::estimators::tail_quantile(u, zeta_u, gp, tau)?)
    })
}

/// True quantile of a named study distribution (`normal01`, `gamma4`,
/// `lognormal01`, `frechet3`, `gp(σ,ξ)`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exq_true_quantile(name: *const c_char, tau: f64, out: *mut f64) -> ExqStatus {
    guard(|| {
        if name.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|e| Fail(ExqStatus::InvalidString, format!("name is not UTF-8: {e}")))?;
        let dist: StudyDist = name.parse()?;
        write(out, dist.true_quantile(tau)?)
    })
}

/// Fits a pinball-loss model to `n` rows of `q` covariates (row-major `x`)
/// and responses `y`. `q` may be 0 for an unconditional constant fit.
///
/// # Safety
/// `x` must hold `n * q` doubles, `y` must hold `n`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exq_quantile_model_fit(
    x: *const f64,
    n: usize,
    q: usize,
    y: *const f64,
    tau: f64,
    kind: ExqModelKind,
    seed: u64,
    out: *mut *mut ExqQuantileModel,
) -> ExqStatus {
    guard(|| {
        let len = n
            .checked_mul(q)
            .ok_or_else(|| Fail(ExqStatus::Domain, "n * q overflows".into()))?;
        let xs = slice(x, len, "x")?;
        let ys = slice(y, n, "y")?.to_vec();
        let data = if q == 0 {
            RegressionData::unconditional(ys)?
        } else {
            RegressionData::new(xs.chunks(q).map(<[f64]>::to_vec).collect(), ys)?
        };
        let kind = match kind {
            ExqModelKind::Constant => ModelKind::Constant,
            ExqModelKind::Linear => ModelKind::Linear,
            ExqModelKind::Mlp => ModelKind::Mlp,
        };
        let cfg = TrainConfig {
            seed,
            ..Default::default()
        };
        let m = fit_quantile_model(&data, tau, kind, &cfg)?;
        write(out, Box::into_raw(Box::new(ExqQuantileModel(m))))
    })
}

/// Prediction at one covariate vector of length `q`.
///
/// # Safety
/// `model` must be a live handle, `x` must hold `q` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn exq_quantile_model_predict(
    model: *const ExqQuantileModel,
    x: *const f64,
    q: usize,
    out: *mut f64,
) -> ExqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, m.0.predict(slice(x, q, "x")?)?)
    })
}

/// Mean pinball loss on the training data.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn exq_quantile_model_train_loss(model: *const ExqQuantileModel, out: *mut f64) -> ExqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, m.0.train_loss)
    })
}

/// # Safety
/// `model` must be null or a handle from [`exq_quantile_model_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn exq_quantile_model_free(model: *mut ExqQuantileModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
