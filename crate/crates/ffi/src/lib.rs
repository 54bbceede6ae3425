//! C ABI over the `wmprop` estimators.
//!
//! Every fallible function returns a [`WmStatus`] and writes results through
//! out-pointers. On failure the message is available from
//! [`wm_last_error_message`] on the same thread. Handles are opaque and must
//! be released with the matching `*_free` function; freeing null is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use wmprop::estimators::{
    estimate_all, estimate_ini, estimate_rfn, fit_density_ratio, DensityRatioHistogram,
    EstimatorConfig, OptEstimator,
};
use wmprop::mle_bias::{limit_solution, regularized_mle};
use wmprop::verifier::{pivotal_sequence, VerifierKey};
use wmprop::{Ecdf, Error, GreenRedParams, RandomSeed, Scheme};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmStatus {
    Ok = 0,
    NullPointer = 1,
    EmptyDataset = 2,
    Domain = 3,
    Degenerate = 4,
    NonIdentifiable = 5,
    Convergence = 6,
    Parse = 7,
    Io = 8,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmScheme {
    Gumbel = 0,
    Inverse = 1,
    GreenRed = 2,
}

/// Estimator settings. `deltas` may be null when `n_deltas` is 0, in which
/// case the default thresholds are used.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct WmEstimatorConfig {
    pub deltas: *const f64,
    pub n_deltas: usize,
    pub eps_min: f64,
    pub bins: usize,
    pub mc_parity: bool,
    pub mc_n: usize,
    pub mc_seed: u64,
}

pub struct WmEcdf(Ecdf);

pub struct WmDensityRatio(DensityRatioHistogram);

pub struct WmEstimator {
    data: Ecdf,
    wm_ref: Ecdf,
    g_hat: DensityRatioHistogram,
    cfg: EstimatorConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(WmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::EmptyDataset => WmStatus::EmptyDataset,
            Error::Domain(_) => WmStatus::Domain,
            Error::DegenerateDenominator(_) => WmStatus::Degenerate,
            Error::NonIdentifiable(_) => WmStatus::NonIdentifiable,
            Error::Convergence { .. } => WmStatus::Convergence,
            Error::Parse { .. } => WmStatus::Parse,
            Error::Io(_) => WmStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(WmStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            WmStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn input<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `out` must be null or writable.
unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// # Safety
/// `h` must be null or point to a live `T`.
unsafe fn handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| null(what))
}

unsafe fn free<T>(h: *mut T) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

static DEFAULT_DELTAS: [f64; 3] = [0.1, 0.01, 0.001];

#[no_mangle]
pub extern "C" fn wm_estimator_config_default() -> WmEstimatorConfig {
    let d = EstimatorConfig::default();
    WmEstimatorConfig {
        deltas: DEFAULT_DELTAS.as_ptr(),
        n_deltas: DEFAULT_DELTAS.len(),
        eps_min: d.eps_min,
        bins: d.bins,
        mc_parity: d.mc_parity,
        mc_n: d.mc_n,
        mc_seed: d.mc_seed.0,
    }
}

/// # Safety
/// `samples` must be valid for `n` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_ecdf_new(
    samples: *const f64,
    n: usize,
    out: *mut *mut WmEcdf,
) -> WmStatus {
    guard(|| {
        let xs = input(samples, n, "samples")?;
        let e = Ecdf::new(xs)?;
        write(out, Box::into_raw(Box::new(WmEcdf(e))), "out")
    })
}

/// # Safety
/// `ecdf` must come from [`wm_ecdf_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_ecdf_query(ecdf: *const WmEcdf, x: f64, out: *mut f64) -> WmStatus {
    guard(|| {
        let e = handle(ecdf, "ecdf")?;
        write(out, e.0.query(x).get(), "out")
    })
}

/// # Safety
/// `ecdf` must be null or come from [`wm_ecdf_new`].
#[no_mangle]
pub unsafe extern "C" fn wm_ecdf_len(ecdf: *const WmEcdf) -> usize {
    ecdf.as_ref().map_or(0, |e| e.0.len())
}

/// # Safety
/// `ecdf` must be null or come from [`wm_ecdf_new`], and not be used again.
#[no_mangle]
pub unsafe extern "C" fn wm_ecdf_free(ecdf: *mut WmEcdf) {
    free(ecdf)
}

/// Histogram density of watermarked samples on `[0, 1]` with `bins` bins.
///
/// # Safety
/// `samples` must be valid for `n` reads; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_density_ratio_fit(
    samples: *const f64,
    n: usize,
    bins: usize,
    out: *mut *mut WmDensityRatio,
) -> WmStatus {
    guard(|| {
        let xs = input(samples, n, "samples")?;
        let h = fit_density_ratio(xs, bins)?;
        write(out, Box::into_raw(Box::new(WmDensityRatio(h))), "out")
    })
}

/// # Safety
/// `ratio` must come from [`wm_density_ratio_fit`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_density_ratio_eval(
    ratio: *const WmDensityRatio,
    x: f64,
    out: *mut f64,
) -> WmStatus {
    guard(|| {
        let h = handle(ratio, "ratio")?;
        if !(0.0..=1.0).contains(&x) {
            return Err(Failure(WmStatus::Domain, format!("x = {x} outside [0, 1]")));
        }
        write(out, h.0.eval(x), "out")
    })
}

/// # Safety
/// `ratio` must be null or come from [`wm_density_ratio_fit`], and not be
/// used again.
#[no_mangle]
pub unsafe extern "C" fn wm_density_ratio_free(ratio: *mut WmDensityRatio) {
    free(ratio)
}

unsafe fn config_from(cfg: *const WmEstimatorConfig) -> Result<EstimatorConfig, Failure> {
    let Some(c) = cfg.as_ref() else {
        return Ok(EstimatorConfig::default());
    };
    let deltas = if c.n_deltas == 0 {
        DEFAULT_DELTAS.to_vec()
    } else {
        input(c.deltas, c.n_deltas, "deltas")?.to_vec()
    };
    let out = EstimatorConfig {
        deltas,
        eps_min: c.eps_min,
        bins: c.bins,
        mc_parity: c.mc_parity,
        mc_n: c.mc_n,
        mc_seed: RandomSeed(c.mc_seed),
    };
    out.validate()?;
    Ok(out)
}

/// Copies the data and the watermarked reference and fits the density
/// ratio. `cfg` may be null for the defaults.
///
/// # Safety
/// `data` and `reference` must be valid for `n_data` and `n_reference`
/// reads; `cfg` must be null or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_estimator_new(
    data: *const f64,
    n_data: usize,
    reference: *const f64,
    n_reference: usize,
    cfg: *const WmEstimatorConfig,
    out: *mut *mut WmEstimator,
) -> WmStatus {
    guard(|| {
        let cfg = config_from(cfg)?;
        let data = Ecdf::new(input(data, n_data, "data")?)?;
        let wm_ref = Ecdf::new(input(reference, n_reference, "reference")?)?;
        let g_hat = fit_density_ratio(wm_ref.samples(), cfg.bins)?;
        let est = WmEstimator {
            data,
            wm_ref,
            g_hat,
            cfg,
        };
        write(out, Box::into_raw(Box::new(est)), "out")
    })
}

/// # Safety
/// `est` must come from [`wm_estimator_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_estimator_ini(
    est: *const WmEstimator,
    delta: f64,
    out: *mut f64,
) -> WmStatus {
    guard(|| {
        let e = handle(est, "estimator")?;
        write(out, estimate_ini(&e.data, delta)?, "out")
    })
}

/// # Safety
/// `est` must come from [`wm_estimator_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_estimator_rfn(
    est: *const WmEstimator,
    delta: f64,
    out: *mut f64,
) -> WmStatus {
    guard(|| {
        let e = handle(est, "estimator")?;
        write(out, estimate_rfn(&e.data, &e.wm_ref, delta)?, "out")
    })
}

/// Fixed-point estimate. `residual` may be null.
///
/// # Safety
/// `est` must come from [`wm_estimator_new`]; `eps` must be writable and
/// `residual` null or writable.
#[no_mangle]
pub unsafe extern "C" fn wm_estimator_opt(
    est: *const WmEstimator,
    eps: *mut f64,
    residual: *mut f64,
) -> WmStatus {
    guard(|| {
        let e = handle(est, "estimator")?;
        let r = OptEstimator::new(&e.data, &e.g_hat, &e.wm_ref, &e.cfg)?.solve()?;
        write(eps, r.eps, "eps")?;
        if !residual.is_null() {
            residual.write(r.residual);
        }
        Ok(())
    })
}

/// Full report as a JSON string, released with [`wm_string_free`].
///
/// # Safety
/// `est` must come from [`wm_estimator_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_estimator_report_json(
    est: *const WmEstimator,
    out: *mut *mut c_char,
) -> WmStatus {
    guard(|| {
        let e = handle(est, "estimator")?;
        let report = estimate_all(e.data.samples(), e.wm_ref.samples(), &e.cfg)?;
        let json =
            serde_json::to_string(&report).map_err(|err| Failure(WmStatus::Io, err.to_string()))?;
        let c = CString::new(json).map_err(|err| Failure(WmStatus::Io, err.to_string()))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `est` must be null or come from [`wm_estimator_new`], and not be used
/// again.
#[no_mangle]
pub unsafe extern "C" fn wm_estimator_free(est: *mut WmEstimator) {
    free(est)
}

/// # Safety
/// `s` must be null or a string returned by this library, and not be used
/// again.
#[no_mangle]
pub unsafe extern "C" fn wm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Large-sample limit `(eps, mu)` of the regularized binary MLE.
///
/// # Safety
/// `eps` and `mu` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_limit_solution(
    e_hat: f64,
    gamma: f64,
    eps: *mut f64,
    mu: *mut f64,
) -> WmStatus {
    guard(|| {
        let (e, m) = limit_solution(e_hat, gamma)?;
        write(eps, e, "eps")?;
        write(mu, m, "mu")
    })
}

/// # Safety
/// `eps` and `mu` must be writable; `no_evidence` null or writable.
#[no_mangle]
pub unsafe extern "C" fn wm_regularized_mle(
    e_hat: f64,
    gamma: f64,
    lambda: f64,
    eps: *mut f64,
    mu: *mut f64,
    no_evidence: *mut bool,
) -> WmStatus {
    guard(|| {
        let fit = regularized_mle(e_hat, gamma, lambda)?;
        write(eps, fit.eps, "eps")?;
        write(mu, fit.mu, "mu")?;
        if !no_evidence.is_null() {
            no_evidence.write(fit.no_evidence);
        }
        Ok(())
    })
}

/// Post-PIT pivotal statistics of `tokens` under a 32-byte key with context
/// window `m`. Writes `n_tokens - m` values to `out` when `capacity`
/// allows; `out_len` always receives the required length. `gamma` and
/// `gr_delta` are read only for the green-red scheme.
///
/// # Safety
/// `tokens` must be valid for `n_tokens` reads, `key` for 32 reads, `out`
/// for `capacity` writes (or null when `capacity` is 0), and `out_len`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn wm_pivotal_sequence(
    tokens: *const u32,
    n_tokens: usize,
    vocab: usize,
    key: *const u8,
    m: usize,
    scheme: WmScheme,
    gamma: f64,
    gr_delta: f64,
    out: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> WmStatus {
    guard(|| {
        let tokens: Vec<usize> = input(tokens, n_tokens, "tokens")?
            .iter()
            .map(|&t| t as usize)
            .collect();
        let key_bytes: [u8; 32] = input(key, 32, "key")?.try_into().expect("32 bytes");
        let key = VerifierKey::new(key_bytes, m)?;
        let scheme = match scheme {
            WmScheme::Gumbel => Scheme::GumbelMax,
            WmScheme::Inverse => Scheme::InverseTransform,
            WmScheme::GreenRed => Scheme::GreenRedList(GreenRedParams::new(gamma, gr_delta)?),
        };
        let ys = pivotal_sequence(&tokens, vocab, &key, &scheme)?;
        write(out_len, ys.len(), "out_len")?;
        if capacity < ys.len() {
            return Err(Failure(
                WmStatus::BufferTooSmall,
                format!("need room for {} values, got {capacity}", ys.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(ys.as_ptr(), out, ys.len());
        Ok(())
    })
}
