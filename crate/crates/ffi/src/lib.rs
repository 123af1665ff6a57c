//! C ABI for `opo-sim`.
//!
//! Every fallible function returns an [`OpoStatus`]; on failure the message
//! is available from [`opo_last_error_message`] on the same thread. Objects
//! are opaque handles created by `*_new`/producer functions and released
//! with the matching `*_free`. Strings returned to the caller are released
//! with [`opo_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use opo_sim::config::Config;
use opo_sim::ensemble::{compare_series, run_ensemble, Observable, ObservableSeries};
use opo_sim::io::{series_from_csv, series_to_csv};
use opo_sim::model::{critical_pump, semiclassical_steady_state};
use opo_sim::noise::{draw_sigma, optimal_sigma_params, RngStream, SigmaParams};
use opo_sim::oracle::oracle_series;
use opo_sim::{Branch, Error, ModelParams, PhasePoint};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Unsupported = 3,
    Contract = 4,
    Config = 5,
    Diverged = 6,
    Truncation = 7,
    NoConvergence = 8,
    Hermiticity = 9,
    Io = 10,
    Utf8 = 11,
    Panic = 12,
}

impl From<&Error> for OpoStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) => OpoStatus::InvalidParameter,
            Error::Unsupported(_) => OpoStatus::Unsupported,
            Error::Contract(_) => OpoStatus::Contract,
            Error::Config(_) => OpoStatus::Config,
            Error::Diverged | Error::AllDiverged { .. } => OpoStatus::Diverged,
            Error::Truncation { .. } => OpoStatus::Truncation,
            Error::NoConvergence { .. } => OpoStatus::NoConvergence,
            Error::Hermiticity(_) => OpoStatus::Hermiticity,
            Error::Io(_) => OpoStatus::Io,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: OpoStatus, msg: impl Into<String>) -> OpoStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F>(f: F) -> OpoStatus
where
    F: FnOnce() -> Result<(), OpoStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OpoStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(OpoStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> OpoStatus {
    let s = OpoStatus::from(&e);
    fail(s, e.to_string())
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, OpoStatus> {
    // SAFETY: the caller passes either null or a pointer to a live T.
    unsafe { p.as_ref() }.ok_or_else(|| fail(OpoStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, OpoStatus> {
    // SAFETY: the caller passes either null or a pointer to writable T.
    unsafe { p.as_mut() }.ok_or_else(|| fail(OpoStatus::NullPointer, format!("{what} is null")))
}

fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, OpoStatus> {
    if p.is_null() {
        return Err(fail(OpoStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated by contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|e| fail(OpoStatus::Utf8, format!("{what}: {e}")))
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn opo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn opo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn opo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OpoModel {
    pub kappa: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub epsilon_re: f64,
    pub epsilon_im: f64,
}

impl OpoModel {
    fn params(&self) -> Result<ModelParams, OpoStatus> {
        ModelParams::new(
            self.kappa,
            self.gamma1,
            self.gamma2,
            Complex64::new(self.epsilon_re, self.epsilon_im),
        )
        .map_err(lib_err)
    }
}

/// (α, α†, β, β†) as interleaved real/imaginary parts.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OpoPhasePoint {
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub alpha_dag_re: f64,
    pub alpha_dag_im: f64,
    pub beta_re: f64,
    pub beta_im: f64,
    pub beta_dag_re: f64,
    pub beta_dag_im: f64,
}

impl From<PhasePoint> for OpoPhasePoint {
    fn from(x: PhasePoint) -> Self {
        OpoPhasePoint {
            alpha_re: x.alpha.re,
            alpha_im: x.alpha.im,
            alpha_dag_re: x.alpha_dag.re,
            alpha_dag_im: x.alpha_dag.im,
            beta_re: x.beta.re,
            beta_im: x.beta.im,
            beta_dag_re: x.beta_dag.re,
            beta_dag_im: x.beta_dag.im,
        }
    }
}

/// Checks the model parameters.
#[no_mangle]
pub extern "C" fn opo_model_validate(model: *const OpoModel) -> OpoStatus {
    guard(|| non_null(model, "model")?.params().map(|_| ()))
}

/// ε_c = γ₁γ₂/κ
#[no_mangle]
pub extern "C" fn opo_critical_pump(model: *const OpoModel, out: *mut f64) -> OpoStatus {
    guard(|| {
        let p = non_null(model, "model")?.params()?;
        *out_ptr(out, "out")? = critical_pump(&p);
        Ok(())
    })
}

/// Semiclassical steady state; `branch` > 0 selects α > 0, < 0 the mirror
/// image. Below threshold both give the trivial solution.
#[no_mangle]
pub extern "C" fn opo_steady_state(model: *const OpoModel, branch: c_int, out: *mut OpoPhasePoint) -> OpoStatus {
    guard(|| {
        let p = non_null(model, "model")?.params()?;
        let b = if branch >= 0 { Branch::Positive } else { Branch::Negative };
        let x = semiclassical_steady_state(&p, b).map_err(lib_err)?;
        *out_ptr(out, "out")? = x.into();
        Ok(())
    })
}

/// Seeded source of σ noise tuples.
pub struct OpoSigmaSampler {
    params: SigmaParams,
    stream: RngStream,
}

/// Sampler with the closed-form optimal parameters for (κ, χ), drawing from
/// stream `stream_id` of `seed`.
#[no_mangle]
pub extern "C" fn opo_sigma_sampler_new(
    kappa: f64,
    chi: f64,
    seed: u64,
    stream_id: u64,
    out: *mut *mut OpoSigmaSampler,
) -> OpoStatus {
    guard(|| {
        let slot = out_ptr(out, "out")?;
        *slot = ptr::null_mut();
        let params = optimal_sigma_params(kappa, chi).map_err(lib_err)?;
        let s = OpoSigmaSampler {
            params,
            stream: RngStream::new(seed, stream_id),
        };
        *slot = Box::into_raw(Box::new(s));
        Ok(())
    })
}

/// Draws one (σ₁, σ₁†, σ₂, σ₂†) tuple into `out[0..8]` as re/im pairs.
///
/// # Safety
/// `out` must point to at least 8 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn opo_sigma_sampler_draw(sampler: *mut OpoSigmaSampler, out: *mut f64) -> OpoStatus {
    guard(|| {
        let s = out_ptr(sampler, "sampler")?;
        if out.is_null() {
            return Err(fail(OpoStatus::NullPointer, "out is null"));
        }
        let d = draw_sigma(&s.params, &mut s.stream).as_array();
        let buf = std::slice::from_raw_parts_mut(out, 8);
        for (k, z) in d.iter().enumerate() {
            buf[2 * k] = z.re;
            buf[2 * k + 1] = z.im;
        }
        Ok(())
    })
}

/// # Safety
/// `sampler` must be null or come from [`opo_sigma_sampler_new`].
#[no_mangle]
pub unsafe extern "C" fn opo_sigma_sampler_free(sampler: *mut OpoSigmaSampler) {
    if !sampler.is_null() {
        drop(Box::from_raw(sampler));
    }
}

/// Parsed run configuration.
pub struct OpoConfig {
    inner: Config,
}

/// Parses a TOML configuration and applies `n_overrides` strings of the
/// form `section.key=value`. `overrides` may be null when `n_overrides` is 0.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `overrides` must point to
/// `n_overrides` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn opo_config_from_toml(
    toml: *const c_char,
    overrides: *const *const c_char,
    n_overrides: usize,
    out: *mut *mut OpoConfig,
) -> OpoStatus {
    guard(|| {
        let slot = out_ptr(out, "out")?;
        *slot = ptr::null_mut();
        let text = c_str(toml, "toml")?;
        let mut ov = Vec::with_capacity(n_overrides);
        if n_overrides > 0 {
            if overrides.is_null() {
                return Err(fail(OpoStatus::NullPointer, "overrides is null"));
            }
            for &p in std::slice::from_raw_parts(overrides, n_overrides) {
                ov.push(c_str(p, "override")?.to_string());
            }
        }
        let inner = Config::from_toml_str(text, &ov).map_err(lib_err)?.resolved();
        inner.run_config().map_err(lib_err)?;
        *slot = Box::into_raw(Box::new(OpoConfig { inner }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or come from [`opo_config_from_toml`].
#[no_mangle]
pub unsafe extern "C" fn opo_config_free(cfg: *mut OpoConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Time series of the ensemble observables.
pub struct OpoSeries {
    inner: ObservableSeries,
}

fn emit_series(out: *mut *mut OpoSeries, s: ObservableSeries) -> Result<(), OpoStatus> {
    *out_ptr(out, "out")? = Box::into_raw(Box::new(OpoSeries { inner: s }));
    Ok(())
}

fn clear_out<T>(out: *mut *mut T) {
    // SAFETY: checked for null; the caller provides a writable slot.
    if let Some(slot) = unsafe { out.as_mut() } {
        *slot = ptr::null_mut();
    }
}

/// Runs the configured trajectory ensemble. A run in which every
/// trajectory diverged still yields its partial series
/// (see [`opo_series_truncated`]).
#[no_mangle]
pub extern "C" fn opo_simulate(cfg: *const OpoConfig, out: *mut *mut OpoSeries) -> OpoStatus {
    clear_out(out);
    guard(|| {
        let c = non_null(cfg, "cfg")?;
        let rc = c.inner.run_config().map_err(lib_err)?;
        let s = run_ensemble(&rc).map_err(lib_err)?;
        emit_series(out, s)
    })
}

/// Master-equation reference on the configured output grid.
#[no_mangle]
pub extern "C" fn opo_oracle(cfg: *const OpoConfig, out: *mut *mut OpoSeries) -> OpoStatus {
    clear_out(out);
    guard(|| {
        let c = &non_null(cfg, "cfg")?.inner;
        let model = c.model_params().map_err(lib_err)?;
        let ocfg = c.oracle_config().map_err(lib_err)?;
        let init = c.initial_state();
        let interval = c.run.dt * c.run.record_every as f64;
        let s = oracle_series(&model, init.alpha0, init.beta0, &ocfg, c.run.t_end, interval)
            .map_err(lib_err)?;
        emit_series(out, s)
    })
}

/// Parses a series CSV.
///
/// # Safety
/// `csv` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn opo_series_from_csv(csv: *const c_char, out: *mut *mut OpoSeries) -> OpoStatus {
    clear_out(out);
    guard(|| {
        let text = c_str(csv, "csv")?;
        let s = series_from_csv(text, "series").map_err(lib_err)?;
        emit_series(out, s)
    })
}

/// Renders a series as CSV; release the result with [`opo_string_free`].
#[no_mangle]
pub extern "C" fn opo_series_to_csv(series: *const OpoSeries, out: *mut *mut c_char) -> OpoStatus {
    clear_out(out);
    guard(|| {
        let s = non_null(series, "series")?;
        let c = CString::new(series_to_csv(&s.inner))
            .map_err(|e| fail(OpoStatus::Contract, e.to_string()))?;
        *out_ptr(out, "out")? = c.into_raw();
        Ok(())
    })
}

/// Number of grid points; 0 for null.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opo_series_len(series: *const OpoSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.len())
}

/// 1 when every trajectory diverged before the end of the grid.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn opo_series_truncated(series: *const OpoSeries) -> c_int {
    series.as_ref().map_or(0, |s| s.inner.truncated as c_int)
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpoObservable {
    /// ⟨α + α†⟩
    Xa = 0,
    /// ⟨α†α⟩
    Na = 1,
    /// ⟨β + β†⟩
    Xb = 2,
}

impl From<OpoObservable> for Observable {
    fn from(o: OpoObservable) -> Self {
        match o {
            OpoObservable::Xa => Observable::Xa,
            OpoObservable::Na => Observable::Na,
            OpoObservable::Xb => Observable::Xb,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpoColumn {
    Time = 0,
    Mean = 1,
    Stderr = 2,
    NEffective = 3,
    DivergedFraction = 4,
}

/// Copies one column into `buf` (capacity `len`, at least the series
/// length). `observable` selects the quantity for `Mean` and `Stderr`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn opo_series_copy(
    series: *const OpoSeries,
    column: OpoColumn,
    observable: OpoObservable,
    buf: *mut f64,
    len: usize,
) -> OpoStatus {
    guard(|| {
        let s = &non_null(series, "series")?.inner;
        let n = s.len();
        if n > 0 && buf.is_null() {
            return Err(fail(OpoStatus::NullPointer, "buf is null"));
        }
        if len < n {
            return Err(fail(OpoStatus::Contract, format!("buffer holds {len} values, series has {n}")));
        }
        if n == 0 {
            return Ok(());
        }
        let dst = std::slice::from_raw_parts_mut(buf, n);
        let o = Observable::from(observable);
        match column {
            OpoColumn::Time => dst.copy_from_slice(&s.times),
            OpoColumn::Mean => dst.copy_from_slice(s.mean(o)),
            OpoColumn::Stderr => dst.copy_from_slice(s.stderr(o)),
            OpoColumn::NEffective => {
                for (d, &v) in dst.iter_mut().zip(&s.n_effective) {
                    *d = v as f64;
                }
            }
            OpoColumn::DivergedFraction => dst.copy_from_slice(&s.diverged_fraction),
        }
        Ok(())
    })
}

/// max_t |a − b|/√(se_a² + se_b²) and the time where it occurs.
#[no_mangle]
pub extern "C" fn opo_compare_series(
    a: *const OpoSeries,
    b: *const OpoSeries,
    observable: OpoObservable,
    max_deviation: *mut f64,
    t_at_max: *mut f64,
) -> OpoStatus {
    guard(|| {
        let (a, b) = (non_null(a, "a")?, non_null(b, "b")?);
        let c = compare_series(&a.inner, &b.inner, observable.into()).map_err(lib_err)?;
        *out_ptr(max_deviation, "max_deviation")? = c.max_deviation;
        if !t_at_max.is_null() {
            *out_ptr(t_at_max, "t_at_max")? = c.t_at_max;
        }
        Ok(())
    })
}

/// # Safety
/// `series` must be null or a handle produced by this library.
#[no_mangle]
pub unsafe extern "C" fn opo_series_free(series: *mut OpoSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}
