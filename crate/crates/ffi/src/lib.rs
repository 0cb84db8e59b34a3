//! C interface to `spinmem`.
//!
//! Every fallible function returns a [`SpinmemStatus`]; on failure the message
//! is available from [`spinmem_last_error`] on the same thread. Objects are
//! opaque handles created by `*_new`/`*_from_*` and released with `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use spinmem::config::parse_config;
use spinmem::field_profile::DriveAmplitudeRange;
use spinmem::runner::{self, Command, Figure, Overrides};
use spinmem::memory::{optimize_detuning, DetuningChoice, MemoryScenario, Method, PreparedScenario, SpinLine};
use spinmem::spectral::{DiscretizationScheme, DressedDensity};
use spinmem::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinmemStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad parameter, domain violation or configuration error.
    InvalidArgument = 2,
    /// A numerical routine failed or hit a pole.
    Numerical = 3,
    Io = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinmemMethod {
    Eigen = 0,
    Bromwich = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinmemScheme {
    Quantile = 0,
    Grid = 1,
}

/// A storage scenario under construction.
pub struct SpinmemScenario {
    inner: MemoryScenario,
}

/// A scenario with its ensemble discretised.
pub struct SpinmemPrepared {
    inner: PreparedScenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SpinmemStatus {
    match e {
        Error::Validation { .. } | Error::Domain(_) | Error::Config(_) => SpinmemStatus::InvalidArgument,
        Error::Pole { .. } | Error::Numerical(_) => SpinmemStatus::Numerical,
        Error::Io(_) => SpinmemStatus::Io,
    }
}

struct Fail(SpinmemStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SpinmemStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SpinmemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpinmemStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SpinmemStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failure on this thread, or NULL. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn spinmem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spinmem_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Undriven Lorentzian scenario with unit width, optimised detuning and
/// default discretisation. `omega` is the bare collective coupling.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spinmem_scenario_new(
    omega: f64,
    kappa: f64,
    gamma: f64,
    out: *mut *mut SpinmemScenario,
) -> SpinmemStatus {
    guard(|| {
        let inner = MemoryScenario::new(SpinLine::Lorentzian, omega, kappa, gamma);
        inner.validate()?;
        write(out, Box::into_raw(Box::new(SpinmemScenario { inner })), "out")
    })
}

/// Scenario from configuration text (NUL-terminated UTF-8).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spinmem_scenario_from_config(
    text: *const c_char,
    out: *mut *mut SpinmemScenario,
) -> SpinmemStatus {
    guard(|| {
        let text = utf8(text, "text")?;
        let inner = parse_config(text)?.memory_scenario()?;
        write(out, Box::into_raw(Box::new(SpinmemScenario { inner })), "out")
    })
}

/// # Safety
/// `scenario` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn spinmem_scenario_free(scenario: *mut SpinmemScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Applies `edit` and re-validates, restoring the previous state on failure.
unsafe fn edit_scenario(h: *mut SpinmemScenario, edit: impl FnOnce(&mut MemoryScenario) -> Result<(), Fail>) -> SpinmemStatus {
    guard(|| {
        let s = deref_mut(h, "scenario")?;
        let mut next = s.inner.clone();
        edit(&mut next)?;
        next.validate()?;
        s.inner = next;
        Ok(())
    })
}

/// Switches to dressed spins with drive amplitudes uniform on `[b_min, b_max]`.
///
/// # Safety
/// `scenario` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn spinmem_scenario_set_drive(h: *mut SpinmemScenario, b_min: f64, b_max: f64) -> SpinmemStatus {
    edit_scenario(h, |s| {
        s.line = SpinLine::Driven(DriveAmplitudeRange::new(b_min, b_max)?);
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn spinmem_scenario_set_ensemble(
    h: *mut SpinmemScenario,
    n_spins: usize,
    scheme: SpinmemScheme,
) -> SpinmemStatus {
    edit_scenario(h, |s| {
        s.n_spins = n_spins;
        s.scheme = match scheme {
            SpinmemScheme::Quantile => DiscretizationScheme::Quantile,
            SpinmemScheme::Grid => DiscretizationScheme::Grid,
        };
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn spinmem_scenario_set_method(h: *mut SpinmemScenario, method: SpinmemMethod) -> SpinmemStatus {
    edit_scenario(h, |s| {
        s.method = to_method(method);
        Ok(())
    })
}

/// Fixes the cavity detuning instead of optimising it.
///
/// # Safety
/// `scenario` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn spinmem_scenario_set_detuning(h: *mut SpinmemScenario, delta: f64) -> SpinmemStatus {
    edit_scenario(h, |s| {
        s.detuning = DetuningChoice::Fixed(delta);
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn spinmem_scenario_set_times(
    h: *mut SpinmemScenario,
    horizon: f64,
    dt: f64,
    target_time: f64,
) -> SpinmemStatus {
    edit_scenario(h, |s| {
        s.horizon = horizon;
        s.dt = dt;
        s.target_time = target_time;
        Ok(())
    })
}

/// Copies out the bare coupling, collective coupling actually simulated, and spin count.
///
/// # Safety
/// All pointers must be valid; output pointers may be NULL to skip a value.
#[no_mangle]
pub unsafe extern "C" fn spinmem_scenario_describe(
    h: *const SpinmemScenario,
    omega: *mut f64,
    coupling: *mut f64,
    n_spins: *mut usize,
) -> SpinmemStatus {
    guard(|| {
        let s = &deref(h, "scenario")?.inner;
        if !omega.is_null() {
            omega.write(s.omega);
        }
        if !coupling.is_null() {
            coupling.write(s.coupling());
        }
        if !n_spins.is_null() {
            n_spins.write(s.n_spins);
        }
        Ok(())
    })
}

fn to_method(m: SpinmemMethod) -> Method {
    match m {
        SpinmemMethod::Eigen => Method::Eigen,
        SpinmemMethod::Bromwich => Method::Bromwich,
    }
}

/// Discretises the ensemble.
///
/// # Safety
/// `scenario` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spinmem_prepare(h: *const SpinmemScenario, out: *mut *mut SpinmemPrepared) -> SpinmemStatus {
    guard(|| {
        let inner = deref(h, "scenario")?.inner.prepare()?;
        write(out, Box::into_raw(Box::new(SpinmemPrepared { inner })), "out")
    })
}

/// # Safety
/// `prepared` must come from this library and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn spinmem_prepared_free(prepared: *mut SpinmemPrepared) {
    if !prepared.is_null() {
        drop(Box::from_raw(prepared));
    }
}

/// `F(t) = |f(t)|²` at cavity detuning `delta`, with the scenario's method.
///
/// # Safety
/// `prepared` must be a valid handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spinmem_fidelity_at(
    h: *const SpinmemPrepared,
    delta: f64,
    t: f64,
    out: *mut f64,
) -> SpinmemStatus {
    guard(|| {
        let f = deref(h, "prepared")?.inner.fidelity_at(delta, t)?;
        write(out, f, "out")
    })
}

/// Complex overlap `f(t)` at `len` times, written to `re` and `im`.
///
/// # Safety
/// `times`, `re` and `im` must each point to `len` values.
#[no_mangle]
pub unsafe extern "C" fn spinmem_overlap(
    h: *const SpinmemPrepared,
    delta: f64,
    method: SpinmemMethod,
    times: *const f64,
    len: usize,
    re: *mut f64,
    im: *mut f64,
) -> SpinmemStatus {
    guard(|| {
        let p = &deref(h, "prepared")?.inner;
        if len == 0 {
            return Ok(());
        }
        if times.is_null() || re.is_null() || im.is_null() {
            return Err(null("times/re/im"));
        }
        let times = std::slice::from_raw_parts(times, len);
        let f = p.overlap(delta, times, to_method(method))?;
        for (k, z) in f.iter().enumerate() {
            re.add(k).write(z.re);
            im.add(k).write(z.im);
        }
        Ok(())
    })
}

/// Detuning maximising `F(target_time)` on `[lo, hi]`; pass `lo >= hi` for
/// the default bracket `[0, 20Ω]`.
///
/// # Safety
/// `prepared` must be a valid handle; `delta` and `fidelity` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn spinmem_optimize_detuning(
    h: *const SpinmemPrepared,
    target_time: f64,
    lo: f64,
    hi: f64,
    delta: *mut f64,
    fidelity: *mut f64,
) -> SpinmemStatus {
    guard(|| {
        let p = &deref(h, "prepared")?.inner;
        if delta.is_null() || fidelity.is_null() {
            return Err(null("delta/fidelity"));
        }
        let bracket = (lo < hi).then_some((lo, hi));
        let opt = optimize_detuning(p, target_time, bracket)?;
        delta.write(opt.delta);
        fidelity.write(opt.fidelity);
        Ok(())
    })
}

/// Density of dressed frequencies for a Lorentzian line of FWHM `width` and
/// drive amplitudes uniform on `[b_min, b_max]`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spinmem_dressed_pdf(
    width: f64,
    b_min: f64,
    b_max: f64,
    omega_bar: f64,
    out: *mut f64,
) -> SpinmemStatus {
    guard(|| {
        let d = DressedDensity::new(width, DriveAmplitudeRange::new(b_min, b_max)?)?;
        write(out, spinmem::spectral::dressed_pdf(&d, omega_bar)?, "out")
    })
}

/// Cumulative distribution matching [`spinmem_dressed_pdf`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spinmem_dressed_cdf(
    width: f64,
    b_min: f64,
    b_max: f64,
    omega_bar: f64,
    out: *mut f64,
) -> SpinmemStatus {
    guard(|| {
        let d = DressedDensity::new(width, DriveAmplitudeRange::new(b_min, b_max)?)?;
        write(out, spinmem::spectral::dressed_cdf(&d, omega_bar)?, "out")
    })
}

unsafe fn utf8<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(SpinmemStatus::InvalidArgument, format!("`{what}` is not UTF-8: {e}")))
}

/// Runs a CLI command (`spectrum`, `transmission`, `rabi`, `memory`,
/// `optimize`, `fig2`, `fig3` or `fig4`) on configuration text and writes its
/// files, including `manifest.json`, into `out_dir`.
///
/// # Safety
/// All arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn spinmem_run(
    command: *const c_char,
    config_text: *const c_char,
    out_dir: *const c_char,
) -> SpinmemStatus {
    guard(|| {
        let command = match utf8(command, "command")? {
            "spectrum" => Command::Spectrum,
            "transmission" => Command::Transmission,
            "rabi" => Command::Rabi,
            "memory" => Command::Memory,
            "optimize" => Command::Optimize,
            other => Command::Reproduce(other.parse::<Figure>()?),
        };
        let text = utf8(config_text, "config_text")?;
        let out = utf8(out_dir, "out_dir")?;
        runner::run(command, text, &Overrides::default(), Path::new(out))?;
        Ok(())
    })
}
