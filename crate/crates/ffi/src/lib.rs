//! C interface to the droplet toolkit.
//!
//! Every fallible function returns a [`DropletStatus`]; on failure the
//! message is available from [`droplet_last_error`] on the same thread until
//! the next call. Handles are opaque and must be released with their `_free`
//! function. Strings returned to the caller are released with
//! [`droplet_string_free`].
//!
//! The header `include/droplet.h` is generated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use droplet_core::asymptotics::{synthesize_measurement, ExpansionEvaluator, MeasurementTrace};
use droplet_core::error::Error;
use droplet_core::experiments::run::run_scenario;
use droplet_core::experiments::scenario::Scenario;
use droplet_core::field::{AnalyticSource, Domain, SourceModel};
use droplet_core::inversion::{choose_truncation, riesz_coefficients, KernelScaling, Mollifier, RieszCoefficients};
use droplet_core::spectrum::{modes_l0, Droplet, EigenMode};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropletStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    OutsideDomain = 4,
    NoConvergence = 5,
    Singular = 6,
    Io = 7,
    Utf8 = 8,
    Panic = 9,
}

/// How the mollifier's derivative kernel is scaled.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropletKernelScaling {
    Trapezoid = 0,
    UnitMoment = 1,
}

/// Incident field `V(x, t)`. Called concurrently from several threads, so it
/// must be thread-safe; `user` is passed through unchanged.
pub type DropletFieldFn = extern "C" fn(user: *mut c_void, x: *const f64, t: f64) -> f64;

/// Droplet `z + aB` in a medium with speed `c0`, and its Riesz parameter `b`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DropletGeometry {
    pub center: [f64; 3],
    pub radius: f64,
    pub riesz_b: f64,
    pub c0: f64,
}

/// A user source: `V` from a callback, supported in the ball
/// `|x − center| < radius` and vanishing for `t > support_end`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DropletSource {
    pub field: DropletFieldFn,
    pub user: *mut c_void,
    pub center: [f64; 3],
    pub radius: f64,
    pub support_end: f64,
}

/// A parsed scenario.
pub struct DropletScenario(Scenario);

/// Truncated expansion `W_N` at one receiver.
pub struct DropletExpansion {
    model: Arc<dyn SourceModel>,
    modes: Vec<EigenMode>,
    droplet: Droplet,
    receiver: [f64; 3],
    step: f64,
}

/// Riesz coefficients of `V(z, ·)` recovered from one trace.
pub struct DropletRiesz(RieszCoefficients);

/// Discrete mollified differentiation.
pub struct DropletMollifier(Mollifier);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DropletStatus {
    match e {
        Error::InvalidArgument(_) => DropletStatus::InvalidArgument,
        Error::OutsideDomain(_) => DropletStatus::OutsideDomain,
        Error::NoConvergence(_) => DropletStatus::NoConvergence,
        Error::Singular(_) => DropletStatus::Singular,
        Error::Config(_) => DropletStatus::Config,
        Error::Io { .. } => DropletStatus::Io,
    }
}

struct Failure(DropletStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(DropletStatus::NullPointer, format!("{name} is null"))
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DropletStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DropletStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
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
            DropletStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(DropletStatus::Utf8, format!("{name}: {e}")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn droplet_of(g: &DropletGeometry) -> Result<Droplet, Failure> {
    Ok(Droplet::new(g.center, g.radius, g.riesz_b, g.c0)?)
}

fn source_of(s: &DropletSource, c0: f64) -> Result<Arc<dyn SourceModel>, Failure> {
    if !(s.radius > 0.0) || !(s.support_end > 0.0) {
        return Err(Failure(
            DropletStatus::InvalidArgument,
            "source radius and support end must be positive".into(),
        ));
    }
    let f = s.field;
    let user = s.user as usize;
    Ok(Arc::new(AnalyticSource {
        v: Arc::new(move |x, t| if t < 0.0 { 0.0 } else { f(user as *mut c_void, x.as_ptr(), t) }),
        v_tt: None,
        laplacian: None,
        domain: Domain::Ball {
            center: s.center,
            radius: s.radius,
        },
        c0,
        support_end: Some(s.support_end),
        label: "callback source".into(),
    }))
}

/// Message of the last failed call on this thread, or null. Owned by the
/// library; valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn droplet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn droplet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn droplet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a TOML scenario. The result is validated by
/// [`droplet_scenario_validate`] or when run.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn droplet_scenario_parse(toml: *const c_char, out: *mut *mut DropletScenario) -> DropletStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(toml, "toml")?;
        *out = Box::into_raw(Box::new(DropletScenario(Scenario::from_toml_str(text)?)));
        Ok(())
    })
}

/// Checks a scenario; warnings are returned as a JSON array of strings.
///
/// # Safety
/// `scenario` must be a live handle; `warnings_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn droplet_scenario_validate(
    scenario: *const DropletScenario,
    warnings_json: *mut *mut c_char,
) -> DropletStatus {
    guard(|| {
        let out = out_arg(warnings_json, "warnings_json")?;
        *out = ptr::null_mut();
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let warnings = s.0.validate()?;
        let json = serde_json::to_string(&warnings).expect("strings serialize");
        *out = CString::new(json).expect("no NUL in JSON").into_raw();
        Ok(())
    })
}

/// Runs a scenario, writing its files under `out_dir`, and returns the
/// report as JSON.
///
/// # Safety
/// `scenario` must be a live handle, `out_dir` a NUL-terminated path and
/// `report_json` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn droplet_scenario_run(
    scenario: *const DropletScenario,
    out_dir: *const c_char,
    report_json: *mut *mut c_char,
) -> DropletStatus {
    guard(|| {
        let out = out_arg(report_json, "report_json")?;
        *out = ptr::null_mut();
        let s = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let dir = str_arg(out_dir, "out_dir")?;
        let run = run_scenario(&s.0, Path::new(dir))?;
        let json = serde_json::to_string(&run.report).expect("report serializes");
        *out = CString::new(json).expect("no NUL in JSON").into_raw();
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn droplet_scenario_free(scenario: *mut DropletScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Prepares `W_N` for `n_terms` radial modes at `receiver`. Memory
/// integrals use composite Simpson with step at most `step`.
///
/// # Safety
/// `receiver` must point to 3 doubles, `out` must be valid, and the source
/// callback must stay callable until the handle is freed.
#[no_mangle]
pub unsafe extern "C" fn droplet_expansion_new(
    geometry: DropletGeometry,
    source: DropletSource,
    receiver: *const f64,
    n_terms: usize,
    step: f64,
    out: *mut *mut DropletExpansion,
) -> DropletStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let r = slice_arg(receiver, 3, "receiver")?;
        let droplet = droplet_of(&geometry)?;
        let model = source_of(&source, geometry.c0)?;
        let modes = modes_l0(&droplet, n_terms)?;
        let receiver = [r[0], r[1], r[2]];
        // fail now rather than on the first evaluation
        ExpansionEvaluator::new(&modes, &droplet, model.as_ref(), receiver, step)?;
        *out = Box::into_raw(Box::new(DropletExpansion {
            model,
            modes,
            droplet,
            receiver,
            step,
        }));
        Ok(())
    })
}

/// `W_N(x, t)` at the handle's receiver for each of `len` times.
///
/// # Safety
/// `times` and `values` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn droplet_expansion_evaluate(
    expansion: *const DropletExpansion,
    times: *const f64,
    len: usize,
    values: *mut f64,
) -> DropletStatus {
    guard(|| {
        let e = expansion.as_ref().ok_or_else(|| null("expansion"))?;
        let times = slice_arg(times, len, "times")?;
        if len > 0 && values.is_null() {
            return Err(null("values"));
        }
        let eval = ExpansionEvaluator::new(&e.modes, &e.droplet, e.model.as_ref(), e.receiver, e.step)?;
        for (k, &t) in times.iter().enumerate() {
            *values.add(k) = eval.w_n(t, e.modes.len());
        }
        Ok(())
    })
}

/// # Safety
/// `expansion` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn droplet_expansion_free(expansion: *mut DropletExpansion) {
    if !expansion.is_null() {
        drop(Box::from_raw(expansion));
    }
}

/// Simulates the trace `U(x*, t) = V + W_N` on `[t_start, t_start + 2π/b]`
/// at `intervals + 1` uniform samples, written to `samples`.
///
/// # Safety
/// `x_star` must point to 3 doubles and `samples` to `intervals + 1`.
#[no_mangle]
pub unsafe extern "C" fn droplet_synthesize_trace(
    geometry: DropletGeometry,
    source: DropletSource,
    x_star: *const f64,
    t_start: f64,
    intervals: usize,
    n_terms: usize,
    step: f64,
    samples: *mut f64,
) -> DropletStatus {
    guard(|| {
        let x = slice_arg(x_star, 3, "x_star")?;
        if samples.is_null() {
            return Err(null("samples"));
        }
        let droplet = droplet_of(&geometry)?;
        let model = source_of(&source, geometry.c0)?;
        let modes = modes_l0(&droplet, n_terms)?;
        let trace = synthesize_measurement(
            &modes,
            &droplet,
            model.as_ref(),
            [x[0], x[1], x[2]],
            t_start,
            intervals,
            n_terms,
            step,
        )?;
        ptr::copy_nonoverlapping(trace.samples.as_ptr(), samples, trace.samples.len());
        Ok(())
    })
}

/// Recovers the first `n_terms` Riesz coefficients of `V(z, ·)` from a trace
/// sampled uniformly on `[t_start, t_start + 2π/b]`.
///
/// # Safety
/// `x_star` must point to 3 doubles and `samples` to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn droplet_riesz_new(
    geometry: DropletGeometry,
    x_star: *const f64,
    t_start: f64,
    samples: *const f64,
    len: usize,
    n_terms: usize,
    out: *mut *mut DropletRiesz,
) -> DropletStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let x = slice_arg(x_star, 3, "x_star")?;
        let samples = slice_arg(samples, len, "samples")?;
        let droplet = droplet_of(&geometry)?;
        let modes = modes_l0(&droplet, n_terms.max(1))?;
        let duration = 2.0 * std::f64::consts::PI / geometry.riesz_b;
        let trace = MeasurementTrace::new([x[0], x[1], x[2]], t_start, duration, samples.to_vec())?;
        let coeffs = riesz_coefficients(&trace, &droplet, &modes, n_terms)?;
        *out = Box::into_raw(Box::new(DropletRiesz(coeffs)));
        Ok(())
    })
}

/// `V_N(z, t)` for `t ∈ [0, 2π/b]`.
///
/// # Safety
/// `riesz` must be a live handle and `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn droplet_riesz_evaluate(riesz: *const DropletRiesz, t: f64, value: *mut f64) -> DropletStatus {
    guard(|| {
        let r = riesz.as_ref().ok_or_else(|| null("riesz"))?;
        let v = out_arg(value, "value")?;
        *v = droplet_core::inversion::reconstruct_v(&r.0, t)?;
        Ok(())
    })
}

/// # Safety
/// `riesz` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn droplet_riesz_free(riesz: *mut DropletRiesz) {
    if !riesz.is_null() {
        drop(Box::from_raw(riesz));
    }
}

/// Mollifier of radius `epsilon = (n_t + 1)·dtau`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn droplet_mollifier_new(
    epsilon: f64,
    dtau: f64,
    scaling: DropletKernelScaling,
    out: *mut *mut DropletMollifier,
) -> DropletStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scaling = match scaling {
            DropletKernelScaling::Trapezoid => KernelScaling::Trapezoid,
            DropletKernelScaling::UnitMoment => KernelScaling::UnitMoment,
        };
        *out = Box::into_raw(Box::new(DropletMollifier(Mollifier::from_epsilon(epsilon, dtau, scaling)?)));
        Ok(())
    })
}

fn apply(
    m: *const DropletMollifier,
    input: *const f64,
    len: usize,
    output: *mut f64,
    capacity: usize,
    written: *mut usize,
    op: fn(&Mollifier, &[f64]) -> droplet_core::error::Result<Vec<f64>>,
) -> DropletStatus {
    guard(|| unsafe {
        let m = m.as_ref().ok_or_else(|| null("mollifier"))?;
        let written = out_arg(written, "written")?;
        *written = 0;
        let input = slice_arg(input, len, "input")?;
        let result = op(&m.0, input)?;
        if result.len() > capacity {
            return Err(Failure(
                DropletStatus::InvalidArgument,
                format!("output needs {} values, capacity is {capacity}", result.len()),
            ));
        }
        if !result.is_empty() {
            if output.is_null() {
                return Err(null("output"));
            }
            ptr::copy_nonoverlapping(result.as_ptr(), output, result.len());
        }
        *written = result.len();
        Ok(())
    })
}

/// First derivative of uniform samples; the output loses `n_t` samples at
/// each end.
///
/// # Safety
/// `input` must hold `len` doubles, `output` `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn droplet_mollifier_derivative(
    mollifier: *const DropletMollifier,
    input: *const f64,
    len: usize,
    output: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> DropletStatus {
    apply(mollifier, input, len, output, capacity, written, Mollifier::derivative)
}

/// Second derivative of uniform samples; the output loses `2n_t` samples at
/// each end.
///
/// # Safety
/// `input` must hold `len` doubles, `output` `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn droplet_mollifier_second_derivative(
    mollifier: *const DropletMollifier,
    input: *const f64,
    len: usize,
    output: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> DropletStatus {
    apply(mollifier, input, len, output, capacity, written, Mollifier::second_derivative)
}

/// # Safety
/// `mollifier` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn droplet_mollifier_free(mollifier: *mut DropletMollifier) {
    if !mollifier.is_null() {
        drop(Box::from_raw(mollifier));
    }
}

/// Truncation `N` for absolute noise `delta` and radius `a`.
///
/// # Safety
/// `n` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn droplet_choose_truncation(delta: f64, a: f64, n: *mut usize) -> DropletStatus {
    guard(|| {
        let n = out_arg(n, "n")?;
        *n = choose_truncation(delta, a)?.n;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_a_status_with_a_message() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, DropletStatus::Panic);
        let msg = unsafe { CStr::from_ptr(droplet_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic: boom");
        assert_eq!(guard(|| Ok(())), DropletStatus::Ok);
        assert!(droplet_last_error().is_null());
    }

    #[test]
    fn core_errors_map_to_statuses() {
        assert_eq!(status_of(&Error::Config("x".into())), DropletStatus::Config);
        assert_eq!(status_of(&Error::Singular("x".into())), DropletStatus::Singular);
        set_error("a\0b".into());
        let msg = unsafe { CStr::from_ptr(droplet_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "a b");
    }
}
