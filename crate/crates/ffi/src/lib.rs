//! C ABI over the `penstab` command layer.
//!
//! Conventions: opaque handles for parsed models, UTF-8 JSON strings in
//! and out, integer status codes, and a thread-local last-error message.
//! Every returned string is owned by the caller and must be released with
//! [`penstab_string_free`]. Optional scalar parameters use NaN for "not
//! set"; optional pointers use NULL.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use penstab::cli::{
    cmd_analyze, cmd_simulate, cmd_sweep, cmd_synthesize, AnalyzeOptions, ControllerFile, Model,
    ModelFile, SimulateOptions, SweepOptions, SynthesizeOptions,
};
use penstab::sbrl::SweepGrid;
use penstab::Error;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenstabStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// JSON or schema validation failed.
    InvalidInput = 3,
    /// Conditions of the requested procedure are not satisfied.
    MethodFailure = 4,
    /// A numerical routine failed (dichotomy, conditioning, divergence).
    NumericalFailure = 5,
    /// An internal invariant was violated.
    Panic = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(msg: &str) {
    let sanitized: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> PenstabStatus {
    match err {
        Error::Validation(_) | Error::Dimension(_) | Error::Json(_) | Error::Io(_) => {
            PenstabStatus::InvalidInput
        }
        Error::SynthesisConditions { .. } | Error::SearchFailed(_) | Error::SingularJacobian { .. } => {
            PenstabStatus::MethodFailure
        }
        _ => PenstabStatus::NumericalFailure,
    }
}

fn fail(err: Error) -> PenstabStatus {
    set_last_error(&err.to_string());
    status_of(&err)
}

/// Opaque parsed model handle.
pub struct PenstabModel {
    model: Model,
}

fn guarded<F: FnOnce() -> PenstabStatus>(f: F) -> PenstabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            PenstabStatus::Panic
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, PenstabStatus> {
    if ptr.is_null() {
        set_last_error("required string argument is NULL");
        return Err(PenstabStatus::NullArgument);
    }
    // SAFETY: caller guarantees a valid NUL-terminated string.
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(s),
        Err(_) => {
            set_last_error("string argument is not valid UTF-8");
            Err(PenstabStatus::InvalidUtf8)
        }
    }
}

fn string_out(ptr: *mut *mut c_char, text: String) -> PenstabStatus {
    let sanitized: String = text.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    match CString::new(sanitized) {
        Ok(cs) => {
            // SAFETY: ptr checked non-null by callers before use.
            unsafe { *ptr = cs.into_raw() };
            PenstabStatus::Ok
        }
        Err(_) => {
            set_last_error("output contained an interior NUL");
            PenstabStatus::Panic
        }
    }
}

fn opt_f64(x: f64) -> Option<f64> {
    if x.is_nan() {
        None
    } else {
        Some(x)
    }
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn penstab_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn penstab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned through an out-parameter of
/// this library and not yet freed; NULL is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn penstab_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: ownership transfers back per the contract above.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Parse a model JSON document into an opaque handle.
///
/// # Safety
/// `json` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to a location that receives the handle on success.
#[no_mangle]
pub unsafe extern "C" fn penstab_model_parse(
    json: *const c_char,
    out: *mut *mut PenstabModel,
) -> PenstabStatus {
    guarded(|| {
        if out.is_null() {
            set_last_error("output handle pointer is NULL");
            return PenstabStatus::NullArgument;
        }
        let text = match unsafe { cstr_arg(json) } {
            Ok(t) => t,
            Err(status) => return status,
        };
        let model = match ModelFile::from_json(text).and_then(|f| f.into_model()) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        unsafe { *out = Box::into_raw(Box::new(PenstabModel { model })) };
        PenstabStatus::Ok
    })
}

/// Release a model handle.
///
/// # Safety
/// `model` must come from [`penstab_model_parse`] and not be used after
/// this call; NULL is accepted and ignored.
#[no_mangle]
pub unsafe extern "C" fn penstab_model_free(model: *mut PenstabModel) {
    if !model.is_null() {
        // SAFETY: ownership transfers back per the contract above.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of plant states of a parsed model.
///
/// # Safety
/// `model` must be a live handle from [`penstab_model_parse`].
#[no_mangle]
pub unsafe extern "C" fn penstab_model_states(model: *const PenstabModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.model.plant.states()
}

/// Number of nonlinearity channels of a parsed model.
///
/// # Safety
/// `model` must be a live handle from [`penstab_model_parse`].
#[no_mangle]
pub unsafe extern "C" fn penstab_model_channels(model: *const PenstabModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.model.plant.channels()
}

/// Open-loop analysis; writes the JSON report to `report_out`.
/// `lambda` and `tau0` are optional (pass NaN).
///
/// # Safety
/// `model` must be a live handle; `report_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn penstab_analyze(
    model: *const PenstabModel,
    lambda: f64,
    tau0: f64,
    report_out: *mut *mut c_char,
) -> PenstabStatus {
    guarded(|| {
        if model.is_null() || report_out.is_null() {
            set_last_error("model and report_out must be non-NULL");
            return PenstabStatus::NullArgument;
        }
        let model = unsafe { &*model };
        let opts = AnalyzeOptions {
            lambda: opt_f64(lambda),
            tau0: opt_f64(tau0),
            ..AnalyzeOptions::default()
        };
        match cmd_analyze(&model.model, &opts) {
            Ok(report) => string_out(report_out, report.to_json_pretty()),
            Err(e) => fail(e),
        }
    })
}

/// Controller synthesis. `theorem` selects the procedure (3, 4, 5, 6, 7
/// or 9); `tau` may be NULL (use the model's synthesis block); `lambda`
/// and `tau0` are optional (NaN). On success `report_out` receives the
/// JSON report and `controller_out` the controller file document.
///
/// # Safety
/// `model` must be a live handle; `tau` (when non-NULL) must point to
/// `tau_len` doubles; `report_out` and `controller_out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn penstab_synthesize(
    model: *const PenstabModel,
    theorem: u32,
    lambda: f64,
    tau: *const f64,
    tau_len: usize,
    tau0: f64,
    search: bool,
    report_out: *mut *mut c_char,
    controller_out: *mut *mut c_char,
) -> PenstabStatus {
    guarded(|| {
        if model.is_null() || report_out.is_null() || controller_out.is_null() {
            set_last_error("model, report_out and controller_out must be non-NULL");
            return PenstabStatus::NullArgument;
        }
        let model = unsafe { &*model };
        let mut opts = SynthesizeOptions::new(theorem.min(u8::MAX as u32) as u8);
        opts.lambda = opt_f64(lambda);
        opts.tau0 = opt_f64(tau0);
        opts.search = search;
        if !tau.is_null() && tau_len > 0 {
            // SAFETY: caller guarantees tau points to tau_len doubles.
            opts.tau = Some(unsafe { std::slice::from_raw_parts(tau, tau_len) }.to_vec());
        }
        match cmd_synthesize(&model.model, &opts) {
            Ok((report, controller)) => {
                let status = string_out(report_out, report.to_json_pretty());
                if status != PenstabStatus::Ok {
                    return status;
                }
                let status = string_out(controller_out, controller.to_json());
                if status != PenstabStatus::Ok {
                    // release the first allocation on the failure path
                    unsafe { penstab_string_free(*report_out) };
                    unsafe { *report_out = std::ptr::null_mut() };
                }
                status
            }
            Err(e) => fail(e),
        }
    })
}

/// Closed-loop (or open-loop) simulation. `controller_json` may be NULL
/// for the open loop; `x0` may be NULL for the model default. On success
/// `report_out` receives the JSON report and `csv_out` the trajectory
/// table.
///
/// # Safety
/// `model` must be a live handle; `controller_json` (when non-NULL) must
/// be a valid string; `x0` (when non-NULL) must point to `x0_len`
/// doubles; `report_out` and `csv_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn penstab_simulate(
    model: *const PenstabModel,
    controller_json: *const c_char,
    x0: *const f64,
    x0_len: usize,
    t_final: f64,
    dt: f64,
    record_stride: usize,
    shift_test: bool,
    tau0: f64,
    report_out: *mut *mut c_char,
    csv_out: *mut *mut c_char,
) -> PenstabStatus {
    guarded(|| {
        if model.is_null() || report_out.is_null() || csv_out.is_null() {
            set_last_error("model, report_out and csv_out must be non-NULL");
            return PenstabStatus::NullArgument;
        }
        let model = unsafe { &*model };
        let controller = if controller_json.is_null() {
            None
        } else {
            let text = match unsafe { cstr_arg(controller_json) } {
                Ok(t) => t,
                Err(status) => return status,
            };
            match ControllerFile::from_json(text) {
                Ok(c) => Some(c),
                Err(e) => return fail(e),
            }
        };
        let opts = SimulateOptions {
            x0: if x0.is_null() || x0_len == 0 {
                None
            } else {
                // SAFETY: caller guarantees x0 points to x0_len doubles.
                Some(unsafe { std::slice::from_raw_parts(x0, x0_len) }.to_vec())
            },
            t_final: opt_f64(t_final),
            dt: opt_f64(dt),
            record_stride: record_stride.max(1),
            shift_test,
            tau0: opt_f64(tau0),
        };
        match cmd_simulate(&model.model, controller.as_ref(), &opts) {
            Ok((report, csv)) => {
                let status = string_out(report_out, report.to_json_pretty());
                if status != PenstabStatus::Ok {
                    return status;
                }
                let status = string_out(csv_out, csv);
                if status != PenstabStatus::Ok {
                    unsafe { penstab_string_free(*report_out) };
                    unsafe { *report_out = std::ptr::null_mut() };
                }
                status
            }
            Err(e) => fail(e),
        }
    })
}

/// Frequency-sweep table ("omega,peak_sv,margin" CSV). `controller_json`
/// may be NULL; `lambda` is optional (NaN = model default or 0).
///
/// # Safety
/// `model` must be a live handle; `controller_json` (when non-NULL) must
/// be a valid string; `csv_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn penstab_sweep(
    model: *const PenstabModel,
    controller_json: *const c_char,
    lambda: f64,
    omega_min: f64,
    omega_max: f64,
    points: usize,
    csv_out: *mut *mut c_char,
) -> PenstabStatus {
    guarded(|| {
        if model.is_null() || csv_out.is_null() {
            set_last_error("model and csv_out must be non-NULL");
            return PenstabStatus::NullArgument;
        }
        let model = unsafe { &*model };
        let controller = if controller_json.is_null() {
            None
        } else {
            let text = match unsafe { cstr_arg(controller_json) } {
                Ok(t) => t,
                Err(status) => return status,
            };
            match ControllerFile::from_json(text) {
                Ok(c) => Some(c),
                Err(e) => return fail(e),
            }
        };
        let mut grid = SweepGrid::default();
        if omega_min.is_finite() && omega_min > 0.0 {
            grid.omega_min = omega_min;
        }
        if omega_max.is_finite() && omega_max > 0.0 {
            grid.omega_max = omega_max;
        }
        if points > 0 {
            grid.points = points;
        }
        let opts = SweepOptions { lambda: opt_f64(lambda), grid };
        match cmd_sweep(&model.model, controller.as_ref(), &opts) {
            Ok(csv) => string_out(csv_out, csv),
            Err(e) => fail(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    const SCALAR_MODEL: &str = r#"{
        "name": "scalar",
        "matrices": {
            "A": [[-1]], "B1": [[1]], "B2": [[1]],
            "C1": [[1]], "C2": [[1]], "D12": [[1]], "D21": [[1]]
        },
        "nonlinearities": [
            {"kind": "scaled_sine", "amplitude": 1, "period": 6.283185307179586, "mu": 1}
        ]
    }"#;

    fn cstring(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn parse(json: &str) -> *mut PenstabModel {
        let mut handle: *mut PenstabModel = ptr::null_mut();
        let status = unsafe { penstab_model_parse(cstring(json).as_ptr(), &mut handle) };
        assert_eq!(status, PenstabStatus::Ok);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn parse_analyze_free() {
        let handle = parse(SCALAR_MODEL);
        assert_eq!(unsafe { penstab_model_states(handle) }, 1);
        assert_eq!(unsafe { penstab_model_channels(handle) }, 1);

        let mut report: *mut c_char = ptr::null_mut();
        let status = unsafe { penstab_analyze(handle, f64::NAN, f64::NAN, &mut report) };
        assert_eq!(status, PenstabStatus::Ok);
        let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap();
        let v: serde_json::Value = serde_json::from_str(text).unwrap();
        assert_eq!(v["command"], "analyze");
        unsafe { penstab_string_free(report) };
        unsafe { penstab_model_free(handle) };
    }

    #[test]
    fn null_and_malformed_inputs() {
        let mut handle: *mut PenstabModel = ptr::null_mut();
        let status = unsafe { penstab_model_parse(ptr::null(), &mut handle) };
        assert_eq!(status, PenstabStatus::NullArgument);

        let status = unsafe { penstab_model_parse(cstring("{").as_ptr(), &mut handle) };
        assert_eq!(status, PenstabStatus::InvalidInput);
        let msg = unsafe { CStr::from_ptr(penstab_last_error_message()) };
        assert!(!msg.to_bytes().is_empty());
    }

    #[test]
    fn simulate_via_abi() {
        let handle = parse(SCALAR_MODEL);
        let mut report: *mut c_char = ptr::null_mut();
        let mut csv: *mut c_char = ptr::null_mut();
        let x0 = [1.0_f64];
        let status = unsafe {
            penstab_simulate(
                handle,
                ptr::null(),
                x0.as_ptr(),
                1,
                1.0,
                1e-3,
                10,
                false,
                f64::NAN,
                &mut report,
                &mut csv,
            )
        };
        assert_eq!(status, PenstabStatus::Ok);
        let text = unsafe { CStr::from_ptr(csv) }.to_str().unwrap();
        assert!(text.starts_with("t,x1\n"));
        unsafe { penstab_string_free(report) };
        unsafe { penstab_string_free(csv) };
        unsafe { penstab_model_free(handle) };
    }

    #[test]
    fn synthesis_failure_surfaces_conditions() {
        // theorem 9 needs an uncontrollable zero mode; the scalar plant
        // has none, so the call must fail with a method-level status
        let handle = parse(SCALAR_MODEL);
        let mut report: *mut c_char = ptr::null_mut();
        let mut controller: *mut c_char = ptr::null_mut();
        let tau = [1.0_f64];
        let status = unsafe {
            penstab_synthesize(
                handle,
                9,
                0.5,
                tau.as_ptr(),
                1,
                1.0,
                false,
                &mut report,
                &mut controller,
            )
        };
        assert_eq!(status, PenstabStatus::MethodFailure);
        let msg = unsafe { CStr::from_ptr(penstab_last_error_message()) }
            .to_str()
            .unwrap();
        assert!(msg.contains("Assumption 5"), "{msg}");
        unsafe { penstab_model_free(handle) };
    }
}
