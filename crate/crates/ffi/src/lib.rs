//! C interface to the neckflow toolkit.
//!
//! Handles are opaque pointers created and destroyed through this interface;
//! every function returns an [`NfStatus`] and writes results through out
//! pointers. String outputs are heap strings that must be released with
//! `nf_string_free`. On failure, `nf_last_error` returns a thread-local
//! description of the most recent error.

use neckflow::config::RunConfig;
use neckflow::fields::{AuxFields, FieldId, RigidMode};
use neckflow::geometry::{Inclusion, NeckGeometry, Region};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum NfStatus {
    Ok = 0,
    InvalidArgument = 1,
    ConfigError = 2,
    DomainError = 3,
    NumericError = 4,
    IoError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(cleaned).unwrap());
}

fn status_of(err: &neckflow::Error) -> NfStatus {
    match err {
        neckflow::Error::Config(_) => NfStatus::ConfigError,
        neckflow::Error::Domain(_) => NfStatus::DomainError,
        neckflow::Error::Io(_) | neckflow::Error::Json(_) => NfStatus::IoError,
        _ => NfStatus::NumericError,
    }
}

/// Description of the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

pub struct NfGeometry {
    inner: NeckGeometry,
}

pub struct NfFields {
    inner: AuxFields,
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, NfStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(NfStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        NfStatus::InvalidArgument
    })
}

/// Builds a geometry from the JSON run-configuration document (the same
/// schema the CLI accepts); only the `geometry` block is used.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_from_json(
    json: *const c_char,
    out: *mut *mut NfGeometry,
) -> NfStatus {
    if out.is_null() {
        set_error("null out pointer");
        return NfStatus::InvalidArgument;
    }
    let text = match read_str(json) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match RunConfig::from_json(text).and_then(|cfg| cfg.geometry()) {
        Ok(geom) => {
            *out = Box::into_raw(Box::new(NfGeometry { inner: geom }));
            NfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `geom` must come from `nf_geometry_from_json` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nf_geometry_free(geom: *mut NfGeometry) {
    if !geom.is_null() {
        drop(Box::from_raw(geom));
    }
}

/// Gap width delta(x1) = eps + h1 + h2.
///
/// # Safety
/// `geom` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn nf_delta(geom: *const NfGeometry, x1: f64, out: *mut f64) -> NfStatus {
    let (Some(g), false) = (geom.as_ref(), out.is_null()) else {
        set_error("null pointer argument");
        return NfStatus::InvalidArgument;
    };
    match g.inner.delta(x1) {
        Ok(v) => {
            *out = v;
            NfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Region codes: 1 inside upper inclusion, 2 inside lower inclusion,
/// 3 inner neck fluid (|x1| < R), 4 outer neck fluid (R <= |x1| < 2R),
/// 5 outer fluid, 6 outside the container.
#[no_mangle]
pub unsafe extern "C" fn nf_classify(
    geom: *const NfGeometry,
    x: f64,
    y: f64,
    out: *mut i32,
) -> NfStatus {
    let (Some(g), false) = (geom.as_ref(), out.is_null()) else {
        set_error("null pointer argument");
        return NfStatus::InvalidArgument;
    };
    *out = match g.inner.classify([x, y]) {
        Region::InsideD1 => 1,
        Region::InsideD2 => 2,
        Region::NeckFluid(neckflow::geometry::NeckZone::Inner) => 3,
        Region::NeckFluid(neckflow::geometry::NeckZone::Outer) => 4,
        Region::OuterFluid => 5,
        Region::OutsideContainer => 6,
    };
    NfStatus::Ok
}

/// Builds the six-field auxiliary evaluator (quadratic profile only).
///
/// # Safety
/// Pointer contract as in `nf_geometry_from_json`.
#[no_mangle]
pub unsafe extern "C" fn nf_fields_new(
    geom: *const NfGeometry,
    out: *mut *mut NfFields,
) -> NfStatus {
    let (Some(g), false) = (geom.as_ref(), out.is_null()) else {
        set_error("null pointer argument");
        return NfStatus::InvalidArgument;
    };
    match AuxFields::new(&g.inner) {
        Ok(f) => {
            *out = Box::into_raw(Box::new(NfFields { inner: f }));
            NfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `fields` must come from `nf_fields_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn nf_fields_free(fields: *mut NfFields) {
    if !fields.is_null() {
        drop(Box::from_raw(fields));
    }
}

/// Pointwise evaluation of one auxiliary velocity/pressure pair.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct NfFieldEval {
    pub velocity: [f64; 2],
    pub pressure: f64,
    /// Row-major du_i/dx_j.
    pub velocity_gradient: [f64; 4],
    /// Per component: dxx, dxy, dyy.
    pub velocity_hessian: [f64; 6],
    pub pressure_gradient: [f64; 2],
    pub residual: [f64; 2],
    pub divergence: f64,
}

/// Evaluates field (inclusion, mode) at a fluid point. `inclusion` is 1 for
/// the upper body, 2 for the lower; `mode` is 1 (x-translation),
/// 2 (y-translation) or 3 (rotation).
///
/// # Safety
/// Pointer contract as above.
#[no_mangle]
pub unsafe extern "C" fn nf_fields_eval(
    fields: *const NfFields,
    inclusion: i32,
    mode: i32,
    x: f64,
    y: f64,
    out: *mut NfFieldEval,
) -> NfStatus {
    let (Some(f), false) = (fields.as_ref(), out.is_null()) else {
        set_error("null pointer argument");
        return NfStatus::InvalidArgument;
    };
    let inc = match inclusion {
        1 => Inclusion::Upper,
        2 => Inclusion::Lower,
        _ => {
            set_error("inclusion must be 1 or 2");
            return NfStatus::InvalidArgument;
        }
    };
    let mode = match mode {
        1 => RigidMode::TranslateX,
        2 => RigidMode::TranslateY,
        3 => RigidMode::Rotate,
        _ => {
            set_error("mode must be 1, 2 or 3");
            return NfStatus::InvalidArgument;
        }
    };
    match f.inner.eval(FieldId { inclusion: inc, mode }, [x, y]) {
        Ok(ev) => {
            let g = ev.velocity_gradient;
            let h = ev.velocity_hessian;
            *out = NfFieldEval {
                velocity: ev.velocity,
                pressure: ev.pressure,
                velocity_gradient: [g[0][0], g[0][1], g[1][0], g[1][1]],
                velocity_hessian: [
                    h[0][0][0],
                    h[0][0][1],
                    h[0][1][1],
                    h[1][0][0],
                    h[1][0][1],
                    h[1][1][1],
                ],
                pressure_gradient: ev.pressure_gradient,
                residual: ev.residual,
                divergence: ev.divergence,
            };
            NfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

fn to_cstring_ptr(s: String) -> *mut c_char {
    let cleaned: String = s.chars().filter(|&c| c != '\0').collect();
    CString::new(cleaned).unwrap().into_raw()
}

/// Runs the field identity suite and returns the JSON report.
///
/// # Safety
/// Pointer contract as above; free the string with `nf_string_free`.
#[no_mangle]
pub unsafe extern "C" fn nf_fields_check_json(
    geom: *const NfGeometry,
    samples: usize,
    out_json: *mut *mut c_char,
) -> NfStatus {
    let (Some(g), false) = (geom.as_ref(), out_json.is_null()) else {
        set_error("null pointer argument");
        return NfStatus::InvalidArgument;
    };
    let fields = match AuxFields::new(&g.inner) {
        Ok(f) => f,
        Err(e) => {
            set_error(&e.to_string());
            return status_of(&e);
        }
    };
    let rep = neckflow::fields::run_field_suite(&fields, samples.max(1000));
    match serde_json::to_string_pretty(&rep) {
        Ok(json) => {
            *out_json = to_cstring_ptr(json);
            NfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            NfStatus::IoError
        }
    }
}

/// Runs a full gap-width sweep from a JSON configuration and returns the
/// sweep CSV and the verdict JSON.
///
/// # Safety
/// Pointer contract as above; free both strings with `nf_string_free`.
#[no_mangle]
pub unsafe extern "C" fn nf_run_sweep_json(
    config_json: *const c_char,
    quick: bool,
    out_csv: *mut *mut c_char,
    out_verdicts: *mut *mut c_char,
) -> NfStatus {
    if out_csv.is_null() || out_verdicts.is_null() {
        set_error("null out pointer");
        return NfStatus::InvalidArgument;
    }
    let text = match read_str(config_json) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let run = || -> neckflow::Result<(String, String)> {
        let cfg = RunConfig::from_json(text)?;
        let mut eps_list = cfg.eps_list.clone();
        if quick {
            eps_list.truncate(3);
        }
        if eps_list.len() < 2 {
            return Err(neckflow::Error::Config("eps_list too short".into()));
        }
        let base = cfg.geometry()?;
        let datum = cfg.datum()?;
        let mesh = cfg.sweep_mesh();
        let report = neckflow::analysis::run_sweep(&base, datum, &eps_list, &mesh)?;
        let csv = neckflow::report::sweep_csv(&report.records);
        let mut verdicts = report.verdicts.clone();
        verdicts.extend(neckflow::analysis::scaling_verdicts(&report.records));
        if datum.is_point_odd() {
            verdicts.extend(neckflow::analysis::symmetry_verdicts(&report.records));
        }
        let file = neckflow::report::VerdictFile {
            rates: &report.rates,
            criteria: &verdicts,
            all_pass: neckflow::report::verdicts_pass(&verdicts),
        };
        Ok((csv, serde_json::to_string_pretty(&file)?))
    };
    match run() {
        Ok((csv, verdicts)) => {
            *out_csv = to_cstring_ptr(csv);
            *out_verdicts = to_cstring_ptr(verdicts);
            NfStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }
}

/// Releases a string returned by this interface.
///
/// # Safety
/// `s` must originate from this library and be freed exactly once.
#[no_mangle]
pub unsafe extern "C" fn nf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
