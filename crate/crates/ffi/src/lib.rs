//! C ABI for the reluforge library: opaque handles, status codes, and a
//! thread-local last-error message.
//!
//! Conventions:
//! - every function returns an `RfStatus`; outputs go through pointers;
//! - handles (`RfSpec`, `RfCalibration`) are opaque and freed with their
//!   `*_free` function; strings returned through `char**` are freed with
//!   `rf_string_free`;
//! - on any non-`Ok` status, `rf_last_error` returns a message valid until
//!   the next failing call on the same thread.
//!
//! The committed header lives in `include/reluforge.h`; regenerate it with
//! `cbindgen --crate reluforge-ffi --output include/reluforge.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use reluforge::cost::{CostCalibration, Dataset};
use reluforge::network::{self, build_family, Family, InputDims, ScalingMethod};
use reluforge::{accounting, cost, transforms, NetworkSpec};

/// Status code returned by every API function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A document or value failed to parse.
    Parse = 3,
    /// The operation's domain preconditions were violated.
    Domain = 4,
    /// The library panicked; state is unchanged.
    Internal = 5,
}

/// Opaque network handle.
pub struct RfSpec(NetworkSpec);

/// Opaque cost-calibration handle.
pub struct RfCalibration(CostCalibration);

/// Modeled cost of one private inference.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RfCostEstimate {
    pub gc_seconds: f64,
    pub he_seconds: f64,
    pub total_seconds: f64,
    pub storage_bytes: u64,
    /// Nonzero when the FLOP count fell outside the anchor table.
    pub he_extrapolated: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: RfStatus, msg: &str) -> RfStatus {
    set_error(msg);
    status
}

/// Message for the most recent failure on this thread. Valid until the
/// next failing call; never null.
#[no_mangle]
pub extern "C" fn rf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through a `char**` output.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn rf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Frees a spec handle.
///
/// # Safety
/// `spec` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_free(spec: *mut RfSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Frees a calibration handle.
///
/// # Safety
/// `calib` must be a live handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn rf_calibration_free(calib: *mut RfCalibration) {
    if !calib.is_null() {
        drop(Box::from_raw(calib));
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, RfStatus> {
    if ptr.is_null() {
        return Err(fail(RfStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(RfStatus::InvalidUtf8, "string argument is not UTF-8"))
}

fn guarded(f: impl FnOnce() -> RfStatus) -> RfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(RfStatus::Internal, "internal panic"),
    }
}

/// Parses a versioned network JSON document into a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_from_json(
    json: *const c_char,
    out: *mut *mut RfSpec,
) -> RfStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RfStatus::NullPointer, "null output pointer");
        }
        let text = match cstr(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match network::deserialize(text) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(RfSpec(spec)));
                RfStatus::Ok
            }
            Err(e) => fail(RfStatus::Parse, &e.to_string()),
        }
    })
}

/// Serializes a spec to its JSON document. Free the string with
/// `rf_string_free`.
///
/// # Safety
/// `spec` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_to_json(spec: *const RfSpec, out: *mut *mut c_char) -> RfStatus {
    guarded(|| {
        if spec.is_null() || out.is_null() {
            return fail(RfStatus::NullPointer, "null argument");
        }
        let text = network::serialize(&(*spec).0);
        match CString::new(text) {
            Ok(c) => {
                *out = c.into_raw();
                RfStatus::Ok
            }
            Err(_) => fail(RfStatus::Internal, "document contained a NUL byte"),
        }
    })
}

/// Builds a family backbone. `family` is one of "resnet18", "resnet20",
/// "resnet32", "resnet34", "resnet56", "wrn" (then `depth`/`widen` apply).
/// Multipliers `alpha = beta = gamma = 0` select uniform scaling.
///
/// # Safety
/// `family` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn rf_spec_build(
    family: *const c_char,
    m: u32,
    alpha: u32,
    beta: u32,
    gamma: u32,
    depth: u32,
    widen: u32,
    input_h: u32,
    input_w: u32,
    input_c: u32,
    classes: u32,
    out: *mut *mut RfSpec,
) -> RfStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RfStatus::NullPointer, "null output pointer");
        }
        let name = match cstr(family) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let family = match name.to_ascii_lowercase().as_str() {
            "resnet18" => Family::ResNet18,
            "resnet20" => Family::ResNet20,
            "resnet32" => Family::ResNet32,
            "resnet34" => Family::ResNet34,
            "resnet56" => Family::ResNet56,
            "wrn" | "wideresnet" => Family::WideResNet { depth, widen },
            other => return fail(RfStatus::Domain, &format!("unknown family '{other}'")),
        };
        let scaling = if alpha == 0 && beta == 0 && gamma == 0 {
            ScalingMethod::Uniform
        } else {
            ScalingMethod::Heterogeneous { alpha, beta, gamma }
        };
        let input = InputDims::new(input_h, input_w, input_c);
        match build_family(family, m, scaling, input, classes) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(RfSpec(spec)));
                RfStatus::Ok
            }
            Err(e) => fail(RfStatus::Domain, &e.to_string()),
        }
    })
}

/// Number of stages in the network.
///
/// # Safety
/// `spec` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_stage_count(spec: *const RfSpec, out: *mut usize) -> RfStatus {
    guarded(|| {
        if spec.is_null() || out.is_null() {
            return fail(RfStatus::NullPointer, "null argument");
        }
        *out = (*spec).0.stage_count();
        RfStatus::Ok
    })
}

unsafe fn write_counts(
    spec: *const RfSpec,
    total: *mut u64,
    per_stage: *mut u64,
    extract: impl Fn(&NetworkSpec) -> (Vec<u64>, u64),
) -> RfStatus {
    if spec.is_null() {
        return fail(RfStatus::NullPointer, "null spec");
    }
    let (per, tot) = extract(&(*spec).0);
    if !total.is_null() {
        *total = tot;
    }
    if !per_stage.is_null() {
        for (i, v) in per.iter().enumerate() {
            *per_stage.add(i) = *v;
        }
    }
    RfStatus::Ok
}

/// Total and per-stage ReLU counts. `per_stage` may be null; otherwise it
/// must hold `rf_spec_stage_count` entries.
///
/// # Safety
/// Pointer arguments must be valid as described.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_relus(
    spec: *const RfSpec,
    total: *mut u64,
    per_stage: *mut u64,
) -> RfStatus {
    guarded(|| write_counts(spec, total, per_stage, accounting::stage_relus))
}

/// Total and per-stage FLOP (MAC) counts; the head lands in the total.
///
/// # Safety
/// Pointer arguments must be valid as for `rf_spec_relus`.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_flops(
    spec: *const RfSpec,
    total: *mut u64,
    per_stage: *mut u64,
) -> RfStatus {
    guarded(|| write_counts(spec, total, per_stage, accounting::stage_flops))
}

/// Total and per-stage parameter counts; the head lands in the total.
///
/// # Safety
/// Pointer arguments must be valid as for `rf_spec_relus`.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_params(
    spec: *const RfSpec,
    total: *mut u64,
    per_stage: *mut u64,
) -> RfStatus {
    guarded(|| write_counts(spec, total, per_stage, accounting::stage_params))
}

unsafe fn transform_out(
    out: *mut *mut RfSpec,
    result: reluforge::Result<NetworkSpec>,
) -> RfStatus {
    match result {
        Ok(spec) => {
            *out = Box::into_raw(Box::new(RfSpec(spec)));
            RfStatus::Ok
        }
        Err(e) => fail(RfStatus::Domain, &e.to_string()),
    }
}

/// Removes every ReLU in the 1-based `stage`, returning a new handle.
///
/// # Safety
/// `spec` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_cull(
    spec: *const RfSpec,
    stage: usize,
    out: *mut *mut RfSpec,
) -> RfStatus {
    guarded(|| {
        if spec.is_null() || out.is_null() {
            return fail(RfStatus::NullPointer, "null argument");
        }
        transform_out(out, transforms::cull(&(*spec).0, stage))
    })
}

/// Thins the listed 1-based stages, returning a new handle.
///
/// # Safety
/// `stages` must point to `len` readable entries; other pointers as above.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_thin(
    spec: *const RfSpec,
    stages: *const usize,
    len: usize,
    out: *mut *mut RfSpec,
) -> RfStatus {
    guarded(|| {
        if spec.is_null() || out.is_null() || (stages.is_null() && len > 0) {
            return fail(RfStatus::NullPointer, "null argument");
        }
        let stages = if len == 0 { &[] } else { std::slice::from_raw_parts(stages, len) };
        transform_out(out, transforms::thin(&(*spec).0, stages))
    })
}

/// Scales every channel count by num/den, returning a new handle.
///
/// # Safety
/// `spec` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_scale_channels(
    spec: *const RfSpec,
    num: u32,
    den: u32,
    out: *mut *mut RfSpec,
) -> RfStatus {
    guarded(|| {
        if spec.is_null() || out.is_null() {
            return fail(RfStatus::NullPointer, "null argument");
        }
        transform_out(out, transforms::scale_channels(&(*spec).0, num, den))
    })
}

/// Applies ReLU-reuse with factor `n` (2, 4, 8, or 16), returning a new
/// handle.
///
/// # Safety
/// `spec` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_spec_relu_reuse(
    spec: *const RfSpec,
    n: u32,
    out: *mut *mut RfSpec,
) -> RfStatus {
    guarded(|| {
        if spec.is_null() || out.is_null() {
            return fail(RfStatus::NullPointer, "null argument");
        }
        transform_out(out, transforms::relu_reuse(&(*spec).0, n))
    })
}

unsafe fn parse_dataset(dataset: *const c_char) -> Result<Dataset, RfStatus> {
    let name = cstr(dataset)?;
    Dataset::parse(name).ok_or_else(|| {
        fail(RfStatus::Domain, &format!("unknown dataset '{name}' (cifar100 or tinyimagenet)"))
    })
}

/// Shipped default calibration for "cifar100" or "tinyimagenet".
///
/// # Safety
/// `dataset` must be NUL-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_calibration_default(
    dataset: *const c_char,
    out: *mut *mut RfCalibration,
) -> RfStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RfStatus::NullPointer, "null output pointer");
        }
        let dataset = match parse_dataset(dataset) {
            Ok(d) => d,
            Err(s) => return s,
        };
        *out = Box::into_raw(Box::new(RfCalibration(CostCalibration::default_for(dataset))));
        RfStatus::Ok
    })
}

/// Loads `gc.csv` and `he_<dataset>.csv` from a directory.
///
/// # Safety
/// String arguments must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rf_calibration_load_dir(
    dir: *const c_char,
    dataset: *const c_char,
    out: *mut *mut RfCalibration,
) -> RfStatus {
    guarded(|| {
        if out.is_null() {
            return fail(RfStatus::NullPointer, "null output pointer");
        }
        let dir = match cstr(dir) {
            Ok(d) => d,
            Err(s) => return s,
        };
        let dataset = match parse_dataset(dataset) {
            Ok(d) => d,
            Err(s) => return s,
        };
        match CostCalibration::load_dir(Path::new(dir), dataset) {
            Ok(calib) => {
                *out = Box::into_raw(Box::new(RfCalibration(calib)));
                RfStatus::Ok
            }
            Err(e) => fail(RfStatus::Domain, &e.to_string()),
        }
    })
}

/// Estimates one private inference's latency and storage for a spec.
///
/// # Safety
/// All handles must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rf_estimate(
    spec: *const RfSpec,
    calib: *const RfCalibration,
    out: *mut RfCostEstimate,
) -> RfStatus {
    guarded(|| {
        if spec.is_null() || calib.is_null() || out.is_null() {
            return fail(RfStatus::NullPointer, "null argument");
        }
        match cost::estimate_spec(&(*spec).0, &(*calib).0) {
            Ok(e) => {
                *out = RfCostEstimate {
                    gc_seconds: e.gc_seconds,
                    he_seconds: e.he_seconds,
                    total_seconds: e.total_seconds,
                    storage_bytes: e.storage_bytes,
                    he_extrapolated: u8::from(e.he_extrapolated),
                };
                RfStatus::Ok
            }
            Err(e) => fail(RfStatus::Domain, &e.to_string()),
        }
    })
}
