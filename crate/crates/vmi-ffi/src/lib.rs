//! C ABI over the `vmi-core` simulator.
//!
//! Design rules:
//! - Scenarios travel as opaque `*mut VmiScenario` handles built from the
//!   same TOML text the command-line tool consumes, so the two front ends
//!   can never disagree about configuration semantics.
//! - Every fallible function returns a [`VmiStatus`]; results come back
//!   through out-pointers. Status values mirror the CLI exit codes
//!   (2 = invalid input, 3 = numerical failure, 1 = i/o).
//! - Failures store a message in a thread-local slot retrievable with
//!   [`vmi_last_error`].
//! - No panic may cross the boundary: every entry point is wrapped in
//!   `catch_unwind` and reports [`VmiStatus::Panic`] instead.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use vmi_core::cli_io::{build_scenario, parse_config};
use vmi_core::core_model::build_superop_space;
use vmi_core::diagrams::{count_equal_order_cascading, count_total};
use vmi_core::response::alpha_freq;
use vmi_core::signals::{
    baseline_signal, vmi_signal, Domain, Scenario, S1_TERM_NAME, S2_TERM_NAMES, S3_TERM_NAMES,
};
use vmi_core::VmiError;

/// Outcome of a C-interface call. Matches the command-line exit codes where
/// a counterpart exists.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmiStatus {
    /// Success.
    Ok = 0,
    /// Filesystem or serialization failure.
    Io = 1,
    /// Invalid configuration text, model, or argument.
    InvalidInput = 2,
    /// A quadrature failed to converge or produced a non-finite value.
    Numerical = 3,
    /// A required pointer argument was null.
    NullArgument = 4,
    /// The provided buffer is too small for the result.
    BufferTooSmall = 5,
    /// An internal invariant failed; the library state is still valid.
    Panic = 6,
}

/// Evaluation domain for signal integrals.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmiDomain {
    /// Nested time integrals with retarded coupling.
    Time = 0,
    /// Frequency integrals with the full retarded tensor.
    Freq = 1,
}

impl From<VmiDomain> for Domain {
    fn from(d: VmiDomain) -> Self {
        match d {
            VmiDomain::Time => Domain::Time,
            VmiDomain::Freq => Domain::Freq,
        }
    }
}

/// Opaque simulation scenario: molecules, drive pulses, detection pulse,
/// and numerical settings.
pub struct VmiScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|slot| {
        let mut v = slot.borrow_mut();
        v.clear();
        v.extend_from_slice(msg.as_bytes());
    });
}

fn status_of(e: &VmiError) -> VmiStatus {
    match e.exit_code() {
        2 => VmiStatus::InvalidInput,
        3 => VmiStatus::Numerical,
        _ => VmiStatus::Io,
    }
}

fn fail(e: &VmiError) -> VmiStatus {
    set_error(&e.to_string());
    status_of(e)
}

fn null_arg(name: &str) -> VmiStatus {
    set_error(&format!("null pointer argument: {name}"));
    VmiStatus::NullArgument
}

/// Run `f` with panics converted to [`VmiStatus::Panic`].
fn guarded(f: impl FnOnce() -> VmiStatus) -> VmiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic; see stderr for details");
            VmiStatus::Panic
        }
    }
}

/// Version of the underlying library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vmi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `cap` bytes) and return the size the full message needs,
/// including the terminator. Call with a null `buf` or zero `cap` to query
/// the required size. Never fails.
///
/// # Safety
/// `buf` must either be null or point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vmi_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let required = msg.len() + 1;
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        required
    })
}

/// Build a scenario from TOML configuration text (the same schema the
/// command-line tool reads). Returns null on failure; the message is then
/// available from [`vmi_last_error`].
///
/// The returned handle must be released with [`vmi_scenario_free`].
///
/// # Safety
/// `toml_text` must be a valid NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn vmi_scenario_from_toml(toml_text: *const c_char) -> *mut VmiScenario {
    if toml_text.is_null() {
        null_arg("toml_text");
        return std::ptr::null_mut();
    }
    let text = match CStr::from_ptr(toml_text).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("configuration text is not valid UTF-8");
            return std::ptr::null_mut();
        }
    };
    match catch_unwind(|| parse_config(text).and_then(|cfg| build_scenario(&cfg))) {
        Ok(Ok(scenario)) => Box::into_raw(Box::new(VmiScenario { inner: scenario })),
        Ok(Err(e)) => {
            fail(&e);
            std::ptr::null_mut()
        }
        Err(_) => {
            set_error("internal panic; see stderr for details");
            std::ptr::null_mut()
        }
    }
}

/// Release a scenario handle. Null is ignored.
///
/// # Safety
/// `scenario` must be null or a handle returned by
/// [`vmi_scenario_from_toml`] that has not been freed already.
#[no_mangle]
pub unsafe extern "C" fn vmi_scenario_free(scenario: *mut VmiScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of molecules in the scenario; zero if the handle is null.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vmi_scenario_molecule_count(scenario: *const VmiScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.inner.molecules.len())
}

/// Interaction order implied by the drive pulses; zero if the handle is
/// null.
///
/// # Safety
/// `scenario` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vmi_scenario_order(scenario: *const VmiScenario) -> u32 {
    scenario.as_ref().map_or(0, |s| s.inner.order() as u32)
}

/// Override the relative quadrature tolerance (must be finite and
/// positive).
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vmi_scenario_set_rel_tol(
    scenario: *mut VmiScenario,
    rel_tol: f64,
) -> VmiStatus {
    let Some(s) = scenario.as_mut() else {
        return null_arg("scenario");
    };
    if !rel_tol.is_finite() || rel_tol <= 0.0 {
        set_error("rel_tol must be finite and positive");
        return VmiStatus::InvalidInput;
    }
    s.inner.rel_tol = rel_tol;
    VmiStatus::Ok
}

/// Evaluate the uncoupled (single-molecule, additive) heterodyne signal at
/// the given interaction order.
///
/// # Safety
/// `scenario` must be a live handle; `out` must point to a writable f64.
#[no_mangle]
pub unsafe extern "C" fn vmi_baseline_signal(
    scenario: *const VmiScenario,
    order: u32,
    domain: VmiDomain,
    out: *mut f64,
) -> VmiStatus {
    guarded(|| {
        let Some(s) = scenario.as_ref() else {
            return null_arg("scenario");
        };
        if out.is_null() {
            return null_arg("out");
        }
        match baseline_signal(&s.inner, order as usize, domain.into()) {
            Ok(v) => {
                *out = v;
                VmiStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Evaluate the total vacuum-mediated pair correction at the given order.
///
/// # Safety
/// `scenario` must be a live handle; `out` must point to a writable f64.
#[no_mangle]
pub unsafe extern "C" fn vmi_pair_signal(
    scenario: *const VmiScenario,
    order: u32,
    domain: VmiDomain,
    out: *mut f64,
) -> VmiStatus {
    guarded(|| {
        let Some(s) = scenario.as_ref() else {
            return null_arg("scenario");
        };
        if out.is_null() {
            return null_arg("out");
        }
        match vmi_signal(&s.inner, order as usize, domain.into()) {
            Ok(b) => {
                *out = b.total();
                VmiStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Number of named additive terms in the pair correction at this order
/// (independent of any scenario).
#[no_mangle]
pub extern "C" fn vmi_pair_term_count(order: u32) -> usize {
    match order {
        1 => 1,
        2 => S2_TERM_NAMES.len(),
        3 => S3_TERM_NAMES.len(),
        _ => 0,
    }
}

/// Copy the NUL-terminated name of pair-correction term `index` at `order`
/// into `buf`.
///
/// # Safety
/// `buf` must point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn vmi_pair_term_name(
    order: u32,
    index: usize,
    buf: *mut c_char,
    cap: usize,
) -> VmiStatus {
    if buf.is_null() {
        return null_arg("buf");
    }
    let name = match (order, index) {
        (1, 0) => S1_TERM_NAME,
        (2, i) if i < S2_TERM_NAMES.len() => S2_TERM_NAMES[i],
        (3, i) if i < S3_TERM_NAMES.len() => S3_TERM_NAMES[i],
        _ => {
            set_error(&format!("no pair term {index} at order {order}"));
            return VmiStatus::InvalidInput;
        }
    };
    if cap < name.len() + 1 {
        set_error(&format!(
            "buffer of {cap} bytes cannot hold {} + NUL",
            name.len()
        ));
        return VmiStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(name.as_ptr().cast::<c_char>(), buf, name.len());
    *buf.add(name.len()) = 0;
    VmiStatus::Ok
}

/// Evaluate the pair correction and write one value per named term into
/// `out_terms` (see [`vmi_pair_term_name`] for the naming). `out_written`
/// always receives the required term count; if `cap` is smaller, nothing
/// else is written and the call reports [`VmiStatus::BufferTooSmall`].
///
/// # Safety
/// `scenario` must be a live handle; `out_terms` must point to at least
/// `cap` writable f64 values; `out_written` must point to a writable
/// size_t.
#[no_mangle]
pub unsafe extern "C" fn vmi_pair_breakdown(
    scenario: *const VmiScenario,
    order: u32,
    domain: VmiDomain,
    out_terms: *mut f64,
    cap: usize,
    out_written: *mut usize,
) -> VmiStatus {
    guarded(|| {
        let Some(s) = scenario.as_ref() else {
            return null_arg("scenario");
        };
        if out_terms.is_null() {
            return null_arg("out_terms");
        }
        if out_written.is_null() {
            return null_arg("out_written");
        }
        let needed = vmi_pair_term_count(order);
        *out_written = needed;
        if cap < needed {
            set_error(&format!("need room for {needed} terms, got {cap}"));
            return VmiStatus::BufferTooSmall;
        }
        match vmi_signal(&s.inner, order as usize, domain.into()) {
            Ok(b) => {
                for (i, (_, v)) in b.terms.iter().enumerate() {
                    *out_terms.add(i) = *v;
                }
                VmiStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Linear response α^{ij}(ω) of one molecule at a real frequency, split
/// into real and imaginary parts. Cartesian indices run 0 = x, 1 = y,
/// 2 = z.
///
/// # Safety
/// `scenario` must be a live handle; `out_re` and `out_im` must point to
/// writable f64 values.
#[no_mangle]
pub unsafe extern "C" fn vmi_alpha_freq(
    scenario: *const VmiScenario,
    molecule: usize,
    i: u32,
    j: u32,
    omega: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> VmiStatus {
    guarded(|| {
        let Some(s) = scenario.as_ref() else {
            return null_arg("scenario");
        };
        if out_re.is_null() {
            return null_arg("out_re");
        }
        if out_im.is_null() {
            return null_arg("out_im");
        }
        if molecule >= s.inner.molecules.len() {
            set_error(&format!(
                "molecule index {molecule} out of range (have {})",
                s.inner.molecules.len()
            ));
            return VmiStatus::InvalidInput;
        }
        if i > 2 || j > 2 {
            set_error("Cartesian indices must be 0, 1, or 2");
            return VmiStatus::InvalidInput;
        }
        let space = build_superop_space(&s.inner.molecules[molecule]);
        let a = alpha_freq(&space, i as usize, j as usize, omega);
        *out_re = a.re;
        *out_im = a.im;
        VmiStatus::Ok
    })
}

/// Total number of distinct pair diagrams at the given order.
///
/// # Safety
/// `out` must point to a writable u64.
#[no_mangle]
pub unsafe extern "C" fn vmi_diagram_count_total(order: u32, out: *mut u64) -> VmiStatus {
    if out.is_null() {
        return null_arg("out");
    }
    match count_total(order as usize) {
        Ok(v) => {
            *out = v;
            VmiStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Number of equal-order cascading diagrams at the given (odd) order.
///
/// # Safety
/// `out` must point to a writable u64.
#[no_mangle]
pub unsafe extern "C" fn vmi_diagram_count_equal_order_cascading(
    order: u32,
    out: *mut u64,
) -> VmiStatus {
    if out.is_null() {
        return null_arg("out");
    }
    match count_equal_order_cascading(order as usize) {
        Ok(v) => {
            *out = v;
            VmiStatus::Ok
        }
        Err(e) => fail(&e),
    }
}
