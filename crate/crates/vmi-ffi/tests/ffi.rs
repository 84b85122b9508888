//! Exercises the C entry points in-process (the test links the rlib) and
//! validates the generated header with a real C compiler.

use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use vmi_ffi::*;

fn preset_toml(name: &str) -> CString {
    let cfg = vmi_core::cli_io::preset(name).unwrap();
    CString::new(vmi_core::cli_io::serialize_config(&cfg)).unwrap()
}

fn last_error() -> String {
    let mut buf = vec![0u8; 512];
    let needed = unsafe { vmi_last_error(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    assert!(needed >= 1, "the required size includes the terminator");
    let text = unsafe { CStr::from_ptr(buf.as_ptr().cast::<c_char>()) };
    text.to_str().unwrap().to_owned()
}

#[test]
fn version_is_a_static_semver_string() {
    let v = unsafe { CStr::from_ptr(vmi_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn scenario_roundtrip_matches_direct_evaluation() {
    let toml = preset_toml("dimer_linear");
    let handle = unsafe { vmi_scenario_from_toml(toml.as_ptr()) };
    assert!(!handle.is_null(), "preset must build: {}", last_error());
    assert_eq!(unsafe { vmi_scenario_molecule_count(handle) }, 2);
    assert_eq!(unsafe { vmi_scenario_order(handle) }, 1);

    // One uncoupled and one pair evaluation, each bit-identical to calling
    // the library directly.
    let cfg = vmi_core::cli_io::preset("dimer_linear").unwrap();
    let sc = vmi_core::cli_io::build_scenario(&cfg).unwrap();
    let direct_base =
        vmi_core::signals::baseline_signal(&sc, 1, vmi_core::signals::Domain::Freq).unwrap();
    let direct_pair = vmi_core::signals::vmi_signal(&sc, 1, vmi_core::signals::Domain::Freq)
        .unwrap()
        .total();

    let mut base = f64::NAN;
    let status = unsafe { vmi_baseline_signal(handle, 1, VmiDomain::Freq, &mut base) };
    assert_eq!(status, VmiStatus::Ok, "{}", last_error());
    assert_eq!(base, direct_base);

    let mut pair = f64::NAN;
    let status = unsafe { vmi_pair_signal(handle, 1, VmiDomain::Freq, &mut pair) };
    assert_eq!(status, VmiStatus::Ok, "{}", last_error());
    assert_eq!(pair, direct_pair);

    // Breakdown: order 1 has a single named term equal to the total.
    assert_eq!(vmi_pair_term_count(1), 1);
    let mut terms = [f64::NAN; 4];
    let mut written = 0usize;
    let status = unsafe {
        vmi_pair_breakdown(
            handle,
            1,
            VmiDomain::Freq,
            terms.as_mut_ptr(),
            terms.len(),
            &mut written,
        )
    };
    assert_eq!(status, VmiStatus::Ok, "{}", last_error());
    assert_eq!(written, 1);
    assert_eq!(terms[0], direct_pair);

    let mut name = [0 as c_char; 32];
    let status = unsafe { vmi_pair_term_name(1, 0, name.as_mut_ptr(), name.len()) };
    assert_eq!(status, VmiStatus::Ok);
    let name = unsafe { CStr::from_ptr(name.as_ptr()) }.to_str().unwrap();
    assert_eq!(name, "pair_coupling");

    // Linear response through the handle agrees with the direct call.
    let space = vmi_core::core_model::build_superop_space(&sc.molecules[0]);
    let direct = vmi_core::response::alpha_freq(&space, 2, 2, 1.0);
    let (mut re, mut im) = (f64::NAN, f64::NAN);
    let status = unsafe { vmi_alpha_freq(handle, 0, 2, 2, 1.0, &mut re, &mut im) };
    assert_eq!(status, VmiStatus::Ok, "{}", last_error());
    assert_eq!(re, direct.re);
    assert_eq!(im, direct.im);

    unsafe { vmi_scenario_free(handle) };
}

#[test]
fn diagram_counts_match_library() {
    let mut n = 0u64;
    assert_eq!(unsafe { vmi_diagram_count_total(3, &mut n) }, VmiStatus::Ok);
    assert_eq!(n, 16);
    assert_eq!(
        unsafe { vmi_diagram_count_equal_order_cascading(5, &mut n) },
        VmiStatus::Ok
    );
    assert_eq!(n, 21);
}

#[test]
fn error_paths_report_status_and_message() {
    // Broken TOML: null handle plus a retrievable message.
    let bad = CString::new("version = \"1\"\n[scenario\n").unwrap();
    let handle = unsafe { vmi_scenario_from_toml(bad.as_ptr()) };
    assert!(handle.is_null());
    assert!(
        !last_error().is_empty(),
        "parse failure must leave a message"
    );

    // Truncation contract of the error buffer.
    let full = last_error();
    let mut tiny = [0u8; 4];
    let needed = unsafe { vmi_last_error(tiny.as_mut_ptr().cast::<c_char>(), tiny.len()) };
    assert_eq!(needed, full.len() + 1);
    assert_eq!(tiny[3], 0, "truncated copy is still NUL-terminated");
    assert_eq!(tiny[..3], full.as_bytes()[..3]);

    // Null arguments are rejected, not dereferenced.
    let toml = preset_toml("dimer_linear");
    let handle = unsafe { vmi_scenario_from_toml(toml.as_ptr()) };
    let status = unsafe { vmi_baseline_signal(handle, 1, VmiDomain::Freq, std::ptr::null_mut()) };
    assert_eq!(status, VmiStatus::NullArgument);
    let mut out = 0.0f64;
    let status = unsafe { vmi_baseline_signal(std::ptr::null(), 1, VmiDomain::Freq, &mut out) };
    assert_eq!(status, VmiStatus::NullArgument);

    // Order mismatched to the pulse list is invalid input (CLI exit 2).
    let status = unsafe { vmi_baseline_signal(handle, 2, VmiDomain::Freq, &mut out) };
    assert_eq!(status, VmiStatus::InvalidInput);
    assert!(
        last_error().contains("order"),
        "message should explain the order mismatch: {}",
        last_error()
    );

    // Rejected tolerance values.
    let status = unsafe { vmi_scenario_set_rel_tol(handle, -1e-6) };
    assert_eq!(status, VmiStatus::InvalidInput);
    let status = unsafe { vmi_scenario_set_rel_tol(handle, 1e-8) };
    assert_eq!(status, VmiStatus::Ok);

    // Undersized breakdown buffer: required count reported, no write.
    let mut one = [f64::NAN];
    let mut written = 0usize;
    let toml3 = preset_toml("cascade_s3");
    let h3 = unsafe { vmi_scenario_from_toml(toml3.as_ptr()) };
    assert!(!h3.is_null(), "{}", last_error());
    let status =
        unsafe { vmi_pair_breakdown(h3, 3, VmiDomain::Freq, one.as_mut_ptr(), 1, &mut written) };
    assert_eq!(status, VmiStatus::BufferTooSmall);
    assert_eq!(written, 3, "caller learns the required capacity");
    assert!(one[0].is_nan(), "undersized buffer must not be written");

    // Out-of-range term names.
    let mut name = [0 as c_char; 8];
    let status = unsafe { vmi_pair_term_name(2, 7, name.as_mut_ptr(), name.len()) };
    assert_eq!(status, VmiStatus::InvalidInput);
    let status = unsafe { vmi_pair_term_name(2, 0, name.as_mut_ptr(), name.len()) };
    assert_eq!(status, VmiStatus::BufferTooSmall);

    unsafe { vmi_scenario_free(handle) };
    unsafe { vmi_scenario_free(h3) };
}

#[test]
fn numerical_failure_is_distinguished_from_bad_input() {
    // A legal model whose frequency integrand is singular (undamped
    // resonance driven on-resonance) must surface as a numerical failure,
    // mirroring CLI exit code 3.
    let cfg = vmi_core::cli_io::preset("dimer_linear").unwrap();
    let text = vmi_core::cli_io::serialize_config(&cfg).replace("rate = 0.05", "rate = 0.0");
    let toml = CString::new(text).unwrap();
    let handle = unsafe { vmi_scenario_from_toml(toml.as_ptr()) };
    assert!(!handle.is_null(), "zero dephasing is a legal model");
    let mut out = 0.0f64;
    let status = unsafe { vmi_baseline_signal(handle, 1, VmiDomain::Freq, &mut out) };
    assert_eq!(status, VmiStatus::Numerical);
    assert!(
        last_error().contains("numerical failure"),
        "message should identify the integral: {}",
        last_error()
    );
    unsafe { vmi_scenario_free(handle) };
}

#[test]
fn generated_header_is_valid_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/vmi.h");
    let text = std::fs::read_to_string(&header).expect("build.rs regenerates the header");
    for symbol in [
        "vmi_scenario_from_toml",
        "vmi_scenario_free",
        "vmi_baseline_signal",
        "vmi_pair_breakdown",
        "vmi_last_error",
        "VMI_STATUS_NUMERICAL",
        "VMI_DOMAIN_FREQ",
    ] {
        assert!(text.contains(symbol), "header lost symbol {symbol}");
    }

    // Syntax-check the header as both C99 and C++ when a compiler exists.
    let mut checked = 0;
    for (cc, lang, std) in [("cc", "c", "-std=c99"), ("c++", "c++", "-std=c++11")] {
        let available = std::process::Command::new(cc)
            .arg("--version")
            .output()
            .is_ok();
        if !available {
            eprintln!("skipping {lang} syntax check: {cc} not found");
            continue;
        }
        let out = std::process::Command::new(cc)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, std])
            .arg(&header)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{lang} syntax check failed:\n{}",
            String::from_utf8_lossy(&out.stderr)
        );
        checked += 1;
    }
    assert!(
        checked > 0,
        "no C compiler available to validate the header"
    );
}
