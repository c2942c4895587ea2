use std::ffi::{CStr, CString};
use std::ptr;

use collar_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(collar_last_error()) }.to_string_lossy().into_owned()
}

fn preset_metric(name: &str, kappa: f64) -> (CollarStatus, *mut CollarMetric) {
    let name = CString::new(name).unwrap();
    let mut m = ptr::null_mut();
    let status = unsafe { collar_metric_from_preset(name.as_ptr(), kappa, &mut m) };
    (status, m)
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(collar_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn hyperbolic_far_field_curvature_through_the_c_api() {
    let (status, m) = preset_metric("hyperbolic-slice", 10.0);
    assert_eq!(status, CollarStatus::Ok, "{}", last_error());
    unsafe {
        assert_eq!(collar_metric_kappa(m), 10.0);
        assert_eq!(collar_metric_slice_dim(m), 2);
        assert!((collar_metric_t0(m) - 10f64.sqrt().recip()).abs() < 1e-15);
        let mut prof = [0.0; 3];
        assert_eq!(collar_profile_eval(m, 0.0, prof.as_mut_ptr()), CollarStatus::Ok);
        assert_eq!(prof, [1.0, 0.0, 0.0]);
        // the disk chart has g' = 4/(1-|x|^2)^2 δ, so unit vectors at the origin have length 1/2
        let x = [0.0, 0.0];
        let (u, v) = ([0.5, 0.0], [0.0, 0.5]);
        for (mode, a) in [(CollarPlaneMode::Xt, 0.0), (CollarPlaneMode::Xy, 0.0), (CollarPlaneMode::Mixed, 2.0)] {
            let mut k = 0.0;
            let s = collar_sectional_curvature(m, mode, 1.5, x.as_ptr(), u.as_ptr(), v.as_ptr(), a, 2, &mut k);
            assert_eq!(s, CollarStatus::Ok, "{}", last_error());
            assert!((k + 100.0).abs() < 1e-8 * 100.0, "{mode:?}: {k}");
        }
        let mut k = 0.0;
        let bad = [1.0, 0.0];
        let s = collar_sectional_curvature(m, CollarPlaneMode::Xt, 1.5, x.as_ptr(), bad.as_ptr(), ptr::null(), 0.0, 2, &mut k);
        assert_eq!(s, CollarStatus::InvalidArgument);
        assert!(last_error().contains("orthonormal"));
        let s = collar_sectional_curvature(m, CollarPlaneMode::Xt, 1.5, x.as_ptr(), u.as_ptr(), ptr::null(), 0.0, 3, &mut k);
        assert_eq!(s, CollarStatus::InvalidArgument);
        collar_metric_free(m);
    }
}

#[test]
fn infeasible_kappa_reports_hint() {
    let (status, m) = preset_metric("hyperbolic-slice", 0.01);
    assert_eq!(status, CollarStatus::InfeasibleBridge);
    assert!(m.is_null());
    assert!(last_error().contains("kappa_min"), "{}", last_error());
    let (status, _) = preset_metric("no-such-preset", 10.0);
    assert_eq!(status, CollarStatus::Config);
    let (status, _) = preset_metric("sphere-slice", -1.0);
    assert_eq!(status, CollarStatus::Config);
}

#[test]
fn null_arguments_are_rejected() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(collar_metric_from_preset(ptr::null(), 1.0, &mut m), CollarStatus::NullPointer);
        let name = CString::new("flat-torus").unwrap();
        assert_eq!(collar_metric_from_preset(name.as_ptr(), 10.0, ptr::null_mut()), CollarStatus::NullPointer);
        assert!(collar_metric_kappa(ptr::null()).is_nan());
        assert_eq!(collar_report_passed(ptr::null()), -1);
        assert!(collar_report_csv(ptr::null()).is_null());
        collar_metric_free(ptr::null_mut());
        collar_report_free(ptr::null_mut());
        collar_string_free(ptr::null_mut());
        let mut out = [0.0; 3];
        assert_eq!(collar_profile_eval(ptr::null(), 0.0, out.as_mut_ptr()), CollarStatus::NullPointer);
    }
}

#[test]
fn save_load_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.toml").to_str().unwrap()).unwrap();
    let (status, m) = preset_metric("sphere-slice", 20.0);
    assert_eq!(status, CollarStatus::Ok);
    unsafe {
        assert_eq!(collar_metric_save(m, path.as_ptr()), CollarStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(collar_metric_load(path.as_ptr(), &mut back), CollarStatus::Ok);
        assert_eq!(collar_metric_kappa(back), 20.0);
        let mut report = ptr::null_mut();
        assert_eq!(collar_verify_lemma_bounds(back, &mut report), CollarStatus::Ok);
        assert_eq!(collar_report_passed(report), 1);
        assert_eq!(collar_report_check_count(report), 4);
        let csv = collar_report_csv(report);
        let text = CStr::from_ptr(csv).to_str().unwrap().to_owned();
        assert!(text.contains("deep_negative"));
        collar_string_free(csv);
        collar_report_free(report);
        collar_metric_free(back);
        collar_metric_free(m);
        let missing = CString::new(dir.path().join("nope.toml").to_str().unwrap()).unwrap();
        let mut none = ptr::null_mut();
        assert_eq!(collar_metric_load(missing.as_ptr(), &mut none), CollarStatus::Io);
    }
}

#[test]
fn config_text_and_kappa_scan() {
    let toml = CString::new("[slice]\nkind = \"constant-curvature\"\nk = -1.0\n[collar]\nkappa = 8.0\nc0 = 0.0\n").unwrap();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(collar_metric_from_config(toml.as_ptr(), &mut m), CollarStatus::Ok, "{}", last_error());
        assert_eq!(collar_metric_kappa(m), 8.0);
        collar_metric_free(m);
        let bad = CString::new("[collar]\nkappa = 8.0\n").unwrap();
        assert_eq!(collar_metric_from_config(bad.as_ptr(), &mut m), CollarStatus::Config);
        let name = CString::new("hyperbolic-slice").unwrap();
        let mut k = 0.0;
        assert_eq!(collar_scan_kappa_min(name.as_ptr(), 1e-2, 1e3, 200, true, &mut k), CollarStatus::Ok);
        assert!((k - 0.632175).abs() < 1e-5, "{k}");
        assert_eq!(collar_scan_kappa_min(name.as_ptr(), 1e-2, 1e3, 200, false, &mut k), CollarStatus::Ok);
        assert!(k > 6.0 && k < 7.5, "{k}");
    }
}

#[test]
fn header_declares_every_export_and_compiles() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/collar.h")).unwrap();
    for name in [
        "collar_version",
        "collar_last_error",
        "collar_metric_from_preset",
        "collar_metric_from_config",
        "collar_metric_load",
        "collar_metric_save",
        "collar_metric_free",
        "collar_sectional_curvature",
        "collar_verify_lemma_bounds",
        "collar_report_csv",
        "collar_string_free",
        "collar_scan_kappa_min",
        "typedef struct CollarMetric CollarMetric;",
        "COLLAR_STATUS_INFEASIBLE_BRIDGE = 4",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
    // syntax-check the header with the system C compiler when one is present
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(&src, "#include \"collar.h\"\nint main(void) { return collar_version() == 0; }\n").unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .status();
    if let Ok(status) = status {
        assert!(status.success(), "collar.h does not compile as C99");
    }
}
