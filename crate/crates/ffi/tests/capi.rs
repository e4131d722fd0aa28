use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use vimlab_ffi::*;

fn toy(n: usize, offset: usize) -> (Vec<f64>, Vec<f64>) {
    let weyl = |i: usize, step: f64| ((i + offset) as f64 * step).fract() - 0.5;
    let x: Vec<f64> = (0..n).flat_map(|i| [weyl(i, 0.618_033_988_7), weyl(i, 0.414_213_562_4)]).collect();
    let y = (0..n).map(|i| 2.0 * x[2 * i] + 0.01 * x[2 * i + 1]).collect();
    (x, y)
}

unsafe fn dataset(n: usize, offset: usize) -> *mut VimDataset {
    let (x, y) = toy(n, offset);
    let mut d = ptr::null_mut();
    assert_eq!(vim_dataset_new(x.as_ptr(), y.as_ptr(), n, 2, &mut d), VimStatus::Ok);
    d
}

unsafe fn last_error() -> String {
    CStr::from_ptr(vim_last_error()).to_string_lossy().into_owned()
}

#[test]
fn fit_estimate_and_read_back() {
    unsafe {
        let train = dataset(200, 0);
        let test = dataset(100, 3);
        let (mut n, mut p) = (0, 0);
        assert_eq!(vim_dataset_shape(test, &mut n, &mut p), VimStatus::Ok);
        assert_eq!((n, p), (100, 2));

        let spec = CString::new(r#"{"kind": "ols"}"#).unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(vim_model_fit(spec.as_ptr(), train, &mut model), VimStatus::Ok);
        let (x, y) = toy(100, 3);
        let mut preds = vec![0.0; 100];
        assert_eq!(vim_model_predict(model, x.as_ptr(), 100, 2, preds.as_mut_ptr()), VimStatus::Ok);
        assert!(preds.iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-9));

        for name in ["PFI", "CFI", "SobolCPI", "LOCO", "LOCI", "scSAGE", "dTSI", "GLM"] {
            let method = CString::new(name).unwrap();
            let mut report = ptr::null_mut();
            let status = vim_estimate(method.as_ptr(), model, train, test, VimLoss::Quadratic, 4, 8, 11, &mut report);
            assert_eq!(status, VimStatus::Ok, "{name}: {}", last_error());
            let mut len = 0;
            assert_eq!(vim_report_len(report, &mut len), VimStatus::Ok);
            assert_eq!(len, 2);
            let mut scores = [0.0; 2];
            assert_eq!(vim_report_scores(report, scores.as_mut_ptr(), 2), VimStatus::Ok);
            assert!(scores[0] > 10.0 * scores[1].abs(), "{name}: {scores:?}");
            let mut se = [0.0; 2];
            assert_eq!(vim_report_std_errors(report, se.as_mut_ptr(), 2), VimStatus::Ok);
            assert_eq!(se[0].is_nan(), name == "GLM", "{name}");
            let mut short = [0.0; 1];
            assert_eq!(vim_report_scores(report, short.as_mut_ptr(), 1), VimStatus::DimensionMismatch);
            vim_report_free(report);
        }

        let method = CString::new("SobolCPI").unwrap();
        let mut report = ptr::null_mut();
        vim_estimate(method.as_ptr(), model, train, test, VimLoss::Quadratic, 4, 0, 11, &mut report);
        let mut pv = [0.0; 2];
        assert_eq!(vim_report_p_values(report, VimTest::Sign, pv.as_mut_ptr(), 2), VimStatus::Ok);
        assert!(pv[0] < 1e-10, "{pv:?}");
        vim_report_free(report);

        vim_model_free(model);
        vim_dataset_free(train);
        vim_dataset_free(test);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut d = ptr::null_mut();
        assert_eq!(vim_dataset_new(ptr::null(), ptr::null(), 3, 2, &mut d), VimStatus::NullPointer);
        assert!(d.is_null());
        let (x, y) = ([1.0, 1.0, 1.0], [0.0, 1.0, 2.0]);
        assert_eq!(vim_dataset_new(x.as_ptr(), y.as_ptr(), 1, 3, &mut d), VimStatus::InsufficientData);

        let train = dataset(50, 0);
        let bad = CString::new(r#"{"kind": "svm"}"#).unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(vim_model_fit(bad.as_ptr(), train, &mut model), VimStatus::InvalidConfig);
        assert!(last_error().contains("svm"), "{}", last_error());

        let spec = CString::new(r#"{"kind": "ols"}"#).unwrap();
        assert_eq!(vim_model_fit(spec.as_ptr(), train, &mut model), VimStatus::Ok);
        let mut report = ptr::null_mut();
        let unknown = CString::new("SHAP").unwrap();
        let s = vim_estimate(unknown.as_ptr(), model, train, train, VimLoss::Quadratic, 1, 1, 0, &mut report);
        assert_eq!(s, VimStatus::InvalidArgument);
        let dtsi = CString::new("dTSI").unwrap();
        let s = vim_estimate(dtsi.as_ptr(), model, train, train, VimLoss::CrossEntropy, 1, 1, 0, &mut report);
        assert_eq!(s, VimStatus::InvalidArgument);
        assert!(last_error().contains("quadratic"));
        let locow = CString::new("LOCO_W").unwrap();
        let s = vim_estimate(locow.as_ptr(), model, train, train, VimLoss::Quadratic, 1, 1, 0, &mut report);
        assert_eq!(s, VimStatus::InsufficientData, "{}", last_error());
        assert!(report.is_null());

        vim_model_free(model);
        vim_dataset_free(train);
        vim_dataset_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(vim_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn c_program_links_against_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let target = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let lib_dir = target.parent().unwrap().join("debug");
    let lib = lib_dir.join("libvimlab_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let exe = target.join("vimlab_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("vimlab "));
}
