use std::ffi::{CStr, CString};
use std::ptr;

use skewcast_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = skewcast_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_panel() -> *mut SkewcastPanel {
    let cfg = c(r#"{"n_items": 4, "n_days": 120, "seed": 9}"#);
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { skewcast_panel_generate(cfg.as_ptr(), &mut p) },
        SkewcastStatus::Ok
    );
    p
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(skewcast_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn panel_generate_write_and_read_back() {
    let p = small_panel();
    unsafe {
        assert_eq!(skewcast_panel_len(p), 4 * 120);
        assert_eq!(skewcast_panel_n_features(p), 4);
        let dir = tempfile::tempdir().unwrap();
        let path = c(dir.path().join("p.csv").to_str().unwrap());
        assert_eq!(skewcast_panel_write_csv(p, path.as_ptr()), SkewcastStatus::Ok);
        let mut q = ptr::null_mut();
        assert_eq!(skewcast_panel_read_csv(path.as_ptr(), &mut q), SkewcastStatus::Ok);
        assert_eq!(skewcast_panel_len(q), skewcast_panel_len(p));
        skewcast_panel_free(q);
        skewcast_panel_free(p);

        let mut d = ptr::null_mut();
        assert_eq!(skewcast_panel_generate(ptr::null(), &mut d), SkewcastStatus::Ok);
        assert_eq!(skewcast_panel_len(d), 200 * 950);
        skewcast_panel_free(d);
    }
}

#[test]
fn fit_predict_and_json_round_trip() {
    let p = small_panel();
    let arm = c("E4-S");
    let learner = c(r#"{"rounds": 10}"#);
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(
            skewcast_model_fit(p, arm.as_ptr(), learner.as_ptr(), &mut m),
            SkewcastStatus::Ok
        );
        assert_eq!(skewcast_model_n_features(m), 4);
        let x = [0.0, 1.0, 0.0, 1.5];
        let (mut raw, mut fc) = (0.0, 0.0);
        assert_eq!(
            skewcast_model_predict(m, x.as_ptr(), 4, true, &mut raw),
            SkewcastStatus::Ok
        );
        assert_eq!(skewcast_model_forecast(m, x.as_ptr(), 4, &mut fc), SkewcastStatus::Ok);
        assert!(fc >= raw && raw >= 0.0, "forecast {fc}, raw {raw}");

        let mut json = ptr::null_mut();
        assert_eq!(skewcast_model_to_json(m, &mut json), SkewcastStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(skewcast_model_from_json(json, &mut back), SkewcastStatus::Ok);
        let mut fc2 = 0.0;
        assert_eq!(
            skewcast_model_forecast(back, x.as_ptr(), 4, &mut fc2),
            SkewcastStatus::Ok
        );
        assert_eq!(fc, fc2);

        assert_eq!(
            skewcast_model_predict(m, x.as_ptr(), 3, true, &mut raw),
            SkewcastStatus::ShapeMismatch
        );
        assert!(last_error().contains('3'));

        skewcast_string_free(json);
        skewcast_model_free(back);
        skewcast_model_free(m);
        skewcast_panel_free(p);
    }
}

#[test]
fn losses_and_jensen_gap() {
    let tweedie = c(r#"{"kind": "tweedie", "power": 1.5, "link": "log"}"#);
    let mut d = 0.0;
    unsafe {
        assert_eq!(
            skewcast_deviance(tweedie.as_ptr(), 0.0, 4.0, &mut d),
            SkewcastStatus::Ok
        );
        assert!((d - 8.0).abs() < 1e-12);
        let (mut g, mut h) = (1.0, 0.0);
        assert_eq!(
            skewcast_grad_hess(tweedie.as_ptr(), 3.0, 3f64.ln(), &mut g, &mut h),
            SkewcastStatus::Ok
        );
        assert!(g.abs() < 1e-12 && h > 0.0);

        let log0 = c(r#"{"kind": "log", "offset": 0.0}"#);
        let ys = [1.0, 4.0];
        let mut r = SkewcastJensenGap::default();
        assert_eq!(
            skewcast_jensen_gap(log0.as_ptr(), ys.as_ptr(), 2, &mut r),
            SkewcastStatus::Ok
        );
        assert!((r.gap - 0.5).abs() < 1e-12);
        assert_eq!(r.mean_raw, 2.5);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut m = ptr::null_mut();
    let mut d = 0.0;
    unsafe {
        assert_eq!(
            skewcast_model_fit(ptr::null(), c("E4").as_ptr(), ptr::null(), &mut m),
            SkewcastStatus::NullPointer
        );
        assert!(last_error().contains("panel"));

        let p = small_panel();
        assert_eq!(
            skewcast_model_fit(p, c("E77").as_ptr(), ptr::null(), &mut m),
            SkewcastStatus::Config
        );
        assert_eq!(
            skewcast_model_fit(p, c("E4").as_ptr(), c(r#"{"rounds": -1}"#).as_ptr(), &mut m),
            SkewcastStatus::Config
        );
        skewcast_panel_free(p);

        let bad_power = c(r#"{"kind": "tweedie", "power": 2.5, "link": "log"}"#);
        assert_eq!(
            skewcast_deviance(bad_power.as_ptr(), 1.0, 1.0, &mut d),
            SkewcastStatus::Config
        );
        let gamma = c(r#"{"kind": "gamma", "link": "log"}"#);
        assert_eq!(
            skewcast_deviance(gamma.as_ptr(), 0.0, 1.0, &mut d),
            SkewcastStatus::Data
        );
        assert_eq!(
            skewcast_deviance(gamma.as_ptr(), 1.0, 1.0, ptr::null_mut()),
            SkewcastStatus::NullPointer
        );

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            skewcast_deviance(invalid.as_ptr().cast(), 1.0, 1.0, &mut d),
            SkewcastStatus::InvalidUtf8
        );

        let mut q = ptr::null_mut();
        assert_eq!(
            skewcast_panel_read_csv(c("/no/such/panel.csv").as_ptr(), &mut q),
            SkewcastStatus::Io
        );
        assert!(q.is_null());

        skewcast_panel_free(ptr::null_mut());
        skewcast_model_free(ptr::null_mut());
        skewcast_string_free(ptr::null_mut());
        assert_eq!(skewcast_panel_len(ptr::null()), 0);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/skewcast.h")).unwrap();
    for symbol in [
        "SKEWCAST_STATUS_OK = 0",
        "SKEWCAST_STATUS_PANIC = 7",
        "typedef struct SkewcastPanel SkewcastPanel;",
        "typedef struct SkewcastModel SkewcastModel;",
        "SkewcastJensenGap",
        "skewcast_last_error",
        "skewcast_panel_generate",
        "skewcast_model_fit",
        "skewcast_model_forecast",
        "skewcast_model_to_json",
        "skewcast_string_free",
        "skewcast_grad_hess",
        "skewcast_jensen_gap",
    ] {
        assert!(header.contains(symbol), "header lacks {symbol}");
    }
}
