//! C ABI over the skewcast core.
//!
//! Every fallible function returns a [`SkewcastStatus`]; on failure the
//! message is available from [`skewcast_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.
//! Strings returned to the caller are released with [`skewcast_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use skewcast::backtest::ArmRef;
use skewcast::datagen::{self, GenConfig};
use skewcast::learner::{self, FitModel, LearnerConfig};
use skewcast::loss::{self, LossSpec};
use skewcast::transform;
use skewcast::{panel, Error, SalesPanel, TargetTransform};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkewcastStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Invalid configuration, JSON or incompatible options.
    Config = 3,
    /// Malformed, degenerate or out-of-domain data.
    Data = 4,
    Io = 5,
    ShapeMismatch = 6,
    Panic = 7,
}

/// Opaque sales panel.
pub struct SkewcastPanel(SalesPanel);

/// Opaque fitted model.
pub struct SkewcastModel(FitModel);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SkewcastJensenGap {
    pub mean_of_transformed_backmapped: f64,
    pub mean_raw: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SkewcastStatus {
    match e {
        Error::Io { .. } => SkewcastStatus::Io,
        Error::ShapeMismatch { .. } => SkewcastStatus::ShapeMismatch,
        e if e.is_config() => SkewcastStatus::Config,
        _ => SkewcastStatus::Data,
    }
}

struct Fail(SkewcastStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

impl From<serde_json::Error> for Fail {
    fn from(e: serde_json::Error) -> Self {
        Fail(SkewcastStatus::Config, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SkewcastStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SkewcastStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SkewcastStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SkewcastStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SkewcastStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Fail> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(SkewcastStatus::Data, "string contains NUL".into()))
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn skewcast_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn skewcast_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn skewcast_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Read a panel CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn skewcast_panel_read_csv(path: *const c_char, out: *mut *mut SkewcastPanel) -> SkewcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = panel::read_panel(Path::new(str_arg(path, "path")?))?;
        *out = Box::into_raw(Box::new(SkewcastPanel(p)));
        Ok(())
    })
}

/// Generate a synthetic panel. `config_json` may be null for defaults.
///
/// # Safety
/// `config_json` must be null or NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn skewcast_panel_generate(
    config_json: *const c_char,
    out: *mut *mut SkewcastPanel,
) -> SkewcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg: GenConfig = match opt_str_arg(config_json, "config_json")? {
            Some(s) => serde_json::from_str(s)?,
            None => GenConfig::default(),
        };
        *out = Box::into_raw(Box::new(SkewcastPanel(datagen::generate(&cfg)?)));
        Ok(())
    })
}

/// Write a panel as CSV.
///
/// # Safety
/// `panel` must be a live handle; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn skewcast_panel_write_csv(panel: *const SkewcastPanel, path: *const c_char) -> SkewcastStatus {
    guard(|| {
        let p = panel.as_ref().ok_or_else(|| null("panel"))?;
        panel::write_panel(&p.0, Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Number of observations; 0 for a null handle.
///
/// # Safety
/// `panel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn skewcast_panel_len(panel: *const SkewcastPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.len())
}

/// Number of features per observation; 0 for a null handle.
///
/// # Safety
/// `panel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn skewcast_panel_n_features(panel: *const SkewcastPanel) -> usize {
    panel.as_ref().map_or(0, |p| p.0.n_features())
}

/// # Safety
/// `panel` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn skewcast_panel_free(panel: *mut SkewcastPanel) {
    if !panel.is_null() {
        drop(Box::from_raw(panel));
    }
}

/// Fit an arm on the whole panel. `arm` is a built-in id such as `"E5"` or
/// an arm JSON document; `learner_json` may be null for defaults. The
/// arm's bias corrector is fitted on the same panel and attached.
///
/// # Safety
/// `panel` must be a live handle; strings NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn skewcast_model_fit(
    panel: *const SkewcastPanel,
    arm: *const c_char,
    learner_json: *const c_char,
    out: *mut *mut SkewcastModel,
) -> SkewcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = &panel.as_ref().ok_or_else(|| null("panel"))?.0;
        let arm = str_arg(arm, "arm")?.trim();
        let arm = if arm.starts_with('{') {
            ArmRef::Arm(serde_json::from_str(arm)?)
        } else {
            ArmRef::Id(arm.to_string())
        }
        .resolve()?;
        let cfg: LearnerConfig = match opt_str_arg(learner_json, "learner_json")? {
            Some(s) => serde_json::from_str(s)?,
            None => LearnerConfig::default(),
        };
        let model = learner::fit(p, &arm.transform, &arm.loss, &arm.weight_scheme, &cfg)?;
        let corrector = model.fit_corrector(arm.corrector, p)?;
        *out = Box::into_raw(Box::new(SkewcastModel(model.with_corrector(corrector)?)));
        Ok(())
    })
}

/// # Safety
/// `json` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn skewcast_model_from_json(json: *const c_char, out: *mut *mut SkewcastModel) -> SkewcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = FitModel::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(SkewcastModel(m)));
        Ok(())
    })
}

/// Serialize a model; free the result with [`skewcast_string_free`].
///
/// # Safety
/// `model` must be a live handle; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn skewcast_model_to_json(model: *const SkewcastModel, out: *mut *mut c_char) -> SkewcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        *out = to_c_string(m.to_json()?)?;
        Ok(())
    })
}

/// Number of features the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn skewcast_model_n_features(model: *const SkewcastModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_features())
}

/// Uncorrected prediction: the internal score, or raw sales when
/// `in_raw_units` is true.
///
/// # Safety
/// `model` must be a live handle; `features` must hold `n` values; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn skewcast_model_predict(
    model: *const SkewcastModel,
    features: *const f64,
    n: usize,
    in_raw_units: bool,
    out: *mut f64,
) -> SkewcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        *out = m.predict(slice_arg(features, n, "features")?, in_raw_units)?;
        Ok(())
    })
}

/// Raw-sales forecast with the model's bias corrector applied.
///
/// # Safety
/// `model` must be a live handle; `features` must hold `n` values; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn skewcast_model_forecast(
    model: *const SkewcastModel,
    features: *const f64,
    n: usize,
    out: *mut f64,
) -> SkewcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        *out = m.forecast(slice_arg(features, n, "features")?)?;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn skewcast_model_free(model: *mut SkewcastModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn loss_arg(loss_json: *const c_char) -> Result<LossSpec, Fail> {
    let spec: LossSpec = serde_json::from_str(str_arg(loss_json, "loss_json")?)?;
    spec.validate()?;
    Ok(spec)
}

/// Per-sample deviance of `loss_json`, e.g. `{"kind":"tweedie","power":1.5,"link":"log"}`.
///
/// # Safety
/// `loss_json` must be NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn skewcast_deviance(loss_json: *const c_char, y: f64, mu: f64, out: *mut f64) -> SkewcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = loss::deviance(&loss_arg(loss_json)?, y, mu)?;
        Ok(())
    })
}

/// Gradient and hessian of the deviance with respect to the internal score.
///
/// # Safety
/// `loss_json` must be NUL-terminated; `grad` and `hess` valid.
#[no_mangle]
pub unsafe extern "C" fn skewcast_grad_hess(
    loss_json: *const c_char,
    y: f64,
    score: f64,
    grad: *mut f64,
    hess: *mut f64,
) -> SkewcastStatus {
    guard(|| {
        let grad = out_arg(grad, "grad")?;
        let hess = out_arg(hess, "hess")?;
        let gh = loss::grad_hess(&loss_arg(loss_json)?, y, score)?;
        *grad = gh.grad;
        *hess = gh.hess;
        Ok(())
    })
}

/// Jensen gap of `ys` under `transform_json`, e.g. `{"kind":"log","offset":1.0}`.
///
/// # Safety
/// `transform_json` must be NUL-terminated; `ys` must hold `n` values; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn skewcast_jensen_gap(
    transform_json: *const c_char,
    ys: *const f64,
    n: usize,
    out: *mut SkewcastJensenGap,
) -> SkewcastStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let t: TargetTransform = serde_json::from_str(str_arg(transform_json, "transform_json")?)?;
        t.validate()?;
        let r = transform::jensen_gap(&t, slice_arg(ys, n, "ys")?)?;
        *out = SkewcastJensenGap {
            mean_of_transformed_backmapped: r.mean_of_transformed_backmapped,
            mean_raw: r.mean_raw,
            gap: r.gap,
            relative_gap: r.relative_gap,
        };
        Ok(())
    })
}
