//! C interface to `vimlab`.
//!
//! Datasets, fitted models and importance reports cross the boundary as
//! opaque handles owned by the caller and released with the matching
//! `*_free` function. Every fallible call returns a [`VimStatus`]; the text of
//! the most recent error on the calling thread is available from
//! [`vim_last_error`]. Matrices are row-major `n x p` arrays of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;
use vimlab::estimators::{self, MethodId, SageMode};
use vimlab::inference;
use vimlab::predictors::{self, FittedPredictor, PredictorSpec};
use vimlab::samplers::{fit_sampler, PerturbationKind};
use vimlab::{Dataset, ImportanceReport, Loss, VimError};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    InvalidConfig = 4,
    Io = 5,
    Numerical = 6,
    Sampler = 7,
    Unsupported = 8,
    InsufficientData = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VimLoss {
    Quadratic = 0,
    CrossEntropy = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VimTest {
    Sign = 0,
    Wilcoxon = 1,
    Z = 2,
}

/// Opaque dataset handle.
pub struct VimDataset(Dataset);

/// Opaque fitted-model handle.
pub struct VimModel(FittedPredictor);

/// Opaque importance-report handle.
pub struct VimReport(ImportanceReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &VimError) -> VimStatus {
    match e {
        VimError::Method { source, .. } => status_of(source),
        VimError::Dimension { .. } => VimStatus::DimensionMismatch,
        VimError::Config(_) => VimStatus::InvalidConfig,
        VimError::Io { .. } | VimError::Csv(_) | VimError::Parse { .. } | VimError::MissingColumn(_) => {
            VimStatus::Io
        }
        VimError::RankDeficient(_)
        | VimError::NumericalRank(_)
        | VimError::DegenerateColumn { .. }
        | VimError::DegenerateDenominator { .. }
        | VimError::NonFinite { .. }
        | VimError::NanCell { .. } => VimStatus::Numerical,
        VimError::SamplerKind(_) => VimStatus::Sampler,
        VimError::UnsupportedMethod(_) | VimError::Incompatible(_) => VimStatus::Unsupported,
        VimError::InsufficientRows { .. } | VimError::InsufficientSample { .. } => VimStatus::InsufficientData,
        _ => VimStatus::InvalidArgument,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (VimStatus, String)>) -> VimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VimStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            VimStatus::Panic
        }
    }
}

fn lib<T>(r: vimlab::Result<T>) -> Result<T, (VimStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (VimStatus, String) {
    (VimStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (VimStatus, String) {
    (VimStatus::InvalidArgument, msg.into())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (VimStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (VimStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn string(p: *const c_char, what: &str) -> Result<String, (VimStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn matrix(x: *const f64, n: usize, p: usize) -> Result<DMatrix<f64>, (VimStatus, String)> {
    let len = n.checked_mul(p).ok_or_else(|| invalid("n * p overflows"))?;
    Ok(DMatrix::from_row_slice(n, p, slice(x, len, "x")?))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), (VimStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a dataset from a row-major `n x p` matrix and a length-`n` target.
///
/// # Safety
/// `x` must point to `n * p` doubles, `y` to `n` doubles, and `out` to
/// writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn vim_dataset_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut VimDataset,
) -> VimStatus {
    guard(|| {
        let x = matrix(x, n, p)?;
        let y = slice(y, n, "y")?.to_vec();
        let d = lib(Dataset::from_unnamed(x, y))?;
        write_out(out, VimDataset(d))
    })
}

/// # Safety
/// `d` must be null or a handle from [`vim_dataset_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vim_dataset_free(d: *mut VimDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// # Safety
/// `d` must be a live dataset handle; `n` and `p` may be null.
#[no_mangle]
pub unsafe extern "C" fn vim_dataset_shape(d: *const VimDataset, n: *mut usize, p: *mut usize) -> VimStatus {
    guard(|| {
        let d = &handle(d, "dataset")?.0;
        if let Some(n) = n.as_mut() {
            *n = d.n();
        }
        if let Some(p) = p.as_mut() {
            *p = d.p();
        }
        Ok(())
    })
}

/// Fits a learner on every feature of `d`. `spec_json` is a predictor
/// specification such as `{"kind": "ols"}` or
/// `{"kind": "random_forest", "n_trees": 50, "seed": 3}`.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string, `d` a live dataset handle
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vim_model_fit(
    spec_json: *const c_char,
    d: *const VimDataset,
    out: *mut *mut VimModel,
) -> VimStatus {
    guard(|| {
        let text = string(spec_json, "spec_json")?;
        let spec: PredictorSpec =
            serde_json::from_str(&text).map_err(|e| (VimStatus::InvalidConfig, e.to_string()))?;
        lib(spec.validate())?;
        let m = lib(predictors::fit_all(&spec, &handle(d, "dataset")?.0))?;
        write_out(out, VimModel(m))
    })
}

/// # Safety
/// `m` must be null or a handle from [`vim_model_fit`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vim_model_free(m: *mut VimModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Predictions for a row-major `n x p` matrix, written to `out[0..n]`.
///
/// # Safety
/// `x` must hold `n * p` doubles and `out` room for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn vim_model_predict(
    m: *const VimModel,
    x: *const f64,
    n: usize,
    p: usize,
    out: *mut f64,
) -> VimStatus {
    guard(|| {
        let m = &handle(m, "model")?.0;
        let preds = lib(m.predict_full(&matrix(x, n, p)?))?;
        if n > 0 && out.is_null() {
            return Err(null("out"));
        }
        if n > 0 {
            std::slice::from_raw_parts_mut(out, n).copy_from_slice(&preds);
        }
        Ok(())
    })
}

fn loss_of(l: VimLoss) -> Loss {
    match l {
        VimLoss::Quadratic => Loss::Quadratic,
        VimLoss::CrossEntropy => Loss::CrossEntropy,
    }
}

/// Runs one estimator.
///
/// `method` is a method name (`"PFI"`, `"CFI"`, `"SobolCPI"`, `"LOCO"`,
/// `"LOCO_W"`, `"LOCI"`, `"cSAGE"`, `"cSAGEvf"`, `"mSAGE"`, `"mSAGEvf"`,
/// `"scSAGE"`, `"dTSI"`, `"GLM"`). `model` is the model fitted on `train`;
/// refitting methods refit its learner. `n_samples` is the permutation or
/// draw count (n_perm, n_draws or n_cal); `n_orderings` is used by cSAGE and
/// mSAGE only. Conditional methods use a Gaussian sampler fitted on `train`.
/// LOCO_W uses `train` and `test` stacked.
///
/// # Safety
/// All handles must be live and `method` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn vim_estimate(
    method: *const c_char,
    model: *const VimModel,
    train: *const VimDataset,
    test: *const VimDataset,
    loss: VimLoss,
    n_samples: usize,
    n_orderings: usize,
    seed: u64,
    out: *mut *mut VimReport,
) -> VimStatus {
    guard(|| {
        let id: MethodId = string(method, "method")?
            .parse()
            .map_err(|e: VimError| invalid(e.to_string()))?;
        let m = &handle(model, "model")?.0;
        let train = &handle(train, "train")?.0;
        let test = &handle(test, "test")?.0;
        let loss = loss_of(loss);
        let spec = m
            .spec()
            .cloned()
            .ok_or_else(|| invalid("model carries no learner specification"))?;
        let conditional = || lib(fit_sampler(PerturbationKind::GaussianConditional, train.x()));
        let r = match id {
            MethodId::Pfi => estimators::estimate_pfi(m, test, loss, n_samples, seed),
            MethodId::Cfi => estimators::estimate_cfi(m, test, loss, &conditional()?, n_samples, seed),
            MethodId::SobolCpi => estimators::estimate_sobol_cpi(m, test, loss, &conditional()?, n_samples, seed),
            MethodId::Loco => estimators::estimate_loco_prefit(m, &spec, train, test, loss, seed),
            MethodId::LocoW => {
                let stacked = lib(stack(train, test))?;
                estimators::estimate_loco_w(&spec, &stacked, loss, seed)
            }
            MethodId::Loci => estimators::estimate_loci(&spec, train, test, loss, seed),
            MethodId::CSage => {
                let s = conditional()?;
                estimators::estimate_sage(m, test, loss, SageMode::Conditional, Some(&s), n_orderings, n_samples, seed)
            }
            MethodId::MSage => {
                estimators::estimate_sage(m, test, loss, SageMode::Marginal, None, n_orderings, n_samples, seed)
            }
            MethodId::CSageVf => {
                let s = conditional()?;
                estimators::estimate_sage_vf(m, test, loss, SageMode::Conditional, Some(&s), n_samples, seed)
            }
            MethodId::MSageVf => estimators::estimate_sage_vf(m, test, loss, SageMode::Marginal, None, n_samples, seed),
            MethodId::ScSage => estimators::estimate_sc_sage(m, test, loss, &conditional()?, n_samples, seed),
            MethodId::DTsi if loss != Loss::Quadratic => {
                return Err(invalid("dTSI is defined for the quadratic loss only"))
            }
            MethodId::DTsi => estimators::estimate_dtsi_prefit(m, &spec, train, test, seed),
            MethodId::Glm => estimators::estimate_glm(train),
        };
        write_out(out, VimReport(lib(r)?))
    })
}

fn stack(a: &Dataset, b: &Dataset) -> vimlab::Result<Dataset> {
    if a.p() != b.p() {
        return Err(VimError::Dimension {
            context: "train and test feature counts",
            expected: a.p(),
            found: b.p(),
        });
    }
    let x = DMatrix::from_fn(a.n() + b.n(), a.p(), |i, j| {
        if i < a.n() {
            a.x()[(i, j)]
        } else {
            b.x()[(i - a.n(), j)]
        }
    });
    let y = a.y().iter().chain(b.y()).copied().collect();
    Dataset::new(x, y, a.names().to_vec())
}

/// # Safety
/// `r` must be null or a handle from [`vim_estimate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vim_report_free(r: *mut VimReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Number of features scored by the report.
///
/// # Safety
/// `r` must be a live report handle and `p` writable.
#[no_mangle]
pub unsafe extern "C" fn vim_report_len(r: *const VimReport, p: *mut usize) -> VimStatus {
    guard(|| {
        let r = &handle(r, "report")?.0;
        *p.as_mut().ok_or_else(|| null("p"))? = r.features.len();
        Ok(())
    })
}

unsafe fn copy_column(
    r: *const VimReport,
    out: *mut f64,
    len: usize,
    f: impl Fn(&estimators::FeatureImportance) -> f64,
) -> Result<(), (VimStatus, String)> {
    let r = &handle(r, "report")?.0;
    if len != r.features.len() {
        return Err((
            VimStatus::DimensionMismatch,
            format!("buffer holds {len} values, report has {}", r.features.len()),
        ));
    }
    if len > 0 && out.is_null() {
        return Err(null("out"));
    }
    for (k, feat) in r.features.iter().enumerate() {
        *out.add(k) = f(feat);
    }
    Ok(())
}

/// Raw scores, one per feature.
///
/// # Safety
/// `out` must have room for `len` doubles, `len` equal to the report length.
#[no_mangle]
pub unsafe extern "C" fn vim_report_scores(r: *const VimReport, out: *mut f64, len: usize) -> VimStatus {
    guard(|| copy_column(r, out, len, |f| f.score))
}

/// Standard errors, NaN where the method records none.
///
/// # Safety
/// As [`vim_report_scores`].
#[no_mangle]
pub unsafe extern "C" fn vim_report_std_errors(r: *const VimReport, out: *mut f64, len: usize) -> VimStatus {
    guard(|| copy_column(r, out, len, |f| f.std_error.unwrap_or(f64::NAN)))
}

/// One-sided p-values of positive importance under the chosen test.
///
/// # Safety
/// As [`vim_report_scores`].
#[no_mangle]
pub unsafe extern "C" fn vim_report_p_values(
    r: *const VimReport,
    test: VimTest,
    out: *mut f64,
    len: usize,
) -> VimStatus {
    guard(|| {
        let rep = &handle(r, "report")?.0;
        let kind = match test {
            VimTest::Sign => inference::TestKind::Sign,
            VimTest::Wilcoxon => inference::TestKind::Wilcoxon,
            VimTest::Z => inference::TestKind::Z,
        };
        let with_p = lib(inference::with_p_values(rep, kind))?;
        copy_column(&VimReport(with_p), out, len, |f| f.p_value.unwrap_or(f64::NAN))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes_follow_wrapped_errors() {
        let e = VimError::Method {
            method: MethodId::LocoW,
            source: Box::new(VimError::InsufficientRows { needed: 4, found: 2 }),
        };
        assert_eq!(status_of(&e), VimStatus::InsufficientData);
        assert_eq!(status_of(&VimError::Config("x".into())), VimStatus::InvalidConfig);
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), VimStatus::Panic);
        let msg = unsafe { CStr::from_ptr(vim_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }
}
