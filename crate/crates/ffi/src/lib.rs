//! C ABI over the `glai` library.
//!
//! All functions return a status code (`GLAI_OK` on success). On failure
//! the message is available from `glai_last_error` on the same thread.
//! Handles are opaque; free each one with its `_free` function. Feature
//! matrices are row-major `n_samples * n_features` doubles.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use glai::data::Dataset;
use glai::estimator::{estimator_direct_solve, merge_estimators};
use glai::paths::init_estimator_with_cap;
use glai::selector::capture_patterns;
use glai::{persist, Error, LinearEstimator, Matrix, Network, NetworkSpec, PatternSet};

pub const GLAI_OK: i32 = 0;
pub const GLAI_ERR_NULL: i32 = 1;
pub const GLAI_ERR_CONFIG: i32 = 2;
pub const GLAI_ERR_SHAPE: i32 = 3;
pub const GLAI_ERR_INPUT: i32 = 4;
pub const GLAI_ERR_CAPACITY: i32 = 5;
pub const GLAI_ERR_RANK_DEFICIENT: i32 = 6;
pub const GLAI_ERR_FORMAT: i32 = 7;
pub const GLAI_ERR_VERSION: i32 = 8;
pub const GLAI_ERR_IO: i32 = 9;
pub const GLAI_ERR_UTF8: i32 = 10;
pub const GLAI_ERR_PANIC: i32 = 11;

/// Trained or freshly initialized network.
pub struct GlaiNetwork(Network);

/// Activation patterns of a set of samples.
pub struct GlaiPatterns(PatternSet);

/// Path-weight estimator.
pub struct GlaiEstimator(LinearEstimator);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => GLAI_ERR_CONFIG,
        Error::Shape { .. } => GLAI_ERR_SHAPE,
        Error::Input(_) => GLAI_ERR_INPUT,
        Error::Capacity { .. } => GLAI_ERR_CAPACITY,
        Error::RankDeficient { .. } => GLAI_ERR_RANK_DEFICIENT,
        Error::Format { .. } => GLAI_ERR_FORMAT,
        Error::Version(_) => GLAI_ERR_VERSION,
        Error::Io { .. } => GLAI_ERR_IO,
    }
}

enum Fail {
    Null(&'static str),
    Utf8,
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GLAI_OK,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            GLAI_ERR_NULL
        }
        Ok(Err(Fail::Utf8)) => {
            set_error("path is not valid UTF-8".into());
            GLAI_ERR_UTF8
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            code(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            GLAI_ERR_PANIC
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn path_str<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null("path"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn features(x: *const f64, n_samples: usize, n_features: usize) -> Result<Matrix, Fail> {
    let len = n_samples
        .checked_mul(n_features)
        .ok_or_else(|| Fail::Lib(Error::Input("feature matrix size overflows".into())))?;
    let data = slice(x, len, "features")?;
    Ok(Matrix::from_vec(n_samples, n_features, data.to_vec())?)
}

unsafe fn dataset(x: *const f64, labels: *const u32, n_samples: usize, n_features: usize, n_classes: usize) -> Result<Dataset, Fail> {
    let m = features(x, n_samples, n_features)?;
    let labels = slice(labels, n_samples, "labels")?.iter().map(|&l| l as usize).collect();
    Ok(Dataset::new(m, labels, n_classes)?)
}

/// Message of the last failed call on this thread ("" if none). The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn glai_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Kaiming-uniform network with layer sizes `sizes[0..n_sizes]`.
///
/// # Safety
/// `sizes` must point to `n_sizes` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glai_network_new(sizes: *const usize, n_sizes: usize, seed: u64, out: *mut *mut GlaiNetwork) -> i32 {
    guard(|| {
        let sizes = slice(sizes, n_sizes, "sizes")?.to_vec();
        let spec = NetworkSpec::new(sizes, seed)?;
        put(out, GlaiNetwork(Network::init(&spec)))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glai_network_load(path: *const c_char, out: *mut *mut GlaiNetwork) -> i32 {
    guard(|| put(out, GlaiNetwork(persist::load_network(path_str(path)?)?)))
}

/// # Safety
/// `net` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn glai_network_save(net: *const GlaiNetwork, path: *const c_char) -> i32 {
    guard(|| Ok(persist::save_network(&as_ref(net, "net")?.0, path_str(path)?)?))
}

/// # Safety
/// `net` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glai_network_free(net: *mut GlaiNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of input features (0 for a null handle).
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn glai_network_inputs(net: *const GlaiNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.spec().inputs())
}

/// Number of outputs (0 for a null handle).
///
/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn glai_network_outputs(net: *const GlaiNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.spec().outputs())
}

/// Writes the logits of one sample into `logits[0..n_logits]`.
///
/// # Safety
/// `x` must hold `n_x` doubles and `logits` must have room for `n_logits`.
#[no_mangle]
pub unsafe extern "C" fn glai_network_forward(net: *const GlaiNetwork, x: *const f64, n_x: usize, logits: *mut f64, n_logits: usize) -> i32 {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let (out, _) = net.forward(slice(x, n_x, "x")?)?;
        let dst = slice_mut(logits, n_logits, "logits")?;
        if dst.len() != out.len() {
            return Err(Error::Shape { expected: format!("{} logits", out.len()), found: dst.len().to_string() }.into());
        }
        dst.copy_from_slice(&out);
        Ok(())
    })
}

/// Mini-batch SGD on the network in place.
///
/// # Safety
/// `x` must hold `n_samples * n_features` doubles and `labels` `n_samples` values.
#[no_mangle]
pub unsafe extern "C" fn glai_network_train(
    net: *mut GlaiNetwork,
    x: *const f64,
    labels: *const u32,
    n_samples: usize,
    n_features: usize,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    seed: u64,
) -> i32 {
    guard(|| {
        let net = net.as_mut().ok_or(Fail::Null("net"))?;
        let data = dataset(x, labels, n_samples, n_features, net.0.spec().outputs())?;
        let cfg = glai::TrainConfig { epochs, lr, batch_size, seed };
        let (trained, _) = glai::nn::train_epochs(&net.0, &data, &cfg, None)?;
        net.0 = trained;
        Ok(())
    })
}

/// Captures the activation patterns of `n_samples` rows through `net`.
///
/// # Safety
/// `x` must hold `n_samples * n_features` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glai_patterns_capture(
    net: *const GlaiNetwork,
    x: *const f64,
    n_samples: usize,
    n_features: usize,
    out: *mut *mut GlaiPatterns,
) -> i32 {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let data = Dataset::new(features(x, n_samples, n_features)?, vec![0; n_samples], 1)?;
        put(out, GlaiPatterns(capture_patterns(net, &data)?))
    })
}

/// # Safety
/// `ps` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn glai_patterns_len(ps: *const GlaiPatterns) -> usize {
    ps.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glai_patterns_load(path: *const c_char, out: *mut *mut GlaiPatterns) -> i32 {
    guard(|| put(out, GlaiPatterns(persist::load_patterns(path_str(path)?)?)))
}

/// # Safety
/// `ps` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn glai_patterns_save(ps: *const GlaiPatterns, path: *const c_char) -> i32 {
    guard(|| Ok(persist::save_patterns(&as_ref(ps, "patterns")?.0, path_str(path)?)?))
}

/// # Safety
/// `ps` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glai_patterns_free(ps: *mut GlaiPatterns) {
    if !ps.is_null() {
        drop(Box::from_raw(ps));
    }
}

/// Enumerates the paths of `net` (at most `max_paths`) and sets each
/// weight to the product of its route's weights.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glai_estimator_from_network(net: *const GlaiNetwork, max_paths: usize, out: *mut *mut GlaiEstimator) -> i32 {
    guard(|| put(out, GlaiEstimator(init_estimator_with_cap(&as_ref(net, "net")?.0, max_paths)?)))
}

/// # Safety
/// `est` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn glai_estimator_path_count(est: *const GlaiEstimator) -> usize {
    est.as_ref().map_or(0, |e| e.0.pw().len())
}

/// Copies the path weights into `pw[0..n_pw]`; `n_pw` must equal the path count.
///
/// # Safety
/// `pw` must have room for `n_pw` doubles.
#[no_mangle]
pub unsafe extern "C" fn glai_estimator_weights(est: *const GlaiEstimator, pw: *mut f64, n_pw: usize) -> i32 {
    guard(|| {
        let src = as_ref(est, "estimator")?.0.pw();
        let dst = slice_mut(pw, n_pw, "pw")?;
        if dst.len() != src.len() {
            return Err(Error::Shape { expected: format!("{} path weights", src.len()), found: dst.len().to_string() }.into());
        }
        dst.copy_from_slice(src);
        Ok(())
    })
}

/// Estimator outputs for sample `index` of `ps` with features `x`.
///
/// # Safety
/// `x` must hold `n_x` doubles and `out_logits` have room for `n_out`.
#[no_mangle]
pub unsafe extern "C" fn glai_estimator_eval(
    est: *const GlaiEstimator,
    ps: *const GlaiPatterns,
    index: usize,
    x: *const f64,
    n_x: usize,
    out_logits: *mut f64,
    n_out: usize,
) -> i32 {
    guard(|| {
        let est = &as_ref(est, "estimator")?.0;
        let ps = &as_ref(ps, "patterns")?.0;
        if index >= ps.len() {
            return Err(Error::Input(format!("pattern index {index} out of range for {} patterns", ps.len())).into());
        }
        let out = est.eval(ps.get(index), slice(x, n_x, "x")?)?;
        let dst = slice_mut(out_logits, n_out, "out_logits")?;
        if dst.len() != out.len() {
            return Err(Error::Shape { expected: format!("{} outputs", out.len()), found: dst.len().to_string() }.into());
        }
        dst.copy_from_slice(&out);
        Ok(())
    })
}

/// Least-squares path weights against one-hot targets, reusing the path
/// table of `est`.
///
/// # Safety
/// `x` must hold `n_samples * n_features` doubles, `labels` `n_samples`
/// values; `ps` must describe the same samples; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glai_estimator_direct_solve(
    est: *const GlaiEstimator,
    x: *const f64,
    labels: *const u32,
    n_samples: usize,
    n_features: usize,
    ps: *const GlaiPatterns,
    ridge: f64,
    out: *mut *mut GlaiEstimator,
) -> i32 {
    guard(|| {
        let est = &as_ref(est, "estimator")?.0;
        let ps = &as_ref(ps, "patterns")?.0;
        let data = dataset(x, labels, n_samples, n_features, est.outputs())?;
        put(out, GlaiEstimator(estimator_direct_solve(est.shared_table(), &data, ps, ridge)?))
    })
}

/// `alpha * a + (1 - alpha) * b`.
///
/// # Safety
/// `a` and `b` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glai_estimator_merge(a: *const GlaiEstimator, b: *const GlaiEstimator, alpha: f64, out: *mut *mut GlaiEstimator) -> i32 {
    guard(|| put(out, GlaiEstimator(merge_estimators(&as_ref(a, "a")?.0, &as_ref(b, "b")?.0, alpha)?)))
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn glai_estimator_load(path: *const c_char, out: *mut *mut GlaiEstimator) -> i32 {
    guard(|| put(out, GlaiEstimator(persist::load_estimator(path_str(path)?)?)))
}

/// # Safety
/// `est` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn glai_estimator_save(est: *const GlaiEstimator, path: *const c_char) -> i32 {
    guard(|| Ok(persist::save_estimator(&as_ref(est, "estimator")?.0, path_str(path)?)?))
}

/// # Safety
/// `est` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glai_estimator_free(est: *mut GlaiEstimator) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}
