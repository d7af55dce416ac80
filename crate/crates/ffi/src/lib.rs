//! C ABI over the voxdx model runtime: load a trained model, extract
//! features from WAV bytes and classify them.
//!
//! Every function returns a [`VoxdxStatus`]; on failure a message is kept
//! per thread and can be read with [`voxdx_last_error_message`]. Panics are
//! caught at the boundary and reported as [`VoxdxStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use voxdx::dsp::decode_wav;
use voxdx::features::{extract, ClassLabel, ExtractConfig};
use voxdx::pipeline::{load_model, weighted_score, ModelFile};
use voxdx::{Error, ErrorCategory};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoxdxStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Data = 3,
    Convergence = 4,
    Io = 5,
    BufferTooSmall = 6,
    InvalidUtf8 = 7,
    Panic = 8,
}

/// Opaque handle to a loaded model.
pub struct VoxdxModel {
    inner: ModelFile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: VoxdxStatus, msg: impl Into<String>) -> VoxdxStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> VoxdxStatus {
    let status = match e.category() {
        ErrorCategory::Config => VoxdxStatus::Config,
        ErrorCategory::Data => VoxdxStatus::Data,
        ErrorCategory::Convergence => VoxdxStatus::Convergence,
        ErrorCategory::Io => VoxdxStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> VoxdxStatus) -> VoxdxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(VoxdxStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn voxdx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn voxdx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Static name of class `label` (`normal`, `neoplasm`, `phonotrauma`,
/// `vocal_palsy`), or NULL when out of range.
#[no_mangle]
pub extern "C" fn voxdx_label_name(label: u32) -> *const c_char {
    match ClassLabel::from_code(label as usize) {
        Some(ClassLabel::Normal) => c"normal".as_ptr(),
        Some(ClassLabel::Neoplasm) => c"neoplasm".as_ptr(),
        Some(ClassLabel::Phonotrauma) => c"phonotrauma".as_ptr(),
        Some(ClassLabel::VocalPalsy) => c"vocal_palsy".as_ptr(),
        None => std::ptr::null(),
    }
}

/// `0.4 * sensitivity + 0.2 * specificity + 0.4 * recall`.
#[no_mangle]
pub extern "C" fn voxdx_weighted_score(sensitivity: f64, specificity: f64, recall: f64) -> f64 {
    weighted_score(sensitivity, specificity, recall)
}

/// Load a model file. On success `*out` owns a handle to release with
/// [`voxdx_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn voxdx_model_load(
    path: *const c_char,
    out: *mut *mut VoxdxModel,
) -> VoxdxStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(VoxdxStatus::NullPointer, "path and out must not be NULL");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(VoxdxStatus::InvalidUtf8, "path is not valid UTF-8");
        };
        match load_model(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(VoxdxModel { inner }));
                VoxdxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Release a handle from [`voxdx_model_load`]. NULL is ignored.
///
/// # Safety
/// `model` must come from [`voxdx_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn voxdx_model_free(model: *mut VoxdxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Length of the feature vector the model expects (3d), or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn voxdx_model_feature_dim(model: *const VoxdxModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.pipeline.n_features)
}

/// Classify a precomputed feature vector; writes the class code to `*label`.
///
/// # Safety
/// `features` must point to `len` readable doubles; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn voxdx_model_predict_features(
    model: *const VoxdxModel,
    features: *const f64,
    len: usize,
    label: *mut u32,
) -> VoxdxStatus {
    guard(|| {
        let (Some(m), false, false) = (model.as_ref(), features.is_null(), label.is_null()) else {
            return fail(
                VoxdxStatus::NullPointer,
                "model, features and label must not be NULL",
            );
        };
        let row = std::slice::from_raw_parts(features, len);
        match m.inner.pipeline.predict(row) {
            Ok(c) => {
                *label = c.code() as u32;
                VoxdxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Decode WAV bytes, extract features with the model's settings and classify.
///
/// # Safety
/// `wav` must point to `len` readable bytes; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn voxdx_model_predict_wav(
    model: *const VoxdxModel,
    wav: *const u8,
    len: usize,
    label: *mut u32,
) -> VoxdxStatus {
    guard(|| {
        let (Some(m), false, false) = (model.as_ref(), wav.is_null(), label.is_null()) else {
            return fail(
                VoxdxStatus::NullPointer,
                "model, wav and label must not be NULL",
            );
        };
        let bytes = std::slice::from_raw_parts(wav, len);
        let result = decode_wav(bytes)
            .and_then(|clip| extract(&clip, &m.inner.extract))
            .and_then(|fv| m.inner.pipeline.predict(fv.values()));
        match result {
            Ok(c) => {
                *label = c.code() as u32;
                VoxdxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Extract the `3 * n_mfcc` feature vector of a WAV file image with default
/// settings. `*written` receives the required length even when `out_len` is
/// too small (status `BufferTooSmall`).
///
/// # Safety
/// `wav` must point to `wav_len` bytes and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn voxdx_extract_wav(
    wav: *const u8,
    wav_len: usize,
    n_mfcc: usize,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> VoxdxStatus {
    guard(|| {
        if wav.is_null() || out.is_null() || written.is_null() {
            return fail(
                VoxdxStatus::NullPointer,
                "wav, out and written must not be NULL",
            );
        }
        let mut cfg = ExtractConfig::default();
        cfg.mfcc.n_mfcc = n_mfcc;
        let need = 3 * n_mfcc;
        *written = need;
        if out_len < need {
            return fail(
                VoxdxStatus::BufferTooSmall,
                format!("output holds {out_len} values, {need} required"),
            );
        }
        let bytes = std::slice::from_raw_parts(wav, wav_len);
        let result = cfg
            .validate()
            .and_then(|_| decode_wav(bytes))
            .and_then(|clip| extract(&clip, &cfg));
        match result {
            Ok(fv) => {
                std::slice::from_raw_parts_mut(out, need).copy_from_slice(fv.values());
                VoxdxStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
