//! C ABI over the soundmix inference path.
//!
//! Models are opaque handles created by [`soundmix_model_load`] and
//! released with [`soundmix_model_free`]. Every fallible call returns a
//! [`SoundmixStatus`]; on failure a description is available from
//! [`soundmix_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use soundmix::audio_io::{canonical_segment, resample, AudioSegment, RawAudio, CANONICAL_RATE};
use soundmix::features::FeatureConfig;
use soundmix::pipeline::Predictor;
use soundmix::Error;

/// Result codes returned across the ABI.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SoundmixStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    BadFormat = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

/// A loaded classifier. Opaque to C callers.
pub struct SoundmixModel {
    predictor: Predictor,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> SoundmixStatus {
    match err {
        Error::Io { .. } => SoundmixStatus::Io,
        Error::MalformedContainer(_)
        | Error::UnsupportedEncoding(_)
        | Error::Checkpoint(_)
        | Error::ConfigMismatch
        | Error::NameCountMismatch { .. }
        | Error::Json(_) => SoundmixStatus::BadFormat,
        Error::EmptyAudio | Error::InvalidRate(_) | Error::TooShort { .. } | Error::SampleOutOfRange { .. } => {
            SoundmixStatus::InvalidArgument
        }
        _ => SoundmixStatus::Internal,
    }
}

/// Runs `f`, recording errors and converting panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), (SoundmixStatus, String)>) -> SoundmixStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SoundmixStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SoundmixStatus::Internal
        }
    }
}

fn fail(err: Error) -> (SoundmixStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (SoundmixStatus, String) {
    (SoundmixStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (SoundmixStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| (SoundmixStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn samples_arg<'a>(samples: *const f64, len: usize) -> Result<&'a [f64], (SoundmixStatus, String)> {
    if samples.is_null() {
        return Err(null("samples"));
    }
    if len == 0 {
        return Err((SoundmixStatus::InvalidArgument, "no samples".into()));
    }
    let s = std::slice::from_raw_parts(samples, len);
    if let Some(i) = s.iter().position(|v| !v.is_finite()) {
        return Err((SoundmixStatus::InvalidArgument, format!("sample {i} is not finite")));
    }
    Ok(s)
}

unsafe fn write_probs(
    probs: Vec<f64>,
    out: *mut f64,
    capacity: usize,
) -> Result<(), (SoundmixStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    if capacity < probs.len() {
        return Err((
            SoundmixStatus::BufferTooSmall,
            format!("need {} slots, got {capacity}", probs.len()),
        ));
    }
    std::ptr::copy_nonoverlapping(probs.as_ptr(), out, probs.len());
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn soundmix_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Loads a checkpoint written by `soundmix train`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn soundmix_model_load(path: *const c_char, out: *mut *mut SoundmixModel) -> SoundmixStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let path = path_arg(path)?;
        let predictor = Predictor::load(&path).map_err(fail)?;
        let names = predictor
            .preprocess
            .class_names
            .iter()
            .map(|n| CString::new(n.replace('\0', " ")).expect("interior NULs replaced"))
            .collect();
        *out = Box::into_raw(Box::new(SoundmixModel { predictor, names }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`soundmix_model_load`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn soundmix_model_free(model: *mut SoundmixModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of output classes, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn soundmix_model_num_classes(model: *const SoundmixModel) -> usize {
    model.as_ref().map_or(0, |m| m.predictor.num_classes())
}

/// Decision threshold stored with the model, or NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn soundmix_model_threshold(model: *const SoundmixModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.predictor.preprocess.threshold)
}

/// Name of class `index`, owned by the model. Null when out of range.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn soundmix_model_class_name(model: *const SoundmixModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.names.get(index))
        .map_or(std::ptr::null(), |s| s.as_ptr())
}

/// Class probabilities for the first 4 s of a WAV file.
///
/// # Safety
/// `path` must be NUL-terminated; `probs` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn soundmix_predict_wav(
    model: *const SoundmixModel,
    path: *const c_char,
    probs: *mut f64,
    capacity: usize,
) -> SoundmixStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let path = path_arg(path)?;
        let p = m.predictor.predict_wav(&path).map_err(fail)?;
        write_probs(p, probs, capacity)
    })
}

/// Class probabilities for mono samples at `sample_rate`. The signal is
/// resampled to 44.1 kHz and cut or padded to 4 s.
///
/// # Safety
/// `samples` must hold `len` doubles; `probs` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn soundmix_predict_samples(
    model: *const SoundmixModel,
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    probs: *mut f64,
    capacity: usize,
) -> SoundmixStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let s = samples_arg(samples, len)?;
        let seg = canonical_segment(RawAudio::new(s.to_vec(), sample_rate)).map_err(fail)?;
        let p = m.predictor.predict_segment(&seg).map_err(fail)?;
        write_probs(p, probs, capacity)
    })
}

/// Log-Mel spectrogram of mono samples, written row-major as
/// `[mels, frames]`. `rows` and `cols` always receive the shape, so a call
/// with `capacity == 0` sizes the buffer.
///
/// # Safety
/// `samples` must hold `len` doubles, `out` must hold `capacity` doubles
/// (or be null when `capacity` is 0), and `rows`/`cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn soundmix_log_mel(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut f64,
    capacity: usize,
    rows: *mut usize,
    cols: *mut usize,
) -> SoundmixStatus {
    guard(|| {
        if rows.is_null() || cols.is_null() {
            return Err(null("shape output"));
        }
        let s = samples_arg(samples, len)?;
        let raw = resample(&RawAudio::new(s.to_vec(), sample_rate), CANONICAL_RATE).map_err(fail)?;
        let seg = AudioSegment::from_samples(raw.samples, CANONICAL_RATE);
        let features = FeatureConfig::log_mel()
            .extractor()
            .and_then(|ex| ex.extract(&seg))
            .map_err(fail)?;
        let values = features.values;
        *rows = values.rows();
        *cols = values.cols();
        let n = values.as_slice().len();
        if capacity < n {
            return Err((SoundmixStatus::BufferTooSmall, format!("need {n} slots, got {capacity}")));
        }
        if out.is_null() {
            return Err(null("output buffer"));
        }
        std::ptr::copy_nonoverlapping(values.as_slice().as_ptr(), out, n);
        Ok(())
    })
}
