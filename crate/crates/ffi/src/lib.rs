//! C ABI for `stbeat`.
//!
//! Analyses are returned as opaque `StbeatAnalysis` handles that the caller
//! releases with `stbeat_analysis_free`. Every fallible call returns a
//! `StbeatStatus`; on an error the message is available from
//! `stbeat_last_error_message` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stbeat::{analyze, load_mono, Analysis, AudioBuffer, Error, IsolationParams, PipelineConfig};

/// Result codes. Negative values are errors.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StbeatStatus {
    Ok = 0,
    /// Analysis ran but no band was periodic; the handle is still returned.
    IsolationFailure = 1,
    NullPointer = -1,
    InvalidConfig = -2,
    Io = -3,
    Decode = -4,
    InsufficientAudio = -5,
    InvalidInput = -6,
    Panic = -99,
}

/// Analysis parameters. `band_rows = 0` derives K from the input length.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StbeatConfig {
    pub downsample: u32,
    pub band_rows: u32,
    pub bands: u32,
    pub min_peak_distance: u32,
    pub thresholds: u32,
    pub epsilon: f64,
}

impl From<StbeatConfig> for PipelineConfig {
    fn from(c: StbeatConfig) -> Self {
        PipelineConfig {
            downsample: c.downsample as usize,
            band_rows: (c.band_rows != 0).then_some(c.band_rows as usize),
            bands: c.bands as usize,
            isolation: IsolationParams {
                min_peak_distance: c.min_peak_distance as usize,
                thresholds: c.thresholds as usize,
                epsilon: c.epsilon,
            },
        }
    }
}

/// Opaque analysis result.
pub struct StbeatAnalysis {
    inner: Analysis,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_last_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> StbeatStatus {
    match e {
        Error::Io { .. } | Error::Output { .. } => StbeatStatus::Io,
        Error::Decode { .. } | Error::UnsupportedEncoding { .. } | Error::EmptyAudio { .. } => StbeatStatus::Decode,
        Error::Config(_) => StbeatStatus::InvalidConfig,
        Error::InsufficientAudio { .. } => StbeatStatus::InsufficientAudio,
        Error::NonFinite { .. } | Error::DegenerateEnvelope | Error::NoPeriod => StbeatStatus::InvalidInput,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guarded<F>(f: F) -> StbeatStatus
where
    F: FnOnce() -> Result<StbeatStatus, (StbeatStatus, String)>,
{
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            StbeatStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (StbeatStatus, String) {
    (status_of(&e), e.to_string())
}

/// Resolves a nullable config pointer.
///
/// # Safety
/// `cfg` is null or points to a valid `StbeatConfig`.
unsafe fn read_config(cfg: *const StbeatConfig) -> StbeatConfig {
    if cfg.is_null() {
        stbeat_config_default()
    } else {
        *cfg
    }
}

/// Analyses `buf` and stores a new handle in `*out`.
///
/// # Safety
/// `out` is a valid pointer.
unsafe fn finish(
    buf: &AudioBuffer,
    cfg: StbeatConfig,
    out: *mut *mut StbeatAnalysis,
) -> Result<StbeatStatus, (StbeatStatus, String)> {
    let analysis = analyze(buf, &cfg.into()).map_err(lib_err)?;
    let status = match &analysis.outcome {
        Ok(_) => StbeatStatus::Ok,
        Err(f) => {
            set_last_error(f.to_string());
            StbeatStatus::IsolationFailure
        }
    };
    *out = Box::into_raw(Box::new(StbeatAnalysis { inner: analysis }));
    Ok(status)
}

/// Default parameters: D = 40, K derived, Q = 10, n_p = 40, H = 100, epsilon = 1e-3.
#[no_mangle]
pub extern "C" fn stbeat_config_default() -> StbeatConfig {
    let d = PipelineConfig::default();
    StbeatConfig {
        downsample: d.downsample as u32,
        band_rows: 0,
        bands: d.bands as u32,
        min_peak_distance: d.isolation.min_peak_distance as u32,
        thresholds: d.isolation.thresholds as u32,
        epsilon: d.isolation.epsilon,
    }
}

/// Analyses `len` mono samples at `sample_rate` Hz. `cfg` may be null for
/// defaults. On `Ok` or `IsolationFailure` a handle is written to `*out`.
///
/// # Safety
/// `samples` points to `len` readable doubles, `cfg` is null or valid, and
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analyze_samples(
    samples: *const f64,
    len: usize,
    sample_rate: f64,
    cfg: *const StbeatConfig,
    out: *mut *mut StbeatAnalysis,
) -> StbeatStatus {
    guarded(|| {
        if samples.is_null() || out.is_null() {
            return Err((StbeatStatus::NullPointer, "null samples or out pointer".into()));
        }
        *out = ptr::null_mut();
        let data = std::slice::from_raw_parts(samples, len).to_vec();
        let buf = AudioBuffer::new(data, sample_rate).map_err(lib_err)?;
        finish(&buf, read_config(cfg), out)
    })
}

/// Loads a WAV file (mono or stereo) and analyses it.
///
/// # Safety
/// `path` is a NUL-terminated string, `cfg` is null or valid, and `out` is a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analyze_file(
    path: *const c_char,
    cfg: *const StbeatConfig,
    out: *mut *mut StbeatAnalysis,
) -> StbeatStatus {
    guarded(|| {
        if path.is_null() || out.is_null() {
            return Err((StbeatStatus::NullPointer, "null path or out pointer".into()));
        }
        *out = ptr::null_mut();
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| (StbeatStatus::InvalidInput, "path is not valid UTF-8".to_string()))?;
        let buf = load_mono(path).map_err(lib_err)?;
        finish(&buf, read_config(cfg), out)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `analysis` is null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_free(analysis: *mut StbeatAnalysis) {
    if !analysis.is_null() {
        drop(Box::from_raw(analysis));
    }
}

/// # Safety
/// `analysis` is null or a live handle.
unsafe fn get<'a>(analysis: *const StbeatAnalysis) -> Option<&'a Analysis> {
    analysis.as_ref().map(|a| &a.inner)
}

/// True when a tempo was estimated.
///
/// # Safety
/// `analysis` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_has_tempo(analysis: *const StbeatAnalysis) -> bool {
    get(analysis).is_some_and(|a| a.outcome.is_ok())
}

/// Estimated tempo in BPM, or NaN.
///
/// # Safety
/// `analysis` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_bpm(analysis: *const StbeatAnalysis) -> f64 {
    get(analysis)
        .and_then(|a| a.outcome.as_ref().ok())
        .map_or(f64::NAN, |t| t.bpm)
}

/// 1-based index of the selected band, or 0.
///
/// # Safety
/// `analysis` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_selected_band(analysis: *const StbeatAnalysis) -> u32 {
    get(analysis)
        .and_then(|a| a.outcome.as_ref().ok())
        .map_or(0, |t| t.selected_band as u32)
}

/// Regularity score of the selected band, or NaN.
///
/// # Safety
/// `analysis` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_score(analysis: *const StbeatAnalysis) -> f64 {
    get(analysis)
        .and_then(|a| a.outcome.as_ref().ok())
        .map_or(f64::NAN, |t| t.score)
}

/// Number of bands Q, or 0 for null.
///
/// # Safety
/// `analysis` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_num_bands(analysis: *const StbeatAnalysis) -> usize {
    get(analysis).map_or(0, |a| a.band_scores.len())
}

/// Score of 1-based `band`, or NaN when out of range.
///
/// # Safety
/// `analysis` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_band_score(analysis: *const StbeatAnalysis, band: usize) -> f64 {
    get(analysis)
        .and_then(|a| band.checked_sub(1).and_then(|i| a.band_scores.get(i)))
        .map_or(f64::NAN, |b| b.score)
}

/// Sample rate after downsampling in Hz, or NaN.
///
/// # Safety
/// `analysis` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_effective_rate(analysis: *const StbeatAnalysis) -> f64 {
    get(analysis).map_or(f64::NAN, |a| a.effective_rate)
}

/// Envelope length M, or 0.
///
/// # Safety
/// `analysis` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_decimated_len(analysis: *const StbeatAnalysis) -> usize {
    get(analysis).map_or(0, |a| a.decimated_len())
}

/// Copies up to `cap` values into `buf` and returns the full length.
///
/// # Safety
/// `buf` is null or points to `cap` writable doubles.
unsafe fn copy_out(values: &[f64], buf: *mut f64, cap: usize) -> usize {
    if !buf.is_null() {
        let n = values.len().min(cap);
        ptr::copy_nonoverlapping(values.as_ptr(), buf, n);
    }
    values.len()
}

/// Gap vector of the selected band in samples. Writes at most `cap` values
/// to `buf` (which may be null) and returns the total count; 0 without a
/// tempo.
///
/// # Safety
/// `analysis` is null or a live handle; `buf` is null or has `cap` slots.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_gaps(analysis: *const StbeatAnalysis, buf: *mut f64, cap: usize) -> usize {
    match get(analysis).and_then(|a| a.outcome.as_ref().ok()) {
        Some(t) => copy_out(&t.best_gaps, buf, cap),
        None => 0,
    }
}

/// Onset envelope of 1-based `band`, copied like `stbeat_analysis_gaps`.
/// Returns 0 for an invalid band.
///
/// # Safety
/// `analysis` is null or a live handle; `buf` is null or has `cap` slots.
#[no_mangle]
pub unsafe extern "C" fn stbeat_analysis_envelope(
    analysis: *const StbeatAnalysis,
    band: usize,
    buf: *mut f64,
    cap: usize,
) -> usize {
    match get(analysis).and_then(|a| band.checked_sub(1).and_then(|i| a.envelopes.get(i))) {
        Some(e) => copy_out(&e.values, buf, cap),
        None => 0,
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn stbeat_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// True when `estimate` is within 4% of `truth`.
#[no_mangle]
pub extern "C" fn stbeat_accuracy1(estimate: f64, truth: f64) -> bool {
    stbeat::accuracy1(estimate, truth)
}

/// True when `estimate` is within 4% of 1/3, 1/2, 1, 2 or 3 times `truth`.
#[no_mangle]
pub extern "C" fn stbeat_accuracy2(estimate: f64, truth: f64) -> bool {
    stbeat::accuracy2(estimate, truth)
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn stbeat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
