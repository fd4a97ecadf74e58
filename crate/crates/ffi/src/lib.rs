//! C interface to the suggestion engine.
//!
//! Every function returns a [`QacStatus`]; on failure a description is
//! available from [`qac_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Strings passed in are
//! NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qac_core::service::{SuggestRequest, SuggestService};
use qac_core::sim::DeviceType;
use qac_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QacStatus {
    Ok = 0,
    InvalidArgument = 1,
    Io = 2,
    Format = 3,
    LayoutMismatch = 4,
    Unavailable = 5,
    Internal = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QacDevice {
    IosApp = 0,
    AndroidApp = 1,
    DesktopBrowser = 2,
    MobileBrowser = 3,
}

impl From<QacDevice> for DeviceType {
    fn from(d: QacDevice) -> Self {
        match d {
            QacDevice::IosApp => DeviceType::IosApp,
            QacDevice::AndroidApp => DeviceType::AndroidApp,
            QacDevice::DesktopBrowser => DeviceType::DesktopBrowser,
            QacDevice::MobileBrowser => DeviceType::MobileBrowser,
        }
    }
}

/// A loaded index and model.
pub struct QacEngine {
    service: SuggestService,
    version: CString,
}

struct Item {
    text: CString,
    score: f64,
    exact: bool,
}

/// The ranked suggestions of one request.
pub struct QacSuggestions {
    items: Vec<Item>,
    latency_micros: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> QacStatus {
    match e {
        Error::Argument(_) | Error::Config(_) | Error::UnknownQuery(_) => QacStatus::InvalidArgument,
        Error::Io { .. } => QacStatus::Io,
        Error::Parse { .. } | Error::Format { .. } => QacStatus::Format,
        Error::LayoutMismatch { .. } | Error::Dimension { .. } => QacStatus::LayoutMismatch,
        Error::Unavailable(_) => QacStatus::Unavailable,
        _ => QacStatus::Internal,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (QacStatus, String)>) -> QacStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            QacStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QacStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (QacStatus, String) {
    (status_of(&e), e.to_string())
}

fn bad_arg(message: &str) -> (QacStatus, String) {
    (QacStatus::InvalidArgument, message.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (QacStatus, String)> {
    if p.is_null() {
        return Err(bad_arg(&format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| bad_arg(&format!("{name} is not UTF-8")))
}

/// Description of the last failure on this thread; empty after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn qac_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load an index and model file into a new engine.
///
/// # Safety
/// Paths must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qac_engine_open(
    index_path: *const c_char,
    model_path: *const c_char,
    out: *mut *mut QacEngine,
) -> QacStatus {
    guard(|| {
        if out.is_null() {
            return Err(bad_arg("out is null"));
        }
        *out = ptr::null_mut();
        let index = str_arg(index_path, "index_path")?;
        let model = str_arg(model_path, "model_path")?;
        let service = SuggestService::from_files(index, model).map_err(core_err)?;
        let version = CString::new(service.model_version().unwrap_or_default()).unwrap_or_default();
        *out = Box::into_raw(Box::new(QacEngine { service, version }));
        Ok(())
    })
}

/// Re-read the engine's files and swap them in atomically.
///
/// # Safety
/// `engine` must come from [`qac_engine_open`] and not be used concurrently
/// with [`qac_engine_free`].
#[no_mangle]
pub unsafe extern "C" fn qac_engine_reload(engine: *mut QacEngine) -> QacStatus {
    guard(|| {
        let engine = engine.as_mut().ok_or_else(|| bad_arg("engine is null"))?;
        let version = engine.service.reload().map_err(core_err)?;
        engine.version = CString::new(version).unwrap_or_default();
        Ok(())
    })
}

/// Model version tag; owned by the engine.
///
/// # Safety
/// `engine` must be a live engine or null.
#[no_mangle]
pub unsafe extern "C" fn qac_engine_model_version(engine: *const QacEngine) -> *const c_char {
    match engine.as_ref() {
        Some(e) => e.version.as_ptr(),
        None => ptr::null(),
    }
}

/// # Safety
/// `engine` must come from [`qac_engine_open`] (or be null) and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn qac_engine_free(engine: *mut QacEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Rank suggestions for `prefix`. `previous_query` may be null; `month` 0
/// means the current month; `limit` is at most 50.
///
/// # Safety
/// `engine` must be live, strings NUL-terminated, `out` writable. The engine
/// may be shared across threads for this call.
#[no_mangle]
pub unsafe extern "C" fn qac_suggest(
    engine: *const QacEngine,
    prefix: *const c_char,
    device: QacDevice,
    previous_query: *const c_char,
    month: u8,
    limit: usize,
    out: *mut *mut QacSuggestions,
) -> QacStatus {
    guard(|| {
        if out.is_null() {
            return Err(bad_arg("out is null"));
        }
        *out = ptr::null_mut();
        let engine = engine.as_ref().ok_or_else(|| bad_arg("engine is null"))?;
        let request = SuggestRequest {
            prefix: str_arg(prefix, "prefix")?.to_string(),
            device_type: device.into(),
            previous_query: if previous_query.is_null() {
                None
            } else {
                Some(str_arg(previous_query, "previous_query")?.to_string())
            },
            month: (month != 0).then_some(month),
            limit,
        };
        let response = engine.service.suggest(&request).map_err(core_err)?;
        let items = response
            .suggestions
            .into_iter()
            .map(|s| Item {
                text: CString::new(s.text).unwrap_or_default(),
                score: s.score,
                exact: s.is_exact_match,
            })
            .collect();
        *out = Box::into_raw(Box::new(QacSuggestions {
            items,
            latency_micros: response.latency_micros,
        }));
        Ok(())
    })
}

/// Number of suggestions; 0 for null.
///
/// # Safety
/// `s` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn qac_suggestions_len(s: *const QacSuggestions) -> usize {
    s.as_ref().map_or(0, |s| s.items.len())
}

/// Text of suggestion `i`, owned by `s`; null when out of range.
///
/// # Safety
/// `s` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn qac_suggestion_text(s: *const QacSuggestions, i: usize) -> *const c_char {
    s.as_ref()
        .and_then(|s| s.items.get(i))
        .map_or(ptr::null(), |it| it.text.as_ptr())
}

/// Score of suggestion `i`; NaN when out of range.
///
/// # Safety
/// `s` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn qac_suggestion_score(s: *const QacSuggestions, i: usize) -> f64 {
    s.as_ref()
        .and_then(|s| s.items.get(i))
        .map_or(f64::NAN, |it| it.score)
}

/// Whether suggestion `i` starts with the prefix; false when out of range.
///
/// # Safety
/// `s` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn qac_suggestion_is_exact(s: *const QacSuggestions, i: usize) -> bool {
    s.as_ref()
        .and_then(|s| s.items.get(i))
        .is_some_and(|it| it.exact)
}

/// # Safety
/// `s` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn qac_suggestions_latency_micros(s: *const QacSuggestions) -> u64 {
    s.as_ref().map_or(0, |s| s.latency_micros)
}

/// # Safety
/// `s` must come from [`qac_suggest`] (or be null) and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn qac_suggestions_free(s: *mut QacSuggestions) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
