//! C ABI over the simulator.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free`. Every fallible call returns an [`SntStatus`]; on
//! failure [`snt_last_error`] describes the most recent error on the calling
//! thread. Strings returned through `char **` out-parameters are owned by
//! the caller and released with [`snt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use snn_tune::engine::export::events_ndjson;
use snn_tune::engine::{validate, write_exports, ExportFormat, Network, NetworkSpec, Recorder, Recording};
use snn_tune::experiments::{preset, run_preset};
use snn_tune::SnnError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SntStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    UnknownPreset = 5,
    Divergence = 6,
    Parameter = 7,
    Io = 8,
    Finished = 9,
    Internal = 10,
}

/// A built network plus the recording of the steps taken so far.
pub struct SntNetwork {
    network: Network,
    recorder: Recorder,
}

pub struct SntRecording {
    recording: Recording,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &SnnError) -> SntStatus {
    match e {
        SnnError::Json(_) => SntStatus::Parse,
        SnnError::Validation(_) => SntStatus::Validation,
        SnnError::UnknownPreset { .. } => SntStatus::UnknownPreset,
        SnnError::Divergence { .. } => SntStatus::Divergence,
        SnnError::Io(_) => SntStatus::Io,
        _ => SntStatus::Parameter,
    }
}

fn fail(e: SnnError) -> SntStatus {
    let mut message = e.to_string();
    if let SnnError::Validation(diags) = &e {
        for d in diags {
            message.push_str("\n  ");
            message.push_str(&d.to_string());
        }
    }
    set_error(message);
    status_of(&e)
}

/// Runs `body` with panics converted to `Internal`.
fn guard(body: impl FnOnce() -> SntStatus) -> SntStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            SntStatus::Internal
        }
    }
}

unsafe fn read_str<'a>(text: *const c_char) -> Result<&'a str, SntStatus> {
    if text.is_null() {
        set_error("null string argument");
        return Err(SntStatus::NullPointer);
    }
    CStr::from_ptr(text).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        SntStatus::InvalidUtf8
    })
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> SntStatus {
    match CString::new(text) {
        Ok(c) => {
            *out = c.into_raw();
            SntStatus::Ok
        }
        Err(_) => {
            set_error("output contains an interior NUL byte");
            SntStatus::Internal
        }
    }
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            set_error(concat!("null pointer: ", stringify!($p)));
            return SntStatus::NullPointer;
        })+
    };
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

unsafe fn boxed_network(spec: &NetworkSpec, out: *mut *mut SntNetwork) -> SntStatus {
    match Network::new(spec) {
        Ok(network) => {
            let recorder = Recorder::new(&network);
            *out = Box::into_raw(Box::new(SntNetwork { network, recorder }));
            SntStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn snt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a network from a JSON spec.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snt_network_from_json(spec_json: *const c_char, out: *mut *mut SntNetwork) -> SntStatus {
    guard(|| {
        non_null!(out);
        let text = try_status!(read_str(spec_json));
        match NetworkSpec::from_json(text) {
            Ok(spec) => boxed_network(&spec, out),
            Err(e) => fail(e),
        }
    })
}

/// Builds the network of a catalog preset.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snt_network_from_preset(name: *const c_char, out: *mut *mut SntNetwork) -> SntStatus {
    guard(|| {
        non_null!(out);
        let name = try_status!(read_str(name));
        match preset(name) {
            Ok(p) => boxed_network(&p.spec, out),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `network` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn snt_network_free(network: *mut SntNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// Advances one step. `spikes_out`, if not NULL, receives the number of
/// spikes emitted across all populations. Returns `Finished` once the
/// configured duration is exhausted.
///
/// # Safety
/// `network` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn snt_network_step(network: *mut SntNetwork, spikes_out: *mut u64) -> SntStatus {
    guard(|| {
        non_null!(network);
        let handle = &mut *network;
        if handle.network.is_finished() {
            set_error("network has reached its configured duration");
            return SntStatus::Finished;
        }
        let spikes = match handle.network.step() {
            Ok(s) => s.iter().flatten().filter(|&&b| b).count() as u64,
            Err(e) => return fail(e),
        };
        handle.recorder.capture(&handle.network);
        if !spikes_out.is_null() {
            *spikes_out = spikes;
        }
        SntStatus::Ok
    })
}

/// Runs the remaining steps and returns the whole recording. On divergence
/// the partial recording is still returned together with `Divergence`.
///
/// # Safety
/// `network` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snt_network_run(network: *mut SntNetwork, out: *mut *mut SntRecording) -> SntStatus {
    guard(|| {
        non_null!(network, out);
        let handle = &mut *network;
        let mut status = SntStatus::Ok;
        let mut error = None;
        while !handle.network.is_finished() {
            if let Err(e) = handle.network.step() {
                error = Some(e.to_string());
                status = fail(e);
                break;
            }
            handle.recorder.capture(&handle.network);
        }
        let mut recording = handle.recorder.snapshot();
        recording.meta.complete = error.is_none();
        recording.meta.error = error;
        *out = Box::into_raw(Box::new(SntRecording { recording }));
        status
    })
}

/// Changes a numeric parameter before the next step, e.g.
/// `projections.inh_to_exc.weight`. Out-of-range neuron parameters give
/// `Validation`; unknown paths and sign flips give `Parameter`.
///
/// # Safety
/// `network` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn snt_network_set_param(network: *mut SntNetwork, path: *const c_char, value: f64) -> SntStatus {
    guard(|| {
        non_null!(network);
        let path = try_status!(read_str(path));
        match (*network).network.set_param(path, value) {
            Ok(()) => SntStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Steps executed so far, 0 for NULL.
///
/// # Safety
/// `network` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snt_network_current_step(network: *const SntNetwork) -> u64 {
    network.as_ref().map_or(0, |h| h.network.current_step())
}

/// Configured number of steps, 0 for NULL.
///
/// # Safety
/// `network` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snt_network_total_steps(network: *const SntNetwork) -> u64 {
    network.as_ref().map_or(0, |h| h.network.total_steps())
}

/// Validates a JSON spec. `diagnostics_out` receives a JSON array of
/// diagnostics; the status is `Validation` when any of them is an error.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; `diagnostics_out` writable.
#[no_mangle]
pub unsafe extern "C" fn snt_validate(spec_json: *const c_char, diagnostics_out: *mut *mut c_char) -> SntStatus {
    guard(|| {
        non_null!(diagnostics_out);
        let text = try_status!(read_str(spec_json));
        let spec = match NetworkSpec::from_json(text) {
            Ok(s) => s,
            Err(e) => return fail(e),
        };
        let diags = validate(&spec);
        let json = serde_json::to_string(&diags).expect("diagnostics serialize");
        let written = write_string(diagnostics_out, json);
        if written != SntStatus::Ok {
            return written;
        }
        if diags.iter().any(|d| d.is_error()) {
            fail(SnnError::Validation(diags))
        } else {
            SntStatus::Ok
        }
    })
}

/// Runs a catalog preset with its expectations; `report_out` receives the
/// JSON report. Failed expectations are reported, not signalled by status.
///
/// # Safety
/// `name` must be a NUL-terminated string; `report_out` writable.
#[no_mangle]
pub unsafe extern "C" fn snt_preset_run(name: *const c_char, report_out: *mut *mut c_char) -> SntStatus {
    guard(|| {
        non_null!(report_out);
        let name = try_status!(read_str(name));
        match run_preset(name) {
            Ok(run) => write_string(report_out, run.report_json()),
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `recording` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snt_recording_to_json(recording: *const SntRecording, out: *mut *mut c_char) -> SntStatus {
    guard(|| {
        non_null!(recording, out);
        write_string(out, (*recording).recording.to_json())
    })
}

/// One JSON object per spike event.
///
/// # Safety
/// `recording` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snt_recording_events_ndjson(
    recording: *const SntRecording,
    out: *mut *mut c_char,
) -> SntStatus {
    guard(|| {
        non_null!(recording, out);
        write_string(out, events_ndjson(&(*recording).recording))
    })
}

/// Spike events across all populations, 0 for NULL.
///
/// # Safety
/// `recording` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snt_recording_event_count(recording: *const SntRecording) -> u64 {
    recording.as_ref().map_or(0, |r| r.recording.event_count() as u64)
}

/// Writes exports into `dir` in `format` (`ndjson`, `csv` or `svg`).
///
/// # Safety
/// `recording` must be a live handle; `dir` and `format` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn snt_recording_export(
    recording: *const SntRecording,
    dir: *const c_char,
    format: *const c_char,
) -> SntStatus {
    guard(|| {
        non_null!(recording);
        let dir = try_status!(read_str(dir));
        let format: ExportFormat = match try_status!(read_str(format)).parse() {
            Ok(f) => f,
            Err(e) => return fail(e),
        };
        match write_exports(&(*recording).recording, Path::new(dir), format) {
            Ok(_) => SntStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `recording` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn snt_recording_free(recording: *mut SntRecording) {
    if !recording.is_null() {
        drop(Box::from_raw(recording));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `text` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn snt_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}
