//! C ABI over chart loading and the report commands.
//!
//! Every call returns an [`McStatus`]. On failure the message is kept per
//! thread and read back with [`mc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use metacurv::chart::{bundled, ChartFile};
use metacurv::cli::{self, Command, Options};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidChart = 3,
    UnknownChart = 4,
    UnknownCommand = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum McCommand {
    Validate = 0,
    Connection = 1,
    Hawkins = 2,
    Metacurvature = 3,
    TensorT = 4,
    Reconstruct = 5,
}

/// Non-positive `tol`/`step` and zero `grid` select the defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct McOptions {
    pub tol: f64,
    pub grid: usize,
    pub step: f64,
    pub seed: u64,
}

/// Opaque chart handle.
pub struct McChart {
    file: ChartFile,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn guard(f: impl FnOnce() -> Result<(), (McStatus, String)>) -> McStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => McStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            McStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, (McStatus, String)> {
    if s.is_null() {
        return Err((McStatus::NullPointer, "null string argument".into()));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|e| (McStatus::InvalidUtf8, e.to_string()))
}

fn command_of(c: u32) -> Result<Command, (McStatus, String)> {
    Ok(match c {
        0 => Command::Validate,
        1 => Command::Connection,
        2 => Command::Hawkins,
        3 => Command::Metacurvature,
        4 => Command::TensorT,
        5 => Command::Reconstruct,
        _ => return Err((McStatus::UnknownCommand, format!("unknown command {c}"))),
    })
}

/// Parses a chart document. The handle is released with [`mc_chart_free`].
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_chart_from_json(json: *const c_char, out: *mut *mut McChart) -> McStatus {
    guard(|| {
        if out.is_null() {
            return Err((McStatus::NullPointer, "null output pointer".into()));
        }
        *out = ptr::null_mut();
        let file = ChartFile::from_json(text(json)?).map_err(|e| (McStatus::InvalidChart, e.to_string()))?;
        *out = Box::into_raw(Box::new(McChart { file }));
        Ok(())
    })
}

/// Opens one of the charts shipped with the library by name.
///
/// # Safety
/// `name` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mc_chart_bundled(name: *const c_char, out: *mut *mut McChart) -> McStatus {
    guard(|| {
        if out.is_null() {
            return Err((McStatus::NullPointer, "null output pointer".into()));
        }
        *out = ptr::null_mut();
        let name = text(name)?;
        let file = bundled(name).ok_or_else(|| (McStatus::UnknownChart, format!("no bundled chart `{name}`")))?;
        *out = Box::into_raw(Box::new(McChart { file }));
        Ok(())
    })
}

/// # Safety
/// `chart` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mc_chart_free(chart: *mut McChart) {
    if !chart.is_null() {
        drop(Box::from_raw(chart));
    }
}

/// Number of chart coordinates, zero for a null handle.
///
/// # Safety
/// `chart` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mc_chart_dim(chart: *const McChart) -> usize {
    chart.as_ref().map_or(0, |c| c.file.coordinates.len())
}

/// Runs `command`, an [`McCommand`] value, on the chart. The JSON report
/// goes to `report` (release it with [`mc_string_free`]) and the exit code of
/// the equivalent command-line call to `exit_code`.
///
/// # Safety
/// `chart` must be a live handle; `options` may be null; `report` and
/// `exit_code` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn mc_run(
    chart: *const McChart,
    command: u32,
    options: *const McOptions,
    report: *mut *mut c_char,
    exit_code: *mut i32,
) -> McStatus {
    guard(|| {
        if report.is_null() || exit_code.is_null() {
            return Err((McStatus::NullPointer, "null output pointer".into()));
        }
        *report = ptr::null_mut();
        let chart = chart
            .as_ref()
            .ok_or_else(|| (McStatus::NullPointer, "null chart handle".into()))?;
        let cmd = command_of(command)?;
        let opts = options.as_ref().map_or_else(Options::default, |o| Options {
            tol: (o.tol > 0.0).then_some(o.tol),
            grid: (o.grid > 0).then_some(o.grid),
            step: (o.step > 0.0).then_some(o.step),
            seed: o.seed,
        });
        let out = cli::run(cmd, chart.file.clone(), &opts);
        let json = serde_json::to_string(&out.report).expect("reports serialize");
        *report = CString::new(json).expect("json has no nul bytes").into_raw();
        *exit_code = out.exit;
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library.
#[no_mangle]
pub extern "C" fn mc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn mc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
