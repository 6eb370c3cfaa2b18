//! C ABI over `horus-core`.
//!
//! Every fallible function returns a [`HorusStatus`]; on failure a message
//! for the calling thread is available from [`horus_last_error`]. Handles
//! are opaque and must be released with their `*_free` function. Panics
//! never cross the boundary, they surface as `HORUS_STATUS_PANIC`.

use horus_core::control::{pid_update, PidGains, PidState};
use horus_core::fusion::{fuse, FusionPolicy, SourceRegistry};
use horus_core::harness::{load_scenario, run_with_seed, RunResult, Scenario};
use horus_core::perception;
use horus_core::wire::{decode_command, encode_command, SteeringCommand};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorusStatus {
    Ok = 0,
    /// Fusion had no usable source; outputs are left untouched.
    Degenerate = 1,
    NullPointer = -1,
    InvalidUtf8 = -2,
    Parse = -3,
    InvalidArgument = -4,
    Io = -5,
    BufferTooSmall = -6,
    Panic = -7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorusPolicy {
    MaximumConfidence = 0,
    SimpleAverage = 1,
    ConfidenceWeighted = 2,
}

impl From<HorusPolicy> for FusionPolicy {
    fn from(p: HorusPolicy) -> Self {
        match p {
            HorusPolicy::MaximumConfidence => FusionPolicy::MaximumConfidence,
            HorusPolicy::SimpleAverage => FusionPolicy::SimpleAverage,
            HorusPolicy::ConfidenceWeighted => FusionPolicy::ConfidenceWeighted,
        }
    }
}

/// One steering report: left and right power, confidence, then the P, I and
/// D terms that produced it.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HorusCommand {
    pub left: f64,
    pub right: f64,
    pub confidence: f64,
    pub p: f64,
    pub i: f64,
    pub d: f64,
}

impl From<HorusCommand> for SteeringCommand {
    fn from(c: HorusCommand) -> Self {
        SteeringCommand::from_fields([c.left, c.right, c.confidence, c.p, c.i, c.d])
    }
}

impl From<SteeringCommand> for HorusCommand {
    fn from(c: SteeringCommand) -> Self {
        HorusCommand {
            left: c.left,
            right: c.right,
            confidence: c.confidence,
            p: c.p,
            i: c.i,
            d: c.d,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HorusPidOutput {
    pub correction: f64,
    pub integral: f64,
    pub derivative: f64,
}

/// Headline numbers of one run. `crash_time` is NaN when the run completed;
/// means are NaN when no sample was recorded.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HorusRunSummary {
    pub completed: bool,
    pub crash_time: f64,
    pub end_time: f64,
    pub samples: u64,
    pub mean_abs_deviation: f64,
    pub mean_abs_correction: f64,
}

/// Opaque PID controller state plus gains.
pub struct HorusPid {
    state: PidState,
    gains: PidGains,
}

/// Opaque latest-command table of the vehicle node.
pub struct HorusRegistry {
    inner: SourceRegistry,
}

/// Opaque validated scenario.
pub struct HorusScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: HorusStatus, msg: impl Into<String>) -> HorusStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> HorusStatus) -> HorusStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(HorusStatus::Panic, "internal panic"))
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, HorusStatus> {
    if ptr.is_null() {
        return Err(fail(HorusStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(HorusStatus::InvalidUtf8, "string argument is not UTF-8"))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(HorusStatus::NullPointer, concat!("null argument `", stringify!($p), "`"));
        })+
    };
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to fit) and returns its full length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn horus_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Encodes `cmd` as `l;r;err;P;I;D`. `written` receives the text length
/// without the terminator; on `HORUS_STATUS_BUFFER_TOO_SMALL` it holds the
/// required length.
///
/// # Safety
/// `cmd` and `written` must be valid; `buf` must point to `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn horus_encode_command(
    cmd: *const HorusCommand,
    buf: *mut c_char,
    len: usize,
    written: *mut usize,
) -> HorusStatus {
    non_null!(cmd, buf, written);
    guard(|| {
        let text = encode_command(&(*cmd).into());
        *written = text.len();
        if text.len() + 1 > len {
            return fail(HorusStatus::BufferTooSmall, format!("need {} bytes", text.len() + 1));
        }
        std::ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
        *buf.add(text.len()) = 0;
        HorusStatus::Ok
    })
}

/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn horus_decode_command(text: *const c_char, out: *mut HorusCommand) -> HorusStatus {
    non_null!(out);
    let text = try_status!(str_arg(text));
    guard(|| match decode_command(text) {
        Ok(c) => {
            *out = c.into();
            HorusStatus::Ok
        }
        Err(e) => fail(HorusStatus::Parse, e.to_string()),
    })
}

/// Heading from the green (rear) to the orange (front) marker, degrees in
/// `[0, 360)`, image coordinates.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn horus_compute_robot_angle(
    green_x: f64,
    green_y: f64,
    orange_x: f64,
    orange_y: f64,
    out: *mut f64,
) -> HorusStatus {
    non_null!(out);
    match perception::compute_robot_angle([green_x, green_y], [orange_x, orange_y]) {
        Ok(a) => {
            *out = a;
            HorusStatus::Ok
        }
        Err(e) => fail(HorusStatus::InvalidArgument, e.to_string()),
    }
}

#[no_mangle]
pub extern "C" fn horus_disambiguate_line_angle(width: f64, height: f64, raw_angle: f64, vehicle_angle: f64) -> f64 {
    perception::disambiguate_line_angle(width, height, raw_angle, vehicle_angle)
}

#[no_mangle]
pub extern "C" fn horus_direction_fix(line_angle: f64, vehicle_angle: f64) -> f64 {
    perception::direction_fix(line_angle, vehicle_angle)
}

#[no_mangle]
pub extern "C" fn horus_position_fix(front_x: f64, front_y: f64, line_x: f64, line_y: f64, vehicle_angle: f64) -> f64 {
    perception::position_fix([front_x, front_y], [line_x, line_y], vehicle_angle)
}

/// Creates a controller with a fresh state. `decay` must lie in `[0, 1)`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn horus_pid_new(kp: f64, ki: f64, kd: f64, decay: f64, out: *mut *mut HorusPid) -> HorusStatus {
    non_null!(out);
    let gains = PidGains { kp, ki, kd };
    if let Err(e) = gains.validate() {
        return fail(HorusStatus::InvalidArgument, e);
    }
    if !(0.0..1.0).contains(&decay) {
        return fail(HorusStatus::InvalidArgument, format!("decay {decay} outside [0, 1)"));
    }
    *out = Box::into_raw(Box::new(HorusPid {
        state: PidState::with_decay(decay),
        gains,
    }));
    HorusStatus::Ok
}

/// One controller step. `external_derivative` is used when
/// `has_external_derivative` is true, otherwise the error difference is.
///
/// # Safety
/// `pid` must come from `horus_pid_new`; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn horus_pid_update(
    pid: *mut HorusPid,
    error: f64,
    has_external_derivative: bool,
    external_derivative: f64,
    out: *mut HorusPidOutput,
) -> HorusStatus {
    non_null!(pid, out);
    let pid = &mut *pid;
    let ext = has_external_derivative.then_some(external_derivative);
    let (next, o) = pid_update(&pid.state, &pid.gains, error, ext);
    pid.state = next;
    *out = HorusPidOutput {
        correction: o.correction,
        integral: o.integral,
        derivative: o.derivative,
    };
    HorusStatus::Ok
}

/// # Safety
/// `pid` must be null or come from `horus_pid_new`, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn horus_pid_free(pid: *mut HorusPid) {
    if !pid.is_null() {
        drop(Box::from_raw(pid));
    }
}

/// Registry with the onboard slot and `infra_count` camera slots (at least
/// two).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn horus_registry_new(infra_count: usize, out: *mut *mut HorusRegistry) -> HorusStatus {
    non_null!(out);
    *out = Box::into_raw(Box::new(HorusRegistry {
        inner: SourceRegistry::standard(infra_count),
    }));
    HorusStatus::Ok
}

/// Stores a received (unscaled) command for `source`.
///
/// # Safety
/// `reg` must come from `horus_registry_new`; `cmd` must be valid.
#[no_mangle]
pub unsafe extern "C" fn horus_registry_ingest(
    reg: *mut HorusRegistry,
    source: usize,
    cmd: *const HorusCommand,
    now: f64,
) -> HorusStatus {
    non_null!(reg, cmd);
    if (*reg).inner.ingest(source, &(*cmd).into(), now) {
        HorusStatus::Ok
    } else {
        fail(HorusStatus::InvalidArgument, format!("unknown source {source}"))
    }
}

/// Fused (scaled, untruncated) left and right power under `policy`.
///
/// # Safety
/// `reg` must come from `horus_registry_new`; outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn horus_registry_fuse(
    reg: *const HorusRegistry,
    policy: HorusPolicy,
    left: *mut f64,
    right: *mut f64,
) -> HorusStatus {
    non_null!(reg, left, right);
    match fuse(policy.into(), &(*reg).inner) {
        Some((l, r)) => {
            *left = l;
            *right = r;
            HorusStatus::Ok
        }
        None => HorusStatus::Degenerate,
    }
}

/// # Safety
/// `reg` must be null or come from `horus_registry_new`, and not be used again.
#[no_mangle]
pub unsafe extern "C" fn horus_registry_free(reg: *mut HorusRegistry) {
    if !reg.is_null() {
        drop(Box::from_raw(reg));
    }
}

fn boxed_scenario(res: Result<Scenario, impl std::fmt::Display>, out: *mut *mut HorusScenario) -> HorusStatus {
    match res {
        Ok(inner) => {
            // SAFETY: callers checked `out`
            unsafe { *out = Box::into_raw(Box::new(HorusScenario { inner })) };
            HorusStatus::Ok
        }
        Err(e) => fail(HorusStatus::Parse, e.to_string()),
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn horus_scenario_load(path: *const c_char, out: *mut *mut HorusScenario) -> HorusStatus {
    non_null!(out);
    let path = try_status!(str_arg(path));
    guard(|| boxed_scenario(load_scenario(Path::new(path)), out))
}

/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn horus_scenario_from_toml(toml: *const c_char, out: *mut *mut HorusScenario) -> HorusStatus {
    non_null!(out);
    let text = try_status!(str_arg(toml));
    guard(|| boxed_scenario(Scenario::from_toml_str(text), out))
}

/// Seed stored in the scenario file.
///
/// # Safety
/// `sc` must come from a `horus_scenario_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn horus_scenario_seed(sc: *const HorusScenario) -> u64 {
    if sc.is_null() {
        return 0;
    }
    (*sc).inner.seed
}

fn summary_of(r: &RunResult) -> HorusRunSummary {
    HorusRunSummary {
        completed: r.completed(),
        crash_time: r.crash_time.unwrap_or(f64::NAN),
        end_time: r.end_time,
        samples: r.deviation.len() as u64,
        mean_abs_deviation: r.deviation_summary().map_or(f64::NAN, |s| s.mean_abs),
        mean_abs_correction: r.correction_summary().map_or(f64::NAN, |s| s.mean_abs),
    }
}

/// Runs the scenario on the simulated network. When `out_dir` is not null
/// the run's CSV logs and summary are written there.
///
/// # Safety
/// `sc` must come from a `horus_scenario_*` constructor; `out_dir` must be
/// null or a NUL-terminated string; `summary` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn horus_scenario_run(
    sc: *const HorusScenario,
    seed: u64,
    out_dir: *const c_char,
    summary: *mut HorusRunSummary,
) -> HorusStatus {
    non_null!(sc, summary);
    let dir = if out_dir.is_null() {
        None
    } else {
        Some(try_status!(str_arg(out_dir)))
    };
    guard(|| {
        let r = run_with_seed(&(*sc).inner, seed);
        if let Some(dir) = dir {
            if let Err(e) = r.write_to(Path::new(dir)) {
                return fail(HorusStatus::Io, format!("writing {dir}: {e}"));
            }
        }
        *summary = summary_of(&r);
        HorusStatus::Ok
    })
}

/// # Safety
/// `sc` must be null or come from a `horus_scenario_*` constructor, and not
/// be used again.
#[no_mangle]
pub unsafe extern "C" fn horus_scenario_free(sc: *mut HorusScenario) {
    if !sc.is_null() {
        drop(Box::from_raw(sc));
    }
}
