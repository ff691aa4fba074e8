//! C ABI over the cogmap library.
//!
//! Every function returns a [`CogmapStatus`]. Objects are handed out as
//! opaque pointers that the caller releases with the matching `_free`
//! function. After a failure, `cogmap_last_error` describes what went wrong
//! on the calling thread.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cogmap::config::{parse_config, Command, RunPlan};
use cogmap::stepper::Simulation;
use cogmap::Error;
use libc::{c_char, c_int, size_t};

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CogmapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// The configuration or an argument was rejected.
    Config = 3,
    /// Divergence, a rejected step or a root finder failure.
    Numerical = 4,
    Io = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// A validated run configuration.
pub struct CogmapPlan {
    plan: RunPlan,
}

/// A simulation being stepped from C.
pub struct CogmapSimulation {
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|b| *b != 0);
    let c = CString::new(bytes).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> CogmapStatus {
    match e {
        Error::Io(_) | Error::Json(_) => CogmapStatus::Io,
        e if e.is_numerical() => CogmapStatus::Numerical,
        _ => CogmapStatus::Config,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CogmapStatus>) -> CogmapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CogmapStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            CogmapStatus::Panic
        }
    }
}

fn fail(e: Error) -> CogmapStatus {
    set_error(e.to_string());
    status_of(&e)
}

unsafe fn read_str<'a>(p: *const c_char) -> Result<&'a str, CogmapStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(CogmapStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        CogmapStatus::InvalidUtf8
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, CogmapStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle");
        CogmapStatus::NullPointer
    })
}

unsafe fn deref_mut<'a, T>(p: *mut T) -> Result<&'a mut T, CogmapStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null handle");
        CogmapStatus::NullPointer
    })
}

fn parse_command(s: &str) -> Result<Command, CogmapStatus> {
    Ok(match s {
        "simulate" => Command::Simulate,
        "stability" => Command::Stability,
        "sweep" => Command::Sweep,
        "measure" => Command::Measure,
        "oracle" => Command::Oracle,
        other => {
            set_error(format!("unknown command `{other}`"));
            return Err(CogmapStatus::Config);
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cogmap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cogmap_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a TOML configuration for `command` (`"simulate"`, `"measure"`,
/// ...). On success `*out` owns a plan to be released with
/// `cogmap_plan_free`.
///
/// # Safety
/// `command` and `config` must be NUL-terminated strings and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn cogmap_plan_parse(
    command: *const c_char,
    config: *const c_char,
    out: *mut *mut CogmapPlan,
) -> CogmapStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return Err(CogmapStatus::NullPointer);
        }
        *out = ptr::null_mut();
        let cmd = parse_command(read_str(command)?)?;
        let text = read_str(config)?;
        let plan = parse_config(cmd, text, &[]).map_err(fail)?;
        *out = Box::into_raw(Box::new(CogmapPlan { plan }));
        Ok(())
    })
}

/// Applies a `key=value` override by re-validating the plan.
///
/// # Safety
/// `plan` must come from `cogmap_plan_parse`; `assignment` must be a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cogmap_plan_override(
    plan: *mut CogmapPlan,
    assignment: *const c_char,
) -> CogmapStatus {
    guard(|| {
        let p = deref_mut(plan)?;
        let a = read_str(assignment)?;
        let mut table = p.plan.table.clone();
        cogmap::config::apply_override(&mut table, a).map_err(fail)?;
        p.plan = cogmap::config::plan_from_table(p.plan.command, table).map_err(fail)?;
        Ok(())
    })
}

/// Copies the configuration hash (64 hex digits plus NUL) into `buf`.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cogmap_plan_hash(
    plan: *const CogmapPlan,
    buf: *mut c_char,
    len: size_t,
) -> CogmapStatus {
    guard(|| {
        let p = deref(plan)?;
        if buf.is_null() {
            set_error("null buffer");
            return Err(CogmapStatus::NullPointer);
        }
        let h = p.plan.hash.as_bytes();
        if len < h.len() + 1 {
            set_error(format!("buffer needs {} bytes", h.len() + 1));
            return Err(CogmapStatus::Config);
        }
        ptr::copy_nonoverlapping(h.as_ptr().cast::<c_char>(), buf, h.len());
        *buf.add(h.len()) = 0;
        Ok(())
    })
}

/// # Safety
/// `plan` must come from `cogmap_plan_parse` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cogmap_plan_free(plan: *mut CogmapPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Runs the plan as the command line tool would, writing into `out_dir`.
/// `*exit_code` receives the tool's exit status.
///
/// # Safety
/// `plan` must be a live plan, `out_dir` a NUL-terminated path and
/// `exit_code` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cogmap_execute(
    plan: *const CogmapPlan,
    out_dir: *const c_char,
    exit_code: *mut c_int,
) -> CogmapStatus {
    guard(|| {
        let p = deref(plan)?;
        let dir = read_str(out_dir)?;
        let code = deref_mut(exit_code)?;
        match cogmap::cli::execute(&p.plan, Path::new(dir)) {
            Ok(c) => {
                *code = c;
                if c == 3 {
                    set_error("numerical failure; see summary.json");
                    return Err(CogmapStatus::Numerical);
                }
                Ok(())
            }
            Err(e) => {
                *code = e.exit_code();
                Err(fail(e))
            }
        }
    })
}

/// Starts a simulation from a simulate or measure plan.
///
/// # Safety
/// `plan` must be a live plan and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cogmap_simulation_new(
    plan: *const CogmapPlan,
    out: *mut *mut CogmapSimulation,
) -> CogmapStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return Err(CogmapStatus::NullPointer);
        }
        *out = ptr::null_mut();
        let p = deref(plan)?;
        let sim = cogmap::cli::build_simulation(&p.plan).map_err(fail)?;
        *out = Box::into_raw(Box::new(CogmapSimulation { sim }));
        Ok(())
    })
}

/// Takes one step; `*t` receives the new time. Stepping past the end time
/// is a no-op.
///
/// # Safety
/// `sim` must be a live simulation; `t` may be null.
#[no_mangle]
pub unsafe extern "C" fn cogmap_simulation_step(
    sim: *mut CogmapSimulation,
    t: *mut f64,
) -> CogmapStatus {
    guard(|| {
        let s = deref_mut(sim)?;
        if !s.sim.finished() {
            s.sim.step().map_err(fail)?;
        }
        if !t.is_null() {
            *t = s.sim.t();
        }
        Ok(())
    })
}

/// Steps until the configured end time.
///
/// # Safety
/// `sim` must be a live simulation.
#[no_mangle]
pub unsafe extern "C" fn cogmap_simulation_advance(sim: *mut CogmapSimulation) -> CogmapStatus {
    guard(|| deref_mut(sim)?.sim.advance().map_err(fail))
}

/// Number of state fields and grid cells.
///
/// # Safety
/// `sim` must be a live simulation; the output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn cogmap_simulation_shape(
    sim: *const CogmapSimulation,
    n_fields: *mut size_t,
    n_cells: *mut size_t,
) -> CogmapStatus {
    guard(|| {
        let s = deref(sim)?;
        let state = s.sim.state();
        if !n_fields.is_null() {
            *n_fields = state.len();
        }
        if !n_cells.is_null() {
            *n_cells = state.first().map_or(0, |f| f.len());
        }
        Ok(())
    })
}

/// Copies field `index` of the current state into `buf`, which must hold
/// `len >= n_cells` values.
///
/// # Safety
/// `sim` must be a live simulation and `buf` point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cogmap_simulation_field(
    sim: *const CogmapSimulation,
    index: size_t,
    buf: *mut f64,
    len: size_t,
) -> CogmapStatus {
    guard(|| {
        let s = deref(sim)?;
        if buf.is_null() {
            set_error("null buffer");
            return Err(CogmapStatus::NullPointer);
        }
        let Some(f) = s.sim.state().get(index) else {
            set_error(format!("field index {index} out of range"));
            return Err(CogmapStatus::Config);
        };
        if len < f.len() {
            set_error(format!("buffer needs {} values", f.len()));
            return Err(CogmapStatus::Config);
        }
        ptr::copy_nonoverlapping(f.values().as_ptr(), buf, f.len());
        Ok(())
    })
}

/// # Safety
/// `sim` must come from `cogmap_simulation_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn cogmap_simulation_free(sim: *mut CogmapSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Leading growth rates of a stability plan at modes `0..len`. Writes the
/// number of modes computed to `*written`.
///
/// # Safety
/// `k`, `re` and `im` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cogmap_dispersion(
    plan: *const CogmapPlan,
    k: *mut f64,
    re: *mut f64,
    im: *mut f64,
    len: size_t,
    written: *mut size_t,
) -> CogmapStatus {
    guard(|| {
        let p = deref(plan)?;
        if k.is_null() || re.is_null() || im.is_null() || written.is_null() {
            set_error("null buffer");
            return Err(CogmapStatus::NullPointer);
        }
        let d = cogmap::cli::run_stability(&p.plan).map_err(fail)?;
        let n = d.wavenumbers.len().min(len);
        for j in 0..n {
            *k.add(j) = d.wavenumbers[j];
            *re.add(j) = d.growth[j].re;
            *im.add(j) = d.growth[j].im;
        }
        *written = n;
        Ok(())
    })
}
