//! C ABI for the planner. Handles are opaque pointers owned by this library;
//! every entry point returns a status code and never unwinds across the
//! boundary. Strings returned through out-parameters are NUL-terminated and
//! must be released with `tlfw_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use tlfw::pipeline::{Mode, PipelineConfig};
use tlfw::report::{execute_run, RunError, RunReport};
use tlfw::scenario::{generate_scenario, load_builtin_table1, load_scenario, Scenario};
use tlfw::sim::{check_renewable, simulate, simulate_baseline};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum TlfwStatus {
    Ok = 0,
    /// Malformed input (bad JSON, bad arguments, violated invariants).
    Invalid = 1,
    /// The requested schedule does not exist for this deployment.
    Infeasible = 2,
    /// A required pointer argument was null.
    NullArgument = 3,
    /// An internal invariant failed; details via `tlfw_last_error_message`.
    Internal = 4,
}

/// Planning mode selector for `tlfw_run_options`.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum TlfwMode {
    /// Layered: clusters, head tour, joint composition.
    Layered = 0,
    /// Single-layer baseline: tour every occupied cell.
    Baseline = 1,
}

/// Options for `tlfw_run`; obtain defaults from `tlfw_run_options_default`.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct TlfwRunOptions {
    pub mode: TlfwMode,
    pub clusters: u32,
    pub seed: u64,
    pub restarts: u32,
    /// 0 = centroid snap, 1 = exact medoid.
    pub medoid_update: u32,
    pub seg_max: f64,
    /// Flow-target pruning; negative picks the mode default (0 / 6).
    pub prune_k: i32,
    pub jobs: u32,
    /// Simulation timestep.
    pub dt: f64,
    /// Simulated periods; 0 skips simulation.
    pub periods: u32,
}

/// Opaque deployment handle.
pub struct TlfwScenario {
    inner: Scenario,
}

/// Opaque run-report handle.
pub struct TlfwReport {
    inner: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(sanitized).unwrap_or_default());
}

/// Message for the most recent failure on this thread. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn tlfw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

fn guard<F: FnOnce() -> TlfwStatus>(f: F) -> TlfwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in tlfw".into());
            set_error(&msg);
            TlfwStatus::Internal
        }
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, TlfwStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(TlfwStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        TlfwStatus::Invalid
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> TlfwStatus {
    match CString::new(s.replace('\0', " ")) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            TlfwStatus::Ok
        }
        Err(_) => {
            set_error("string contained interior NUL");
            TlfwStatus::Internal
        }
    }
}

/// Parse a scenario document (JSON). On success the handle must be released
/// with `tlfw_scenario_free`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tlfw_scenario_from_json(
    json: *const c_char,
    out: *mut *mut TlfwScenario,
) -> TlfwStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return TlfwStatus::NullArgument;
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match load_scenario(text) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(TlfwScenario { inner: s }));
                TlfwStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TlfwStatus::Invalid
            }
        }
    })
}

/// The built-in 50-node reference deployment.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tlfw_scenario_builtin_table1(out: *mut *mut TlfwScenario) -> TlfwStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return TlfwStatus::NullArgument;
        }
        *out = Box::into_raw(Box::new(TlfwScenario { inner: load_builtin_table1() }));
        TlfwStatus::Ok
    })
}

/// Random deployment: `n` nodes uniform on `width x height`, rates uniform
/// in [rate_min, rate_max], default physical parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tlfw_scenario_generate(
    seed: u64,
    n: u32,
    width: f64,
    height: f64,
    rate_min: f64,
    rate_max: f64,
    out: *mut *mut TlfwScenario,
) -> TlfwStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return TlfwStatus::NullArgument;
        }
        match generate_scenario(seed, n as usize, (width, height), (rate_min, rate_max)) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(TlfwScenario { inner: s }));
                TlfwStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TlfwStatus::Invalid
            }
        }
    })
}

/// Node count of a scenario handle; 0 for null.
///
/// # Safety
/// `scenario` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn tlfw_scenario_node_count(scenario: *const TlfwScenario) -> u32 {
    if scenario.is_null() {
        return 0;
    }
    (*scenario).inner.nodes.len() as u32
}

/// Serialize the scenario back to its JSON document form.
///
/// # Safety
/// `scenario` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tlfw_scenario_to_json(
    scenario: *const TlfwScenario,
    out: *mut *mut c_char,
) -> TlfwStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            set_error("null argument");
            return TlfwStatus::NullArgument;
        }
        give_string(tlfw::scenario::serialize_scenario(&(*scenario).inner), out)
    })
}

/// Release a scenario handle.
///
/// # Safety
/// `scenario` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn tlfw_scenario_free(scenario: *mut TlfwScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Defaults matching the command-line tool.
#[no_mangle]
pub extern "C" fn tlfw_run_options_default() -> TlfwRunOptions {
    TlfwRunOptions {
        mode: TlfwMode::Layered,
        clusters: 4,
        seed: 42,
        restarts: 16,
        medoid_update: 0,
        seg_max: 0.25,
        prune_k: -1,
        jobs: 0,
        dt: 0.05,
        periods: 3,
    }
}

/// Plan a schedule. Returns `Infeasible` when the layered composition does
/// not exist; the report (with the failure reason embedded) is still
/// produced in that case.
///
/// # Safety
/// All pointers must be valid; `options` may be null for defaults.
#[no_mangle]
pub unsafe extern "C" fn tlfw_run(
    scenario: *const TlfwScenario,
    options: *const TlfwRunOptions,
    out: *mut *mut TlfwReport,
) -> TlfwStatus {
    guard(|| {
        if scenario.is_null() || out.is_null() {
            set_error("null argument");
            return TlfwStatus::NullArgument;
        }
        let opts = if options.is_null() { tlfw_run_options_default() } else { *options };
        if !(opts.dt > 0.0) || !(opts.seg_max > 0.0) {
            set_error("dt and seg_max must be positive");
            return TlfwStatus::Invalid;
        }
        let mode = match opts.mode {
            TlfwMode::Layered => Mode::Tlfw,
            TlfwMode::Baseline => Mode::Msirsn,
        };
        let cfg = PipelineConfig {
            clusters: opts.clusters as usize,
            seed: opts.seed,
            restarts: opts.restarts as usize,
            max_iter: 100,
            variant: if opts.medoid_update == 0 {
                tlfw::clustering::Variant::CentroidSnap
            } else {
                tlfw::clustering::Variant::ExactMedoid
            },
            seg_max: opts.seg_max,
            prune_k: if opts.prune_k < 0 { None } else { Some(opts.prune_k as usize) },
            jobs: opts.jobs as usize,
        };
        match execute_run(&(*scenario).inner, &cfg, mode, opts.dt, opts.periods as usize, "ffi".into()) {
            Ok(artifacts) => {
                let infeasible = artifacts.infeasible.clone();
                *out = Box::into_raw(Box::new(TlfwReport { inner: artifacts.report }));
                match infeasible {
                    Some(reason) => {
                        set_error(&reason);
                        TlfwStatus::Infeasible
                    }
                    None => TlfwStatus::Ok,
                }
            }
            Err(RunError::Invalid(msg)) => {
                set_error(&msg);
                TlfwStatus::Invalid
            }
            Err(RunError::Infeasible(msg)) => {
                set_error(&msg);
                TlfwStatus::Infeasible
            }
        }
    })
}

/// Parse a previously produced report document.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tlfw_report_from_json(
    json: *const c_char,
    out: *mut *mut TlfwReport,
) -> TlfwStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return TlfwStatus::NullArgument;
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(status) => return status,
        };
        match RunReport::from_json(text) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(TlfwReport { inner: r }));
                TlfwStatus::Ok
            }
            Err(e) => {
                set_error(&e);
                TlfwStatus::Invalid
            }
        }
    })
}

/// Serialize a report to JSON.
///
/// # Safety
/// `report` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tlfw_report_to_json(
    report: *const TlfwReport,
    out: *mut *mut c_char,
) -> TlfwStatus {
    guard(|| {
        if report.is_null() || out.is_null() {
            set_error("null argument");
            return TlfwStatus::NullArgument;
        }
        give_string((*report).inner.to_json(), out)
    })
}

/// Render a report as an SVG document.
///
/// # Safety
/// `report` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tlfw_report_render_svg(
    report: *const TlfwReport,
    out: *mut *mut c_char,
) -> TlfwStatus {
    guard(|| {
        if report.is_null() || out.is_null() {
            set_error("null argument");
            return TlfwStatus::NullArgument;
        }
        match tlfw::svg::render_svg(&(*report).inner) {
            Ok(svg) => give_string(svg, out),
            Err(e) => {
                set_error(&e);
                TlfwStatus::Invalid
            }
        }
    })
}

/// Re-simulate a report and check battery limits. `pass` receives 1 when
/// every node stays above the floor with steady period ends.
///
/// # Safety
/// `report` and `pass` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn tlfw_validate(
    report: *const TlfwReport,
    dt: f64,
    periods: u32,
    pass: *mut i32,
) -> TlfwStatus {
    guard(|| {
        if report.is_null() || pass.is_null() {
            set_error("null argument");
            return TlfwStatus::NullArgument;
        }
        let r = &(*report).inner;
        let scenario = match r.scenario() {
            Ok(s) => s,
            Err(e) => {
                set_error(&e);
                return TlfwStatus::Invalid;
            }
        };
        let dt = if dt > 0.0 { dt } else { r.settings.dt };
        let periods = if periods >= 2 { periods as usize } else { r.settings.periods.max(2) };
        let trace = if let Some(layered) = &r.layered {
            let joint = match &layered.joint {
                tlfw::report::JointSection::Solved { plan } => plan,
                tlfw::report::JointSection::Infeasible { reason } => {
                    set_error(reason);
                    return TlfwStatus::Infeasible;
                }
            };
            simulate(
                &scenario,
                &layered.clustering,
                joint,
                &layered.head_plan,
                &layered.cluster_plans,
                dt,
                periods,
            )
        } else if let Some(baseline) = &r.baseline {
            simulate_baseline(&scenario, &baseline.plan, dt, periods)
        } else {
            set_error("report has neither a layered nor a baseline section");
            return TlfwStatus::Invalid;
        };
        match trace {
            Ok(t) => {
                *pass = check_renewable(&t, 0.02).pass as i32;
                TlfwStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                TlfwStatus::Invalid
            }
        }
    })
}

/// Release a report handle.
///
/// # Safety
/// `report` must be a handle from this library or null.
#[no_mangle]
pub unsafe extern "C" fn tlfw_report_free(report: *mut TlfwReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Release a string produced by this library.
///
/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn tlfw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
