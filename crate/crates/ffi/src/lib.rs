//! C ABI over the simulator.
//!
//! Configs and heat maps are opaque handles owned by the caller and released
//! with the matching `*_free`. Every fallible call returns an `MmimoStatus`;
//! on failure a description is available from `mmimo_last_error` on the
//! same thread until the next failing call.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mmimo_emf::compliance::check;
use mmimo_emf::field::{power_to_field, HeatMap};
use mmimo_emf::runner::{self, RunConfig, RunnerError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmimoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Validation = 4,
    Runtime = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Opaque run configuration.
pub struct MmimoConfig {
    inner: RunConfig,
}

/// Opaque heat map: field values in V/m over the probe grid.
pub struct MmimoHeatmap {
    inner: HeatMap,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MmimoCompliance {
    pub limit_vpm: f64,
    pub exceed_count: usize,
    pub exceed_fraction: f64,
    /// `-INFINITY` for an all-zero map.
    pub worst_margin_db: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("no interior nul")));
}

fn fail(status: MmimoStatus, msg: impl Into<String>) -> MmimoStatus {
    set_error(msg);
    status
}

fn runner_status(e: &RunnerError) -> MmimoStatus {
    match e {
        RunnerError::Config(_) => MmimoStatus::Config,
        RunnerError::Validation(_) => MmimoStatus::Validation,
        RunnerError::Scenario { .. } => MmimoStatus::Runtime,
        RunnerError::Io(_) => MmimoStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> MmimoStatus) -> MmimoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(MmimoStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, MmimoStatus> {
    if p.is_null() {
        return Err(fail(MmimoStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MmimoStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

unsafe fn config_ref<'a>(cfg: *const MmimoConfig) -> Result<&'a RunConfig, MmimoStatus> {
    cfg.as_ref().map(|c| &c.inner).ok_or_else(|| fail(MmimoStatus::NullPointer, "config is null"))
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mmimo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// New config holding the shipped defaults. Never NULL.
#[no_mangle]
pub extern "C" fn mmimo_config_default() -> *mut MmimoConfig {
    Box::into_raw(Box::new(MmimoConfig { inner: RunConfig::paper_defaults() }))
}

/// Loads a TOML config into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mmimo_config_load(path: *const c_char, out: *mut *mut MmimoConfig) -> MmimoStatus {
    guard(|| {
        if out.is_null() {
            return fail(MmimoStatus::NullPointer, "out is null");
        }
        let path = try_status!(str_arg(path, "path"));
        match RunConfig::load(Path::new(path)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MmimoConfig { inner }));
                MmimoStatus::Ok
            }
            Err(e) => fail(runner_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn mmimo_config_set_seed(cfg: *mut MmimoConfig, seed: u64) -> MmimoStatus {
    match cfg.as_mut() {
        Some(c) => {
            c.inner.seed = Some(seed);
            MmimoStatus::Ok
        }
        None => fail(MmimoStatus::NullPointer, "config is null"),
    }
}

/// Multiplies every computed field value by `calibration`.
///
/// # Safety
/// `cfg` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn mmimo_config_set_calibration(cfg: *mut MmimoConfig, calibration: f64) -> MmimoStatus {
    match cfg.as_mut() {
        Some(_) if !(calibration > 0.0 && calibration.is_finite()) => {
            fail(MmimoStatus::InvalidArgument, "calibration must be positive and finite")
        }
        Some(c) => {
            c.inner.field.calibration = calibration;
            MmimoStatus::Ok
        }
        None => fail(MmimoStatus::NullPointer, "config is null"),
    }
}

/// # Safety
/// `cfg` must come from this library or be NULL; it must not be used after.
#[no_mangle]
pub unsafe extern "C" fn mmimo_config_free(cfg: *mut MmimoConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of scenarios a run of `cfg` would execute.
///
/// # Safety
/// `cfg` must come from this library or be NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn mmimo_scenario_count(cfg: *const MmimoConfig) -> usize {
    cfg.as_ref().and_then(|c| c.inner.selected_scenarios().ok()).map_or(0, |s| s.len())
}

/// Validates `cfg`, storing the number of findings in `*findings`. Returns
/// `MMIMO_STATUS_VALIDATION` when there is at least one; the findings are
/// then listed in `mmimo_last_error`.
///
/// # Safety
/// `cfg` must come from this library; `findings` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn mmimo_validate(cfg: *const MmimoConfig, findings: *mut usize) -> MmimoStatus {
    guard(|| {
        let cfg = try_status!(config_ref(cfg));
        let list = runner::validate(cfg);
        if let Some(n) = findings.as_mut() {
            *n = list.len();
        }
        if list.is_empty() {
            MmimoStatus::Ok
        } else {
            fail(MmimoStatus::Validation, list.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("\n"))
        }
    })
}

/// Runs `cfg` and writes all artifacts and `manifest.json` into `out_dir`.
///
/// # Safety
/// `cfg` must come from this library; `out_dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mmimo_run(cfg: *const MmimoConfig, out_dir: *const c_char) -> MmimoStatus {
    guard(|| {
        let cfg = try_status!(config_ref(cfg));
        let dir = try_status!(str_arg(out_dir, "out_dir"));
        match runner::run(cfg, Path::new(dir)) {
            Ok(_) => MmimoStatus::Ok,
            Err(e) => fail(runner_status(&e), e.to_string()),
        }
    })
}

/// Heat map of scenario `scenario_id` under `cfg`, stored in `*out`.
///
/// # Safety
/// `cfg` must come from this library, `scenario_id` must be NUL-terminated
/// and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mmimo_heatmap_compute(
    cfg: *const MmimoConfig,
    scenario_id: *const c_char,
    out: *mut *mut MmimoHeatmap,
) -> MmimoStatus {
    guard(|| {
        let cfg = try_status!(config_ref(cfg));
        let id = try_status!(str_arg(scenario_id, "scenario_id"));
        if out.is_null() {
            return fail(MmimoStatus::NullPointer, "out is null");
        }
        let findings = runner::validate(cfg);
        if !findings.is_empty() {
            let e = RunnerError::Validation(findings);
            return fail(MmimoStatus::Validation, e.to_string());
        }
        let Some(scenario) = cfg.all_scenarios().into_iter().find(|s| s.id == id) else {
            return fail(MmimoStatus::InvalidArgument, format!("unknown scenario id {id:?}"));
        };
        match runner::scenario_heatmap(cfg, &scenario, cfg.seed.unwrap_or_default()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(MmimoHeatmap { inner }));
                MmimoStatus::Ok
            }
            Err(e) => fail(MmimoStatus::Runtime, e.to_string()),
        }
    })
}

/// Number of grid points, or 0 for NULL.
///
/// # Safety
/// `map` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn mmimo_heatmap_len(map: *const MmimoHeatmap) -> usize {
    map.as_ref().map_or(0, |m| m.inner.values.len())
}

/// Copies field values (V/m) and, when non-NULL, the grid `x`/`y`
/// coordinates (m) in row-major grid order. Each buffer must hold
/// `mmimo_heatmap_len` entries; `len` is their capacity.
///
/// # Safety
/// Buffers must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn mmimo_heatmap_values(
    map: *const MmimoHeatmap,
    values: *mut f64,
    x: *mut f64,
    y: *mut f64,
    len: usize,
) -> MmimoStatus {
    let Some(map) = map.as_ref() else {
        return fail(MmimoStatus::NullPointer, "heatmap is null");
    };
    if values.is_null() {
        return fail(MmimoStatus::NullPointer, "values is null");
    }
    let n = map.inner.values.len();
    if len < n {
        return fail(MmimoStatus::BufferTooSmall, format!("buffer holds {len} entries, need {n}"));
    }
    std::slice::from_raw_parts_mut(values, n).copy_from_slice(&map.inner.values);
    for (i, p) in map.inner.grid.points.iter().enumerate() {
        if !x.is_null() {
            *x.add(i) = p.x;
        }
        if !y.is_null() {
            *y.add(i) = p.y;
        }
    }
    MmimoStatus::Ok
}

/// # Safety
/// `map` must come from this library or be NULL; it must not be used after.
#[no_mangle]
pub unsafe extern "C" fn mmimo_heatmap_free(map: *mut MmimoHeatmap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Checks `map` against `region` from the limit table of `cfg`.
///
/// # Safety
/// Handles must come from this library, `region` must be NUL-terminated and
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn mmimo_check_compliance(
    cfg: *const MmimoConfig,
    map: *const MmimoHeatmap,
    region: *const c_char,
    out: *mut MmimoCompliance,
) -> MmimoStatus {
    guard(|| {
        let cfg = try_status!(config_ref(cfg));
        let Some(map) = map.as_ref() else {
            return fail(MmimoStatus::NullPointer, "heatmap is null");
        };
        let region = try_status!(str_arg(region, "region"));
        let Some(out) = out.as_mut() else {
            return fail(MmimoStatus::NullPointer, "out is null");
        };
        match check(&map.inner, region, &cfg.limits) {
            Ok(r) => {
                *out = MmimoCompliance {
                    limit_vpm: r.limit,
                    exceed_count: r.exceed_count,
                    exceed_fraction: r.exceed_fraction,
                    worst_margin_db: r.worst_margin_db,
                };
                MmimoStatus::Ok
            }
            Err(e) => fail(MmimoStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// RMS field (V/m) from received power (W) on a probe of linear gain
/// `gain` at `frequency_hz`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mmimo_power_to_field(power_w: f64, frequency_hz: f64, gain: f64, out: *mut f64) -> MmimoStatus {
    let Some(out) = out.as_mut() else {
        return fail(MmimoStatus::NullPointer, "out is null");
    };
    if !(frequency_hz > 0.0) {
        return fail(MmimoStatus::InvalidArgument, "frequency must be positive");
    }
    match power_to_field(power_w, frequency_hz, gain) {
        Ok(e) => {
            *out = e;
            MmimoStatus::Ok
        }
        Err(e) => fail(MmimoStatus::InvalidArgument, e.to_string()),
    }
}
