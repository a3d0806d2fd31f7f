//! C ABI over the drillsim core library.
//!
//! Every entry point returns a [`DsStatus`]. On failure the message is kept
//! per thread and can be read with [`ds_last_error`]. Panics never cross the
//! boundary; they surface as [`DsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use drillsim_core::harness::{split_seed, ExperimentConfig};
use drillsim_core::{fit_plane, fuse, run_trial, Classification, SimError, SplineCurve, Termination};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Config = 3,
    Io = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsClassification {
    Success = 0,
    UnderDrill = 1,
    OverDrillModel = 2,
    OverDrillIntervened = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsTermination {
    Criterion = 0,
    Rupture = 1,
    Timeout = 2,
}

/// Plane `z = alpha·x + beta·y + gamma`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DsPlaneFit {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub valid: bool,
    pub point_count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsTrialResult {
    pub classification: DsClassification,
    pub termination: DsTermination,
    pub drilling_time_min: f64,
    /// Negative when the criterion was never met.
    pub criterion_time_s: f64,
    pub criterion_met: bool,
    pub ruptured: bool,
    pub removable: bool,
    pub cycles: u64,
}

/// Closed constrained spline.
pub struct DsSpline(SplineCurve);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &SimError) -> DsStatus {
    match err {
        SimError::Config(_) => DsStatus::Config,
        e if e.is_io() => DsStatus::Io,
        _ => DsStatus::InvalidInput,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (DsStatus, String)>) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DsStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            DsStatus::Panic
        }
    }
}

fn sim(err: SimError) -> (DsStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (DsStatus, String) {
    (DsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (DsStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

/// Message of the most recent call on this thread if it failed, else null.
/// The pointer stays valid until the next call into this library from the
/// same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Build a spline through `n` nodes with strictly increasing angles in
/// `(-π, π]`. Release it with [`ds_spline_free`].
///
/// # Safety
/// `phi` and `z` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_spline_new(phi: *const f64, z: *const f64, n: usize, out: *mut *mut DsSpline) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let phi = slice(phi, n, "phi")?;
        let z = slice(z, n, "z")?;
        let curve = SplineCurve::through(phi, z).map_err(sim)?;
        *out = Box::into_raw(Box::new(DsSpline(curve)));
        Ok(())
    })
}

/// # Safety
/// `spline` must come from [`ds_spline_new`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_spline_eval(spline: *const DsSpline, phi: f64, out: *mut f64) -> DsStatus {
    guard(|| {
        let s = spline.as_ref().ok_or_else(|| null("spline"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !phi.is_finite() {
            return Err((DsStatus::InvalidInput, format!("angle {phi} is not finite")));
        }
        *out = s.0.eval(phi);
        Ok(())
    })
}

/// Free a spline. Null is ignored.
///
/// # Safety
/// `spline` must come from [`ds_spline_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ds_spline_free(spline: *mut DsSpline) {
    if !spline.is_null() {
        drop(Box::from_raw(spline));
    }
}

/// Least-squares plane through `count` points stored as `x, y, z` triples.
///
/// # Safety
/// `xyz` must point to `3·count` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_fit_plane(xyz: *const f64, count: usize, out: *mut DsPlaneFit) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = count.checked_mul(3).ok_or((DsStatus::InvalidInput, "point count overflows".into()))?;
        let raw = slice(xyz, len, "xyz")?;
        let pts: Vec<[f64; 3]> = raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let f = fit_plane(&pts);
        *out = DsPlaneFit { alpha: f.alpha, beta: f.beta, gamma: f.gamma, valid: f.valid, point_count: f.point_count };
        Ok(())
    })
}

/// `out = (1 − w2)·image + w2·force`, clamped to `[0, 1]`, over `n` nodes.
///
/// # Safety
/// All four pointers must reference `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_fuse(
    image: *const f64,
    force: *const f64,
    w2: *const f64,
    n: usize,
    out: *mut f64,
) -> DsStatus {
    guard(|| {
        let image = slice(image, n, "image")?;
        let force = slice(force, n, "force")?;
        let w2 = slice(w2, n, "w2")?;
        if n > 0 && out.is_null() {
            return Err(null("out"));
        }
        let fused = fuse(image, force, w2).map_err(sim)?;
        if n > 0 {
            std::slice::from_raw_parts_mut(out, n).copy_from_slice(fused.values());
        }
        Ok(())
    })
}

/// Run one trial. `config_json` is an experiment document (null for the
/// defaults); its `arm` and `profile` select the setup and `seed` here
/// replaces the per-trial seed.
///
/// # Safety
/// `config_json` must be null or a nul-terminated string; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ds_run_trial(config_json: *const c_char, seed: u64, out: *mut DsTrialResult) -> DsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            let text = CStr::from_ptr(config_json)
                .to_str()
                .map_err(|e| (DsStatus::Config, format!("config is not UTF-8: {e}")))?;
            ExperimentConfig::from_json(text).map_err(sim)?
        };
        let trial = cfg.trial_config(cfg.arm).map_err(sim)?;
        let o = run_trial(&trial, split_seed(seed)).map_err(sim)?;
        *out = DsTrialResult {
            classification: match o.classification {
                Classification::Success => DsClassification::Success,
                Classification::UnderDrill => DsClassification::UnderDrill,
                Classification::OverDrillModel => DsClassification::OverDrillModel,
                Classification::OverDrillIntervened => DsClassification::OverDrillIntervened,
            },
            termination: match o.termination {
                Termination::Criterion => DsTermination::Criterion,
                Termination::Rupture => DsTermination::Rupture,
                Termination::Timeout => DsTermination::Timeout,
            },
            drilling_time_min: o.drilling_time_min,
            criterion_time_s: o.criterion_time_s.unwrap_or(-1.0),
            criterion_met: o.criterion_met,
            ruptured: o.ruptured,
            removable: o.removable,
            cycles: o.cycles,
        };
        Ok(())
    })
}
