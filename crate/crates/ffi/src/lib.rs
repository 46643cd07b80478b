//! C ABI over `eab-core`.
//!
//! Objects cross the boundary as opaque handles (`EabTrajectory`,
//! `EabPosterior`, `EabLoop`) created by `*_new`/`*_read` functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`EabStatus`]; on failure a description is available from
//! [`eab_last_error`] until the next failing call on the same thread.
//! Panics are caught and reported as [`EabStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use eab_core::abc::read_posterior;
use eab_core::config::RunConfig;
use eab_core::eab::{eta_eval, simulate_follower, EabParams};
use eab_core::hysteresis::{HysteresisLoop, HysteresisPattern, HysteresisThresholds};
use eab_core::newell::NewellParams;
use eab_core::pipeline::run_pipeline;
use eab_core::trajectory::{newell_shift, Trajectory};
use eab_core::validation::jsd;
use eab_core::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidParams = 3,
    NonMonotone = 4,
    Io = 5,
    Config = 6,
    Numeric = 7,
    Panic = 8,
}

/// Hysteresis pattern codes returned by [`eab_loop_classify`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EabHysteresis {
    Nsl = 0,
    CwPlus = 1,
    CwMinus = 2,
    Cw = 3,
    CcwPlus = 4,
    CcwMinus = 5,
    Ccw = 6,
}

impl From<HysteresisPattern> for EabHysteresis {
    fn from(p: HysteresisPattern) -> Self {
        match p {
            HysteresisPattern::Nsl => EabHysteresis::Nsl,
            HysteresisPattern::CwPlus => EabHysteresis::CwPlus,
            HysteresisPattern::CwMinus => EabHysteresis::CwMinus,
            HysteresisPattern::Cw => EabHysteresis::Cw,
            HysteresisPattern::CcwPlus => EabHysteresis::CcwPlus,
            HysteresisPattern::CcwMinus => EabHysteresis::CcwMinus,
            HysteresisPattern::Ccw => EabHysteresis::Ccw,
        }
    }
}

/// Opaque trajectory handle.
pub struct EabTrajectory(Trajectory);

/// Opaque particle population handle.
pub struct EabPosterior(eab_core::abc::ParticlePopulation);

/// Opaque hysteresis loop handle.
pub struct EabLoop(HysteresisLoop);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EabStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::InvalidParams(_) => EabStatus::InvalidParams,
        Error::NonMonotoneMapping { .. } | Error::NonMonotoneTime { .. } => EabStatus::NonMonotone,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) => EabStatus::Io,
        Error::Config(_) => EabStatus::Config,
        Error::DegenerateObservation | Error::DegenerateZone(_) | Error::SpacingCollapse { .. } => EabStatus::Numeric,
        _ => EabStatus::InvalidInput,
    }
}

struct Failure(EabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EabStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
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
            EabStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(EabStatus::InvalidInput, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn theta_arg(p: *const f64) -> Result<EabParams, Failure> {
    let s = slice_arg(p, 8, "theta")?;
    Ok(EabParams::from_array(std::array::from_fn(|i| s[i])))
}

/// Message of the last failed call on this thread, or null if none failed.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn eab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a trajectory sampled every `dt` seconds from `t0`. `v` may be null,
/// in which case speeds are finite differences of `x`.
///
/// # Safety
/// `id` must be a NUL-terminated string; `x` (and `v` unless null) must point
/// to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eab_trajectory_new(
    id: *const c_char,
    t0: f64,
    dt: f64,
    x: *const f64,
    v: *const f64,
    n: usize,
    out: *mut *mut EabTrajectory,
) -> EabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let id = str_arg(id, "id")?;
        let xs = slice_arg(x, n, "x")?;
        let traj = if v.is_null() {
            Trajectory::from_positions(id, t0, dt, xs)?
        } else {
            Trajectory::from_samples(id, t0, dt, xs, slice_arg(v, n, "v")?)?
        };
        *out = Box::into_raw(Box::new(EabTrajectory(traj)));
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eab_trajectory_len(traj: *const EabTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

/// Copies up to `cap` positions into `buf` and stores the sample count in
/// `len`.
///
/// # Safety
/// `traj` must be a live handle, `buf` must have room for `cap` doubles and
/// `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eab_trajectory_positions(
    traj: *const EabTrajectory,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> EabStatus {
    guard(|| {
        let traj = ref_arg(traj, "trajectory")?;
        let len = out_arg(len, "len")?;
        if buf.is_null() && cap > 0 {
            return Err(null("buf"));
        }
        let xs = traj.0.positions();
        for (i, x) in xs.iter().take(cap).enumerate() {
            *buf.add(i) = *x;
        }
        *len = xs.len();
        Ok(())
    })
}

/// # Safety
/// `traj` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn eab_trajectory_free(traj: *mut EabTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Deviation curve value at `t` seconds after the leader's first sample.
/// `theta` holds `eta0..eta3, eps0..eps2, t1`.
///
/// # Safety
/// `theta` must point to 8 doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eab_eta_eval(theta: *const f64, t: f64, out: *mut f64) -> EabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = eta_eval(&theta_arg(theta)?, t)?;
        Ok(())
    })
}

/// Newell follower of `leader`.
///
/// # Safety
/// `leader` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eab_newell_shift(
    leader: *const EabTrajectory,
    tau: f64,
    delta: f64,
    out: *mut *mut EabTrajectory,
) -> EabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let leader = ref_arg(leader, "leader")?;
        let p = NewellParams::new(tau, delta)?;
        *out = Box::into_raw(Box::new(EabTrajectory(newell_shift(&leader.0, &p)?)));
        Ok(())
    })
}

/// EAB follower of `leader` under `theta` (8 doubles).
///
/// # Safety
/// `leader` must be a live handle, `theta` must point to 8 doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn eab_simulate_follower(
    leader: *const EabTrajectory,
    tau: f64,
    delta: f64,
    theta: *const f64,
    out: *mut *mut EabTrajectory,
) -> EabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let leader = ref_arg(leader, "leader")?;
        let p = NewellParams::new(tau, delta)?;
        let f = simulate_follower(&leader.0, &p, &theta_arg(theta)?)?;
        *out = Box::into_raw(Box::new(EabTrajectory(f)));
        Ok(())
    })
}

/// Reads a posterior CSV written by the `eab` tool.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eab_posterior_read(path: *const c_char, out: *mut *mut EabPosterior) -> EabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        *out = Box::into_raw(Box::new(EabPosterior(read_posterior(&path)?)));
        Ok(())
    })
}

/// Particle count, or 0 for a null handle.
///
/// # Safety
/// `post` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eab_posterior_len(post: *const EabPosterior) -> usize {
    post.as_ref().map_or(0, |p| p.0.len())
}

/// Particle with the lowest goodness of fit.
///
/// # Safety
/// `post` must be a live handle, `theta` must have room for 8 doubles and
/// `gof` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eab_posterior_best(post: *const EabPosterior, theta: *mut f64, gof: *mut f64) -> EabStatus {
    guard(|| {
        let post = ref_arg(post, "posterior")?;
        let gof = out_arg(gof, "gof")?;
        if theta.is_null() {
            return Err(null("theta"));
        }
        let (_, best) = post.0.best().ok_or(Error::Empty("population"))?;
        for (i, v) in best.theta.to_array().iter().enumerate() {
            *theta.add(i) = *v;
        }
        *gof = best.gof;
        Ok(())
    })
}

/// Jensen–Shannon distance between two posteriors, in `[0, 1]`.
///
/// # Safety
/// `a` and `b` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eab_jsd(a: *const EabPosterior, b: *const EabPosterior, out: *mut f64) -> EabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = jsd(&ref_arg(a, "a")?.0, &ref_arg(b, "b")?.0)?;
        Ok(())
    })
}

/// # Safety
/// `post` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn eab_posterior_free(post: *mut EabPosterior) {
    if !post.is_null() {
        drop(Box::from_raw(post));
    }
}

/// Flow–density loop of a platoon, leader first, with wave speed `w` (m/s,
/// negative) and zones `zone_dt` seconds wide.
///
/// # Safety
/// `trajs` must point to `n` live trajectory handles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn eab_loop_new(
    trajs: *const *const EabTrajectory,
    n: usize,
    w: f64,
    zone_dt: f64,
    out: *mut *mut EabLoop,
) -> EabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let handles = slice_arg(trajs, n, "trajs")?;
        let owned = handles
            .iter()
            .map(|&h| ref_arg(h, "trajectory").map(|t| t.0.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        *out = Box::into_raw(Box::new(EabLoop(HysteresisLoop::from_trajectories(
            &owned, w, zone_dt,
        )?)));
        Ok(())
    })
}

/// Number of loop points, or 0 for a null handle.
///
/// # Safety
/// `lp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eab_loop_len(lp: *const EabLoop) -> usize {
    lp.as_ref().map_or(0, |l| l.0.points.len())
}

/// Copies up to `cap` loop points (veh/m, veh/s) into `k` and `q`.
///
/// # Safety
/// `lp` must be a live handle and `k`, `q` must have room for `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn eab_loop_points(lp: *const EabLoop, k: *mut f64, q: *mut f64, cap: usize) -> EabStatus {
    guard(|| {
        let lp = ref_arg(lp, "loop")?;
        if cap > 0 && (k.is_null() || q.is_null()) {
            return Err(null("k or q"));
        }
        for (i, &(kk, qq)) in lp.0.points.iter().take(cap).enumerate() {
            *k.add(i) = kk;
            *q.add(i) = qq;
        }
        Ok(())
    })
}

/// Classifies a loop against thresholds given in (veh/km)·(veh/h).
///
/// # Safety
/// `lp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eab_loop_classify(
    lp: *mut EabLoop,
    h_t: f64,
    h_t0: f64,
    h_t1: f64,
    out: *mut EabHysteresis,
) -> EabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let lp = lp.as_mut().ok_or_else(|| null("loop"))?;
        let th = HysteresisThresholds { h_t, h_t0, h_t1 };
        th.validate()?;
        *out = lp.0.classify(&th).into();
        Ok(())
    })
}

/// # Safety
/// `lp` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn eab_loop_free(lp: *mut EabLoop) {
    if !lp.is_null() {
        drop(Box::from_raw(lp));
    }
}

/// Runs the full pipeline described by a TOML config file.
///
/// # Safety
/// `config_path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn eab_pipeline_run(config_path: *const c_char) -> EabStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(config_path, "config_path")?);
        let cfg = RunConfig::load(&path)?;
        run_pipeline(&cfg)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_out_pointer_is_reported() {
        let st = unsafe {
            eab_eta_eval(
                [1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 5.0].as_ptr(),
                1.0,
                std::ptr::null_mut(),
            )
        };
        assert_eq!(st, EabStatus::NullPointer);
        let msg = unsafe { CStr::from_ptr(eab_last_error()) }.to_str().unwrap();
        assert!(msg.contains("out"));
    }

    #[test]
    fn status_mapping_looks_through_stages() {
        let e = Error::Config("x".into()).at_stage("config");
        assert_eq!(status_of(&e), EabStatus::Config);
    }
}
