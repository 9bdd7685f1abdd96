//! C ABI over `kkf-core`.
//!
//! Every fallible function returns a [`KkfStatus`]. On failure the message is
//! kept per thread and can be read with [`kkf_last_error_message`]. Panics
//! are caught at the boundary and reported as `KKF_STATUS_PANIC`.
//!
//! Simulations are opaque handles created by [`kkf_simulation_new_from_json`]
//! and released with [`kkf_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kkf_core::config::{ModelParams, StabilityReport};
use kkf_core::io::{build_simulation, parse_config_unchecked, Strictness};
use kkf_core::kernel::{gamma_eps, KernelParams};
use kkf_core::solver::Simulation;
use kkf_core::KkfError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KkfStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// An argument was out of range (e.g. a buffer of the wrong length).
    InvalidArgument = 2,
    /// The config or parameters were rejected.
    Validation = 3,
    /// The solver failed while running.
    Runtime = 4,
    /// A string argument was not valid UTF-8.
    Utf8 = 5,
    /// A Rust panic was caught.
    Panic = 6,
}

/// Opaque solver state.
pub struct KkfSimulation {
    inner: Simulation,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KkfOrderParameters {
    pub r_re: f64,
    pub r_im: f64,
    pub s_re: f64,
    pub s_im: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KkfDims {
    pub n_omega: usize,
    pub n_theta: usize,
    pub n_slices: usize,
    /// Steps needed to reach the configured final time.
    pub n_t: usize,
    pub d_omega: f64,
    pub d_t: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KkfStabilityReport {
    pub d_omega_max: f64,
    pub d_omega_ok: bool,
    /// False when the time step is unconstrained; `d_t_max` is then +inf.
    pub d_t_constrained: bool,
    pub d_t_max: f64,
    pub d_t_ok: bool,
    pub g_omega_max: f64,
    pub g_omega_ok: bool,
    pub overall_ok: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(KkfStatus, String);

impl From<KkfError> for Failure {
    fn from(e: KkfError) -> Self {
        let status = if e.is_validation() {
            KkfStatus::Validation
        } else {
            KkfStatus::Runtime
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(KkfStatus::NullPointer, format!("`{name}` is NULL"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> KkfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            KkfStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            KkfStatus::Panic
        }
    }
}

unsafe fn sim_ref<'a>(sim: *const KkfSimulation) -> Result<&'a KkfSimulation, Failure> {
    sim.as_ref().ok_or_else(|| null("sim"))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next `kkf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn kkf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a simulation from a JSON run config. Unknown keys are rejected
/// unless `lenient` is set.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kkf_simulation_new_from_json(
    json: *const c_char,
    lenient: bool,
    out: *mut *mut KkfSimulation,
) -> KkfStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Failure(KkfStatus::Utf8, e.to_string()))?;
        let strictness = if lenient {
            Strictness::Lenient
        } else {
            Strictness::Strict
        };
        let (cfg, _) = parse_config_unchecked(text, strictness)?;
        let inner = build_simulation(&cfg)?;
        *out = Box::into_raw(Box::new(KkfSimulation { inner }));
        Ok(())
    })
}

/// Releases a simulation. NULL is ignored.
///
/// # Safety
/// `sim` must come from [`kkf_simulation_new_from_json`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn kkf_simulation_free(sim: *mut KkfSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances `n_steps` time steps. On failure the state is left at the last
/// good step.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kkf_simulation_step(sim: *mut KkfSimulation, n_steps: usize) -> KkfStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| null("sim"))?;
        for _ in 0..n_steps {
            sim.inner.advance()?;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kkf_simulation_time(
    sim: *const KkfSimulation,
    out: *mut f64,
) -> KkfStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = sim.inner.time();
        Ok(())
    })
}

/// Population order parameters `r` and `s` of the current state.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kkf_simulation_order_parameters(
    sim: *const KkfSimulation,
    out: *mut KkfOrderParameters,
) -> KkfStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (r, s) = sim.inner.order_parameters();
        *out = KkfOrderParameters {
            r_re: r.re,
            r_im: r.im,
            s_re: s.re,
            s_im: s.im,
        };
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kkf_simulation_dims(
    sim: *const KkfSimulation,
    out: *mut KkfDims,
) -> KkfStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let g = sim.inner.grid();
        *out = KkfDims {
            n_omega: g.n_omega,
            n_theta: g.n_theta,
            n_slices: sim.inner.field().n_slices(),
            n_t: g.n_t,
            d_omega: g.d_omega,
            d_t: g.d_t,
        };
        Ok(())
    })
}

/// Copies the density into `buf`, ordered `[i][j][k]` with `k` fastest.
/// `len` must equal `n_omega * n_theta * n_slices`.
///
/// # Safety
/// `sim` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn kkf_simulation_copy_field(
    sim: *const KkfSimulation,
    buf: *mut f64,
    len: usize,
) -> KkfStatus {
    guard(|| {
        let sim = sim_ref(sim)?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let values = sim.inner.field().to_ijk();
        if len != values.len() {
            return Err(Failure(
                KkfStatus::InvalidArgument,
                format!("buffer holds {len} values, field has {}", values.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&values);
        Ok(())
    })
}

/// Evaluates the positivity conditions for the given parameters and lattice.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn kkf_validate_stability(
    m: f64,
    noise: f64,
    coupling: f64,
    omega1: f64,
    d_omega: f64,
    d_t: f64,
    g_omega: f64,
    out: *mut KkfStabilityReport,
) -> KkfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let params = ModelParams::new(m, noise, coupling, omega1)?;
        let r = StabilityReport::evaluate(&params, d_omega, d_t, g_omega)?;
        *out = KkfStabilityReport {
            d_omega_max: r.d_omega_max,
            d_omega_ok: r.d_omega_ok,
            d_t_constrained: r.d_t_max.is_some(),
            d_t_max: r.d_t_max.unwrap_or(f64::INFINITY),
            d_t_ok: r.d_t_ok,
            g_omega_max: r.g_omega_max,
            g_omega_ok: r.g_omega_ok,
            overall_ok: r.overall_ok,
        };
        Ok(())
    })
}

/// Fundamental solution of the regularized operator with pole at the origin.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kkf_gamma_eps(
    omega: f64,
    theta: f64,
    t: f64,
    epsilon: f64,
    out: *mut f64,
) -> KkfStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if !(omega.is_finite() && theta.is_finite() && t.is_finite()) {
            return Err(Failure(
                KkfStatus::InvalidArgument,
                "arguments must be finite".into(),
            ));
        }
        *out = gamma_eps(omega, theta, t, KernelParams::new(epsilon)?);
        Ok(())
    })
}
