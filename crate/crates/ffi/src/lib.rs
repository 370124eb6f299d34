//! C interface to `contagion-core`.
//!
//! Every function returns a [`CtgStatus`]; on failure the message is
//! available from [`ctg_last_error_message`] on the same thread. Handles are
//! heap objects owned by the caller and released with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use contagion_core::clt::{self, CltError, VarianceReport};
use contagion_core::ctmc::{self, CtmcError};
use contagion_core::limit::{self, LimitError, LimitSolution};
use contagion_core::model::{self, AssignmentMode, Environment, FirmClass, ModelError, Portfolio};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Reciprocity = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtgAssignmentMode {
    DeterministicProportions = 0,
    IidSample = 1,
}

/// One firm type with its mixture weight.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtgFirmClass {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub exposure: f64,
    pub weight: f64,
}

/// Limit loss variance at one horizon.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CtgVarianceReport {
    pub horizon: f64,
    pub l: f64,
    pub static_var: f64,
    pub contagion_var: f64,
    pub total: f64,
    pub b: f64,
}

pub struct CtgEnvironment {
    inner: Environment,
}

pub struct CtgPortfolio {
    inner: Portfolio,
}

pub struct CtgLimitSolution {
    inner: LimitSolution,
    env: Environment,
}

struct Failure {
    status: CtgStatus,
    message: String,
}

impl Failure {
    fn new(status: CtgStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::ReciprocityViolated { .. } | ModelError::AllAlphasZero => {
                CtgStatus::Reciprocity
            }
            _ => CtgStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<LimitError> for Failure {
    fn from(e: LimitError) -> Self {
        let status = match e {
            LimitError::StepTooCoarse { .. } | LimitError::ClampExceeded { .. } => {
                CtgStatus::Numerical
            }
            _ => CtgStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<CltError> for Failure {
    fn from(e: CltError) -> Self {
        match e {
            CltError::Limit(inner) => inner.into(),
            CltError::ReciprocityRequired | CltError::CertificateMismatch => {
                Failure::new(CtgStatus::Reciprocity, e.to_string())
            }
            _ => Failure::new(CtgStatus::InvalidArgument, e.to_string()),
        }
    }
}

impl From<CtmcError> for Failure {
    fn from(e: CtmcError) -> Self {
        Failure::new(CtgStatus::InvalidArgument, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> CtgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            CtgStatus::Ok
        }
        Ok(Err(f)) => {
            set_last_error(&f.message);
            f.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("internal panic: {msg}"));
            CtgStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(CtgStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| Failure::new(CtgStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn input_slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(CtgStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if len < values.len() {
        return Err(Failure::new(
            CtgStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} required", values.len()),
        ));
    }
    if buf.is_null() {
        return Err(Failure::new(CtgStatus::NullPointer, "`buf` is null"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to fit) and returns the full message length in bytes, without
/// the terminator. Returns 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ctg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Validates `len` classes and creates an environment.
///
/// # Safety
/// `classes` must point to `len` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctg_environment_new(
    classes: *const CtgFirmClass,
    len: usize,
    out: *mut *mut CtgEnvironment,
) -> CtgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let classes = input_slice(classes, len, "classes")?
            .iter()
            .map(|c| FirmClass::new(c.alpha, c.beta, c.gamma, c.exposure, c.weight))
            .collect();
        let env = model::validate_environment(classes)?;
        *out = Box::into_raw(Box::new(CtgEnvironment { inner: env }));
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle from [`ctg_environment_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ctg_environment_free(env: *mut CtgEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Number of distinct classes after merging duplicates; 0 for a null handle.
///
/// # Safety
/// `env` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctg_environment_len(env: *const CtgEnvironment) -> usize {
    env.as_ref().map_or(0, |e| e.inner.len())
}

/// Checks `beta = b * alpha` across classes and writes `b` and the largest residual.
///
/// # Safety
/// `env` must be a live handle; `b` and `max_residual` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctg_check_reciprocity(
    env: *const CtgEnvironment,
    tol: f64,
    b: *mut f64,
    max_residual: *mut f64,
) -> CtgStatus {
    guard(|| {
        let env = deref(env, "env")?;
        let b = out_ref(b, "b")?;
        let max_residual = out_ref(max_residual, "max_residual")?;
        let cert = model::check_reciprocity(&env.inner, tol)?;
        *b = cert.b;
        *max_residual = cert.max_residual;
        Ok(())
    })
}

/// Builds a portfolio of `n` firms.
///
/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctg_portfolio_new(
    env: *const CtgEnvironment,
    n: usize,
    mode: CtgAssignmentMode,
    seed: u64,
    out: *mut *mut CtgPortfolio,
) -> CtgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let env = deref(env, "env")?;
        let mode = match mode {
            CtgAssignmentMode::DeterministicProportions => AssignmentMode::DeterministicProportions,
            CtgAssignmentMode::IidSample => AssignmentMode::IidSample,
        };
        let portfolio = model::build_portfolio(&env.inner, n, mode, seed)?;
        *out = Box::into_raw(Box::new(CtgPortfolio { inner: portfolio }));
        Ok(())
    })
}

/// # Safety
/// `portfolio` must be null or a handle from [`ctg_portfolio_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ctg_portfolio_free(portfolio: *mut CtgPortfolio) {
    if !portfolio.is_null() {
        drop(Box::from_raw(portfolio));
    }
}

/// Writes the number of firms of each class into `counts` (`len` >= classes).
///
/// # Safety
/// `portfolio` must be a live handle; `counts` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ctg_portfolio_class_counts(
    portfolio: *const CtgPortfolio,
    counts: *mut usize,
    len: usize,
) -> CtgStatus {
    guard(|| {
        let p = deref(portfolio, "portfolio")?;
        let values = p.inner.class_counts();
        if len < values.len() {
            return Err(Failure::new(
                CtgStatus::BufferTooSmall,
                format!("buffer holds {len} values, {} required", values.len()),
            ));
        }
        let counts = out_ref(counts, "counts")?;
        ptr::copy_nonoverlapping(values.as_ptr(), counts, values.len());
        Ok(())
    })
}

/// Monte Carlo mean loss fraction and `N * Var(L/N)` at each of `grid_len`
/// sorted times in `[0, horizon]`. Needs at least 2 replicas.
///
/// # Safety
/// `t_grid`, `mean_loss` and `var_scaled_loss` must each be valid for `grid_len` elements.
#[no_mangle]
pub unsafe extern "C" fn ctg_monte_carlo_loss(
    portfolio: *const CtgPortfolio,
    horizon: f64,
    t_grid: *const f64,
    grid_len: usize,
    replicas: usize,
    seed: u64,
    mean_loss: *mut f64,
    var_scaled_loss: *mut f64,
) -> CtgStatus {
    guard(|| {
        let p = deref(portfolio, "portfolio")?;
        let grid = input_slice(t_grid, grid_len, "t_grid")?;
        let stats = ctmc::monte_carlo(&p.inner, horizon, grid, replicas, &[], seed)?;
        copy_out(&stats.mean_loss_fraction, mean_loss, grid_len)?;
        copy_out(&stats.var_scaled_loss, var_scaled_loss, grid_len)?;
        Ok(())
    })
}

/// Solves the limit equation on `grid_size` RK4 steps over `[0, horizon]`.
///
/// # Safety
/// `env` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctg_limit_solve(
    env: *const CtgEnvironment,
    horizon: f64,
    grid_size: usize,
    tolerance: f64,
    out: *mut *mut CtgLimitSolution,
) -> CtgStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let env = deref(env, "env")?;
        let sol = limit::solve_limit(&env.inner, horizon, grid_size, tolerance)?;
        *out = Box::into_raw(Box::new(CtgLimitSolution {
            inner: sol,
            env: env.inner.clone(),
        }));
        Ok(())
    })
}

/// # Safety
/// `sol` must be null or a handle from [`ctg_limit_solve`], freed once.
#[no_mangle]
pub unsafe extern "C" fn ctg_limit_free(sol: *mut CtgLimitSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Number of grid points (`grid_size + 1`); 0 for a null handle.
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ctg_limit_grid_len(sol: *const CtgLimitSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.inner.t_grid.len())
}

/// # Safety
/// `sol` must be a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ctg_limit_copy_t(
    sol: *const CtgLimitSolution,
    buf: *mut f64,
    len: usize,
) -> CtgStatus {
    guard(|| copy_out(&deref(sol, "sol")?.inner.t_grid, buf, len))
}

/// Default probability curve of class `k`.
///
/// # Safety
/// `sol` must be a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ctg_limit_copy_q(
    sol: *const CtgLimitSolution,
    k: usize,
    buf: *mut f64,
    len: usize,
) -> CtgStatus {
    guard(|| {
        let s = deref(sol, "sol")?;
        if k >= s.inner.classes() {
            return Err(LimitError::InvalidClass(k).into());
        }
        copy_out(&s.inner.class_curve(k), buf, len)
    })
}

/// Aggregate variable `m(t)`.
///
/// # Safety
/// `sol` must be a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ctg_limit_copy_m(
    sol: *const CtgLimitSolution,
    buf: *mut f64,
    len: usize,
) -> CtgStatus {
    guard(|| copy_out(&deref(sol, "sol")?.inner.m, buf, len))
}

/// Limit loss per firm `l(t)`.
///
/// # Safety
/// `sol` must be a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ctg_limit_copy_loss(
    sol: *const CtgLimitSolution,
    buf: *mut f64,
    len: usize,
) -> CtgStatus {
    guard(|| {
        let s = deref(sol, "sol")?;
        copy_out(&limit::limit_loss(&s.inner, &s.env)?, buf, len)
    })
}

/// Limit variance of the loss at grid time `t`. Reciprocity is checked with
/// `reciprocity_tol`.
///
/// # Safety
/// `sol` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctg_variance_horizon(
    sol: *const CtgLimitSolution,
    t: f64,
    reciprocity_tol: f64,
    out: *mut CtgVarianceReport,
) -> CtgStatus {
    guard(|| {
        let s = deref(sol, "sol")?;
        let out = out_ref(out, "out")?;
        let cert = model::check_reciprocity(&s.env, reciprocity_tol)?;
        let r = clt::variance_horizon(&s.inner, &s.env, t, Some(&cert))?;
        *out = CtgVarianceReport {
            horizon: r.horizon,
            l: r.l,
            static_var: r.static_var,
            contagion_var: r.contagion_var,
            total: r.total,
            b: r.b,
        };
        Ok(())
    })
}

/// Gaussian approximation of `P(L_N / N >= x)` for a portfolio of `n` firms.
///
/// # Safety
/// `report` must be readable; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctg_excess_prob(
    report: *const CtgVarianceReport,
    n: usize,
    x: f64,
    out: *mut f64,
) -> CtgStatus {
    guard(|| {
        let r = deref(report, "report")?;
        let out = out_ref(out, "out")?;
        if n == 0 {
            return Err(Failure::new(CtgStatus::InvalidArgument, "n must be at least 1"));
        }
        let report = VarianceReport {
            horizon: r.horizon,
            l: r.l,
            static_var: r.static_var,
            contagion_var: r.contagion_var,
            total: r.total,
            b: r.b,
        };
        *out = clt::excess_prob(&report, n, x);
        Ok(())
    })
}
