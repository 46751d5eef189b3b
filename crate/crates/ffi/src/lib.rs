//! C ABI over `tumor_bayes`.
//!
//! Objects are exposed as opaque handles created by `tb_*_new`/`tb_*_load`
//! functions and released with the matching `tb_*_free`. Every fallible call
//! returns a [`TbStatus`]; on failure a message is available from
//! [`tb_last_error_message`] on the same thread. Panics never cross the
//! boundary and are reported as [`TbStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use tumor_bayes::experiment::{forward_model, truth_params, ExperimentConfig};
use tumor_bayes::grid::{DensityField, Grid};
use tumor_bayes::mcmc::{run_chain, McmcConfig};
use tumor_bayes::observation::{synthesize_data, NoiseModel};
use tumor_bayes::posterior::{hellinger_estimate, InverseProblem};
use tumor_bayes::prior::ModelParams;
use tumor_bayes::solver::{solve_forward, GrowthField, SolverConfig};
use tumor_bayes::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Invalid configuration or input data.
    Validation = 3,
    /// A computation failed (solver, sampler, estimator).
    Runtime = 4,
    Io = 5,
    Panic = 6,
    /// Output buffer too small; the required size was written.
    BufferTooSmall = 7,
}

/// Uniform 1D or 2D mesh.
pub struct TbGrid(Grid);

/// Parsed experiment file.
pub struct TbExperiment(ExperimentConfig);

/// Experiment forward model with synthetic data attached.
pub struct TbProblem(InverseProblem);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> TbStatus {
    match err {
        Error::Io(_) => TbStatus::Io,
        e if e.is_validation() => TbStatus::Validation,
        _ => TbStatus::Runtime,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), TbStatus>) -> TbStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TbStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            TbStatus::Panic
        }
    }
}

fn lib<T>(r: tumor_bayes::Result<T>) -> Result<T, TbStatus> {
    r.map_err(|e| {
        set_error(e.to_string());
        status_of(&e)
    })
}

fn invalid(msg: &str) -> TbStatus {
    set_error(msg);
    TbStatus::InvalidArgument
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], TbStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(TbStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &str) -> Result<&'a mut [f64], TbStatus> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(TbStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, TbStatus> {
    p.as_ref().ok_or_else(|| {
        set_error(format!("{what} is null"));
        TbStatus::NullPointer
    })
}

unsafe fn write_out<T>(p: *mut T, value: T, what: &str) -> Result<(), TbStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(TbStatus::NullPointer);
    }
    p.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next `tb_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a 2D grid on `[xlo, xhi] x [ylo, yhi]` with `nx x ny` cells.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tb_grid_new_2d(
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
    nx: usize,
    ny: usize,
    out: *mut *mut TbGrid,
) -> TbStatus {
    guard(|| {
        let g = lib(Grid::new(&[(xlo, xhi), (ylo, yhi)], &[nx, ny]))?;
        write_out(out, Box::into_raw(Box::new(TbGrid(g))), "out")
    })
}

/// Creates a 1D grid on `[lo, hi]` with `n` cells.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tb_grid_new_1d(lo: f64, hi: f64, n: usize, out: *mut *mut TbGrid) -> TbStatus {
    guard(|| {
        let g = lib(Grid::new(&[(lo, hi)], &[n]))?;
        write_out(out, Box::into_raw(Box::new(TbGrid(g))), "out")
    })
}

/// Number of cells, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a handle from `tb_grid_new_*`.
#[no_mangle]
pub unsafe extern "C" fn tb_grid_num_cells(grid: *const TbGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.num_cells())
}

/// # Safety
/// `grid` must be null or a handle from `tb_grid_new_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_grid_free(grid: *mut TbGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Solves the forward problem from `rho0` with cell growth rates `h` and
/// writes the density at `t_final` into `rho_out`. All arrays hold
/// `num_cells` values ordered `j * nx + i`.
///
/// # Safety
/// `grid` must be a valid handle; the arrays must hold `num_cells` values.
#[no_mangle]
pub unsafe extern "C" fn tb_solve_forward(
    grid: *const TbGrid,
    rho0: *const f64,
    h: *const f64,
    num_cells: usize,
    m: f64,
    dt: f64,
    t_final: f64,
    rho_out: *mut f64,
) -> TbStatus {
    guard(|| {
        let grid = &deref(grid, "grid")?.0;
        if num_cells != grid.num_cells() {
            return Err(invalid("num_cells does not match the grid"));
        }
        let rho0 = lib(DensityField::from_values(grid, slice(rho0, num_cells, "rho0")?.to_vec()))?;
        let h = lib(GrowthField::from_values(grid, slice(h, num_cells, "h")?.to_vec()))?;
        let out = slice_mut(rho_out, num_cells, "rho_out")?;
        let cfg = lib(SolverConfig::new(m, dt, t_final))?;
        let sol = lib(solve_forward(grid, &rho0, &h, &cfg, &[t_final]))?;
        let last = sol.last().ok_or_else(|| invalid("no snapshot produced"))?;
        out.copy_from_slice(last.density.values());
        Ok(())
    })
}

/// Parses and validates an experiment file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_experiment_load(path: *const c_char, out: *mut *mut TbExperiment) -> TbStatus {
    guard(|| {
        if path.is_null() {
            set_error("path is null");
            return Err(TbStatus::NullPointer);
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not valid UTF-8"))?;
        let cfg = lib(ExperimentConfig::from_file(&PathBuf::from(path)))?;
        write_out(out, Box::into_raw(Box::new(TbExperiment(cfg))), "out")
    })
}

/// Number of unknowns of the experiment's prior, or 0 for a null handle.
///
/// # Safety
/// `exp` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn tb_experiment_dim(exp: *const TbExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.0.prior.dim())
}

/// Copies the true parameter vector into `out` (`len >= dim`).
///
/// # Safety
/// `exp` must be a valid handle and `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn tb_experiment_truth(exp: *const TbExperiment, out: *mut f64, len: usize) -> TbStatus {
    guard(|| {
        let cfg = &deref(exp, "experiment")?.0;
        if len < cfg.truth.len() {
            set_error(format!("need {} values", cfg.truth.len()));
            return Err(TbStatus::BufferTooSmall);
        }
        slice_mut(out, len, "out")?[..cfg.truth.len()].copy_from_slice(&cfg.truth);
        Ok(())
    })
}

/// # Safety
/// `exp` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_experiment_free(exp: *mut TbExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Builds the inverse problem of an experiment at exponent `m` and noise
/// level `sigma`, with data synthesized from the truth using `data_seed`.
///
/// # Safety
/// `exp` must be a valid handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_problem_new(
    exp: *const TbExperiment,
    m: f64,
    sigma: f64,
    data_seed: u64,
    out: *mut *mut TbProblem,
) -> TbStatus {
    guard(|| {
        let cfg = &deref(exp, "experiment")?.0;
        let model = lib(forward_model(cfg, m))?;
        let len = model.observation.len(&model.grid);
        let noise = lib(NoiseModel::iid(sigma, len, data_seed))?;
        let data = lib(synthesize_data(&model, &truth_params(cfg), &noise))?;
        let problem = lib(InverseProblem::new(model, data.noisy, noise.variances().to_vec()))?;
        write_out(out, Box::into_raw(Box::new(TbProblem(problem))), "out")
    })
}

/// Unnormalized log posterior at `u` (`-inf` outside the prior support).
///
/// # Safety
/// `problem` must be valid; `u` must hold `dim` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tb_problem_log_posterior(
    problem: *const TbProblem,
    u: *const f64,
    dim: usize,
    out: *mut f64,
) -> TbStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let prior = &p.model().prior;
        if dim != prior.dim() {
            return Err(invalid("dim does not match the prior"));
        }
        let u = ModelParams::from_flat(slice(u, dim, "u")?, prior.n_parametric());
        let v = lib(p.log_posterior(&u))?;
        write_out(out, v, "out")
    })
}

/// Potential `Phi = misfit - offset` at `u`.
///
/// # Safety
/// `problem` must be valid; `u` must hold `dim` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tb_problem_potential(
    problem: *const TbProblem,
    u: *const f64,
    dim: usize,
    out: *mut f64,
) -> TbStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        let prior = &p.model().prior;
        if dim != prior.dim() {
            return Err(invalid("dim does not match the prior"));
        }
        let u = ModelParams::from_flat(slice(u, dim, "u")?, prior.n_parametric());
        let e = lib(p.potential(&u))?;
        write_out(out, e.phi, "out")
    })
}

/// Runs one Metropolis-Hastings chain from a prior draw and writes the
/// post-burn-in samples row by row into `samples` (`capacity` values).
///
/// # Safety
/// `problem` must be valid; `proposal_std` holds `dim` values; `samples`
/// holds `capacity` values; `count` and `acceptance` are writable.
#[no_mangle]
pub unsafe extern "C" fn tb_problem_run_chain(
    problem: *const TbProblem,
    iterations: usize,
    burn_in: f64,
    proposal_std: *const f64,
    dim: usize,
    seed: u64,
    samples: *mut f64,
    capacity: usize,
    count: *mut usize,
    acceptance: *mut f64,
) -> TbStatus {
    guard(|| {
        let p = &deref(problem, "problem")?.0;
        if dim != p.model().prior.dim() {
            return Err(invalid("dim does not match the prior"));
        }
        let mut cfg = McmcConfig::new(iterations, slice(proposal_std, dim, "proposal_std")?.to_vec(), seed);
        cfg.burn_in = burn_in;
        lib(cfg.validate(dim))?;
        let needed = cfg.kept() * dim;
        write_out(count, cfg.kept(), "count")?;
        if capacity < needed {
            set_error(format!("need room for {needed} values"));
            return Err(TbStatus::BufferTooSmall);
        }
        let chain = lib(run_chain(&cfg, p))?;
        let out = slice_mut(samples, capacity, "samples")?;
        for (row, s) in out.chunks_mut(dim).zip(&chain.samples) {
            row.copy_from_slice(s);
        }
        write_out(acceptance, chain.acceptance_rate(), "acceptance")
    })
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tb_problem_free(problem: *mut TbProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Hellinger distance between two posteriors from potentials on shared
/// prior samples, with a bootstrap standard error.
///
/// # Safety
/// `phi1` and `phi2` must hold `n` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn tb_hellinger_estimate(
    phi1: *const f64,
    phi2: *const f64,
    n: usize,
    bootstrap: usize,
    seed: u64,
    d_h: *mut f64,
    se: *mut f64,
) -> TbStatus {
    guard(|| {
        let r = lib(hellinger_estimate(0.0, 0.0, slice(phi1, n, "phi1")?, slice(phi2, n, "phi2")?, bootstrap, seed))?;
        write_out(d_h, r.d_h, "d_h")?;
        write_out(se, r.se, "se")
    })
}
