//! Asymptotic-preserving prediction / transport / correction integrator for
//!
//! ```text
//! rho_t + div(rho u) = h(x) rho,   u = -(m/(m-1)) grad rho^(m-1)
//! ```
//!
//! with no-flux boundaries. Each time step
//!
//! 1. predicts a face velocity `u*` from the linear system
//!    `u* - dt m grad(a (div(rho_f u*) - rho h)) = u^n`, `a = rho^(m-2)`;
//! 2. transports `rho` with a minmod-reconstructed central flux driven by
//!    `u*`, treating growth implicitly;
//! 3. resets `u` from the pressure gradient of the new density.
//!
//! The prediction system is `(I + B R) u* = rhs` with `B = dt m D^T diag(a) D`
//! symmetric positive semidefinite and `R = diag(rho_f)`. With `S = R^(1/2)`
//! and `q = S u*` it becomes the SPD system `(I + S B S) q = S rhs`, after
//! which `u* = rhs - B S q`. Faces whose two neighbouring cells are both
//! vacuum have `S = 0` and `a = 0` on both sides, so they decouple and keep
//! `u* = u^n`; only the remaining faces enter the solve.

use crate::error::{Error, Result};
use crate::grid::{minmod, DensityField, Grid, VelocityField};
use crate::linalg::{conjugate_gradient, solve_tridiagonal};

/// Densities at or below this value are treated as vacuum in power laws.
pub const VACUUM_FLOOR: f64 = 1e-300;

/// Boundary-cell density above which a "support reached the boundary"
/// warning fires.
pub const BOUNDARY_WARN: f64 = 1e-8;

/// `rho^e` for `rho > VACUUM_FLOOR`, otherwise 0 (including `e = 0`).
#[inline]
pub fn degenerate_pow(rho: f64, e: f64) -> f64 {
    if rho > VACUUM_FLOOR {
        (e * rho.ln()).exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolverKind {
    /// Tridiagonal direct solve in 1D, conjugate gradient in 2D.
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Pressure-law exponent, `m >= 2`.
    pub m: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Relative residual tolerance of the iterative prediction solve.
    pub tolerance: f64,
    pub max_linear_iterations: usize,
    /// Reject growth fields with `dt * max h >= 1` before stepping.
    pub check_growth_cap: bool,
    /// Clamp negative undershoots to zero and account for the removed mass.
    pub clamp_negative: bool,
    pub linear_solver: LinearSolverKind,
}

impl SolverConfig {
    pub fn new(m: f64, dt: f64, t_final: f64) -> Result<Self> {
        let cfg = Self {
            m,
            dt,
            t_final,
            tolerance: 1e-10,
            max_linear_iterations: 5000,
            check_growth_cap: true,
            clamp_negative: true,
            linear_solver: LinearSolverKind::Auto,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.m >= 2.0 && self.m.is_finite()) {
            bad.push(format!("m must be >= 2 (got {})", self.m));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            bad.push(format!("dt must be positive (got {})", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            bad.push(format!("t_final must be positive (got {})", self.t_final));
        }
        if !(self.tolerance > 0.0) {
            bad.push(format!("tolerance must be positive (got {})", self.tolerance));
        }
        if self.max_linear_iterations == 0 {
            bad.push("max_linear_iterations must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSolverConfig(bad.join("; ")))
        }
    }

    /// Number of steps needed to reach `t` (first step time `>= t`).
    pub fn steps_to(&self, t: f64) -> usize {
        ((t / self.dt) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Cell-centered growth rate `h(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthField {
    values: Vec<f64>,
}

impl GrowthField {
    pub fn constant(grid: &Grid, h: f64) -> Self {
        Self { values: vec![h; grid.num_cells()] }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::LengthMismatch { expected: grid.num_cells(), actual: values.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSolverConfig("growth field must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Errors if `1 - dt h_i <= 0` anywhere.
    pub fn check_cap(&self, dt: f64) -> Result<()> {
        match self.values.iter().position(|h| 1.0 - dt * h <= 0.0) {
            Some(cell) => Err(Error::GrowthCap { cell, value: dt * self.values[cell] }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Time the caller asked for.
    pub requested: f64,
    /// Step time actually reached (first step time `>=` requested).
    pub time: f64,
    pub density: DensityField,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    pub steps: usize,
    pub linear_iterations: usize,
    /// Largest `dt |u*| / dx` seen.
    pub max_courant: f64,
    pub clamp_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSolution {
    pub snapshots: Vec<Snapshot>,
    pub final_velocity: VelocityField,
    /// Total mass removed by clamping negative undershoots.
    pub clamped_mass: f64,
    pub stats: SolverStats,
}

impl ForwardSolution {
    /// Snapshot recorded for requested time `t`.
    pub fn at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| (s.requested - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Result of one transport update.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportOutcome {
    pub density: DensityField,
    pub clamped_mass: f64,
    pub clamp_events: usize,
}

/// An interior face linking a lower and an upper cell along one axis.
#[derive(Debug, Clone, Copy)]
struct FaceLink {
    /// Index into the x-face or y-face array.
    face: usize,
    y_axis: bool,
    lo: usize,
    hi: usize,
    inv_h: f64,
}

/// Forward solver bound to a grid and configuration. Owns its face tables;
/// cheap to construct, single-threaded.
#[derive(Debug, Clone)]
pub struct ForwardSolver<'g> {
    grid: &'g Grid,
    config: SolverConfig,
    links: Vec<FaceLink>,
}

impl<'g> ForwardSolver<'g> {
    pub fn new(grid: &'g Grid, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut links = Vec::with_capacity(grid.num_x_faces() + grid.num_y_faces());
        let inv_dx = 1.0 / grid.dx();
        for j in 0..ny {
            for f in 1..nx {
                links.push(FaceLink {
                    face: j * (nx + 1) + f,
                    y_axis: false,
                    lo: j * nx + f - 1,
                    hi: j * nx + f,
                    inv_h: inv_dx,
                });
            }
        }
        if grid.dim() == 2 {
            let inv_dy = 1.0 / grid.dy();
            for g in 1..ny {
                for i in 0..nx {
                    links.push(FaceLink {
                        face: g * nx + i,
                        y_axis: true,
                        lo: (g - 1) * nx + i,
                        hi: g * nx + i,
                        inv_h: inv_dy,
                    });
                }
            }
        }
        Ok(Self { grid, config, links })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    fn get(u: &VelocityField, l: &FaceLink) -> f64 {
        if l.y_axis {
            u.y_faces[l.face]
        } else {
            u.x_faces[l.face]
        }
    }

    fn set(u: &mut VelocityField, l: &FaceLink, v: f64) {
        if l.y_axis {
            u.y_faces[l.face] = v;
        } else {
            u.x_faces[l.face] = v;
        }
    }

    /// Velocity from the pressure gradient,
    /// `u = -(m/(m-1)) (rho_hi^(m-1) - rho_lo^(m-1)) / h` on interior faces.
    pub fn correction_step(&self, rho: &DensityField) -> VelocityField {
        let m = self.config.m;
        let coef = m / (m - 1.0);
        let p: Vec<f64> = rho.values().iter().map(|&r| degenerate_pow(r, m - 1.0)).collect();
        let mut u = VelocityField::zeros(self.grid);
        for l in &self.links {
            Self::set(&mut u, l, -coef * (p[l.hi] - p[l.lo]) * l.inv_h);
        }
        u
    }

    /// Initial velocity; identical to the correction map applied to `rho0`.
    pub fn init_velocity(&self, rho0: &DensityField) -> VelocityField {
        self.correction_step(rho0)
    }

    /// Implicit velocity prediction. Returns `u*` and the number of linear
    /// iterations used (0 for the direct path).
    pub fn prediction_step(
        &self,
        rho: &DensityField,
        u: &VelocityField,
        h: &GrowthField,
    ) -> Result<(VelocityField, usize)> {
        let m = self.config.m;
        let dt = self.config.dt;
        let rv = rho.values();
        let a: Vec<f64> = rv.iter().map(|&r| degenerate_pow(r, m - 2.0)).collect();
        let src: Vec<f64> = rv.iter().zip(h.values()).zip(&a).map(|((r, hh), aa)| aa * r * hh).collect();
        let dtm = dt * m;

        let direct = match self.config.linear_solver {
            LinearSolverKind::Auto => self.grid.dim() == 1,
            LinearSolverKind::Direct => {
                if self.grid.dim() != 1 {
                    return Err(Error::InvalidSolverConfig("direct prediction solve is only available in 1D".into()));
                }
                true
            }
            LinearSolverKind::Iterative => false,
        };

        let mut ustar = u.clone();
        if direct {
            self.predict_tridiagonal(rv, &a, &src, u, &mut ustar)?;
            return Ok((ustar, 0));
        }

        // Active faces: rho_f > 0.
        let active: Vec<(FaceLink, f64)> = self
            .links
            .iter()
            .filter_map(|l| {
                let rf = 0.5 * (rv[l.lo] + rv[l.hi]);
                (rf > 0.0).then(|| (*l, rf.sqrt()))
            })
            .collect();
        if active.is_empty() {
            return Ok((ustar, 0));
        }
        let n = active.len();
        let rhs: Vec<f64> =
            active.iter().map(|(l, _)| Self::get(u, l) - dtm * (src[l.hi] - src[l.lo]) * l.inv_h).collect();
        let b: Vec<f64> = rhs.iter().zip(&active).map(|(r, (_, s))| r * s).collect();
        let inv_diag: Vec<f64> =
            active.iter().map(|(l, s)| 1.0 / (1.0 + s * s * dtm * (a[l.lo] + a[l.hi]) * l.inv_h * l.inv_h)).collect();

        // (B w)_f for w given on active faces; returns values on active faces.
        let ncells = rv.len();
        let apply_b = |w: &[f64], div: &mut Vec<f64>, out: &mut [f64]| {
            for (l, _) in &active {
                div[l.lo] = 0.0;
                div[l.hi] = 0.0;
            }
            for ((l, _), wk) in active.iter().zip(w) {
                let flux = wk * l.inv_h;
                div[l.lo] += flux;
                div[l.hi] -= flux;
            }
            for ((l, _), o) in active.iter().zip(out.iter_mut()) {
                *o = -dtm * (a[l.hi] * div[l.hi] - a[l.lo] * div[l.lo]) * l.inv_h;
            }
        };

        let div_cell = std::cell::RefCell::new(vec![0.0; ncells]);
        let sq = std::cell::RefCell::new(vec![0.0; n]);
        let apply = |q: &[f64], out: &mut [f64]| {
            let mut sq = sq.borrow_mut();
            for ((v, qk), (_, s)) in sq.iter_mut().zip(q).zip(&active) {
                *v = s * qk;
            }
            apply_b(&sq, &mut div_cell.borrow_mut(), out);
            for ((o, qk), (_, s)) in out.iter_mut().zip(q).zip(&active) {
                *o = qk + s * *o;
            }
        };

        let mut q: Vec<f64> = active.iter().map(|(l, s)| s * Self::get(u, l)).collect();
        let stats =
            conjugate_gradient(apply, &inv_diag, &b, &mut q, self.config.tolerance, self.config.max_linear_iterations)?;

        let sq_final: Vec<f64> = q.iter().zip(&active).map(|(qk, (_, s))| s * qk).collect();
        let mut bsq = vec![0.0; n];
        apply_b(&sq_final, &mut div_cell.borrow_mut(), &mut bsq);
        for (k, (l, _)) in active.iter().enumerate() {
            Self::set(&mut ustar, l, rhs[k] - bsq[k]);
        }
        Ok((ustar, stats.iterations))
    }

    /// Assembles `(I + B R)` on the interior faces of a 1D grid and solves it
    /// directly.
    fn predict_tridiagonal(
        &self,
        rv: &[f64],
        a: &[f64],
        src: &[f64],
        u: &VelocityField,
        ustar: &mut VelocityField,
    ) -> Result<()> {
        let nx = self.grid.nx();
        let n = nx - 1;
        let kappa = self.config.dt * self.config.m / (self.grid.dx() * self.grid.dx());
        let inv_dx = 1.0 / self.grid.dx();
        let dtm = self.config.dt * self.config.m;
        // Face f (1..nx) sits between cells f-1 and f; rho at boundary faces is 0.
        let rho_face = |f: usize| -> f64 {
            if f == 0 || f == nx {
                0.0
            } else {
                0.5 * (rv[f - 1] + rv[f])
            }
        };
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for k in 0..n {
            let f = k + 1;
            let (al, ar) = (a[f - 1], a[f]);
            diag[k] = 1.0 + kappa * (al + ar) * rho_face(f);
            lower[k] = -kappa * al * rho_face(f - 1);
            upper[k] = -kappa * ar * rho_face(f + 1);
            rhs[k] = u.x_faces[f] - dtm * (src[f] - src[f - 1]) * inv_dx;
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs)?;
        ustar.x_faces[1..nx].copy_from_slice(&rhs);
        Ok(())
    }

    /// Central-upwind transport with minmod reconstruction and implicit growth:
    /// `rho^{n+1} = (rho^n - dt div F) / (1 - dt h)`.
    pub fn transport_step(
        &self,
        rho: &DensityField,
        ustar: &VelocityField,
        h: &GrowthField,
    ) -> Result<TransportOutcome> {
        let grid = self.grid;
        let (nx, ny) = (grid.nx(), grid.ny());
        let dt = self.config.dt;
        let rv = rho.values();

        let mut slope_x = vec![0.0; rv.len()];
        let mut slope_y = vec![0.0; rv.len()];
        let dx = grid.dx();
        let dy = grid.dy();
        for j in 0..ny {
            for i in 1..nx.saturating_sub(1) {
                let k = j * nx + i;
                slope_x[k] = minmod((rv[k] - rv[k - 1]) / dx, (rv[k + 1] - rv[k]) / dx);
            }
        }
        if grid.dim() == 2 {
            for j in 1..ny - 1 {
                for i in 0..nx {
                    let k = j * nx + i;
                    slope_y[k] = minmod((rv[k] - rv[k - nx]) / dy, (rv[k + nx] - rv[k]) / dy);
                }
            }
        }

        let mut div = vec![0.0; rv.len()];
        for l in &self.links {
            let (uf, slope, half) = if l.y_axis {
                (ustar.y_faces[l.face], &slope_y, 0.5 * dy)
            } else {
                (ustar.x_faces[l.face], &slope_x, 0.5 * dx)
            };
            if uf == 0.0 {
                continue;
            }
            let left = rv[l.lo] + half * slope[l.lo];
            let right = rv[l.hi] - half * slope[l.hi];
            let flux = 0.5 * ((left + right) * uf - uf.abs() * (right - left));
            let f = flux * l.inv_h;
            div[l.lo] += f;
            div[l.hi] -= f;
        }

        let cell_volume = grid.cell_volume();
        let mut out = Vec::with_capacity(rv.len());
        let mut clamped_mass = 0.0;
        let mut clamp_events = 0;
        for (k, ((r, d), hh)) in rv.iter().zip(&div).zip(h.values()).enumerate() {
            let denom = 1.0 - dt * hh;
            if denom <= 0.0 {
                return Err(Error::GrowthCap { cell: k, value: dt * hh });
            }
            let mut v = (r - dt * d) / denom;
            if v < 0.0 && self.config.clamp_negative {
                clamped_mass -= v * cell_volume;
                clamp_events += 1;
                v = 0.0;
            }
            out.push(v);
        }
        Ok(TransportOutcome { density: DensityField::from_raw(out), clamped_mass, clamp_events })
    }

    /// Integrates from `t = 0` to `t_final`, recording a snapshot at the first
    /// step time `>=` each requested time.
    pub fn solve(&self, rho0: &DensityField, h: &GrowthField, snapshot_times: &[f64]) -> Result<ForwardSolution> {
        let cfg = &self.config;
        if rho0.len() != self.grid.num_cells() {
            return Err(Error::LengthMismatch { expected: self.grid.num_cells(), actual: rho0.len() });
        }
        if h.values().len() != self.grid.num_cells() {
            return Err(Error::LengthMismatch { expected: self.grid.num_cells(), actual: h.values().len() });
        }
        validate_times(snapshot_times, cfg.t_final)?;
        if cfg.check_growth_cap {
            h.check_cap(cfg.dt)?;
        }

        let targets: Vec<usize> = snapshot_times.iter().map(|&t| cfg.steps_to(t).max(1)).collect();
        let total = cfg.steps_to(cfg.t_final).max(targets.last().copied().unwrap_or(0));

        let mut rho = rho0.clone();
        let mut u = self.init_velocity(&rho);
        let mut snapshots = Vec::with_capacity(targets.len());
        let mut next = 0;
        let mut stats = SolverStats::default();
        let mut clamped_mass = 0.0;
        let mut courant_warned = false;
        let inv_min_h = 1.0 / self.grid.dx().min(if self.grid.dim() == 2 { self.grid.dy() } else { f64::INFINITY });

        for step in 1..=total {
            let time = step as f64 * cfg.dt;
            let wrap = |e: Error| Error::Step { step, time, source: Box::new(e) };
            let (ustar, iters) = self.prediction_step(&rho, &u, h).map_err(wrap)?;
            stats.linear_iterations += iters;
            let courant = cfg.dt * ustar.max_abs() * inv_min_h;
            stats.max_courant = stats.max_courant.max(courant);
            if courant > 1.0 && !courant_warned {
                log::warn!("Courant number {courant:.3} > 1 at step {step}");
                courant_warned = true;
            }
            let outcome = self.transport_step(&rho, &ustar, h).map_err(wrap)?;
            if outcome.density.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { step });
            }
            clamped_mass += outcome.clamped_mass;
            stats.clamp_events += outcome.clamp_events;
            rho = outcome.density;
            u = self.correction_step(&rho);
            stats.steps = step;

            while next < targets.len() && targets[next] == step {
                snapshots.push(Snapshot { requested: snapshot_times[next], time, density: rho.clone() });
                next += 1;
            }
        }

        let edge = rho.boundary_max(self.grid);
        if edge > BOUNDARY_WARN {
            log::warn!("density {edge:e} reached the domain boundary");
        }
        Ok(ForwardSolution { snapshots, final_velocity: u, clamped_mass, stats })
    }
}

fn validate_times(times: &[f64], t_final: f64) -> Result<()> {
    for (k, &t) in times.iter().enumerate() {
        if !(t > 0.0 && t <= t_final + 1e-12) {
            return Err(Error::InvalidSolverConfig(format!("snapshot time {t} outside (0, {t_final}]")));
        }
        if k > 0 && t <= times[k - 1] {
            return Err(Error::InvalidSolverConfig("snapshot times must be strictly increasing".into()));
        }
    }
    Ok(())
}

/// Convenience wrapper around [`ForwardSolver::solve`].
pub fn solve_forward(
    grid: &Grid,
    rho0: &DensityField,
    h: &GrowthField,
    config: &SolverConfig,
    snapshot_times: &[f64],
) -> Result<ForwardSolution> {
    ForwardSolver::new(grid, config.clone())?.solve(rho0, h, snapshot_times)
}
