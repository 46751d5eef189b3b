//! Product priors over the unknown `u = (z, h)`: independent uniform or
//! normal laws on the parametric block `z`, and a truncated expansion
//! `h(x) = h0 + sum_i g_i phi_i(x)` with `g_i ~ N(0, c_i^2)` for the field block.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::solver::GrowthField;

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub parametric: Vec<f64>,
    /// Expansion coefficients `g_i = gamma_i zeta_i`.
    pub field: Vec<f64>,
}

impl ModelParams {
    pub fn new(parametric: Vec<f64>, field: Vec<f64>) -> Self {
        Self { parametric, field }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.parametric.iter().chain(&self.field).copied().collect()
    }

    /// Splits a flat vector; the first `n_parametric` entries form `z`.
    pub fn from_flat(flat: &[f64], n_parametric: usize) -> Self {
        Self { parametric: flat[..n_parametric].to_vec(), field: flat[n_parametric..].to_vec() }
    }

    pub fn is_finite(&self) -> bool {
        self.parametric.iter().chain(&self.field).all(|v| v.is_finite())
    }
}

/// One-dimensional law of a parametric entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Law {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, std: f64 },
}

impl Law {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Law::Uniform { lo, hi } if !(lo < hi) => {
                Err(Error::InvalidPrior(format!("uniform bounds need lo < hi (got [{lo}, {hi}])")))
            }
            Law::Normal { std, .. } if !(std > 0.0) => {
                Err(Error::InvalidPrior(format!("normal std must be positive (got {std})")))
            }
            _ => Ok(()),
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Law::Normal { mean, std } => {
                let z = (x - mean) / std;
                -0.5 * z * z - std.ln() - 0.5 * (2.0 * PI).ln()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Law::Normal { mean, std } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }
        }
    }

    /// Standard deviation of the law.
    pub fn scale(&self) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            Law::Normal { std, .. } => std,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Law::Uniform { lo, hi } => 0.5 * (lo + hi),
            Law::Normal { mean, .. } => mean,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match *self {
            Law::Uniform { lo, hi } => x >= lo && x <= hi,
            Law::Normal { .. } => x.is_finite(),
        }
    }
}

/// What a parametric entry controls in the forward model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    /// Spatially constant growth rate.
    Growth,
    CenterX,
    CenterY,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamPrior {
    pub name: String,
    pub role: ParamRole,
    pub law: Law,
}

/// A single basis function of the growth-field expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisFunction {
    SinPiX,
    SinPiY,
    CosPiXCosPiY,
    /// `sin(kx pi (x - x0) / lx) sin(ky pi (y - y0) / ly)`; `ky = 0` means no
    /// y factor (1D).
    Sine {
        kx: u32,
        ky: u32,
        x0: f64,
        lx: f64,
        y0: f64,
        ly: f64,
    },
}

impl BasisFunction {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            BasisFunction::SinPiX => (PI * x).sin(),
            BasisFunction::SinPiY => (PI * y).sin(),
            BasisFunction::CosPiXCosPiY => (PI * x).cos() * (PI * y).cos(),
            BasisFunction::Sine { kx, ky, x0, lx, y0, ly } => {
                let fx = (kx as f64 * PI * (x - x0) / lx).sin();
                if ky == 0 {
                    fx
                } else {
                    fx * (ky as f64 * PI * (y - y0) / ly).sin()
                }
            }
        }
    }
}

/// Basis functions with their decay weights `gamma_i` and eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    pub functions: Vec<BasisFunction>,
    pub gammas: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

impl Basis {
    /// `phi = (sin(pi x), sin(pi y), cos(pi x) cos(pi y))` with
    /// `gamma = (1/pi^2, 1/pi^2, 1/(2 pi^2))`.
    pub fn test3() -> Self {
        let pi2 = PI * PI;
        Self {
            functions: vec![BasisFunction::SinPiX, BasisFunction::SinPiY, BasisFunction::CosPiXCosPiY],
            gammas: vec![1.0 / pi2, 1.0 / pi2, 1.0 / (2.0 * pi2)],
            eigenvalues: vec![pi2, pi2, 2.0 * pi2],
        }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }
}

/// Decay weight `gamma = lambda^(-s/2)`.
pub fn spectral_gamma(lambda: f64, s: f64) -> f64 {
    lambda.powf(-0.5 * s)
}

/// First `n_modes` Dirichlet eigenfunctions of `-Laplace` on the grid's
/// rectangle, sorted by eigenvalue, with `gamma_i = lambda_i^(-s/2)`.
/// Functions have unit sup-norm.
pub fn tensor_sine_basis(grid: &Grid, n_modes: usize, s: f64) -> Result<Basis> {
    if !(s > 1.0) {
        return Err(Error::InvalidPrior(format!("decay exponent s must exceed 1 (got {s})")));
    }
    if n_modes == 0 {
        return Err(Error::InvalidPrior("need at least one mode".into()));
    }
    let ax = *grid.x_axis();
    let ay = grid.y_axis().copied();
    let lx = ax.length();
    let kmax = n_modes as u32 + 1;
    let mut modes: Vec<(f64, u32, u32)> = Vec::new();
    match ay {
        Some(ay) => {
            let ly = ay.length();
            for kx in 1..=kmax {
                for ky in 1..=kmax {
                    let lambda = PI * PI * ((kx * kx) as f64 / (lx * lx) + (ky * ky) as f64 / (ly * ly));
                    modes.push((lambda, kx, ky));
                }
            }
        }
        None => {
            for kx in 1..=kmax {
                modes.push((PI * PI * (kx * kx) as f64 / (lx * lx), kx, 0));
            }
        }
    }
    modes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    modes.truncate(n_modes);
    let (y0, ly) = ay.map_or((0.0, 1.0), |a| (a.lo, a.length()));
    Ok(Basis {
        functions: modes.iter().map(|&(_, kx, ky)| BasisFunction::Sine { kx, ky, x0: ax.lo, lx, y0, ly }).collect(),
        gammas: modes.iter().map(|&(l, _, _)| spectral_gamma(l, s)).collect(),
        eigenvalues: modes.iter().map(|&(l, _, _)| l).collect(),
    })
}

/// Prior over the field block.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPrior {
    /// Constant baseline `h0`.
    pub baseline: f64,
    pub basis: Basis,
    /// Standard deviations `c_i` of the coefficients `g_i`.
    pub std: Vec<f64>,
}

impl FieldPrior {
    pub fn new(baseline: f64, basis: Basis, std: Vec<f64>) -> Result<Self> {
        if std.len() != basis.len() {
            return Err(Error::InvalidPrior(format!(
                "{} coefficient deviations for {} basis functions",
                std.len(),
                basis.len()
            )));
        }
        if std.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidPrior("coefficient deviations must be nonnegative".into()));
        }
        Ok(Self { baseline, basis, std })
    }

    /// Spectral-decay prior: `c_i = gamma_i`, i.e. `g_i = gamma_i zeta_i`
    /// with `zeta_i ~ N(0, 1)`.
    pub fn spectral(baseline: f64, basis: Basis) -> Self {
        let std = basis.gammas.clone();
        Self { baseline, basis, std }
    }

    /// Coefficients `g_i = gamma_i zeta_i`.
    pub fn coefficients_from_zeta(&self, zeta: &[f64]) -> Vec<f64> {
        self.basis.gammas.iter().zip(zeta).map(|(g, z)| g * z).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriorSpec {
    pub parametric: Vec<ParamPrior>,
    pub field: Option<FieldPrior>,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        for p in &self.parametric {
            p.law.validate().map_err(|e| Error::InvalidPrior(format!("{}: {e}", p.name)))?;
        }
        for role in [ParamRole::Growth, ParamRole::CenterX, ParamRole::CenterY] {
            if self.parametric.iter().filter(|p| p.role == role).count() > 1 {
                return Err(Error::InvalidPrior(format!("duplicate role {role:?}")));
            }
        }
        if self.field.is_some() && self.parametric.iter().any(|p| p.role == ParamRole::Growth) {
            return Err(Error::InvalidPrior("a constant growth rate and a growth field are exclusive".into()));
        }
        Ok(())
    }

    pub fn n_parametric(&self) -> usize {
        self.parametric.len()
    }

    pub fn n_field(&self) -> usize {
        self.field.as_ref().map_or(0, |f| f.basis.len())
    }

    pub fn dim(&self) -> usize {
        self.n_parametric() + self.n_field()
    }

    /// Coordinate names in flat order: parametric names then `g1, g2, ...`.
    pub fn names(&self) -> Vec<String> {
        self.parametric.iter().map(|p| p.name.clone()).chain((1..=self.n_field()).map(|i| format!("g{i}"))).collect()
    }

    /// Per-coordinate prior standard deviation, in flat order.
    pub fn scales(&self) -> Vec<f64> {
        self.parametric
            .iter()
            .map(|p| p.law.scale())
            .chain(self.field.iter().flat_map(|f| f.std.iter().copied()))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ModelParams {
        let parametric = self.parametric.iter().map(|p| p.law.sample(rng)).collect();
        let field = match &self.field {
            Some(f) => f
                .std
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(rng);
                    c * z
                })
                .collect(),
            None => Vec::new(),
        };
        ModelParams { parametric, field }
    }

    /// Sum of per-coordinate log densities; `-inf` outside uniform supports.
    /// Zero-variance field coefficients contribute nothing at 0 and `-inf`
    /// elsewhere.
    pub fn log_density(&self, u: &ModelParams) -> f64 {
        if u.parametric.len() != self.n_parametric() || u.field.len() != self.n_field() {
            return f64::NEG_INFINITY;
        }
        let mut total = 0.0;
        for (p, &x) in self.parametric.iter().zip(&u.parametric) {
            total += p.law.log_density(x);
        }
        if let Some(f) = &self.field {
            for (&c, &g) in f.std.iter().zip(&u.field) {
                if c == 0.0 {
                    if g != 0.0 {
                        return f64::NEG_INFINITY;
                    }
                } else {
                    total += Law::Normal { mean: 0.0, std: c }.log_density(g);
                }
            }
        }
        total
    }

    pub fn in_support(&self, u: &ModelParams) -> bool {
        self.log_density(u) > f64::NEG_INFINITY
    }

    pub fn value_of(&self, u: &ModelParams, role: ParamRole) -> Option<f64> {
        self.parametric.iter().position(|p| p.role == role).map(|k| u.parametric[k])
    }

    /// Cell-centered growth field for `u`: the constant growth parameter if
    /// present, else `h0 + sum g_i phi_i`, else the constant `default_h`.
    pub fn growth_field(&self, u: &ModelParams, grid: &Grid, default_h: f64) -> GrowthField {
        if let Some(h) = self.value_of(u, ParamRole::Growth) {
            return GrowthField::constant(grid, h);
        }
        match &self.field {
            Some(f) => {
                let values = grid.sample(|x, y| {
                    f.baseline + f.basis.functions.iter().zip(&u.field).map(|(phi, g)| g * phi.eval(x, y)).sum::<f64>()
                });
                GrowthField::from_values(grid, values).unwrap_or_else(|_| GrowthField::constant(grid, f64::NAN))
            }
            None => GrowthField::constant(grid, default_h),
        }
    }

    /// `max(|z|_inf, sup|h|)` evaluated on the grid.
    pub fn sup_norm(&self, u: &ModelParams, grid: &Grid, default_h: f64) -> f64 {
        let z = u.parametric.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let h = self.growth_field(u, grid, default_h);
        h.values().iter().fold(z, |m, v| m.max(v.abs()))
    }
}
