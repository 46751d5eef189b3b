//! The parameter-to-observation map `u -> G^m(u)`.

use crate::error::Result;
use crate::grid::{initial_density_disk, initial_density_flower, DensityField, Grid};
use crate::observation::{ObservationOperator, ObservationVector};
use crate::prior::{ModelParams, ParamRole, PriorSpec};
use crate::solver::{ForwardSolution, ForwardSolver, GrowthField, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialShape {
    Flower { amplitude: f64 },
    Disk { radius2: f64, amplitude: f64 },
}

/// Initial-data template; the center may be overridden by parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub shape: InitialShape,
    pub center: (f64, f64),
}

impl InitialData {
    pub fn density(&self, grid: &Grid, center: (f64, f64)) -> DensityField {
        match self.shape {
            InitialShape::Flower { amplitude } => initial_density_flower(grid, center, amplitude),
            InitialShape::Disk { radius2, amplitude } => initial_density_disk(grid, center, radius2, amplitude),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardModel {
    pub grid: Grid,
    pub initial: InitialData,
    pub solver: SolverConfig,
    pub observation: ObservationOperator,
    pub prior: PriorSpec,
    /// Growth rate used when `u` carries neither a rate nor a field.
    pub default_growth: f64,
}

impl ForwardModel {
    pub fn with_m(&self, m: f64) -> Self {
        let mut out = self.clone();
        out.solver.m = m;
        out
    }

    pub fn center(&self, u: &ModelParams) -> (f64, f64) {
        (
            self.prior.value_of(u, ParamRole::CenterX).unwrap_or(self.initial.center.0),
            self.prior.value_of(u, ParamRole::CenterY).unwrap_or(self.initial.center.1),
        )
    }

    pub fn initial_density(&self, u: &ModelParams) -> DensityField {
        self.initial.density(&self.grid, self.center(u))
    }

    pub fn growth_field(&self, u: &ModelParams) -> GrowthField {
        self.prior.growth_field(u, &self.grid, self.default_growth)
    }

    pub fn solve(&self, u: &ModelParams) -> Result<ForwardSolution> {
        let solver = ForwardSolver::new(&self.grid, self.solver.clone())?;
        solver.solve(&self.initial_density(u), &self.growth_field(u), self.observation.times())
    }

    /// Noise-free observations `G^m(u)`.
    pub fn observe(&self, u: &ModelParams) -> Result<ObservationVector> {
        let sol = self.solve(u)?;
        self.observation.apply(&self.grid, &sol)
    }
}
