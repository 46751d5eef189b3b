//! Linear observation functionals `l_{j,k}(rho) = int xi_k(x) rho(x, t_j) dx`,
//! diagonal Gaussian noise, and synthetic data generation.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{DensityField, Grid};
use crate::model::ForwardModel;
use crate::prior::ModelParams;
use crate::solver::ForwardSolution;

/// Test function `xi_k` of an observation functional.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// Unnormalized bump `exp(-|x - c|^2 / (2 width^2))`.
    Gaussian {
        center: (f64, f64),
        width: f64,
    },
    Constant(f64),
}

impl TestFunction {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            TestFunction::Gaussian { center, width } => {
                let d2 = (x - center.0).powi(2) + (y - center.1).powi(2);
                (-d2 / (2.0 * width * width)).exp()
            }
            TestFunction::Constant(c) => c,
        }
    }

    /// `sup |xi|`.
    pub fn sup(&self) -> f64 {
        match *self {
            TestFunction::Gaussian { .. } => 1.0,
            TestFunction::Constant(c) => c.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationMode {
    /// Raw cell values at each observation time.
    FullGrid,
    Functionals(Vec<TestFunction>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationOperator {
    mode: ObservationMode,
    times: Vec<f64>,
}

impl ObservationOperator {
    pub fn new(mode: ObservationMode, times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidObservation("at least one observation time".into()));
        }
        for (k, &t) in times.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) || (k > 0 && t <= times[k - 1]) {
                return Err(Error::InvalidObservation(
                    "observation times must be positive and strictly increasing".into(),
                ));
            }
        }
        if let ObservationMode::Functionals(f) = &mode {
            if f.is_empty() {
                return Err(Error::InvalidObservation("no test functions".into()));
            }
            for tf in f {
                if let TestFunction::Gaussian { width, .. } = tf {
                    if !(*width > 0.0) {
                        return Err(Error::InvalidObservation("Gaussian width must be positive".into()));
                    }
                }
            }
        }
        Ok(Self { mode, times })
    }

    pub fn mode(&self) -> &ObservationMode {
        &self.mode
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mode_name(&self) -> &'static str {
        match self.mode {
            ObservationMode::FullGrid => "full_grid",
            ObservationMode::Functionals(_) => "functionals",
        }
    }

    /// Observations per time instant (`K`).
    pub fn per_time(&self, grid: &Grid) -> usize {
        match &self.mode {
            ObservationMode::FullGrid => grid.num_cells(),
            ObservationMode::Functionals(f) => f.len(),
        }
    }

    /// Total length `J * K`.
    pub fn len(&self, grid: &Grid) -> usize {
        self.times.len() * self.per_time(grid)
    }

    /// Observations of a single density field (one time instant), using the
    /// midpoint rule for functionals.
    pub fn observe_density(&self, grid: &Grid, rho: &DensityField) -> Vec<f64> {
        match &self.mode {
            ObservationMode::FullGrid => rho.values().to_vec(),
            ObservationMode::Functionals(fs) => {
                let vol = grid.cell_volume();
                fs.iter()
                    .map(|xi| {
                        grid.centers()
                            .map(|(k, x, y)| {
                                let r = rho.values()[k];
                                if r == 0.0 {
                                    0.0
                                } else {
                                    xi.eval(x, y) * r
                                }
                            })
                            .sum::<f64>()
                            * vol
                    })
                    .collect()
            }
        }
    }

    /// Noise-free observation vector of a forward solution.
    pub fn apply(&self, grid: &Grid, solution: &ForwardSolution) -> Result<ObservationVector> {
        let per_time = self.per_time(grid);
        let mut values = Vec::with_capacity(self.times.len() * per_time);
        for &t in &self.times {
            let snap = solution.at(t).ok_or(Error::MissingSnapshot(t))?;
            values.extend(self.observe_density(grid, &snap.density));
        }
        Ok(ObservationVector { values, per_time })
    }
}

/// Flat observation vector; entry `(j, k)` lives at `j * per_time + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationVector {
    pub values: Vec<f64>,
    pub per_time: usize,
}

impl ObservationVector {
    pub fn new(values: Vec<f64>, per_time: usize) -> Result<Self> {
        if per_time == 0 || !values.len().is_multiple_of(per_time) {
            return Err(Error::InvalidObservation(format!("length {} is not a multiple of {per_time}", values.len())));
        }
        Ok(Self { values, per_time })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_times(&self) -> usize {
        self.values.len() / self.per_time
    }

    pub fn flat_index(&self, j: usize, k: usize) -> usize {
        j * self.per_time + k
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[self.flat_index(j, k)]
    }

    /// Writes `# mode=... J=.. K=.. sigma=.. seed=..` followed by `j k value`
    /// lines.
    pub fn write(&self, path: &Path, mode: &str, noise: Option<&NoiseModel>) -> Result<()> {
        let mut out = String::new();
        let sigma = match noise {
            Some(n) => n.sigma_label(),
            None => "0".to_string(),
        };
        let seed = noise.map_or(0, |n| n.seed);
        writeln!(out, "# mode={mode} J={} K={} sigma={sigma} seed={seed}", self.num_times(), self.per_time).unwrap();
        for (idx, v) in self.values.iter().enumerate() {
            writeln!(out, "{} {} {v:e}", idx / self.per_time, idx % self.per_time).unwrap();
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Reads a file produced by [`ObservationVector::write`].
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let fail = |message: String| Error::Format { path: path.display().to_string(), message };
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| fail("empty file".into()))?;
        let field = |key: &str| -> Result<usize> {
            header
                .split_whitespace()
                .find_map(|tok| tok.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| fail(format!("header lacks {key}")))?
                .parse()
                .map_err(|_| fail(format!("bad {key} in header")))
        };
        let (j_count, k_count) = (field("J")?, field("K")?);
        let mut values = vec![f64::NAN; j_count * k_count];
        for (n, line) in lines.enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.is_empty() {
                continue;
            }
            let parsed = (toks.len() == 3)
                .then(|| {
                    Some((toks[0].parse::<usize>().ok()?, toks[1].parse::<usize>().ok()?, toks[2].parse::<f64>().ok()?))
                })
                .flatten();
            let (j, k, v) = parsed.ok_or_else(|| fail(format!("bad line {}", n + 2)))?;
            if j >= j_count || k >= k_count {
                return Err(fail(format!("index out of range on line {}", n + 2)));
            }
            values[j * k_count + k] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(fail("missing entries".into()));
        }
        ObservationVector::new(values, k_count)
    }
}

/// Diagonal Gaussian noise `eta ~ N(0, diag(variances))`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    variances: Vec<f64>,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(variances: Vec<f64>, seed: u64) -> Result<Self> {
        if variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidObservation("noise variances must be positive".into()));
        }
        Ok(Self { variances, seed })
    }

    /// Identical standard deviation `sigma` for `len` observations.
    pub fn iid(sigma: f64, len: usize, seed: u64) -> Result<Self> {
        Self::new(vec![sigma * sigma; len], seed)
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    fn sigma_label(&self) -> String {
        let first = self.variances.first().copied().unwrap_or(0.0);
        if self.variances.iter().all(|&v| v == first) {
            format!("{}", first.sqrt())
        } else {
            self.variances.iter().map(|v| v.sqrt().to_string()).collect::<Vec<_>>().join(",")
        }
    }
}

/// `y = y_clean + eta` with `eta` drawn from the model's seeded generator.
pub fn add_noise(clean: &ObservationVector, noise: &NoiseModel) -> Result<ObservationVector> {
    if clean.len() != noise.variances.len() {
        return Err(Error::LengthMismatch { expected: clean.len(), actual: noise.variances.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let values = clean
        .values
        .iter()
        .zip(&noise.variances)
        .map(|(y, var)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            y + var.sqrt() * z
        })
        .collect();
    Ok(ObservationVector { values, per_time: clean.per_time })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub clean: ObservationVector,
    pub noisy: ObservationVector,
    pub noise: NoiseModel,
}

impl SyntheticData {
    /// Writes `path` and its noise-free twin `path.clean`.
    pub fn write(&self, path: &Path, mode: &str) -> Result<()> {
        self.noisy.write(path, mode, Some(&self.noise))?;
        let mut clean = path.as_os_str().to_owned();
        clean.push(".clean");
        self.clean.write(Path::new(&clean), mode, None)
    }
}

/// Solves the forward problem at `truth`, observes it, and adds noise.
pub fn synthesize_data(model: &ForwardModel, truth: &ModelParams, noise: &NoiseModel) -> Result<SyntheticData> {
    let clean = model.observe(truth)?;
    let noisy = add_noise(&clean, noise)?;
    Ok(SyntheticData { clean, noisy, noise: noise.clone() })
}

/// Gaussian test functions centered on the cells `(i_k, j_k)` of `grid`.
pub fn gaussian_functionals_at_cells(grid: &Grid, cells: &[(usize, usize)], width: f64) -> Result<Vec<TestFunction>> {
    cells
        .iter()
        .map(|&(i, j)| {
            if i >= grid.nx() || j >= grid.ny() {
                return Err(Error::InvalidObservation(format!("cell ({i}, {j}) outside grid")));
            }
            Ok(TestFunction::Gaussian { center: grid.cell_center(i, j), width })
        })
        .collect()
}
