//! Data-misfit potential, unnormalized posterior density and Monte-Carlo
//! Hellinger distance between posteriors sharing one prior.

use std::collections::HashMap;
use std::sync::RwLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mcmc::Target;
use crate::model::ForwardModel;
use crate::observation::ObservationVector;
use crate::prior::ModelParams;

/// Entries above this count flush the misfit cache.
const CACHE_LIMIT: usize = 200_000;

/// `1/2 |Gamma^{-1/2} (pred - data)|^2` for diagonal `Gamma`.
pub fn misfit(pred: &[f64], data: &[f64], variances: &[f64]) -> Result<f64> {
    if pred.len() != data.len() {
        return Err(Error::LengthMismatch { expected: data.len(), actual: pred.len() });
    }
    if variances.len() != data.len() {
        return Err(Error::LengthMismatch { expected: data.len(), actual: variances.len() });
    }
    Ok(0.5 * pred.iter().zip(data).zip(variances).map(|((g, y), v)| (g - y).powi(2) / v).sum::<f64>())
}

/// `1/2 |Gamma^{-1/2} data|^2`.
pub fn data_offset(data: &[f64], variances: &[f64]) -> f64 {
    0.5 * data.iter().zip(variances).map(|(y, v)| y * y / v).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEvaluation {
    /// `misfit - offset`.
    pub phi: f64,
    pub misfit: f64,
    pub offset: f64,
    pub wall_time: Duration,
}

/// Potential from a prediction vector, without a forward solve.
pub fn potential_from_prediction(pred: &[f64], data: &[f64], variances: &[f64]) -> Result<PotentialEvaluation> {
    let mis = misfit(pred, data, variances)?;
    let offset = data_offset(data, variances);
    Ok(PotentialEvaluation { phi: mis - offset, misfit: mis, offset, wall_time: Duration::ZERO })
}

/// A forward model paired with data and a diagonal noise covariance.
#[derive(Debug)]
pub struct InverseProblem {
    model: ForwardModel,
    data: ObservationVector,
    variances: Vec<f64>,
    offset: f64,
    cache: RwLock<HashMap<String, f64>>,
}

impl Clone for InverseProblem {
    fn clone(&self) -> Self {
        Self::new(self.model.clone(), self.data.clone(), self.variances.clone()).expect("validated on construction")
    }
}

impl InverseProblem {
    pub fn new(model: ForwardModel, data: ObservationVector, variances: Vec<f64>) -> Result<Self> {
        let expected = model.observation.len(&model.grid);
        if data.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: data.len() });
        }
        if variances.len() != expected {
            return Err(Error::LengthMismatch { expected, actual: variances.len() });
        }
        if variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidObservation("noise variances must be positive".into()));
        }
        let offset = data_offset(&data.values, &variances);
        Ok(Self { model, data, variances, offset, cache: RwLock::new(HashMap::new()) })
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn data(&self) -> &ObservationVector {
        &self.data
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `1/2 |Gamma^{-1/2} y|^2`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Same data and noise with a different pressure exponent.
    pub fn with_m(&self, m: f64) -> Self {
        Self::new(self.model.with_m(m), self.data.clone(), self.variances.clone()).expect("validated on construction")
    }

    fn key(u: &ModelParams) -> String {
        let mut key = String::new();
        for v in u.parametric.iter().chain(&u.field) {
            key.push_str(&format!("{v:.15e};"));
        }
        key
    }

    /// Runs the forward model and evaluates the potential. Bypasses the cache.
    pub fn potential(&self, u: &ModelParams) -> Result<PotentialEvaluation> {
        let start = Instant::now();
        let pred = self.model.observe(u)?;
        let mis = misfit(&pred.values, &self.data.values, &self.variances)?;
        let phi = mis - self.offset;
        debug_assert!(phi >= -self.offset * (1.0 + 1e-12));
        Ok(PotentialEvaluation { phi, misfit: mis, offset: self.offset, wall_time: start.elapsed() })
    }

    /// Cached misfit.
    pub fn misfit(&self, u: &ModelParams) -> Result<f64> {
        let key = Self::key(u);
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let mis = self.potential(u)?.misfit;
        let mut cache = self.cache.write().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, mis);
        Ok(mis)
    }

    /// `log mu0(u) - misfit(u)`; `-inf` outside the prior support, where no
    /// forward solve is attempted.
    pub fn log_posterior(&self, u: &ModelParams) -> Result<f64> {
        let lp = self.model.prior.log_density(u);
        if lp == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(lp - self.misfit(u)?)
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }
}

impl Target for InverseProblem {
    fn dim(&self) -> usize {
        self.model.prior.dim()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let u = ModelParams::from_flat(x, self.model.prior.n_parametric());
        self.log_posterior(&u)
    }

    fn draw_initial(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.model.prior.sample(rng).to_flat()
    }
}

/// Monte-Carlo estimate of the Hellinger distance between two posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct HellingerReport {
    pub m1: f64,
    pub m2: f64,
    pub n: usize,
    /// `mean exp(-Phi_i)`; may underflow to 0, see `log_z`.
    pub z1: f64,
    pub z2: f64,
    pub log_z1: f64,
    pub log_z2: f64,
    pub d_h: f64,
    /// Bootstrap standard error of `d_h`.
    pub se: f64,
}

impl HellingerReport {
    pub const CSV_HEADER: &'static str = "m1,m2,N,Z1,Z2,dH,SE";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{:e},{:e},{:e},{:e}", self.m1, self.m2, self.n, self.z1, self.z2, self.d_h, self.se)
    }
}

pub const MIN_HELLINGER_SAMPLES: usize = 100;
pub const MIN_BOOTSTRAP: usize = 200;

fn log_mean_exp_neg(phi: &[f64], idx: impl Iterator<Item = usize> + Clone, shift: f64) -> f64 {
    let n = idx.clone().count() as f64;
    let s: f64 = idx.map(|i| (-(phi[i] - shift)).exp()).sum();
    s.ln() - n.ln()
}

/// `d^2` from recentred arrays on the resampled index set.
fn hellinger_sq(phi1: &[f64], phi2: &[f64], idx: &[usize]) -> Result<f64> {
    if idx.iter().all(|&i| phi1[i] == phi2[i]) && idx.iter().any(|&i| phi1[i].is_finite()) {
        return Ok(0.0);
    }
    let c1 = idx.iter().map(|&i| phi1[i]).fold(f64::INFINITY, f64::min);
    let c2 = idx.iter().map(|&i| phi2[i]).fold(f64::INFINITY, f64::min);
    let log_z1 = log_mean_exp_neg(phi1, idx.iter().copied(), c1);
    let log_z2 = log_mean_exp_neg(phi2, idx.iter().copied(), c2);
    let cross: f64 =
        idx.iter().map(|&i| (-0.5 * ((phi1[i] - c1) + (phi2[i] - c2))).exp()).sum::<f64>() / idx.len() as f64;
    if !(log_z1.is_finite() && log_z2.is_finite()) || cross == 0.0 {
        return Err(Error::Hellinger(
            "all importance weights underflowed even after recentring; use more samples or a broader potential".into(),
        ));
    }
    let ratio = (cross.ln() - 0.5 * (log_z1 + log_z2)).exp();
    Ok((1.0 - ratio).max(0.0))
}

/// Prior-importance estimate of `d_H(mu_1, mu_2)` from potentials evaluated
/// on a shared set of prior samples, with a bootstrap standard error.
pub fn hellinger_estimate(
    m1: f64,
    m2: f64,
    phi1: &[f64],
    phi2: &[f64],
    bootstrap: usize,
    seed: u64,
) -> Result<HellingerReport> {
    if phi1.len() != phi2.len() {
        return Err(Error::LengthMismatch { expected: phi1.len(), actual: phi2.len() });
    }
    let n = phi1.len();
    if n < MIN_HELLINGER_SAMPLES {
        return Err(Error::Hellinger(format!("need at least {MIN_HELLINGER_SAMPLES} prior samples (got {n})")));
    }
    if bootstrap < MIN_BOOTSTRAP {
        return Err(Error::Hellinger(format!("need at least {MIN_BOOTSTRAP} bootstrap resamples (got {bootstrap})")));
    }
    if phi1.iter().chain(phi2).any(|p| p.is_nan() || *p == f64::NEG_INFINITY) {
        return Err(Error::Hellinger("potentials must be finite or +inf".into()));
    }
    // Symmetrize so that swapping the arguments is exact in floating point.
    let (a, b) = if lex_le(phi1, phi2) { (phi1, phi2) } else { (phi2, phi1) };
    let all: Vec<usize> = (0..n).collect();
    let d2 = hellinger_sq(a, b, &all)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reps = Vec::with_capacity(bootstrap);
    let mut idx = vec![0usize; n];
    for _ in 0..bootstrap {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        if let Ok(v) = hellinger_sq(a, b, &idx) {
            reps.push(v.sqrt());
        }
    }
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let se = (reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (reps.len() as f64 - 1.0)).sqrt();

    let log_z = |phi: &[f64]| {
        let c = phi.iter().copied().fold(f64::INFINITY, f64::min);
        log_mean_exp_neg(phi, 0..n, c) - c
    };
    let (log_z1, log_z2) = (log_z(phi1), log_z(phi2));
    Ok(HellingerReport { m1, m2, n, z1: log_z1.exp(), z2: log_z2.exp(), log_z1, log_z2, d_h: d2.sqrt().min(1.0), se })
}

fn lex_le(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    true
}
