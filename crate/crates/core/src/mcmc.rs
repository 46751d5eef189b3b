//! Random-walk Metropolis-Hastings with diagonal Gaussian proposals, burn-in
//! handling, and the multi-run mean-squared-error protocol.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::solver::GrowthField;

/// Number of prior redraws tried when the initial state has zero density.
pub const INITIAL_REDRAWS: usize = 100;

/// An unnormalized log density over `R^dim`.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// Log density up to an additive constant. `-inf` marks zero density;
    /// errors are treated as `-inf` by the sampler.
    fn log_density(&self, x: &[f64]) -> Result<f64>;

    /// Draw used for the initial state under [`InitialRule::PriorDraw`].
    fn draw_initial(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialRule {
    PriorDraw,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    /// Total iterations `M`, including burn-in.
    pub iterations: usize,
    /// Fraction of `M` discarded as burn-in.
    pub burn_in: f64,
    /// Proposal standard deviations (square roots of the diagonal of `Gamma^u`).
    pub proposal_std: Vec<f64>,
    pub seed: u64,
    pub initial: InitialRule,
    /// Keep the pre-burn-in part of the chain as well.
    pub keep_burn_in: bool,
}

impl McmcConfig {
    pub fn new(iterations: usize, proposal_std: Vec<f64>, seed: u64) -> Self {
        Self { iterations, burn_in: 0.25, proposal_std, seed, initial: InitialRule::PriorDraw, keep_burn_in: false }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let mut bad = Vec::new();
        if self.iterations < 10 {
            bad.push(format!("iterations must be >= 10 (got {})", self.iterations));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            bad.push(format!("burn-in fraction must lie in [0, 1) (got {})", self.burn_in));
        }
        if self.proposal_std.len() != dim {
            bad.push(format!("{} proposal scales for dimension {dim}", self.proposal_std.len()));
        }
        if self.proposal_std.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            bad.push("proposal scales must be positive".into());
        }
        if let InitialRule::Fixed(x) = &self.initial {
            if x.len() != dim {
                bad.push(format!("initial state has length {}, expected {dim}", x.len()));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidMcmc(bad.join("; ")))
        }
    }

    /// Number of discarded iterations, `ceil(burn_in * M)`.
    pub fn burn_in_count(&self) -> usize {
        (self.burn_in * self.iterations as f64).ceil() as usize
    }

    /// Stored sample count `N = M - ceil(burn_in * M)`.
    pub fn kept(&self) -> usize {
        self.iterations - self.burn_in_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub x: Vec<f64>,
    pub log_post: f64,
}

fn evaluate<T: Target + ?Sized>(target: &T, x: &[f64]) -> f64 {
    match target.log_density(x) {
        Ok(v) if !v.is_nan() => v,
        Ok(_) => f64::NEG_INFINITY,
        Err(e) => {
            log::debug!("log density failed at {x:?}: {e}");
            f64::NEG_INFINITY
        }
    }
}

/// Draws `u' = u + diag(proposal_std) xi` and accepts with probability
/// `min(1, exp(lp' - lp))`. Returns the next state and whether `u'` was taken.
pub fn mh_step<T: Target + ?Sized, R: Rng>(
    current: &State,
    proposal_std: &[f64],
    rng: &mut R,
    target: &T,
) -> (State, bool) {
    let proposal: Vec<f64> = current
        .x
        .iter()
        .zip(proposal_std)
        .map(|(x, s)| {
            let z: f64 = StandardNormal.sample(rng);
            x + s * z
        })
        .collect();
    let lp = evaluate(target, &proposal);
    let u: f64 = rng.random();
    if accept(current.log_post, lp, u) {
        (State { x: proposal, log_post: lp }, true)
    } else {
        (current.clone(), false)
    }
}

/// Acceptance rule on log scale: `ln u < lp_new - lp_old`.
#[inline]
pub fn accept(lp_old: f64, lp_new: f64, u: f64) -> bool {
    if lp_new == f64::NEG_INFINITY {
        return false;
    }
    let delta = lp_new - lp_old;
    delta >= 0.0 || u.ln() < delta
}

/// Post-burn-in samples with bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub samples: Vec<Vec<f64>>,
    pub log_post: Vec<f64>,
    /// Whether each stored sample was reached by an accepted move.
    pub accepted: Vec<bool>,
    /// Iteration number (1-based) of each stored sample.
    pub iteration: Vec<usize>,
    /// Accepted moves over all `M` iterations.
    pub accept_count: usize,
    pub iterations: usize,
    pub seed: u64,
    /// Pre-burn-in samples when requested.
    pub burn_in_samples: Option<Vec<Vec<f64>>>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.accept_count as f64 / self.iterations as f64
    }

    /// Writes `iter,logpost,accepted,<names...>` with one row per stored sample.
    pub fn write_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        let mut out = String::new();
        out.push_str("iter,logpost,accepted");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for k in 0..self.samples.len() {
            write!(out, "{},{:e},{}", self.iteration[k], self.log_post[k], u8::from(self.accepted[k])).unwrap();
            for v in &self.samples[k] {
                write!(out, ",{v:e}").unwrap();
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Runs `M` Metropolis-Hastings steps from the configured initial state and
/// discards the burn-in.
pub fn run_chain<T: Target + ?Sized>(config: &McmcConfig, target: &T) -> Result<Chain> {
    config.validate(target.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = match &config.initial {
        InitialRule::Fixed(x) => {
            let lp = evaluate(target, x);
            if lp == f64::NEG_INFINITY {
                return Err(Error::InitialState(0));
            }
            State { x: x.clone(), log_post: lp }
        }
        InitialRule::PriorDraw => {
            let mut found = None;
            for _ in 0..INITIAL_REDRAWS {
                let x = target.draw_initial(&mut rng);
                let lp = evaluate(target, &x);
                if lp > f64::NEG_INFINITY {
                    found = Some(State { x, log_post: lp });
                    break;
                }
            }
            found.ok_or(Error::InitialState(INITIAL_REDRAWS))?
        }
    };

    let burn = config.burn_in_count();
    let kept = config.kept();
    let mut chain = Chain {
        samples: Vec::with_capacity(kept),
        log_post: Vec::with_capacity(kept),
        accepted: Vec::with_capacity(kept),
        iteration: Vec::with_capacity(kept),
        accept_count: 0,
        iterations: config.iterations,
        seed: config.seed,
        burn_in_samples: config.keep_burn_in.then(|| Vec::with_capacity(burn)),
    };
    for it in 1..=config.iterations {
        let (next, acc) = mh_step(&state, &config.proposal_std, &mut rng, target);
        state = next;
        chain.accept_count += usize::from(acc);
        if it > burn {
            chain.samples.push(state.x.clone());
            chain.log_post.push(state.log_post);
            chain.accepted.push(acc);
            chain.iteration.push(it);
        } else if let Some(b) = chain.burn_in_samples.as_mut() {
            b.push(state.x.clone());
        }
    }
    let rate = chain.acceptance_rate();
    if rate > 0.95 {
        log::warn!("acceptance rate {rate:.3}: proposal scale is likely too small");
    }
    Ok(chain)
}

/// Runs `runs` chains with seeds `seed + k`, in parallel.
pub fn run_ensemble<T: Target + ?Sized>(config: &McmcConfig, runs: usize, target: &T) -> Result<RunEnsemble> {
    if runs == 0 {
        return Err(Error::InvalidMcmc("need at least one run".into()));
    }
    let chains: Vec<Chain> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut cfg = config.clone();
            cfg.seed = config.seed.wrapping_add(k as u64);
            run_chain(&cfg, target)
        })
        .collect::<Result<_>>()?;
    RunEnsemble::from_chains(chains)
}

/// Sample mean of a chain.
pub fn posterior_mean(chain: &Chain) -> Result<Vec<f64>> {
    mean_of(&chain.samples)
}

fn mean_of(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = rows.first().ok_or(Error::Empty)?;
    let mut acc = vec![0.0; first.len()];
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    let n = rows.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}

/// Per-coordinate `(1/K) sum_k (mean_k - truth)^2`.
pub fn mse_over_runs(run_means: &[Vec<f64>], truth: &[f64]) -> Result<Vec<f64>> {
    if run_means.is_empty() {
        return Err(Error::Empty);
    }
    let k = run_means.len() as f64;
    let mut out = vec![0.0; truth.len()];
    for m in run_means {
        if m.len() != truth.len() {
            return Err(Error::LengthMismatch { expected: truth.len(), actual: m.len() });
        }
        for ((o, v), t) in out.iter_mut().zip(m).zip(truth) {
            *o += (v - t).powi(2);
        }
    }
    Ok(out.into_iter().map(|o| o / k).collect())
}

/// `(1/K) sum_k ||hbar_k - h*||^2_{L2}` by midpoint quadrature.
pub fn field_mse_over_runs(run_fields: &[GrowthField], truth: &GrowthField, grid: &Grid) -> Result<f64> {
    if run_fields.is_empty() {
        return Err(Error::Empty);
    }
    let vol = grid.cell_volume();
    let total: f64 = run_fields
        .iter()
        .map(|f| f.values().iter().zip(truth.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() * vol)
        .sum();
    Ok(total / run_fields.len() as f64)
}

/// `K` independent chains with their means.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEnsemble {
    pub chains: Vec<Chain>,
    pub run_means: Vec<Vec<f64>>,
    pub ensemble_mean: Vec<f64>,
}

impl RunEnsemble {
    pub fn from_chains(chains: Vec<Chain>) -> Result<Self> {
        let run_means = chains.iter().map(posterior_mean).collect::<Result<Vec<_>>>()?;
        let ensemble_mean = mean_of(&run_means)?;
        Ok(Self { chains, run_means, ensemble_mean })
    }

    pub fn mse(&self, truth: &[f64]) -> Result<Vec<f64>> {
        mse_over_runs(&self.run_means, truth)
    }

    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.chains.iter().map(Chain::acceptance_rate).collect()
    }

    /// All post-burn-in samples of coordinate `c`, pooled across runs.
    pub fn pooled(&self, c: usize) -> Vec<f64> {
        self.chains.iter().flat_map(|ch| ch.samples.iter().map(move |s| s[c])).collect()
    }
}

/// Equal-width histogram over `[min, max]` of the data. Returns
/// `(lo, hi, count)` per bin.
pub fn histogram(data: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if data.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1e-12_f64.max(lo.abs() * 1e-12);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in data {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts.into_iter().enumerate().map(|(b, c)| (lo + b as f64 * width, lo + (b + 1) as f64 * width, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Standard normal in `dim` dimensions, optionally restricted to a box.
    struct Gauss {
        dim: usize,
        bound: Option<f64>,
        shift: f64,
    }

    impl Target for Gauss {
        fn dim(&self) -> usize {
            self.dim
        }
        fn log_density(&self, x: &[f64]) -> Result<f64> {
            if let Some(b) = self.bound {
                if x.iter().any(|v| v.abs() > b) {
                    return Ok(f64::NEG_INFINITY);
                }
            }
            Ok(self.shift - 0.5 * x.iter().map(|v| v * v).sum::<f64>())
        }
        fn draw_initial(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
            vec![0.0; self.dim]
        }
    }

    struct Failing;

    impl Target for Failing {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, x: &[f64]) -> Result<f64> {
            if x[0] > 0.0 {
                Err(Error::NonFinite { step: 1 })
            } else {
                Ok(0.0)
            }
        }
        fn draw_initial(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
            vec![-1.0]
        }
    }

    #[test]
    fn burn_in_counts() {
        let cfg = McmcConfig::new(100, vec![1.0], 0);
        assert_eq!(cfg.kept(), 75);
        let chain = run_chain(&cfg, &Gauss { dim: 1, bound: None, shift: 0.0 }).unwrap();
        assert_eq!(chain.len(), 75);
        assert_eq!(chain.iteration[0], 26);
    }

    #[test]
    fn accept_rule() {
        assert!(!accept(0.0, f64::NEG_INFINITY, 0.0));
        assert!(accept(1.0, 1.0, 0.999_999));
        assert!(accept(0.0, -1.0, 0.3)); // ln 0.3 = -1.20 < -1
        assert!(!accept(0.0, -1.0, 0.5));
    }

    #[test]
    fn zero_prior_proposal_always_rejected() {
        let t = Gauss { dim: 1, bound: Some(0.1), shift: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = State { x: vec![0.0], log_post: 0.0 };
        for _ in 0..1000 {
            let (next, acc) = mh_step(&s, &[10.0], &mut rng, &t);
            if acc {
                assert!(next.x[0].abs() <= 0.1);
            } else {
                assert_eq!(next, s);
            }
        }
    }

    #[test]
    fn standard_normal_acceptance_rate() {
        let mut cfg = McmcConfig::new(100_000, vec![1.0], 17);
        cfg.burn_in = 0.0;
        let chain = run_chain(&cfg, &Gauss { dim: 1, bound: None, shift: 0.0 }).unwrap();
        // Stationary acceptance for proposal std s on N(0,1) is (2/pi) atan(2/s).
        let exact = 2.0 / std::f64::consts::PI * 2.0f64.atan();
        assert!((chain.acceptance_rate() - exact).abs() < 0.02, "{}", chain.acceptance_rate());
        assert!((chain.acceptance_rate() - 0.70).abs() < 0.02);
    }

    #[test]
    fn failures_count_as_rejections() {
        let mut cfg = McmcConfig::new(500, vec![1.0], 2);
        cfg.initial = InitialRule::Fixed(vec![-1.0]);
        let chain = run_chain(&cfg, &Failing).unwrap();
        assert!(chain.samples.iter().all(|s| s[0] <= 0.0));
    }

    #[test]
    fn impossible_initial_state() {
        let t = Gauss { dim: 1, bound: Some(0.1), shift: 0.0 };
        let mut cfg = McmcConfig::new(20, vec![1.0], 2);
        cfg.initial = InitialRule::Fixed(vec![5.0]);
        assert!(matches!(run_chain(&cfg, &t), Err(Error::InitialState(_))));
    }

    #[test]
    fn seed_determinism() {
        let cfg = McmcConfig::new(2000, vec![0.7, 0.7], 99);
        let t = Gauss { dim: 2, bound: Some(3.0), shift: 0.0 };
        assert_eq!(run_chain(&cfg, &t).unwrap(), run_chain(&cfg, &t).unwrap());
    }

    #[test]
    fn shifted_target_same_decisions() {
        let cfg = McmcConfig::new(5000, vec![1.3, 0.4], 5);
        let a = run_chain(&cfg, &Gauss { dim: 2, bound: Some(2.0), shift: 0.0 }).unwrap();
        let b = run_chain(&cfg, &Gauss { dim: 2, bound: Some(2.0), shift: 1234.5 }).unwrap();
        assert_eq!(a.accepted, b.accepted);
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_over_runs(&[vec![1.0], vec![1.0]], &[1.0]).unwrap(), vec![0.0]);
        let d = 0.3;
        let mse = mse_over_runs(&[vec![1.0 + d], vec![1.0 - d]], &[1.0]).unwrap();
        assert!((mse[0] - d * d).abs() < 1e-15);
        assert!(mse_over_runs(&[], &[1.0]).is_err());
    }

    #[test]
    fn empty_chain_mean_fails() {
        let chain = Chain {
            samples: vec![],
            log_post: vec![],
            accepted: vec![],
            iteration: vec![],
            accept_count: 0,
            iterations: 10,
            seed: 0,
            burn_in_samples: None,
        };
        assert!(matches!(posterior_mean(&chain), Err(Error::Empty)));
    }

    #[test]
    fn histogram_covers_all() {
        let data: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = histogram(&data, 40);
        assert_eq!(h.len(), 40);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 1000);
        assert!(histogram(&[2.0, 2.0], 40).iter().map(|b| b.2).sum::<usize>() == 2);
    }

    #[test]
    fn validates_config() {
        assert!(McmcConfig::new(5, vec![1.0], 0).validate(1).is_err());
        assert!(McmcConfig::new(50, vec![0.0], 0).validate(1).is_err());
        assert!(McmcConfig::new(50, vec![1.0], 0).validate(2).is_err());
        let mut c = McmcConfig::new(50, vec![1.0], 0);
        c.burn_in = 1.0;
        assert!(c.validate(1).is_err());
    }

    /// Three-state target on {0, 1, 2} embedded in R by rounding.
    struct ThreeState;
    const WEIGHTS: [f64; 3] = [0.2, 0.5, 0.3];

    impl Target for ThreeState {
        fn dim(&self) -> usize {
            1
        }
        fn log_density(&self, x: &[f64]) -> Result<f64> {
            let v = x[0];
            if v.fract() != 0.0 || !(0.0..=2.0).contains(&v) {
                return Ok(f64::NEG_INFINITY);
            }
            Ok(WEIGHTS[v as usize].ln())
        }
        fn draw_initial(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
            vec![1.0]
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn detailed_balance_three_states() {
        // Symmetric proposal on the integers: +-1 with equal probability.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let t = ThreeState;
        let steps = 1_000_000;
        let mut state = State { x: vec![1.0], log_post: WEIGHTS[1].ln() };
        let mut trans = [[0usize; 3]; 3];
        let mut visits = [0usize; 3];
        for _ in 0..steps {
            let from = state.x[0] as usize;
            let step = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let prop = vec![state.x[0] + step];
            let lp = t.log_density(&prop).unwrap();
            if accept(state.log_post, lp, rng.random()) {
                state = State { x: prop, log_post: lp };
            }
            let to = state.x[0] as usize;
            trans[from][to] += 1;
            visits[from] += 1;
        }
        let n = steps as f64;
        for i in 0..3 {
            assert!((visits[i] as f64 / n - WEIGHTS[i]).abs() < 0.01, "{visits:?}");
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let fij = trans[i][j] as f64 / n;
                let fji = trans[j][i] as f64 / n;
                let se = ((fij + fji) / n).sqrt();
                assert!((fij - fji).abs() < 3.0 * se + 1e-12, "{i}->{j}: {fij} vs {fji}");
            }
        }
    }
}
