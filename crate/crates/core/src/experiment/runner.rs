use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, SweepParameter};
use crate::error::{Error, Result};
use crate::field_io::write_field;
use crate::mcmc::{field_mse_over_runs, histogram, run_ensemble, InitialRule, McmcConfig};
use crate::model::ForwardModel;
use crate::observation::{add_noise, NoiseModel, ObservationMode, ObservationOperator, ObservationVector};
use crate::posterior::{hellinger_estimate, HellingerReport, InverseProblem};
use crate::prior::ModelParams;
use crate::solver::{ForwardSolver, GrowthField};

/// Bins of the emitted histograms.
pub const HISTOGRAM_BINS: usize = 40;

/// Command-line overrides applied on top of a parsed config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOptions {
    pub paper_scale: bool,
    /// Synthesize data only; no chains.
    pub dry_run: bool,
    /// Replaces the master seed.
    pub seed: Option<u64>,
    /// Replaces the output directory.
    pub out: Option<PathBuf>,
}

impl RunOptions {
    pub fn apply(&self, config: &ExperimentConfig) -> ExperimentConfig {
        let mut c = config.clone();
        if self.paper_scale {
            c.apply_paper_scale();
        }
        if let Some(s) = self.seed {
            c.mcmc.seed = s;
        }
        if let Some(o) = &self.out {
            c.output = o.clone();
        }
        c
    }
}

/// Files written under one experiment directory.
struct OutputDir {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputDir {
    fn create(root: &Path) -> Result<Self> {
        for sub in ["data", "chains", "tables", "fields"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, rel: &str) -> PathBuf {
        self.files.push(PathBuf::from(rel));
        self.root.join(rel)
    }

    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let p = self.path(rel);
        std::fs::write(p, contents)?;
        Ok(())
    }

    fn write_field(&mut self, rel: &str, grid: &crate::grid::Grid, values: &[f64], time: Option<f64>) -> Result<()> {
        let p = self.path(rel);
        write_field(&p, grid, values, time)?;
        self.files.push(PathBuf::from(format!("{rel}.meta")));
        Ok(())
    }

    fn finish(&self) -> Result<Vec<PathBuf>> {
        let mut text = String::new();
        for f in &self.files {
            writeln!(text, "{}", f.display()).unwrap();
        }
        std::fs::write(self.root.join("manifest.txt"), text)?;
        Ok(self.files.clone())
    }
}

/// Runs `body` and writes the manifest whether or not it succeeds.
fn with_output<T>(root: &Path, body: impl FnOnce(&mut OutputDir) -> Result<T>) -> Result<(T, Vec<PathBuf>)> {
    let mut out = OutputDir::create(root)?;
    let result = body(&mut out);
    let manifest = out.finish()?;
    result.map(|r| (r, manifest))
}

pub fn observation_operator(config: &ExperimentConfig) -> Result<ObservationOperator> {
    let mode = match config.observation.test_functions() {
        None => ObservationMode::FullGrid,
        Some(f) => ObservationMode::Functionals(f),
    };
    ObservationOperator::new(mode, config.observation.times.clone())
}

/// Forward model of the experiment with pressure exponent `m`.
pub fn forward_model(config: &ExperimentConfig, m: f64) -> Result<ForwardModel> {
    let mut solver = config.solver.clone();
    solver.m = m;
    solver.validate()?;
    Ok(ForwardModel {
        grid: config.grid.clone(),
        initial: config.initial,
        solver,
        observation: observation_operator(config)?,
        prior: config.prior.clone(),
        default_growth: config.fixed_growth,
    })
}

pub fn truth_params(config: &ExperimentConfig) -> ModelParams {
    ModelParams::from_flat(&config.truth, config.prior.n_parametric())
}

/// Results of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub value: Option<f64>,
    pub m: f64,
    pub sigma: f64,
    /// Mass removed by negative-value clamping in the truth solve, relative
    /// to the final mass.
    pub clamped_fraction: f64,
    pub summary: Option<CellSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub ensemble_mean: Vec<f64>,
    pub mse: Vec<f64>,
    /// `L2` mean-squared error of the growth field when it is inferred.
    pub field_mse: Option<f64>,
    pub acceptance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub id: String,
    pub out_dir: PathBuf,
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    pub cells: Vec<CellReport>,
    pub runtime: Duration,
    /// Paths relative to `out_dir`.
    pub manifest: Vec<PathBuf>,
}

impl ExperimentReport {
    /// Human-readable table for the terminal.
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "experiment {} -> {}", self.id, self.out_dir.display()).unwrap();
        for c in &self.cells {
            write!(s, "  m={} sigma={}", c.m, c.sigma).unwrap();
            match &c.summary {
                None => s.push_str("  (data only)"),
                Some(sum) => {
                    for (k, n) in self.names.iter().enumerate() {
                        write!(s, "  E({n})={:.4} MSE({n})={:.4}", sum.ensemble_mean[k], sum.mse[k]).unwrap();
                    }
                    if let Some(f) = sum.field_mse {
                        write!(s, "  MSE(h)={f:.4}").unwrap();
                    }
                    let acc = sum.acceptance.iter().sum::<f64>() / sum.acceptance.len() as f64;
                    write!(s, "  acceptance={acc:.3}").unwrap();
                }
            }
            s.push('\n');
        }
        writeln!(s, "  runtime {:.1} s", self.runtime.as_secs_f64()).unwrap();
        s
    }
}

fn csv_floats(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Synthesizes data from the truth and runs the multi-run MCMC study for
/// each sweep cell.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentReport> {
    let start = Instant::now();
    let cfg = options.apply(config);
    let names = cfg.prior.names();
    let truth = truth_params(&cfg);
    let truth_flat = truth.to_flat();
    let (cells, manifest) = with_output(&cfg.output, |out| {
        out.write("config.cfg", &cfg.source)?;
        let mut reports = Vec::new();
        for (c, value) in cfg.cells().into_iter().enumerate() {
            let (m, sigma) = cfg.cell_settings(value);
            log::info!("cell {c}: m = {m}, sigma = {sigma}");
            let model = forward_model(&cfg, m)?;
            let solution = model.solve(&truth)?;
            let last = solution.last().ok_or(Error::MissingSnapshot(cfg.solver.t_final))?;
            let clamped_fraction = solution.clamped_mass / last.density.mass(&model.grid).max(f64::MIN_POSITIVE);
            out.write_field(
                &format!("fields/cell{c}_rho_true.txt"),
                &model.grid,
                last.density.values(),
                Some(last.time),
            )?;
            let clean = model.observation.apply(&model.grid, &solution)?;
            let noise = NoiseModel::iid(sigma, clean.len(), cfg.data_seed())?;
            let noisy = add_noise(&clean, &noise)?;
            let data_path = out.path(&format!("data/cell{c}.dat"));
            out.files.push(PathBuf::from(format!("data/cell{c}.dat.clean")));
            crate::observation::SyntheticData { clean, noisy: noisy.clone(), noise: noise.clone() }
                .write(&data_path, model.observation.mode_name())?;

            let mut report = CellReport { value, m, sigma, clamped_fraction, summary: None };
            if options.dry_run {
                reports.push(report);
                continue;
            }
            let problem = InverseProblem::new(model, noisy, noise.variances().to_vec())?;
            report.summary = Some(run_cell(&cfg, &problem, c, &names, &truth_flat, out)?);
            reports.push(report);
        }
        if !options.dry_run {
            write_summary(&cfg, &names, &reports, out)?;
        }
        Ok(reports)
    })?;
    Ok(ExperimentReport {
        id: cfg.id.clone(),
        out_dir: cfg.output.clone(),
        names,
        truth: truth_flat,
        cells,
        runtime: start.elapsed(),
        manifest,
    })
}

fn run_cell(
    cfg: &ExperimentConfig,
    problem: &InverseProblem,
    c: usize,
    names: &[String],
    truth: &[f64],
    out: &mut OutputDir,
) -> Result<CellSummary> {
    let mcmc = McmcConfig {
        iterations: cfg.mcmc.iterations,
        burn_in: cfg.mcmc.burn_in,
        proposal_std: cfg.proposal_std(),
        seed: cfg.mcmc.seed,
        initial: InitialRule::PriorDraw,
        keep_burn_in: false,
    };
    let ensemble = run_ensemble(&mcmc, cfg.mcmc.runs, problem)?;
    for (k, chain) in ensemble.chains.iter().enumerate() {
        let p = out.path(&format!("chains/cell{c}_run{k}.csv"));
        chain.write_csv(&p, names)?;
    }

    let mut runs = format!("run,seed,acceptance,{}\n", names.join(","));
    for (k, (chain, mean)) in ensemble.chains.iter().zip(&ensemble.run_means).enumerate() {
        writeln!(runs, "{k},{},{},{}", chain.seed, chain.acceptance_rate(), csv_floats(mean)).unwrap();
    }
    writeln!(runs, "mean,,,{}", csv_floats(&ensemble.ensemble_mean)).unwrap();
    let mse = ensemble.mse(truth)?;
    writeln!(runs, "mse,,,{}", csv_floats(&mse)).unwrap();
    out.write(&format!("tables/cell{c}_runs.csv"), &runs)?;

    for (k, name) in names.iter().enumerate() {
        let mut h = String::from("lo,hi,count\n");
        for (lo, hi, n) in histogram(&ensemble.pooled(k), HISTOGRAM_BINS) {
            writeln!(h, "{lo},{hi},{n}").unwrap();
        }
        out.write(&format!("tables/cell{c}_hist_{name}.csv"), &h)?;
    }

    let model = problem.model();
    let n_param = model.prior.n_parametric();
    let field_mse = if model.prior.field.is_some() {
        let grid = &model.grid;
        let truth_field = model.growth_field(&ModelParams::from_flat(truth, n_param));
        let run_fields: Vec<GrowthField> =
            ensemble.run_means.iter().map(|m| model.growth_field(&ModelParams::from_flat(m, n_param))).collect();
        let mean_field = model.growth_field(&ModelParams::from_flat(&ensemble.ensemble_mean, n_param));
        let diff: Vec<f64> = mean_field.values().iter().zip(truth_field.values()).map(|(a, b)| a - b).collect();
        out.write_field(&format!("fields/cell{c}_h_true.txt"), grid, truth_field.values(), None)?;
        out.write_field(&format!("fields/cell{c}_h_mean.txt"), grid, mean_field.values(), None)?;
        out.write_field(&format!("fields/cell{c}_h_diff.txt"), grid, &diff, None)?;
        Some(field_mse_over_runs(&run_fields, &truth_field, grid)?)
    } else {
        None
    };
    let acceptance = ensemble.acceptance_rates();
    Ok(CellSummary { ensemble_mean: ensemble.ensemble_mean, mse, field_mse, acceptance })
}

fn write_summary(cfg: &ExperimentConfig, names: &[String], cells: &[CellReport], out: &mut OutputDir) -> Result<()> {
    let mut s = String::from("m,sigma");
    for n in names {
        write!(s, ",E({n}),MSE({n})").unwrap();
    }
    if cfg.prior.field.is_some() {
        s.push_str(",MSE(h)");
    }
    s.push_str(",acceptance\n");
    for cell in cells {
        let Some(sum) = &cell.summary else { continue };
        write!(s, "{},{}", cell.m, cell.sigma).unwrap();
        for k in 0..names.len() {
            write!(s, ",{},{}", sum.ensemble_mean[k], sum.mse[k]).unwrap();
        }
        if let Some(f) = sum.field_mse {
            write!(s, ",{f}").unwrap();
        }
        let acc = sum.acceptance.iter().sum::<f64>() / sum.acceptance.len() as f64;
        writeln!(s, ",{acc}").unwrap();
    }
    out.write("tables/summary.csv", &s)
}

/// Forward solve at the truth with snapshots at the observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardReport {
    pub out_dir: PathBuf,
    pub times: Vec<f64>,
    pub masses: Vec<f64>,
    pub clamped_mass: f64,
    pub manifest: Vec<PathBuf>,
}

pub fn run_forward(config: &ExperimentConfig, options: &RunOptions) -> Result<ForwardReport> {
    let cfg = options.apply(config);
    let model = forward_model(&cfg, cfg.solver.m)?;
    let truth = truth_params(&cfg);
    let solution = model.solve(&truth)?;
    let ((times, masses), manifest) = with_output(&cfg.output, |out| {
        out.write("config.cfg", &cfg.source)?;
        let rho0 = model.initial_density(&truth);
        out.write_field("fields/rho_initial.txt", &model.grid, rho0.values(), Some(0.0))?;
        let mut table = String::from("time,reached,mass\n");
        let mut times = vec![0.0];
        let mut masses = vec![rho0.mass(&model.grid)];
        writeln!(table, "0,0,{}", masses[0]).unwrap();
        for (j, snap) in solution.snapshots.iter().enumerate() {
            out.write_field(&format!("fields/rho_{j}.txt"), &model.grid, snap.density.values(), Some(snap.time))?;
            let mass = snap.density.mass(&model.grid);
            writeln!(table, "{},{},{mass}", snap.requested, snap.time).unwrap();
            times.push(snap.time);
            masses.push(mass);
        }
        out.write("tables/mass.csv", &table)?;
        Ok((times, masses))
    })?;
    Ok(ForwardReport { out_dir: cfg.output, times, masses, clamped_mass: solution.clamped_mass, manifest })
}

/// Hellinger distances between posteriors for consecutive exponents, and the
/// forward `L1` differences at the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub out_dir: PathBuf,
    pub hellinger: Vec<HellingerReport>,
    /// `(m1, m2, |rho_m1(T) - rho_m2(T)|_L1)`.
    pub l1: Vec<(f64, f64, f64)>,
    pub manifest: Vec<PathBuf>,
}

impl ConvergenceReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "m-convergence -> {}", self.out_dir.display()).unwrap();
        for (h, l) in self.hellinger.iter().zip(&self.l1) {
            writeln!(s, "  m {:>5} -> {:>5}: dH = {:.4} +- {:.4}   L1 = {:.5}", h.m1, h.m2, h.d_h, h.se, l.2).unwrap();
        }
        s
    }
}

/// Potentials `Phi_m(u_s)` on shared prior samples. Failed solves get
/// `+inf` (zero weight).
pub fn potentials_on_samples(problem: &InverseProblem, samples: &[ModelParams]) -> Vec<f64> {
    samples
        .par_iter()
        .map(|u| match problem.potential(u) {
            Ok(e) => e.phi,
            Err(e) => {
                log::warn!("forward solve failed for prior sample {:?}: {e}", u.to_flat());
                f64::INFINITY
            }
        })
        .collect()
}

pub fn run_m_convergence(config: &ExperimentConfig, options: &RunOptions) -> Result<ConvergenceReport> {
    let cfg = options.apply(config);
    let hs = cfg
        .hellinger
        .clone()
        .ok_or_else(|| Error::Validation(vec!["missing [hellinger] section for the m-convergence study".into()]))?;
    let m_max = *hs.m_values.last().expect("validated");
    let truth = truth_params(&cfg);
    let top = forward_model(&cfg, m_max)?;
    let clean = top.observe(&truth)?;
    let noise = NoiseModel::iid(cfg.observation.sigma, clean.len(), cfg.data_seed())?;
    let noisy: ObservationVector = add_noise(&clean, &noise)?;
    let problem = InverseProblem::new(top.clone(), noisy.clone(), noise.variances().to_vec())?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.mcmc.seed);
    let samples: Vec<ModelParams> = (0..hs.samples).map(|_| cfg.prior.sample(&mut rng)).collect();

    let mut phis: Vec<Vec<f64>> = Vec::with_capacity(hs.m_values.len());
    for (i, &m) in hs.m_values.iter().enumerate() {
        if i > 0 && m == hs.m_values[i - 1] {
            let prev = phis[i - 1].clone();
            phis.push(prev);
            continue;
        }
        log::info!("potentials at m = {m}");
        phis.push(potentials_on_samples(&problem.with_m(m), &samples));
    }

    let mut hellinger = Vec::new();
    let mut l1 = Vec::new();
    let final_density = |m: f64| -> Result<crate::grid::DensityField> {
        let model = top.with_m(m);
        let solver = ForwardSolver::new(&model.grid, model.solver.clone())?;
        let sol = solver.solve(&model.initial_density(&truth), &model.growth_field(&truth), &[model.solver.t_final])?;
        Ok(sol.snapshots.into_iter().next_back().expect("one snapshot").density)
    };
    let densities: Vec<_> = hs.m_values.iter().map(|&m| final_density(m)).collect::<Result<_>>()?;
    for i in 0..hs.m_values.len() - 1 {
        let (m1, m2) = (hs.m_values[i], hs.m_values[i + 1]);
        let seed = cfg.mcmc.seed.wrapping_add(i as u64);
        hellinger.push(hellinger_estimate(m1, m2, &phis[i], &phis[i + 1], hs.bootstrap, seed)?);
        l1.push((m1, m2, densities[i].l1_distance(&densities[i + 1], &cfg.grid)));
    }

    let ((), manifest) = with_output(&cfg.output, |out| {
        out.write("config.cfg", &cfg.source)?;
        let p = out.path("data/data.dat");
        out.files.push(PathBuf::from("data/data.dat.clean"));
        crate::observation::SyntheticData { clean: clean.clone(), noisy: noisy.clone(), noise: noise.clone() }
            .write(&p, top.observation.mode_name())?;
        let mut h = format!("{}\n", HellingerReport::CSV_HEADER);
        for r in &hellinger {
            writeln!(h, "{}", r.csv_row()).unwrap();
        }
        out.write("tables/hellinger.csv", &h)?;
        let mut t = String::from("m1,m2,L1\n");
        for (a, b, d) in &l1 {
            writeln!(t, "{a},{b},{d}").unwrap();
        }
        out.write("tables/l1.csv", &t)?;
        let mut p = String::from("sample");
        for m in &hs.m_values {
            write!(p, ",phi_m{m}").unwrap();
        }
        p.push('\n');
        for s in 0..samples.len() {
            write!(p, "{s}").unwrap();
            for row in &phis {
                write!(p, ",{:e}", row[s]).unwrap();
            }
            p.push('\n');
        }
        out.write("tables/potentials.csv", &p)?;
        Ok(())
    })?;
    Ok(ConvergenceReport { out_dir: cfg.output, hellinger, l1, manifest })
}

/// Sweep label for a config, used by the CLI.
pub fn sweep_label(config: &ExperimentConfig) -> &'static str {
    config.sweep.as_ref().map_or("cell", |s| match s.parameter {
        SweepParameter::Sigma => "sigma",
        SweepParameter::M => "m",
    })
}
