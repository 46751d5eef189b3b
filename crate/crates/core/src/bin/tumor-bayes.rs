use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tumor_bayes::experiment::{run_experiment, run_forward, run_m_convergence, ExperimentConfig, RunOptions};
use tumor_bayes::Error;

#[derive(Parser)]
#[command(name = "tumor-bayes", version, about = "Bayesian inversion for porous-medium tumor growth models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem at the true parameters and dump snapshots.
    Forward(Common),
    /// Generate synthetic noisy observations only.
    Synth(Common),
    /// Run the full inversion study (data, chains, tables, fields).
    Invert(Common),
    /// Hellinger distances between posteriors for consecutive exponents.
    Mconv(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Use the full-size iteration and run counts.
    #[arg(long)]
    paper_scale: bool,
    /// Output directory (overrides the file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Echo the config and synthesize data without sampling.
    #[arg(long)]
    dry_run: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions { paper_scale: self.paper_scale, dry_run: self.dry_run, seed: self.seed, out: self.out.clone() }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Forward(c) => {
            let cfg = ExperimentConfig::from_file(&c.config)?;
            let r = run_forward(&cfg, &c.options())?;
            println!("forward solve -> {}", r.out_dir.display());
            for (t, m) in r.times.iter().zip(&r.masses) {
                println!("  t = {t:<8} mass = {m:.6}");
            }
            println!("  clamped mass = {:e}", r.clamped_mass);
        }
        Command::Synth(c) => {
            let cfg = ExperimentConfig::from_file(&c.config)?;
            let mut opts = c.options();
            opts.dry_run = true;
            let r = run_experiment(&cfg, &opts)?;
            print!("{}", r.render());
        }
        Command::Invert(c) => {
            let cfg = ExperimentConfig::from_file(&c.config)?;
            if c.dry_run {
                print!("{}", cfg.source);
            }
            let r = run_experiment(&cfg, &c.options())?;
            print!("{}", r.render());
        }
        Command::Mconv(c) => {
            let cfg = ExperimentConfig::from_file(&c.config)?;
            let r = run_m_convergence(&cfg, &c.options())?;
            print!("{}", r.render());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
