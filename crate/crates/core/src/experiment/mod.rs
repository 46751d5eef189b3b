//! Config-driven experiments: synthetic data, multi-run MCMC studies, and the
//! m-convergence study.

mod config;
mod runner;

pub use config::{
    ExperimentConfig, HellingerSection, McmcSection, ObservationSection, ObservationSpec, Sweep, SweepParameter,
};
pub use runner::{
    forward_model, observation_operator, potentials_on_samples, run_experiment, run_forward, run_m_convergence,
    sweep_label, truth_params, CellReport, CellSummary, ConvergenceReport, ExperimentReport, ForwardReport, RunOptions,
    HISTOGRAM_BINS,
};
