//! Instance generators, passive baselines, the multi-trial runner, sweeps,
//! and confidence-coverage Monte Carlo.

pub mod coverage;
pub mod generators;
pub mod runner;
pub mod sweep;

pub use coverage::{coverage, CoverageConfig, CoverageKind, CoverageReport};
pub use generators::{gen_beta_band, gen_tsybakov, random_explicit_family, Generator};
pub use runner::{
    run_experiment, run_passive, run_trial, trial_seed, unique_best_fdr_policy, unique_best_policy, Algorithm,
    ExperimentConfig, TrialRecord,
};
pub use sweep::{sweep, to_csv, SweepConfig, SweepRow};
