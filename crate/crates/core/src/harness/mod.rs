//! Experiment orchestration: single trials, evolution runs, the ratio sweep,
//! policy derivation and the validation suite.

pub mod config;
pub mod evolve;
pub mod manifest;
pub mod seeds;
pub mod sweep;
pub mod trial;
pub mod validate;

pub use config::ExperimentConfig;
pub use evolve::{run_evolution, EvolutionResult, GenerationRecord};
pub use manifest::Manifest;
pub use sweep::{derive_policy, run_ratio_sweep, SweepGrid};
pub use trial::{run_trial, Evaluator, TrajectoryRow, TrialOutcome, TrialSeries};
pub use validate::{run_validation, ValidationReport};
