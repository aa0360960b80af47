//! Experiment sweeps over (technique, dataset, sequence length) and their
//! reports.

pub mod config;
pub mod plot;
pub mod report;
pub mod run;
pub mod synth;

pub use config::{DatasetConfig, ExperimentConfig, GroundTruthSpec, KSweep, TechniqueConfig, TechniqueKind};
pub use report::emit_reports;
pub use run::{run_experiment, ExperimentResults, SkippedCell, TimingRecord};
