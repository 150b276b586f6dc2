//! Experiment harness: configuration, synthetic cohorts, noise and stress
//! sweeps, and CSV reports.

mod cohort;
mod config;
mod demo;
mod report;
mod sweep;

pub use cohort::{
    enroll_cohort, enrollment_features, enrollment_recording, record, subjects, verification_sample, Arm, Cohort,
    Enrolled, Member, NoiseModel, Subject,
};
pub use demo::{quant_artifacts, run_protocol, ProtocolReport};
pub use config::{
    EccConfig, EnrollmentConfig, ExperimentConfig, NaModelConfig, NoiseSweepConfig,
    PopulationConfig, ProtocolRunConfig, RegenerationConfig, SigmaSource, StressConfig, CONFIG_VERSION,
};
pub use report::{
    plot_points, read_rows, summarize, write_plot_data, write_report, PlotPoint, ReportFiles,
    ReportRow, SummaryRow, DETAIL_FILE, PLOT_FILE, SUMMARY_FILE,
};
pub use sweep::{
    enrolled_keys, run_conditions, run_snr_sweep, run_stress_sweep, snr_conditions,
    stress_conditions, Condition,
};
