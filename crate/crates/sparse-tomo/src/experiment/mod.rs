//! Desk-scale reconstruction experiments: phantoms, sampling and noise sweeps, scaling fits
//! and certification reports.

pub mod config;
pub mod output;
pub mod phantom;
pub mod report;
pub mod sweep;

pub use config::{ExperimentConfig, ModelChoice, PhantomSpec, SampleRule, ScaleRule, Shape, SolverSettings};
pub use phantom::{make_phantom, Phantom, PhantomMeta, Setup};
pub use report::{certify_model, run_certification_report, CertificationReport};
pub use sweep::{
    best_window, calibrate_c0, fit_scaling, run_cell, run_recovery_sweep, with_c0, Calibration, Cell, FitAxis,
    ScalingFit, SweepRecord,
};
