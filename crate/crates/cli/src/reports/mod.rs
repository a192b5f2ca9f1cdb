pub mod se_sweep;
pub mod tracking;
pub mod training;
pub mod variance;

pub use se_sweep::run_se_sweeps;
pub use tracking::run_tracking_report;
pub use training::run_training_report;
pub use variance::run_variance_report;
