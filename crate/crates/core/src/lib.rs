//! Link-level simulation and forecasting of time-varying RIS reflection
//! phases in a wideband multi-antenna downlink.
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`channel`] — clustered geometric wideband channel realizations and
//!    their slot-by-slot evolution under user mobility.
//! 2. [`ris_link`] — effective channels through the surface, zero-forcing
//!    precoding, sum spectral efficiency, and phase-configuration oracles.
//! 3. [`reservoir`] — multi-layer liquid state machine with a closed-form
//!    ridge readout for one-step and autoregressive phase forecasting.
//! 4. [`ensemble`] — bootstrap-aggregated reservoirs with accuracy-weighted
//!    circular averaging.
//! 5. [`metrics`] — angular RMSE, dispersion statistics, and training-cost
//!    FLOP formulas.
//! 6. [`dataio`] — trajectory CSV interchange, synthetic and oracle
//!    trajectory generation, and binary model containers.
//!
//! All numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below pin the common double-precision instantiations.

pub mod channel;
pub mod dataio;
pub mod ensemble;
pub mod linalg;
pub mod metrics;
pub mod phase;
pub mod reservoir;
pub mod ris_link;
pub mod rng;
pub mod scalar;

pub use scalar::Scalar;

/// Double-precision channel realization.
pub type ChannelSet64 = channel::ChannelSet<f64>;
/// Double-precision phase configuration.
pub type PhaseConfig64 = ris_link::PhaseConfig<f64>;
/// Double-precision phase trajectory.
pub type PhaseTrajectory64 = dataio::PhaseTrajectory<f64>;
/// Double-precision reservoir model.
pub type ReservoirModel64 = reservoir::ReservoirModel<f64>;
/// Double-precision ensemble model.
pub type EnsembleModel64 = ensemble::EnsembleModel<f64>;

/// Single-precision variants for memory-constrained experimentation.
pub type ChannelSet32 = channel::ChannelSet<f32>;
pub type PhaseTrajectory32 = dataio::PhaseTrajectory<f32>;
pub type ReservoirModel32 = reservoir::ReservoirModel<f32>;
