//! Finite-key statistical fluctuation analysis for vacuum+weak decoy-state
//! QKD.
//!
//! Given per-state detection and error tallies, the library certifies lower
//! bounds on single-photon detections and upper bounds on phase error rates,
//! under a choice of fluctuation engines: exact Chernoff-bound inversion,
//! its simplified and asymptotic closed forms, a Gaussian approximation, and
//! a Chernoff+Hoeffding baseline. On top sit the secret-key length, a fiber
//! channel model for simulation, and a coordinate-descent optimizer over
//! source parameters.
//!
//! The `decoyqkd` binary exposes batch modes for tables, figure datasets,
//! distance sweeps, and Monte-Carlo coverage suites; see the crate README.
//!
//! ```
//! use decoyqkd::channel::expected_tallies;
//! use decoyqkd::estimator::estimate;
//! use decoyqkd::keyrate::finite_key_rate;
//! use decoyqkd::{BoundMethod, ChannelParams, PulseEnsemble};
//!
//! let channel = ChannelParams {
//!     detector_efficiency: 0.045,
//!     background_yield: 1.7e-6,
//!     misalignment: 0.033,
//!     loss_db_per_km: 0.21,
//!     distance_km: 100.0,
//! };
//! let source = PulseEnsemble::new(0.370, 0.126, 0.650, 0.250, 1e10)?;
//! let tallies = expected_tallies(&source, &channel, 0.5);
//! let certified = estimate(&tallies, &source, 0.5, 1e-10, BoundMethod::ExactChernoff)?;
//! let key = finite_key_rate(&certified, &tallies, &source, 1.22);
//! assert!(key.rate > 3e-6);
//! # Ok::<(), decoyqkd::estimator::EstimateError>(())
//! ```

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod config;
pub mod estimator;
pub mod keyrate;
pub mod optimizer;

pub use bounds::{BoundMethod, FailureProbability, MeanBounds, StatError};
pub use channel::ChannelParams;
pub use config::{Mode, RunConfig};
pub use estimator::{EstimatePair, ObservedTallies, PulseEnsemble, SinglePhotonEstimate};
pub use keyrate::KeyRateResult;
