//! Exact simulation and photon-loss mitigation for discrete-variable
//! linear-optical circuits.
//!
//! The crate computes ideal and lossy output distributions of an n-photon,
//! m-mode interferometer exactly (squared permanents over no-collision
//! outcomes), draws finite lossy samples under the uniform loss model, and
//! recovers loss-mitigated probabilities by recycling the lossy statistics
//! that postselection throws away.
//!
//! Module map:
//!
//! * [`mask`], [`comb`], [`permanent`], [`interferometer`],
//!   [`distribution`] — exact linear-optical machinery: occupation masks,
//!   Ryser permanents, Haar-random unitaries, ideal output tables.
//! * [`loss`] — uniform loss channel, exact lossy sectors, seeded sampling
//!   into a [`loss::SampleLedger`].
//! * [`recycling`] — recycled probabilities, their exact decomposition into
//!   signal plus interference, deviation statistics and the dependency
//!   factor.
//! * [`mitigation`] — the four postprocessors (linear solving, linear
//!   solving with dependency, linear and exponential extrapolation) and
//!   normalisation.
//! * [`baselines`] — postselection and the Richardson/zero-noise
//!   extrapolation machinery with its no-go bounds.
//! * [`bounds`] — analytic bound and sampling-regime calculators.
//! * [`gauss`] — moments of squared Gaussian permanents and the
//!   central-limit probe.
//! * [`metrics`], [`harness`] — distribution metrics and the seeded
//!   experiment driver with CSV/JSON artifacts.

pub mod baselines;
pub mod bounds;
pub mod comb;
pub mod distribution;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod interferometer;
pub mod loss;
pub mod mask;
pub mod metrics;
pub mod mitigation;
pub mod permanent;
pub mod recycling;
pub mod rng;

pub use error::{Error, Result};
