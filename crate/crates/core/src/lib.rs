//! Simulation library for private and robust stochastic multi-armed bandits.
//!
//! Rewards are heavy-tailed and subject to Huber contamination: each pull
//! returns an inlier draw with probability `1 - alpha` and an outlier draw
//! otherwise. Learners only ever see contaminated rewards, while regret is
//! measured against the inlier means ("clean regret").
//!
//! Layout:
//! - [`env`]: reward distributions, contamination, benchmark and hard instances, RNG streams.
//! - [`privacy`]: Laplace mechanism, truncated-mean sensitivity, release instrumentation.
//! - [`estimators`]: the raw-moment and central-moment private robust mean estimators and their schedules.
//! - [`bandit`]: batched private arm elimination, the non-robust baseline, clean regret.
//! - [`harness`]: experiment configuration, orchestration and CSV output.

pub mod bandit;
pub mod env;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod privacy;
pub mod rng;

pub use error::{Error, Result};
pub use rng::RngStream;
