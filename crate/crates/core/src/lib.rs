//! Sensor fingerprinting from measurement noise.
//!
//! The pipeline turns raw readings into noise chunks ([`signal`]), summarizes
//! each chunk by an eight-feature fingerprint ([`features`]), identifies
//! sensors with a one-vs-one RBF SVM ([`classifier`]) and scores the result
//! ([`eval`]). [`simulator`] produces seeded sensor fleets and attack
//! scenarios, [`detector`] turns fingerprints into per-chunk verdicts, and
//! [`challenge`] runs the physical challenge-response protocol against
//! simulated adversaries.

pub mod challenge;
pub mod classifier;
pub mod config;
pub mod detector;
pub mod error;
pub mod eval;
pub mod features;
pub mod parallel;
pub mod readings;
pub mod signal;
pub mod simulator;

pub use error::{Error, Result};
pub use parallel::Execution;
