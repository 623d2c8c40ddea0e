//! Agent-based simulation of a climate prediction market.
//!
//! Traders hold one of two rival explanations for global temperature change
//! (CO2-driven or solar-irradiance-driven), refit their model by Bayesian
//! regression every year, and trade binary temperature-range securities on a
//! continuous double auction. At the end of each multi-year trading sequence
//! the securities settle against the realized temperature, and traders may
//! adopt the model of the richest neighbor in a fixed social network.
//!
//! The crate is organized around that yearly loop:
//!
//! - [`series`] / [`climate`]: annual climate series, forcing transforms, and
//!   the calibration of the true data-generating model.
//! - [`truth`]: stochastic future temperature realizations.
//! - [`bayes`]: trader-side posterior sampling and predictive distributions.
//! - [`market`]: range securities, limit-order book, and settlement.
//! - [`traders`] / [`network`]: trader state, zero-intelligence quoting, and
//!   belief revision over the social network.
//! - [`sim`]: the full simulation loop (historical and future modes).
//! - [`sensitivity`]: Latin hypercube sweeps, partial rank correlation
//!   coefficients, and bootstrap confidence intervals.
//!
//! Every stochastic component draws from an explicit seeded stream (see
//! [`rng`]), so a run is fully determined by its master seed. Sweeps and
//! replicate batches are data-parallel; with the default `parallel` feature
//! they run on a rayon pool, without it they fall back to a sequential loop
//! with identical output.

pub mod bayes;
pub mod climate;
mod error;
pub mod market;
pub mod network;
pub mod par;
pub mod rng;
pub mod sensitivity;
pub mod series;
pub mod sim;
pub mod traders;
pub mod truth;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
