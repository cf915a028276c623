//! Implied correlations between foreign-exchange rates from vanilla option
//! implied volatilities, and Monte Carlo pricing of multi-FX basket and
//! barrier options under a multivariate lognormal model with
//! piecewise-constant vols and correlations.

pub mod cli;
pub mod correlation;
pub mod error;
pub mod market_data;
pub mod montecarlo;
pub mod term_structure;
pub mod vanilla;

pub use error::{Error, ErrorClass, Result};
