//! Monte Carlo and exact tools for the normal approximation of random
//! projections `S_n(θ) = <X, θ>` of stationary martingale-difference vectors.

pub mod dependence;
pub mod distance;
pub mod error;
pub mod experiments;
pub mod moment_match;
pub mod processes;
pub mod report;
pub mod rng;
pub mod selftest;
pub mod sphere;

pub use error::{Error, Result};
