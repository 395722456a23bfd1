//! Factor-augmented quantile autoregression toolkit.
//!
//! The crate estimates quantile autoregressions with and without estimated
//! common factors, tests their joint specification across a quantile grid
//! with weighted empirical processes and bootstrap critical values, ships a
//! Monte Carlo harness for size and power studies, and smooths fitted
//! quantile paths into skew-t densities.

pub mod bootstrap;
pub mod cli;
pub mod dist;
pub mod error;
pub mod monte_carlo;
pub mod panel;
pub mod qar;
pub mod rng;
pub mod skewt;

pub use error::{Error, Result};

/// The guide chapters from `book/`, included here so `cargo test` runs
/// every code block in them as a doc-test; mdbook alone cannot compile
/// snippets against the crate.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/factor-models.md")]
    pub mod factor_models {}
    #[doc = include_str!("../../../book/src/quantile-regression.md")]
    pub mod quantile_regression {}
    #[doc = include_str!("../../../book/src/specification-testing.md")]
    pub mod specification_testing {}
    #[doc = include_str!("../../../book/src/bootstrap.md")]
    pub mod bootstrap {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    pub mod monte_carlo {}
    #[doc = include_str!("../../../book/src/density-smoothing.md")]
    pub mod density_smoothing {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
