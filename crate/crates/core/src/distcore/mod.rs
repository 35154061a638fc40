// SPDX-License-Identifier: Apache-2.0

//! Distribution machinery shared by every other module.
//!
//! A quantity is either a [`Distribution::Point`] (an exact point mass) or a
//! [`GridDistribution`], a density tabulated on a uniform grid. Parameter
//! densities are built with weighted Gaussian KDE ([`kde`]), combined either
//! by Monte Carlo over named inputs ([`propagate::propagate_mc`]) or by a
//! grid outer product ([`propagate::propagate_grid`]), and reduced to a
//! [`CarbonSummary`].

pub mod grid;
pub mod kde;
pub mod propagate;
pub mod rng;
pub mod sample;
pub mod summary;

pub use grid::{Bounds, Distribution, GridDistribution, GridSpec};
pub use kde::{kde_auto, kde_fit, smooth_samples, Bandwidth, KdeInput};
pub use propagate::{propagate_grid, propagate_mc, Expr, GridOp, PropagationExpr, Source};
pub use sample::{sample, sample_named, SampleSet};
pub use summary::{summarize, CarbonSummary, Summarize};

use thiserror::Error;

/// Default number of grid points for fitted densities.
pub const DEFAULT_GRID_POINTS: usize = 4096;

/// Default Monte Carlo trial count.
pub const DEFAULT_SAMPLES: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("KDE input has no points")]
    EmptyInput,
    #[error("KDE weights sum to zero")]
    ZeroWeightSum,
    #[error("KDE weights length {weights} does not match points length {points}")]
    WeightLengthMismatch { points: usize, weights: usize },
    #[error("negative or non-finite KDE weight {0}")]
    InvalidWeight(f64),
    #[error("non-finite KDE point {0}")]
    NonFinitePoint(f64),
    #[error(
        "grid [{x_min}, {x_max}] does not cover required span [{required_min}, {required_max}]"
    )]
    GridTooNarrow {
        x_min: f64,
        x_max: f64,
        required_min: f64,
        required_max: f64,
    },
    #[error("bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("density has zero or non-finite total mass")]
    DegenerateDensity,
    #[error("quantile {0} is outside [0, 1]")]
    QuantileOutOfRange(f64),
    #[error("sample set is empty")]
    EmptySamples,
    #[error("expression references unbound input `{0}`")]
    UnboundInput(String),
    #[error("divisor support [{lo}, {hi}] is not strictly positive")]
    DivisionSupportIncludesZero { lo: f64, hi: f64 },
    #[error("divisor support [{lo}, {hi}] is not strictly positive")]
    DivisorSupportNonPositive { lo: f64, hi: f64 },
    #[error("output grid [{x_min}, {x_max}] cannot hold value {value}")]
    OutGridTooNarrow { x_min: f64, x_max: f64, value: f64 },
    #[error("invalid parametric source `{name}`: {reason}")]
    InvalidSource { name: String, reason: String },
    #[error("sample count must be at least 1")]
    ZeroSamples,
    #[error("malformed distribution record: {0}")]
    Format(String),
}

pub type Result<T, E = DistError> = std::result::Result<T, E>;
