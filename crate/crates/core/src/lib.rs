//! Certified measures of balls on the infinite-dimensional unit cube.
//!
//! The cube `Ω = [0,1]^ℕ` carries the weighted metric
//! `d(x, y) = Σ base^(1-n) |x_n - y_n|`. Ball measures are defined as limits of
//! finite-dimensional projected volumes; this crate computes those volumes
//! exactly (piecewise-polynomial convolution, with an inclusion–exclusion
//! oracle), brackets the limit with certified enclosures, and provides the
//! supporting machinery for Kronecker curves, finite permutations and ball
//! coverings.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covering;
pub mod error;
pub mod kronecker;
pub mod measure;
pub mod metric;
pub mod perm;
pub mod piecewise;
mod poly;
pub mod sampling;
pub mod volume;

pub use error::{Error, Result};
pub use metric::{Point, TruncationSchedule, WeightSchedule};
pub use piecewise::PiecewisePolyDensity;
