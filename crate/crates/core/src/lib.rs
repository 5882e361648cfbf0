//! Hidden-variable fractal interpolation functions (HVFIFs) with function
//! contractivity factors.
//!
//! The crate builds the vector-valued iterated function system for an
//! extended data set `(x_i, y_i, z_i)`, evaluates its attractor by exact
//! subdivision and by iterating the Read–Bajraktarevic operator, and checks
//! smoothness, stability and box-counting-dimension estimates numerically.
//! Bivariate surfaces on rectangular grids live in [`surface`].

pub mod analysis;
pub mod cli;
pub mod config;
pub mod curve;
pub mod error;
pub mod eval;
pub mod factor;
pub mod output;
pub mod surface;

pub use curve::{ContractionReport, ExtendedDataSet, FactorQuad, Hvfif, IntervalMap, Orientation};
pub use error::{Error, Result};
pub use eval::{Method, SampleSet};
pub use factor::{Domain, FactorExpr, Interval};
