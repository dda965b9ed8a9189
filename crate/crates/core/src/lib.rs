//! Spatially-codified pooling of dense local descriptors over object candidates.
//!
//! The crate turns an image plus a set of binary object-candidate masks into
//! pooled region descriptors and, from those, a pixel-level semantic labeling:
//!
//! 1. [`raster`] — pixel-grid primitives: gray images, binary masks, exact
//!    Euclidean distance transforms and disc dilation.
//! 2. [`partition`] — per-candidate spatial codifications: the
//!    Figure-Border-Ground partition and two contour-based Spatial Pyramids
//!    over the Figure (crown layers and Cartesian quadrants).
//! 3. [`descriptors`] — dense multiscale local descriptors (eSIFT, eMSIFT,
//!    eLBP) and the center-in-region pool assignment rule.
//! 4. [`pooling`] — second-order pooling: averaged outer products, matrix
//!    logarithm, power normalization, and block concatenation.
//! 5. [`model`] — per-category ridge regression against overlap targets and
//!    linear scoring.
//! 6. [`pipeline`] — dataset ingestion, per-candidate feature assembly, greedy
//!    inference to a labeling, the per-category intersection-over-union
//!    metric, and a synthetic directional benchmark.
//!
//! All operations are pure functions of immutable inputs and safe to call
//! from many threads. Parallel paths merge in fixed canonical orders, so
//! results are identical across thread counts.

// Index loops over several same-length buffers are the clearer idiom in the
// matrix and histogram code below.
#![allow(clippy::needless_range_loop)]

pub mod descriptors;
mod error;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod pipeline;
pub mod pooling;
pub mod raster;

pub use error::{Error, Result};
