//! Slow, obviously-correct reference implementations.
//!
//! Each function here answers the same question as a pipeline function by
//! exhaustive enumeration, so tests can compare the two on small inputs.

pub mod clustering;
pub mod grouping;
pub mod matching;
pub mod raster;
