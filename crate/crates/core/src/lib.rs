//! Core library of the interactive video-query pipeline.
//!
//! Edge agents turn frames into compact per-person feature messages
//! (keypoints plus cropped body regions); the fog coordinator clusters region
//! colors, names them, and matches them against operator queries. This crate
//! holds the pure building blocks both sides share:
//!
//! - [`geometry`]: part-affinity math and bottom-up keypoint grouping
//! - [`provider`]: pluggable per-frame pose sources (fixture, synthetic, remote)
//! - [`regions`]: frame preprocessing and body-region cropping
//! - [`color`]: neighborhood clustering and palette naming
//! - [`query`]: query grammar, matching, reports and the feature index
//! - [`protocol`]: the binary edge/fog envelope format
//! - [`operator_api`]: the line protocol spoken to operator clients
//!
//! Geometry and clustering are generic over [`Real`]; the aliases below fix
//! the scalar at `f64`, which is what the services use.

// `!(x > y)` is used on purpose so NaN inputs take the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod color;
pub mod frame;
pub mod geometry;
pub mod operator_api;
pub mod protocol;
pub mod provider;
pub mod query;
pub mod regions;
pub mod scalar;

pub use frame::{CameraId, Frame, Rgb};
pub use geometry::PartKind;
pub use regions::Section;
pub use scalar::Real;

pub type Point = geometry::Point2D<f64>;
pub type Keypoint = geometry::Keypoint<f64>;
pub type Skeleton = geometry::Skeleton<f64>;
pub type LimbSpec = geometry::LimbSpec<f64>;
pub type AffinityField = geometry::AffinityField<f64>;
pub type PoseResult = provider::PoseResult<f64>;
pub type ColorCluster = color::ColorCluster<f64>;

pub type PointF32 = geometry::Point2D<f32>;
pub type SkeletonF32 = geometry::Skeleton<f32>;
pub type ColorClusterF32 = color::ColorCluster<f32>;
