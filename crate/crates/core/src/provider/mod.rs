//! Per-frame pose sources.
//!
//! The pipeline never embeds a neural network; keypoints come from a
//! [`PoseProvider`]: recorded fixtures, a synthetic ground-truth source, or a
//! remote inference endpoint. Every backend reports keypoints in native frame
//! coordinates.

mod fixture;
mod remote;

use std::time::Instant;

use crate::frame::CameraId;
use crate::geometry::Skeleton;
use crate::regions::PreprocessedFrame;
use crate::scalar::Real;

pub use fixture::{FixtureParseError, PoseFixture, FIXTURE_HEADER};
pub use remote::{parse_response, RemoteConfig, RemoteProvider, RESPONSE_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("no recorded pose for camera {camera} frame {sequence}")]
    FixtureMiss { camera: CameraId, sequence: u64 },
    #[error("remote inference unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("malformed inference response: {0}")]
    MalformedResponse(String),
    #[error("frame carries no pixels to send for inference")]
    MissingPixels,
    #[error(transparent)]
    Fixture(#[from] FixtureParseError),
}

/// Skeletons found in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseResult<T> {
    pub camera_id: CameraId,
    pub sequence: u64,
    pub skeletons: Vec<Skeleton<T>>,
    pub inference_millis: f64,
}

impl<T: Real> PoseResult<T> {
    pub fn empty(camera_id: CameraId, sequence: u64) -> Self {
        Self { camera_id, sequence, skeletons: Vec::new(), inference_millis: 0.0 }
    }

    pub fn in_bounds(&self, width: u32, height: u32) -> bool {
        self.skeletons.iter().all(|s| s.in_bounds(width, height))
    }
}

pub trait PoseProvider: Send {
    fn infer(&mut self, frame: &PreprocessedFrame) -> Result<PoseResult<f64>, ProviderError>;
}

impl<P: PoseProvider + ?Sized> PoseProvider for Box<P> {
    fn infer(&mut self, frame: &PreprocessedFrame) -> Result<PoseResult<f64>, ProviderError> {
        (**self).infer(frame)
    }
}

/// Replays recorded results keyed by `(camera_id, sequence)`.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    fixture: PoseFixture,
}

impl FixtureProvider {
    pub fn new(fixture: PoseFixture) -> Self {
        Self { fixture }
    }
}

impl PoseProvider for FixtureProvider {
    fn infer(&mut self, frame: &PreprocessedFrame) -> Result<PoseResult<f64>, ProviderError> {
        let src = &frame.source;
        self.fixture
            .get(&src.camera_id, src.sequence)
            .cloned()
            .ok_or_else(|| ProviderError::FixtureMiss { camera: src.camera_id.clone(), sequence: src.sequence })
    }
}

/// Source of exact skeletons for synthetic scenes.
pub trait GroundTruth: Send {
    fn skeletons(&self, camera: &CameraId, sequence: u64) -> Option<Vec<Skeleton<f64>>>;
}

/// Returns the ground-truth skeletons of a synthetic scene.
pub struct SyntheticProvider<G> {
    truth: G,
}

impl<G: GroundTruth> SyntheticProvider<G> {
    pub fn new(truth: G) -> Self {
        Self { truth }
    }
}

impl<G: GroundTruth> PoseProvider for SyntheticProvider<G> {
    fn infer(&mut self, frame: &PreprocessedFrame) -> Result<PoseResult<f64>, ProviderError> {
        let start = Instant::now();
        let src = &frame.source;
        let skeletons = self
            .truth
            .skeletons(&src.camera_id, src.sequence)
            .ok_or_else(|| ProviderError::FixtureMiss { camera: src.camera_id.clone(), sequence: src.sequence })?;
        Ok(PoseResult {
            camera_id: src.camera_id.clone(),
            sequence: src.sequence,
            skeletons,
            inference_millis: start.elapsed().as_secs_f64() * 1e3,
        })
    }
}
