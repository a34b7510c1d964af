//! Deterministic in-process simulation.

pub mod harness;
pub mod metrics;
pub mod scene;

pub use harness::{expected_match, random_edges, random_scene, run_topology, EdgeSetup, SceneParams, SimError, SimRun, TopologyConfig};
pub use metrics::{FrameRow, RunMetrics, Summary, REFERENCE_FRAME_BYTES};
pub use scene::{render_scene, render_scene_with, ExpectedPerson, PersonSpec, RenderedFrame, SceneError, SceneSpec, SceneTruth};
