//! Camera-side agent: frames in, compact feature messages out.
//!
//! The agent idles until the fog dispatches a query. While at least one query
//! is active it thins the frame stream with a [`DropPolicy`], runs pose
//! inference, crops body regions and encodes a `FrameFeatures` envelope for
//! every frame that contains a person. Frames without persons are never sent.

mod outbox;
pub mod runtime;
pub mod source;
mod stats;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use ivise_core::protocol::{self, DispatchAction, FrameFeaturesMsg, Message, ProtocolError, QueryDispatch};
use ivise_core::provider::{PoseProvider, ProviderError};
use ivise_core::query::QueryId;
use ivise_core::regions::{extract_all, preprocess, PreprocessedFrame};
use ivise_core::{CameraId, Frame};

use crate::clock::Clock;

pub use outbox::{Outbox, OUTBOX_CAPACITY};
pub use stats::{parse_status, EdgeStats, Histogram, Stage, LATENCY_BUCKETS_MS, STATUS_HEADER};

#[derive(Debug, thiserror::Error)]
pub enum EdgeError {
    #[error("pose inference failed: {0}")]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("frame source: {0}")]
    Source(String),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Deterministic frame thinning: with drop ratio `r`, frame `i` is kept iff
/// `floor((i + 1)(1 - r)) > floor(i (1 - r))`, so exactly
/// `floor(n (1 - r))` of the first `n` frames are kept, evenly spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropPolicy {
    keep_ratio: f64,
}

impl DropPolicy {
    /// `drop_ratio` is clamped to `[0, 1]`.
    pub fn new(drop_ratio: f64) -> Self {
        let r = if drop_ratio.is_nan() { 0.0 } else { drop_ratio.clamp(0.0, 1.0) };
        Self { keep_ratio: 1.0 - r }
    }

    pub fn keep(&self, index: u64) -> bool {
        // The epsilon absorbs representation error, e.g. 1 - 0.9 < 0.1.
        let kept = |n: u64| (n as f64 * self.keep_ratio + 1e-9).floor();
        kept(index + 1) > kept(index)
    }
}

/// Queries the fog has asked this edge to work for, with their expiry times.
#[derive(Debug, Default)]
pub struct ActiveQueries {
    expiry: Mutex<BTreeMap<QueryId, u64>>,
}

impl ActiveQueries {
    /// Applies a dispatch. Activation lasts the dispatched TTL, capped at `max_ttl_ms`.
    pub fn apply(&self, dispatch: &QueryDispatch, now_ms: u64, max_ttl_ms: u64) {
        let mut g = self.expiry.lock().unwrap_or_else(|e| e.into_inner());
        match dispatch.action {
            DispatchAction::Activate { ttl_ms } => {
                let ttl = if ttl_ms == 0 { max_ttl_ms } else { u64::from(ttl_ms).min(max_ttl_ms) };
                g.insert(dispatch.query_id, now_ms.saturating_add(ttl));
            }
            DispatchAction::Cancel => {
                g.remove(&dispatch.query_id);
            }
        }
    }

    /// Number of unexpired queries; expired ones are forgotten.
    pub fn active(&self, now_ms: u64) -> usize {
        let mut g = self.expiry.lock().unwrap_or_else(|e| e.into_inner());
        g.retain(|_, &mut t| t > now_ms);
        g.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skip {
    /// No active query.
    Idle,
    /// Thinned out by the drop policy.
    Dropped,
    /// Processed, but nobody was in the frame.
    NoPersons,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameOutcome {
    Skipped(Skip),
    Send {
        envelope: Vec<u8>,
        persons: usize,
        region_pixels: usize,
    },
}

/// Per-stage wall time of one processed frame, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub preprocess: f64,
    pub infer: f64,
    pub extract: f64,
    pub encode: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.preprocess + self.infer + self.extract + self.encode
    }
}

pub struct EdgeAgent<P> {
    camera_id: CameraId,
    sender_id: u64,
    provider: P,
    drop: DropPolicy,
    max_ttl_ms: u64,
    queries: Arc<ActiveQueries>,
    clock: Arc<dyn Clock>,
    stats: Arc<EdgeStats>,
    last_times: StageTimes,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

impl<P: PoseProvider> EdgeAgent<P> {
    pub fn new(camera_id: CameraId, provider: P, drop_ratio: f64, max_ttl_ms: u64, clock: Arc<dyn Clock>) -> Self {
        Self {
            sender_id: protocol::sender_id_for(&camera_id),
            camera_id,
            provider,
            drop: DropPolicy::new(drop_ratio),
            max_ttl_ms,
            queries: Arc::default(),
            clock,
            stats: Arc::default(),
            last_times: StageTimes::default(),
        }
    }

    pub fn camera_id(&self) -> &CameraId {
        &self.camera_id
    }

    pub fn sender_id(&self) -> u64 {
        self.sender_id
    }

    pub fn stats(&self) -> Arc<EdgeStats> {
        Arc::clone(&self.stats)
    }

    /// Shared handle for threads that receive dispatches.
    pub fn queries(&self) -> Arc<ActiveQueries> {
        Arc::clone(&self.queries)
    }

    pub fn clock(&self) -> Arc<dyn Clock> {
        Arc::clone(&self.clock)
    }

    pub fn max_ttl_ms(&self) -> u64 {
        self.max_ttl_ms
    }

    pub fn handle_dispatch(&self, dispatch: &QueryDispatch) {
        self.queries.apply(dispatch, self.clock.now_ms(), self.max_ttl_ms);
    }

    pub fn active_queries(&self) -> usize {
        self.queries.active(self.clock.now_ms())
    }

    /// Stage timings of the most recent processed frame.
    pub fn last_times(&self) -> StageTimes {
        self.last_times
    }

    pub fn heartbeat(&self) -> Message {
        Message::Heartbeat(protocol::Heartbeat {
            camera_id: self.camera_id.clone(),
            sent_at_ms: self.clock.now_ms(),
            frames_seen: EdgeStats::get(&self.stats.frames_seen),
            frames_processed: EdgeStats::get(&self.stats.frames_processed),
        })
    }

    /// Runs one frame through the pipeline. `frame.sequence` drives the drop policy.
    pub fn process_frame(&mut self, frame: &Frame) -> Result<FrameOutcome, EdgeError> {
        let s = Arc::clone(&self.stats);
        EdgeStats::bump(&s.frames_seen, 1);
        if self.active_queries() == 0 {
            EdgeStats::bump(&s.frames_idle, 1);
            return Ok(FrameOutcome::Skipped(Skip::Idle));
        }
        if !self.drop.keep(frame.sequence) {
            EdgeStats::bump(&s.frames_dropped, 1);
            return Ok(FrameOutcome::Skipped(Skip::Dropped));
        }
        let result = self.run_pipeline(frame);
        if result.is_err() {
            EdgeStats::bump(&s.frame_errors, 1);
        }
        result
    }

    fn run_pipeline(&mut self, frame: &Frame) -> Result<FrameOutcome, EdgeError> {
        let s = Arc::clone(&self.stats);
        let mut times = StageTimes::default();

        let t = Instant::now();
        let pre = preprocess(frame).unwrap_or_else(|_| PreprocessedFrame::metadata_only(frame.clone()));
        times.preprocess = ms_since(t);

        let t = Instant::now();
        let pose = self.provider.infer(&pre)?;
        times.infer = ms_since(t);

        EdgeStats::bump(&s.frames_processed, 1);
        EdgeStats::bump(&s.raw_bytes, frame.raw_bytes() as u64);
        let outcome = if protocol::should_transmit(&pose) {
            let t = Instant::now();
            let regions = extract_all(&pose, frame);
            times.extract = ms_since(t);

            let t = Instant::now();
            let msg = FrameFeaturesMsg::new(frame, &pose, &regions);
            let region_pixels = msg.region_pixel_count();
            let persons = msg.persons.len();
            let envelope = protocol::encode(self.sender_id, &Message::FrameFeatures(msg))?;
            times.encode = ms_since(t);
            EdgeStats::bump(&s.persons_detected, persons as u64);
            FrameOutcome::Send { envelope, persons, region_pixels }
        } else {
            EdgeStats::bump(&s.frames_without_persons, 1);
            FrameOutcome::Skipped(Skip::NoPersons)
        };
        s.record_latency(Stage::Preprocess, times.preprocess);
        s.record_latency(Stage::Infer, times.infer);
        s.record_latency(Stage::Extract, times.extract);
        s.record_latency(Stage::EncodeSend, times.encode);
        self.last_times = times;
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use ivise_core::geometry::{Keypoint, Skeleton};
    use ivise_core::provider::PoseResult;
    use ivise_core::PartKind;

    #[test]
    fn drop_policy_counts() {
        for (r, n, kept) in [(0.0, 10, 10), (0.5, 10, 5), (0.75, 100, 25), (0.9, 100, 10), (1.0, 50, 0)] {
            let p = DropPolicy::new(r);
            assert_eq!((0..n).filter(|&i| p.keep(i)).count(), kept, "r={r}");
        }
        let half = DropPolicy::new(0.5);
        assert!(!half.keep(0));
        assert!(half.keep(1));
    }

    struct Fixed(Vec<Skeleton<f64>>);

    impl PoseProvider for Fixed {
        fn infer(&mut self, frame: &PreprocessedFrame) -> Result<PoseResult<f64>, ProviderError> {
            Ok(PoseResult {
                camera_id: frame.source.camera_id.clone(),
                sequence: frame.source.sequence,
                skeletons: self.0.clone(),
                inference_millis: 0.0,
            })
        }
    }

    fn activate(id: u64, ttl_ms: u32) -> QueryDispatch {
        QueryDispatch { query_id: QueryId(id), action: DispatchAction::Activate { ttl_ms }, text: String::new() }
    }

    fn person() -> Skeleton<f64> {
        use PartKind::*;
        Skeleton::from_keypoints(
            0,
            [(Neck, 50.0, 20.0), (LeftHip, 40.0, 60.0), (RightHip, 60.0, 60.0)].map(|(k, x, y)| Keypoint::new(k, x, y, 1.0)),
        )
    }

    #[test]
    fn idle_until_dispatched_and_expires() {
        let clock = ManualClock::new(0);
        let mut agent = EdgeAgent::new("cam1".into(), Fixed(vec![person()]), 0.0, 300_000, Arc::new(clock.clone()));
        let f = Frame::filled("cam1".into(), 0, 0, 100, 100, [10, 10, 10]);
        assert_eq!(agent.process_frame(&f).unwrap(), FrameOutcome::Skipped(Skip::Idle));
        agent.handle_dispatch(&activate(1, 1000));
        assert!(matches!(agent.process_frame(&f).unwrap(), FrameOutcome::Send { persons: 1, .. }));
        clock.set(1000);
        assert_eq!(agent.process_frame(&f).unwrap(), FrameOutcome::Skipped(Skip::Idle));
        let s = agent.stats();
        assert_eq!(EdgeStats::get(&s.frames_seen), 3);
        assert_eq!(EdgeStats::get(&s.frames_processed), 1);
    }

    #[test]
    fn ttl_is_capped_and_cancel_stops_work() {
        let clock = ManualClock::new(0);
        let agent = EdgeAgent::new("cam1".into(), Fixed(vec![]), 0.0, 500, Arc::new(clock.clone()));
        agent.handle_dispatch(&activate(1, 10_000));
        clock.set(499);
        assert_eq!(agent.active_queries(), 1);
        clock.set(500);
        assert_eq!(agent.active_queries(), 0);
        agent.handle_dispatch(&activate(2, 0));
        assert_eq!(agent.active_queries(), 1);
        agent.handle_dispatch(&QueryDispatch { query_id: QueryId(2), action: DispatchAction::Cancel, text: String::new() });
        assert_eq!(agent.active_queries(), 0);
    }

    #[test]
    fn empty_frames_are_not_sent() {
        let mut agent = EdgeAgent::new("cam1".into(), Fixed(vec![]), 0.0, 1000, Arc::new(ManualClock::new(0)));
        agent.handle_dispatch(&activate(1, 1000));
        let f = Frame::filled("cam1".into(), 0, 0, 100, 100, [10, 10, 10]);
        assert_eq!(agent.process_frame(&f).unwrap(), FrameOutcome::Skipped(Skip::NoPersons));
        assert_eq!(EdgeStats::get(&agent.stats().frames_without_persons), 1);
    }

    #[test]
    fn sent_envelope_decodes() {
        let mut agent = EdgeAgent::new("cam1".into(), Fixed(vec![person()]), 0.0, 1000, Arc::new(ManualClock::new(0)));
        agent.handle_dispatch(&activate(1, 1000));
        let f = Frame::filled("cam1".into(), 4, 400, 100, 100, [10, 200, 10]);
        let FrameOutcome::Send { envelope, region_pixels, .. } = agent.process_frame(&f).unwrap() else {
            panic!("expected a message");
        };
        let (sender, msg) = protocol::decode(&envelope).unwrap();
        assert_eq!(sender, protocol::sender_id_for(&"cam1".into()));
        let Message::FrameFeatures(m) = msg else { panic!("wrong kind") };
        assert_eq!(m.sequence, 4);
        assert_eq!(m.region_pixel_count(), region_pixels);
        assert!(region_pixels > 0);
    }
}
