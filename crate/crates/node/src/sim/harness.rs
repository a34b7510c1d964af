//! Runs a whole edge/fog topology in one thread on a manual clock.
//!
//! Every message still goes through the binary envelope codec in both
//! directions, so a simulated run exercises the same bytes as a deployed one.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use ivise_core::color::PaletteSet;
use ivise_core::protocol::{self, Message, ProtocolError};
use ivise_core::provider::SyntheticProvider;
use ivise_core::query::{CameraInfo, CameraRegistry, FeatureIndex, GarmentVocabulary, MatchReport, Query, Scope};
use ivise_core::CameraId;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{FrameRow, RunMetrics, REFERENCE_FRAME_BYTES};
use super::scene::{render_scene_with, ExpectedPerson, PersonSpec, SceneError, SceneSpec, SceneTruth};
use crate::clock::{Clock, ManualClock};
use crate::edge::{EdgeAgent, EdgeError, FrameOutcome, Skip};
use crate::fog::{EdgeLink, FogError, FogNode, FogSettings};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Fog(#[from] FogError),
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invalid topology: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct EdgeSetup {
    pub camera_id: CameraId,
    pub info: CameraInfo,
    pub scene: SceneSpec,
}

#[derive(Debug, Clone)]
pub struct TopologyConfig {
    pub frames: u64,
    pub query: String,
    pub scope: Scope,
    pub drop_ratio: f64,
    pub seed: u64,
    /// Record wall-clock latencies. Off by default so metrics are bit-reproducible.
    pub measure_latency: bool,
    pub heartbeat_ms: u64,
    pub query_ttl_ms: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            frames: 100,
            query: String::new(),
            scope: Scope::All,
            drop_ratio: 0.5,
            seed: 0,
            measure_latency: false,
            heartbeat_ms: 5_000,
            query_ttl_ms: 300_000,
        }
    }
}

/// Outcome of a simulated run. The fog node is kept for offline queries.
pub struct SimRun {
    pub query: Query,
    pub reports: Vec<MatchReport>,
    pub metrics: RunMetrics,
    pub fog: FogNode,
    /// Persons that satisfy the query by construction, per processed frame:
    /// `(camera, sequence, person_index)`.
    pub expected: BTreeSet<(CameraId, u64, usize)>,
}

/// Whether a drawn person satisfies every clause of `query` by construction.
pub fn expected_match(query: &Query, person: &ExpectedPerson) -> bool {
    query.clauses.iter().all(|c| person.colors.get(&c.section).is_some_and(|name| *name == c.color))
}

/// Inbox of dispatches the fog has sent to a simulated edge, kept encoded.
#[derive(Default)]
struct SimLink(Mutex<Vec<Vec<u8>>>);

impl EdgeLink for SimLink {
    fn send(&self, message: &Message) -> Result<(), ProtocolError> {
        let bytes = protocol::encode(protocol::FOG_SENDER_ID, message)?;
        self.0.lock().unwrap_or_else(|e| e.into_inner()).push(bytes);
        Ok(())
    }
}

struct SimEdge {
    setup: EdgeSetup,
    agent: EdgeAgent<SyntheticProvider<SceneTruth>>,
    link: Arc<SimLink>,
    next_heartbeat_ms: u64,
}

fn deliver(fog: &FogNode, bytes: &[u8]) -> Result<Vec<MatchReport>, SimError> {
    let (sender, msg) = protocol::decode(bytes)?;
    Ok(fog.ingest(sender, msg, bytes.len())?.reports)
}

pub fn run_topology(config: &TopologyConfig, edges: Vec<EdgeSetup>) -> Result<SimRun, SimError> {
    let first = edges.first().ok_or_else(|| SimError::Invalid("no edges".into()))?;
    let clock = ManualClock::new(first.scene.timestamp_ms(0));
    let shared: Arc<dyn Clock> = Arc::new(clock.clone());
    let palettes = PaletteSet::default();

    let mut registry = CameraRegistry::default();
    for e in &edges {
        e.scene.validate(&palettes)?;
        registry.insert(e.camera_id.clone(), e.info.clone()).map_err(|err| SimError::Invalid(err.to_string()))?;
    }
    let settings = FogSettings {
        query_ttl_ms: config.query_ttl_ms,
        heartbeat_ms: config.heartbeat_ms,
        missed_heartbeats: 3,
        seed: config.seed,
    };
    let fog = FogNode::new(
        registry,
        palettes.clone(),
        GarmentVocabulary::default(),
        FeatureIndex::in_memory(),
        Arc::clone(&shared),
        settings,
    )?;

    let mut sims = Vec::with_capacity(edges.len());
    for setup in edges {
        let truth = SceneTruth::new([(setup.camera_id.clone(), setup.scene.clone())]);
        let agent = EdgeAgent::new(
            setup.camera_id.clone(),
            SyntheticProvider::new(truth),
            config.drop_ratio,
            config.query_ttl_ms,
            Arc::clone(&shared),
        );
        let link = Arc::new(SimLink::default());
        deliver(&fog, &protocol::encode(agent.sender_id(), &agent.heartbeat())?)?;
        fog.connect_edge(&setup.camera_id, link.clone())?;
        sims.push(SimEdge { setup, agent, link, next_heartbeat_ms: clock.now_ms() + config.heartbeat_ms });
    }

    let receipt = fog.submit_query(&config.query, config.scope.clone())?;
    let query = receipt.query;
    let mut reports = Vec::new();
    let mut metrics = RunMetrics::default();
    let mut expected = BTreeSet::new();

    for seq in 0..config.frames {
        clock.set(sims[0].setup.scene.timestamp_ms(seq));
        fog.tick();
        for sim in &mut sims {
            let inbox: Vec<Vec<u8>> = std::mem::take(&mut *sim.link.0.lock().unwrap_or_else(|e| e.into_inner()));
            for bytes in inbox {
                if let (_, Message::QueryDispatch(d)) = protocol::decode(&bytes)? {
                    sim.agent.handle_dispatch(&d);
                }
            }
            if clock.now_ms() >= sim.next_heartbeat_ms {
                deliver(&fog, &protocol::encode(sim.agent.sender_id(), &sim.agent.heartbeat())?)?;
                sim.next_heartbeat_ms = clock.now_ms() + config.heartbeat_ms;
            }

            let camera = sim.setup.camera_id.clone();
            let rendered = render_scene_with(&sim.setup.scene, &camera, seq, &palettes)?;
            let started = Instant::now();
            let outcome = sim.agent.process_frame(&rendered.frame)?;
            let (processed, sent, frame_reports) = match outcome {
                FrameOutcome::Skipped(Skip::Idle | Skip::Dropped) => (false, 0, Vec::new()),
                FrameOutcome::Skipped(Skip::NoPersons) => (true, 0, Vec::new()),
                FrameOutcome::Send { envelope, .. } => (true, envelope.len(), deliver(&fog, &envelope)?),
            };
            let latency = started.elapsed().as_secs_f64() * 1e3;

            let mut positives = 0u64;
            let mut hits = 0u64;
            if processed {
                let reported: BTreeSet<usize> =
                    frame_reports.iter().filter(|r| r.query_id() == query.id).map(MatchReport::person_index).collect();
                for p in rendered.expected.iter().filter(|p| expected_match(&query, p)) {
                    positives += 1;
                    hits += u64::from(reported.contains(&p.person_index));
                    expected.insert((camera.clone(), seq, p.person_index));
                }
            }
            let raw = rendered.frame.raw_bytes() as u64;
            metrics.push(
                &camera,
                FrameRow {
                    frame: seq.to_string(),
                    camera_id: camera.to_string(),
                    processed: u64::from(processed),
                    persons: rendered.expected.len() as u64,
                    raw_bytes: raw,
                    sent_bytes: sent as u64,
                    sent_raw_ratio: if processed { sent as f64 / raw as f64 } else { 0.0 },
                    sent_100kb_ratio: sent as f64 / REFERENCE_FRAME_BYTES,
                    reports: frame_reports.len() as u64,
                    expected_matches: positives,
                    true_positives: hits,
                    latency_ms: (config.measure_latency && processed).then_some(latency),
                },
            );
            reports.extend(frame_reports);
        }
    }
    Ok(SimRun { query, reports, metrics, fog, expected })
}

/// Layout knobs for [`random_edges`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub noise: u8,
    pub max_persons: usize,
    pub frame_interval_ms: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self { width: 640, height: 480, noise: 0, max_persons: 3, frame_interval_ms: 100 }
    }
}

fn pick(rng: &mut ChaCha8Rng, names: &[String]) -> String {
    names.choose(rng).cloned().unwrap_or_default()
}

/// A static scene with 1 to `max_persons` randomly dressed persons standing
/// side by side without overlap.
pub fn random_scene(rng: &mut ChaCha8Rng, params: &SceneParams, palettes: &PaletteSet) -> SceneSpec {
    let names = |d: &ivise_core::color::ColorDictionary| d.entries().iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    let (clothing, hair, skin) = (names(&palettes.clothing), names(&palettes.hair), names(&palettes.skin));
    let scale = (f64::from(params.height) / 540.0).max(0.75);
    let footprint = 50.0 * scale;
    let fit = (f64::from(params.width) / footprint).floor().max(1.0) as usize;
    let n = rng.random_range(1..=params.max_persons.clamp(1, fit));
    let slot = f64::from(params.width) / n as f64;
    let persons = (0..n)
        .map(|i| {
            let slack = ((slot - footprint) / 2.0).max(0.0);
            let jitter = if slack > 0.0 { rng.random_range(-slack..slack) } else { 0.0 };
            let (top, bottom) = (60.0 * scale, f64::from(params.height) - 205.0 * scale);
            let y = if bottom > top { rng.random_range(top..bottom) } else { top };
            PersonSpec {
                x: slot * (i as f64 + 0.5) + jitter,
                y,
                scale,
                torso: pick(rng, &clothing),
                legs: pick(rng, &clothing),
                hair: pick(rng, &hair),
                face: pick(rng, &skin),
            }
        })
        .collect();
    SceneSpec {
        seed: rng.random(),
        width: params.width,
        height: params.height,
        background: [70, 90, 60],
        noise: params.noise,
        frame_interval_ms: params.frame_interval_ms,
        start_ms: 0,
        persons,
    }
}

/// `count` edges named `cam1..`, with random scenes and nearby locations.
pub fn random_edges(count: usize, seed: u64, params: &SceneParams) -> Vec<EdgeSetup> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palettes = PaletteSet::default();
    (1..=count)
        .map(|i| EdgeSetup {
            camera_id: CameraId::new(format!("cam{i}")),
            info: CameraInfo {
                address: format!("10.0.0.{}:7000", i % 250 + 1),
                latitude: 45.0 + rng.random_range(0.0..0.01),
                longitude: 9.0 + rng.random_range(0.0..0.01),
            },
            scene: random_scene(&mut rng, params, &palettes),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ivise_core::query::TimeRange;

    #[test]
    fn random_scenes_are_valid() {
        let palettes = PaletteSet::default();
        for seed in 0..20 {
            for e in random_edges(3, seed, &SceneParams::default()) {
                e.scene.validate(&palettes).unwrap();
            }
        }
        let big = SceneParams { width: 1920, height: 1080, ..SceneParams::default() };
        for e in random_edges(3, 7, &big) {
            e.scene.validate(&palettes).unwrap();
        }
    }

    #[test]
    fn small_run_is_reproducible_and_consistent() {
        let edges = random_edges(2, 3, &SceneParams::default());
        let torso = edges[0].scene.persons[0].torso.clone();
        let config = TopologyConfig { frames: 6, query: format!("{torso} shirt"), seed: 3, ..TopologyConfig::default() };
        let a = run_topology(&config, edges.clone()).unwrap();
        let b = run_topology(&config, edges).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.reports, b.reports);
        assert!(!a.reports.is_empty());
        let s = a.metrics.summary();
        assert_eq!(s.frames, 12);
        assert_eq!(s.frames_processed, 6);
        let (_, offline) = a.fog.offline_query(&config.query, TimeRange::all()).unwrap();
        assert_eq!(offline.len(), a.reports.len());
    }
}
