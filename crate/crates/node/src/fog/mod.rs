//! Fog coordinator: owns operator queries, ingests edge features, names
//! region colors, indexes every described person and emits match reports.

mod edges;
pub mod server;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};

use ivise_core::color::PaletteSet;
use ivise_core::operator_api::EdgeStatus;
use ivise_core::protocol::{DispatchAction, Message, MessageKind, QueryDispatch};
use ivise_core::query::{
    build_report, parse_query_with, CameraRegistry, FeatureIndex, GarmentVocabulary, IndexError, IndexRecord,
    MatchReport, PersonDescription, Query, QueryError, QueryId, Scope, TimeRange,
};
use ivise_core::{CameraId, Section};

use crate::clock::Clock;
use crate::config::{ConfigError, FogConfig};

pub use edges::EdgeLink;
pub use server::FogServer;

/// Warning code sent when a query reaches no connected edge.
pub const NO_EDGES_IN_SCOPE: &str = "NoEdgesInScope";

#[derive(Debug, thiserror::Error)]
pub enum FogError {
    #[error("message from unregistered sender {0:#018x}")]
    UnknownEdge(u64),
    #[error("unknown query {0}")]
    UnknownQuery(QueryId),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("sender is {sender} but the message names {claimed}")]
    CameraMismatch { sender: CameraId, claimed: CameraId },
    #[error("edges do not send {0:?} messages")]
    UnexpectedKind(MessageKind),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("cameras {0} and {1} map to the same sender id")]
    SenderCollision(CameraId, CameraId),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FogSettings {
    pub query_ttl_ms: u64,
    pub heartbeat_ms: u64,
    pub missed_heartbeats: u32,
    pub seed: u64,
}

impl Default for FogSettings {
    fn default() -> Self {
        Self { query_ttl_ms: 300_000, heartbeat_ms: 5_000, missed_heartbeats: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Active,
    Cancelled,
    Expired,
}

impl SessionState {
    pub fn name(self) -> &'static str {
        match self {
            SessionState::Active => "active",
            SessionState::Cancelled => "cancelled",
            SessionState::Expired => "expired",
        }
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionEvent {
    Report(Box<MatchReport>),
    End(SessionState),
}

struct Session {
    query: Query,
    state: SessionState,
    expires_at_ms: u64,
    reports: Vec<MatchReport>,
    subscribers: Vec<Sender<SessionEvent>>,
}

impl Session {
    fn finish(&mut self, state: SessionState) {
        self.state = state;
        for s in self.subscribers.drain(..) {
            let _ = s.send(SessionEvent::End(state));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmitReceipt {
    pub query: Query,
    /// Set when no connected edge is in the query's scope.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestOutcome {
    pub camera_id: Option<CameraId>,
    /// Persons described and indexed from this message.
    pub persons: usize,
    pub reports: Vec<MatchReport>,
}

#[derive(Debug, Default)]
struct FogCounters {
    messages_received: AtomicU64,
    bytes_received: AtomicU64,
    frames_received: AtomicU64,
    persons_indexed: AtomicU64,
    reports_emitted: AtomicU64,
    unknown_edge_dropped: AtomicU64,
    rejected_messages: AtomicU64,
    queries_submitted: AtomicU64,
}

fn bump(c: &AtomicU64, by: u64) {
    c.fetch_add(by, Ordering::Relaxed);
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

pub struct FogNode {
    registry: CameraRegistry,
    palettes: PaletteSet,
    vocabulary: GarmentVocabulary,
    index: FeatureIndex,
    clock: Arc<dyn Clock>,
    settings: FogSettings,
    edges: Mutex<edges::EdgeTable>,
    sessions: Mutex<BTreeMap<QueryId, Session>>,
    next_query: AtomicU64,
    counters: FogCounters,
}

impl FogNode {
    pub fn new(
        registry: CameraRegistry,
        palettes: PaletteSet,
        vocabulary: GarmentVocabulary,
        index: FeatureIndex,
        clock: Arc<dyn Clock>,
        settings: FogSettings,
    ) -> Result<Self, FogError> {
        let edges = edges::EdgeTable::new(&registry).map_err(|(a, b)| FogError::SenderCollision(a, b))?;
        Ok(Self {
            registry,
            palettes,
            vocabulary,
            index,
            clock,
            settings,
            edges: Mutex::new(edges),
            sessions: Mutex::default(),
            next_query: AtomicU64::new(1),
            counters: FogCounters::default(),
        })
    }

    /// Builds a node from a configuration file's contents, loading the
    /// registry, palettes and (when configured) the persistent index.
    pub fn from_config(config: &FogConfig, clock: Arc<dyn Clock>) -> Result<Self, FogError> {
        let registry = CameraRegistry::load(&config.fog.registry)
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", config.fog.registry.display())))?;
        let index = match &config.fog.index_log {
            Some(path) => FeatureIndex::open(path)?,
            None => FeatureIndex::in_memory(),
        };
        let settings = FogSettings {
            query_ttl_ms: config.fog.query_ttl_secs.saturating_mul(1000),
            heartbeat_ms: config.fog.heartbeat_secs.saturating_mul(1000),
            missed_heartbeats: config.fog.missed_heartbeats,
            seed: config.fog.seed,
        };
        Self::new(registry, config.palettes()?, config.vocabulary()?, index, clock, settings)
    }

    pub fn registry(&self) -> &CameraRegistry {
        &self.registry
    }

    pub fn index(&self) -> &FeatureIndex {
        &self.index
    }

    pub fn settings(&self) -> FogSettings {
        self.settings
    }

    pub fn parse(&self, text: &str) -> Result<Query, QueryError> {
        parse_query_with(text, &self.palettes, &self.vocabulary)
    }

    fn dispatch(&self, query: &Query, action: DispatchAction, only: Option<&CameraId>) -> usize {
        let links = lock(&self.edges).links(|c| query.scope.contains(c) && only.is_none_or(|o| o == c));
        let msg = Message::QueryDispatch(QueryDispatch { query_id: query.id, action, text: query.render() });
        let mut sent = 0;
        for (camera, link) in links {
            match link.send(&msg) {
                Ok(()) => sent += 1,
                Err(e) => log::warn!("dispatch of query {} to {camera} failed: {e}", query.id),
            }
        }
        sent
    }

    fn ttl_field(ms: u64) -> u32 {
        u32::try_from(ms).unwrap_or(u32::MAX).max(1)
    }

    /// Parses and activates a query, dispatching it to every connected edge in scope.
    pub fn submit_query(&self, text: &str, scope: Scope) -> Result<SubmitReceipt, FogError> {
        let now = self.clock.now_ms();
        let id = QueryId(self.next_query.fetch_add(1, Ordering::SeqCst));
        let query = self.parse(text)?.with_id(id).with_scope(scope).issued_at(now);
        bump(&self.counters.queries_submitted, 1);
        lock(&self.sessions).insert(
            id,
            Session {
                query: query.clone(),
                state: SessionState::Active,
                expires_at_ms: now.saturating_add(self.settings.query_ttl_ms),
                reports: Vec::new(),
                subscribers: Vec::new(),
            },
        );
        let reached = self.dispatch(&query, DispatchAction::Activate { ttl_ms: Self::ttl_field(self.settings.query_ttl_ms) }, None);
        let warning = (reached == 0).then(|| format!("no connected edge is in scope `{}`", query.scope));
        log::info!("query {id} `{}` reached {reached} edge(s)", query.render());
        Ok(SubmitReceipt { query, warning })
    }

    pub fn cancel(&self, id: QueryId) -> Result<(), FogError> {
        let query = {
            let mut sessions = lock(&self.sessions);
            let s = sessions.get_mut(&id).ok_or(FogError::UnknownQuery(id))?;
            if s.state != SessionState::Active {
                return Ok(());
            }
            s.finish(SessionState::Cancelled);
            s.query.clone()
        };
        self.dispatch(&query, DispatchAction::Cancel, None);
        Ok(())
    }

    pub fn session_state(&self, id: QueryId) -> Option<SessionState> {
        lock(&self.sessions).get(&id).map(|s| s.state)
    }

    /// Reports of a session so far, then every new one until the session ends.
    pub fn subscribe(&self, id: QueryId) -> Result<Receiver<SessionEvent>, FogError> {
        let (tx, rx) = mpsc::channel();
        let mut sessions = lock(&self.sessions);
        let s = sessions.get_mut(&id).ok_or(FogError::UnknownQuery(id))?;
        for r in &s.reports {
            let _ = tx.send(SessionEvent::Report(Box::new(r.clone())));
        }
        if s.state == SessionState::Active {
            s.subscribers.push(tx);
        } else {
            let _ = tx.send(SessionEvent::End(s.state));
        }
        Ok(rx)
    }

    pub fn reports(&self, id: QueryId) -> Option<Vec<MatchReport>> {
        lock(&self.sessions).get(&id).map(|s| s.reports.clone())
    }

    /// Registers the outbound link of a freshly connected edge and sends it
    /// every active query in its scope. Returns a connection id for [`Self::disconnect_edge`].
    pub fn connect_edge(&self, camera: &CameraId, link: Arc<dyn EdgeLink>) -> Result<u64, FogError> {
        let now = self.clock.now_ms();
        let conn = lock(&self.edges)
            .attach(camera, Arc::clone(&link), now)
            .ok_or_else(|| FogError::UnknownEdge(ivise_core::protocol::sender_id_for(camera)))?;
        let active: Vec<(Query, u64)> = lock(&self.sessions)
            .values()
            .filter(|s| s.state == SessionState::Active && s.expires_at_ms > now && s.query.scope.contains(camera))
            .map(|s| (s.query.clone(), s.expires_at_ms - now))
            .collect();
        for (query, remaining) in active {
            let msg = Message::QueryDispatch(QueryDispatch {
                query_id: query.id,
                action: DispatchAction::Activate { ttl_ms: Self::ttl_field(remaining) },
                text: query.render(),
            });
            if let Err(e) = link.send(&msg) {
                log::warn!("resending query {} to {camera} failed: {e}", query.id);
            }
        }
        log::info!("edge {camera} connected");
        Ok(conn)
    }

    pub fn disconnect_edge(&self, camera: &CameraId, connection: u64) {
        lock(&self.edges).detach(camera, connection);
        log::info!("edge {camera} disconnected");
    }

    /// Per-section cluster count: the largest count any active in-scope query asks for.
    fn cluster_counts(queries: &[Query]) -> BTreeMap<Section, usize> {
        let mut k = BTreeMap::new();
        for q in queries {
            for c in &q.clauses {
                let e = k.entry(c.section).or_insert(1);
                *e = (*e).max(c.k);
            }
        }
        k
    }

    /// Handles one decoded message from the edge identified by `sender_id`.
    /// `bytes` is the on-wire size, for accounting.
    pub fn ingest(&self, sender_id: u64, message: Message, bytes: usize) -> Result<IngestOutcome, FogError> {
        let now = self.clock.now_ms();
        let camera = {
            let mut edges = lock(&self.edges);
            let Some(camera) = edges.camera_for(sender_id).cloned() else {
                drop(edges);
                bump(&self.counters.unknown_edge_dropped, 1);
                return Err(FogError::UnknownEdge(sender_id));
            };
            edges.count_message(&camera, bytes);
            camera
        };
        bump(&self.counters.messages_received, 1);
        bump(&self.counters.bytes_received, bytes as u64);
        let reject = |e: FogError| {
            bump(&self.counters.rejected_messages, 1);
            Err(e)
        };
        let mut outcome = IngestOutcome { camera_id: Some(camera.clone()), ..IngestOutcome::default() };
        match message {
            Message::Heartbeat(hb) => {
                if hb.camera_id != camera {
                    return reject(FogError::CameraMismatch { sender: camera, claimed: hb.camera_id });
                }
                lock(&self.edges).heartbeat(&camera, now);
            }
            Message::FrameFeatures(msg) => {
                if msg.camera_id != camera {
                    return reject(FogError::CameraMismatch { sender: camera, claimed: msg.camera_id });
                }
                bump(&self.counters.frames_received, 1);
                let queries: Vec<Query> = lock(&self.sessions)
                    .values()
                    .filter(|s| s.state == SessionState::Active && s.expires_at_ms > now && s.query.scope.contains(&camera))
                    .map(|s| s.query.clone())
                    .collect();
                let k = Self::cluster_counts(&queries);
                for regions in msg.region_sets() {
                    let description = PersonDescription::describe(
                        &regions,
                        msg.timestamp_ms,
                        |s| k.get(&s).copied().unwrap_or(1),
                        &self.palettes,
                        self.settings.seed,
                    );
                    self.index.insert(IndexRecord { description: description.clone(), inserted_at_ms: now })?;
                    outcome.persons += 1;
                    for q in &queries {
                        if let Ok(report) = build_report(q, &description, &self.registry) {
                            outcome.reports.push(report);
                        }
                    }
                }
                bump(&self.counters.persons_indexed, outcome.persons as u64);
                if !outcome.reports.is_empty() {
                    let mut sessions = lock(&self.sessions);
                    for r in &outcome.reports {
                        let Some(s) = sessions.get_mut(&r.query_id()) else { continue };
                        if s.state != SessionState::Active {
                            continue;
                        }
                        bump(&self.counters.reports_emitted, 1);
                        s.subscribers.retain(|tx| tx.send(SessionEvent::Report(Box::new(r.clone()))).is_ok());
                        s.reports.push(r.clone());
                    }
                }
            }
            other => return reject(FogError::UnexpectedKind(other.kind())),
        }
        Ok(outcome)
    }

    /// Runs `text` against everything indexed within `range`.
    pub fn offline_query(&self, text: &str, range: TimeRange) -> Result<(Query, Vec<MatchReport>), FogError> {
        let id = QueryId(self.next_query.fetch_add(1, Ordering::SeqCst));
        let query = self.parse(text)?.with_id(id).issued_at(self.clock.now_ms());
        bump(&self.counters.queries_submitted, 1);
        let reports = self.index.scan(&query, range, &self.registry);
        Ok((query, reports))
    }

    pub fn edge_statuses(&self) -> Vec<EdgeStatus> {
        lock(&self.edges).statuses()
    }

    /// Named counters for the operator `STATS` request.
    pub fn stats(&self) -> Vec<(String, String)> {
        let (registered, connected) = {
            let e = lock(&self.edges);
            (e.len(), e.connected_count())
        };
        let active = lock(&self.sessions).values().filter(|s| s.state == SessionState::Active).count();
        let c = &self.counters;
        let mut out: Vec<(String, String)> = vec![
            ("edges_registered".into(), registered.to_string()),
            ("edges_connected".into(), connected.to_string()),
            ("queries_active".into(), active.to_string()),
            ("index_records".into(), self.index.len().to_string()),
        ];
        for (name, v) in [
            ("queries_submitted", &c.queries_submitted),
            ("messages_received", &c.messages_received),
            ("bytes_received", &c.bytes_received),
            ("frames_received", &c.frames_received),
            ("persons_indexed", &c.persons_indexed),
            ("reports_emitted", &c.reports_emitted),
            ("unknown_edge_dropped", &c.unknown_edge_dropped),
            ("rejected_messages", &c.rejected_messages),
        ] {
            out.push((name.into(), v.load(Ordering::Relaxed).to_string()));
        }
        out
    }

    /// Expires sessions past their TTL and marks silent edges disconnected.
    pub fn tick(&self) {
        let now = self.clock.now_ms();
        let expired: Vec<Query> = {
            let mut sessions = lock(&self.sessions);
            sessions
                .values_mut()
                .filter(|s| s.state == SessionState::Active && s.expires_at_ms <= now)
                .map(|s| {
                    s.finish(SessionState::Expired);
                    s.query.clone()
                })
                .collect()
        };
        for q in &expired {
            log::info!("query {} expired", q.id);
            self.dispatch(q, DispatchAction::Cancel, None);
        }
        let limit = self.settings.heartbeat_ms.saturating_mul(u64::from(self.settings.missed_heartbeats));
        for camera in lock(&self.edges).expire(now, limit) {
            log::warn!("edge {camera} missed {} heartbeats", self.settings.missed_heartbeats);
        }
    }
}
