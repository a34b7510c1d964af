//! Threads around an [`EdgeAgent`]: paced capture, the fog link with
//! reconnection and heartbeats, and the plain-text status endpoint.

use std::io::{ErrorKind, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use ivise_core::protocol::{self, Heartbeat, Message};
use ivise_core::provider::{
    FixtureProvider, PoseFixture, PoseProvider, ProviderError, RemoteConfig, RemoteProvider, SyntheticProvider,
};
use ivise_core::{CameraId, Frame};

use super::source::{DirectorySource, SceneSource};
use super::{ActiveQueries, EdgeAgent, EdgeError, EdgeStats, FrameOutcome, Outbox};
use crate::clock::Clock;
use crate::config::{EdgeConfig, PoseBackend};
use crate::sim::{SceneSpec, SceneTruth};

const RECONNECT_DELAY: Duration = Duration::from_millis(500);
const POLL: Duration = Duration::from_millis(50);
const DRAIN_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Clone)]
pub struct RuntimeOptions {
    pub fog_addr: String,
    pub status_addr: Option<String>,
    pub fps: f64,
    pub heartbeat: Duration,
    pub limit: Option<u64>,
}

/// Everything the link thread needs to speak for the edge.
#[derive(Clone)]
struct LinkShared {
    camera_id: CameraId,
    sender_id: u64,
    clock: Arc<dyn Clock>,
    stats: Arc<EdgeStats>,
    queries: Arc<ActiveQueries>,
    max_ttl_ms: u64,
    outbox: Arc<Outbox>,
    shutdown: Arc<AtomicBool>,
}

impl LinkShared {
    fn heartbeat(&self) -> Message {
        Message::Heartbeat(Heartbeat {
            camera_id: self.camera_id.clone(),
            sent_at_ms: self.clock.now_ms(),
            frames_seen: EdgeStats::get(&self.stats.frames_seen),
            frames_processed: EdgeStats::get(&self.stats.frames_processed),
        })
    }
}

pub struct EdgeRuntime {
    shared: LinkShared,
    status_addr: Option<SocketAddr>,
    capture: Option<JoinHandle<()>>,
    background: Vec<JoinHandle<()>>,
}

impl EdgeRuntime {
    pub fn start<P, S>(agent: EdgeAgent<P>, source: S, options: RuntimeOptions) -> Result<Self, EdgeError>
    where
        P: PoseProvider + 'static,
        S: Iterator<Item = Result<Frame, EdgeError>> + Send + 'static,
    {
        let shared = LinkShared {
            camera_id: agent.camera_id().clone(),
            sender_id: agent.sender_id(),
            clock: agent.clock(),
            stats: agent.stats(),
            queries: agent.queries(),
            max_ttl_ms: agent.max_ttl_ms(),
            outbox: Arc::new(Outbox::default()),
            shutdown: Arc::new(AtomicBool::new(false)),
        };
        let mut background = Vec::new();
        let mut status_addr = None;
        if let Some(addr) = &options.status_addr {
            let listener = TcpListener::bind(addr)?;
            listener.set_nonblocking(true)?;
            status_addr = Some(listener.local_addr()?);
            let s = shared.clone();
            background.push(thread::spawn(move || serve_status(listener, s)));
        }
        let s = shared.clone();
        let (fog, hb) = (options.fog_addr.clone(), options.heartbeat);
        background.push(thread::spawn(move || run_link(&fog, hb, s)));

        let s = shared.clone();
        let capture = thread::spawn(move || run_capture(agent, source, &options, s));
        Ok(Self { shared, status_addr, capture: Some(capture), background })
    }

    pub fn status_addr(&self) -> Option<SocketAddr> {
        self.status_addr
    }

    pub fn stats(&self) -> Arc<EdgeStats> {
        Arc::clone(&self.shared.stats)
    }

    /// Waits for the source to run out, gives the outbox a few seconds to drain, then stops.
    pub fn join(mut self) {
        if let Some(c) = self.capture.take() {
            let _ = c.join();
        }
        let deadline = Instant::now() + DRAIN_TIMEOUT;
        while !self.shared.outbox.is_empty() && Instant::now() < deadline && !self.shared.shutdown.load(Ordering::SeqCst) {
            thread::sleep(POLL);
        }
        self.stop_threads();
    }

    /// Stops immediately.
    pub fn stop(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        self.shared.outbox.close();
        if let Some(c) = self.capture.take() {
            let _ = c.join();
        }
        for t in self.background.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for EdgeRuntime {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn run_capture<P, S>(mut agent: EdgeAgent<P>, source: S, options: &RuntimeOptions, shared: LinkShared)
where
    P: PoseProvider,
    S: Iterator<Item = Result<Frame, EdgeError>>,
{
    let interval = Duration::from_secs_f64(1.0 / options.fps);
    let mut due = Instant::now();
    let limit = options.limit.unwrap_or(u64::MAX);
    for item in source.take(usize::try_from(limit).unwrap_or(usize::MAX)) {
        if shared.shutdown.load(Ordering::SeqCst) {
            return;
        }
        let now = Instant::now();
        if due > now {
            thread::sleep(due - now);
        }
        due += interval;
        let frame = match item {
            Ok(f) => f,
            Err(e) => {
                log::warn!("{}: skipping frame: {e}", shared.camera_id);
                EdgeStats::bump(&shared.stats.frame_errors, 1);
                continue;
            }
        };
        match agent.process_frame(&frame) {
            Ok(FrameOutcome::Send { envelope, .. }) => {
                if shared.outbox.push(envelope) {
                    EdgeStats::bump(&shared.stats.outbox_dropped, 1);
                }
            }
            Ok(FrameOutcome::Skipped(_)) => {}
            Err(e) => log::warn!("{} frame {}: {e}", shared.camera_id, frame.sequence),
        }
    }
}

fn run_link(fog_addr: &str, heartbeat: Duration, shared: LinkShared) {
    let mut first = true;
    while !shared.shutdown.load(Ordering::SeqCst) {
        match TcpStream::connect(fog_addr) {
            Ok(stream) => {
                if !first {
                    EdgeStats::bump(&shared.stats.reconnects, 1);
                }
                first = false;
                log::info!("{}: connected to fog at {fog_addr}", shared.camera_id);
                if let Err(e) = serve_connection(stream, heartbeat, &shared) {
                    log::warn!("{}: fog link lost: {e}", shared.camera_id);
                }
            }
            Err(e) => log::debug!("{}: fog at {fog_addr} unreachable: {e}", shared.camera_id),
        }
        let until = Instant::now() + RECONNECT_DELAY;
        while Instant::now() < until && !shared.shutdown.load(Ordering::SeqCst) {
            thread::sleep(POLL);
        }
    }
}

fn serve_connection(stream: TcpStream, heartbeat: Duration, shared: &LinkShared) -> Result<(), EdgeError> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    let alive = Arc::new(AtomicBool::new(true));
    let reader = {
        let (mut stream, alive, shared) = (stream.try_clone()?, Arc::clone(&alive), shared.clone());
        thread::spawn(move || {
            loop {
                match protocol::read_message(&mut stream) {
                    Ok(Some((_, Message::QueryDispatch(d)))) => {
                        log::info!("{}: dispatch {:?} for query {}", shared.camera_id, d.action, d.query_id);
                        shared.queries.apply(&d, shared.clock.now_ms(), shared.max_ttl_ms);
                    }
                    Ok(Some((_, other))) => log::debug!("{}: ignoring {:?} from fog", shared.camera_id, other.kind()),
                    Ok(None) => break,
                    Err(e) => {
                        log::warn!("{}: bad message from fog: {e}", shared.camera_id);
                        break;
                    }
                }
            }
            alive.store(false, Ordering::SeqCst);
        })
    };

    let result = (|| {
        let mut send = |bytes: &[u8]| -> Result<(), EdgeError> {
            writer.write_all(bytes)?;
            EdgeStats::bump(&shared.stats.messages_sent, 1);
            EdgeStats::bump(&shared.stats.bytes_sent, bytes.len() as u64);
            Ok(())
        };
        send(&protocol::encode(shared.sender_id, &shared.heartbeat())?)?;
        let mut last_beat = Instant::now();
        while alive.load(Ordering::SeqCst) && !shared.shutdown.load(Ordering::SeqCst) {
            if last_beat.elapsed() >= heartbeat {
                send(&protocol::encode(shared.sender_id, &shared.heartbeat())?)?;
                last_beat = Instant::now();
            }
            if let Some(bytes) = shared.outbox.pop_timeout(POLL) {
                if let Err(e) = send(&bytes) {
                    shared.outbox.requeue(bytes);
                    return Err(e);
                }
            }
        }
        Ok(())
    })();
    let _ = stream.shutdown(Shutdown::Both);
    let _ = reader.join();
    result
}

fn serve_status(listener: TcpListener, shared: LinkShared) {
    while !shared.shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((mut conn, _)) => {
                let _ = conn.set_nonblocking(false);
                let page = shared.stats.render(shared.camera_id.as_str(), shared.queries.active(shared.clock.now_ms()));
                let _ = conn.write_all(page.as_bytes());
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::warn!("status endpoint: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

type BoxedSource = Box<dyn Iterator<Item = Result<Frame, EdgeError>> + Send>;

/// Wires an edge from its configuration: frame source, pose backend, agent
/// and runtime threads. Frames are stamped from `clock`, starting now.
pub fn start_from_config(config: &EdgeConfig, clock: Arc<dyn Clock>) -> Result<EdgeRuntime, EdgeError> {
    let camera = config.camera_id.clone();
    let start_ms = clock.now_ms();
    let (source, frame_size, scene): (BoxedSource, (u32, u32), Option<SceneSpec>) =
        match (&config.frames.directory, &config.frames.scene) {
            (Some(dir), _) => {
                let src = DirectorySource::open(dir, camera.clone(), config.frames.fps, start_ms)?;
                let size = src.frame_size()?;
                (Box::new(src), size, None)
            }
            (None, Some(path)) => {
                let mut spec = SceneSpec::load(path)?;
                spec.start_ms = start_ms;
                spec.frame_interval_ms = (1000.0 / config.frames.fps).round().max(1.0) as u64;
                let size = (spec.width, spec.height);
                (Box::new(SceneSource::new(spec.clone(), camera.clone())), size, Some(spec))
            }
            (None, None) => return Err(EdgeError::Source("no frame source configured".into())),
        };
    let provider: Box<dyn PoseProvider> = match config.pose.backend {
        PoseBackend::Remote => {
            let url = config.pose.remote_url.clone().ok_or_else(|| EdgeError::Source("pose.remote_url is not set".into()))?;
            let remote = RemoteConfig { url, timeout: Duration::from_millis(config.pose.timeout_ms) };
            Box::new(RemoteProvider::new(remote))
        }
        PoseBackend::Fixture => {
            let path = config.pose.fixture.as_ref().ok_or_else(|| EdgeError::Source("pose.fixture is not set".into()))?;
            let fixture = PoseFixture::load(path, frame_size.0, frame_size.1).map_err(ProviderError::from)?;
            Box::new(FixtureProvider::new(fixture))
        }
        PoseBackend::Synthetic => {
            let spec = scene.ok_or_else(|| EdgeError::Source("the synthetic backend needs a scene".into()))?;
            Box::new(SyntheticProvider::new(SceneTruth::new([(camera.clone(), spec)])))
        }
    };
    let agent = EdgeAgent::new(camera, provider, config.drop_ratio, config.query_ttl_secs.saturating_mul(1000), clock);
    let options = RuntimeOptions {
        fog_addr: config.fog.listen_addr.clone(),
        status_addr: config.status.as_ref().map(|s| s.listen_addr.clone()),
        fps: config.frames.fps,
        heartbeat: Duration::from_secs(config.fog.heartbeat_secs.max(1)),
        limit: config.frames.limit,
    };
    EdgeRuntime::start(agent, source, options)
}
