use std::io::{BufRead, BufReader, Lines, Read, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use ivise_core::color::PaletteSet;
use ivise_core::operator_api::{ErrorCode, Reply, OPERATOR_GREETING};
use ivise_core::protocol::{encode, sender_id_for, Heartbeat, Message};
use ivise_core::provider::SyntheticProvider;
use ivise_core::query::{CameraInfo, CameraRegistry, FeatureIndex, GarmentVocabulary};
use ivise_core::CameraId;
use ivise_node::clock::SystemClock;
use ivise_node::edge::runtime::{EdgeRuntime, RuntimeOptions};
use ivise_node::edge::source::SceneSource;
use ivise_node::edge::{parse_status, EdgeStats, STATUS_HEADER};
use ivise_node::edge::EdgeAgent;
use ivise_node::fog::{FogNode, FogServer, FogSettings};
use ivise_node::sim::{PersonSpec, SceneSpec, SceneTruth};

fn fog_node(cameras: &[&str]) -> FogNode {
    let mut registry = CameraRegistry::default();
    for (i, c) in cameras.iter().enumerate() {
        let info = CameraInfo { address: format!("10.0.0.{i}:7000"), latitude: 40.0 + i as f64, longitude: 8.0 };
        registry.insert((*c).into(), info).unwrap();
    }
    FogNode::new(
        registry,
        PaletteSet::default(),
        GarmentVocabulary::default(),
        FeatureIndex::in_memory(),
        Arc::new(SystemClock),
        FogSettings::default(),
    )
    .unwrap()
}

fn fog(cameras: &[&str]) -> FogServer {
    FogServer::start(Arc::new(fog_node(cameras)), "127.0.0.1:0", "127.0.0.1:0").unwrap()
}

fn grey_scene() -> SceneSpec {
    SceneSpec {
        seed: 1,
        width: 320,
        height: 240,
        background: [70, 90, 60],
        noise: 3,
        frame_interval_ms: 100,
        start_ms: 0,
        persons: vec![PersonSpec {
            x: 160.0,
            y: 40.0,
            scale: 0.8,
            torso: "grey".into(),
            legs: "blue".into(),
            hair: "black".into(),
            face: "white".into(),
        }],
    }
}

fn edge(server: &FogServer, camera: &str, status: bool) -> EdgeRuntime {
    let camera: CameraId = camera.into();
    let spec = grey_scene();
    let provider = SyntheticProvider::new(SceneTruth::new([(camera.clone(), spec.clone())]));
    let agent = EdgeAgent::new(camera.clone(), provider, 0.0, 300_000, Arc::new(SystemClock));
    let options = RuntimeOptions {
        fog_addr: server.edge_addr().to_string(),
        status_addr: status.then(|| "127.0.0.1:0".to_string()),
        fps: 20.0,
        heartbeat: Duration::from_millis(200),
        limit: None,
    };
    EdgeRuntime::start(agent, SceneSource::new(spec, camera), options).unwrap()
}

fn wait_for(what: &str, mut cond: impl FnMut() -> bool) {
    let deadline = Instant::now() + Duration::from_secs(10);
    while !cond() {
        assert!(Instant::now() < deadline, "timed out waiting for {what}");
        thread::sleep(Duration::from_millis(20));
    }
}

fn connected(server: &FogServer, camera: &str) -> bool {
    server.node().edge_statuses().iter().any(|e| e.camera_id.as_str() == camera && e.connected)
}

struct Operator {
    out: TcpStream,
    lines: Lines<BufReader<TcpStream>>,
}

impl Operator {
    fn connect(server: &FogServer) -> Self {
        let stream = TcpStream::connect(server.operator_addr()).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        let out = stream.try_clone().unwrap();
        let mut lines = BufReader::new(stream).lines();
        assert_eq!(lines.next().unwrap().unwrap(), OPERATOR_GREETING);
        Self { out, lines }
    }

    fn send(&mut self, line: &str) {
        writeln!(self.out, "{line}").unwrap();
    }

    fn reply(&mut self) -> Reply {
        Reply::parse(&self.lines.next().unwrap().unwrap()).unwrap()
    }

    /// Replies up to and including the next `END`.
    fn until_end(&mut self) -> Vec<Reply> {
        let mut out = Vec::new();
        loop {
            let r = self.reply();
            assert!(!matches!(r, Reply::Err { .. }), "unexpected {r:?}");
            let end = matches!(r, Reply::End(_));
            out.push(r);
            if end {
                return out;
            }
        }
    }
}

#[test]
fn operator_session_over_tcp() {
    let server = fog(&["cam1", "cam2"]);
    let runtime = edge(&server, "cam1", true);
    wait_for("edge link", || connected(&server, "cam1"));

    let mut op = Operator::connect(&server);
    op.send("SUBMIT cam1 grey T-shirt");
    let Reply::Ok(id) = op.reply() else { panic!("submit refused") };

    let status_addr = runtime.status_addr().unwrap();
    wait_for("dispatch at edge", || {
        let mut page = String::new();
        TcpStream::connect(status_addr).unwrap().read_to_string(&mut page).unwrap();
        assert!(page.starts_with(STATUS_HEADER));
        let fields = parse_status(&page).unwrap();
        fields.iter().any(|(k, v)| k == "active_queries" && v == "1")
    });

    op.send(&format!("STREAM {id}"));
    assert_eq!(op.reply(), Reply::Ok(id.clone()));
    let Reply::Report(first) = op.reply() else { panic!("expected a report") };
    assert_eq!(first.camera_id().as_str(), "cam1");
    assert_eq!(first.geolocation(), (40.0, 8.0));

    // a second connection cancels while the first is streaming
    let mut other = Operator::connect(&server);
    other.send(&format!("CANCEL {id}"));
    assert_eq!(other.reply(), Reply::Ok(id.clone()));
    let rest = op.until_end();
    assert_eq!(rest.last(), Some(&Reply::End("cancelled".into())));

    other.send("EDGES");
    let edges = other.until_end();
    assert_eq!(edges.len(), 3);
    let Reply::Edge(e) = &edges[0] else { panic!("expected an edge") };
    assert!(e.connected && e.messages_received > 0);
    let Reply::Edge(e) = &edges[1] else { panic!("expected an edge") };
    assert!(!e.connected);

    other.send("STATS");
    let stats = other.until_end();
    assert!(stats.iter().any(|r| matches!(r, Reply::Stat { name, .. } if name == "frames_received")));

    other.send("OFFLINE * * grey T-shirt");
    let offline = other.until_end();
    assert!(offline.len() > 1);
    assert_eq!(offline.last(), Some(&Reply::End("complete".into())));

    other.send("SUBMIT cam2 grey T-shirt");
    assert!(matches!(other.reply(), Reply::Warn { .. }));
    assert!(matches!(other.reply(), Reply::Ok(_)));
    other.send("SUBMIT all purple-ish shirt");
    assert!(matches!(other.reply(), Reply::Err { code: ErrorCode::UnknownColor, .. }));
    other.send("CANCEL 9999");
    assert!(matches!(other.reply(), Reply::Err { code: ErrorCode::UnknownQuery, .. }));
    other.send("HELLO");
    assert!(matches!(other.reply(), Reply::Err { code: ErrorCode::BadRequest, .. }));
    other.send("QUIT");
    assert_eq!(other.reply(), Reply::Ok("bye".into()));

    runtime.stop();
    server.stop();
}

#[test]
fn unregistered_sender_is_disconnected() {
    let server = fog(&["cam1"]);
    let mut stream = TcpStream::connect(server.edge_addr()).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    let hello = Message::Heartbeat(Heartbeat {
        camera_id: "intruder".into(),
        sent_at_ms: 0,
        frames_seen: 0,
        frames_processed: 0,
    });
    stream.write_all(&encode(sender_id_for(&"intruder".into()), &hello).unwrap()).unwrap();
    let mut buf = [0u8; 16];
    assert_eq!(stream.read(&mut buf).unwrap_or(0), 0);
    assert!(server.node().edge_statuses().iter().all(|e| !e.connected));
}

#[test]
fn edge_reconnects_after_fog_restart() {
    let first = fog(&["cam1"]);
    let addr = first.edge_addr();
    let runtime = {
        let camera: CameraId = "cam1".into();
        let spec = grey_scene();
        let provider = SyntheticProvider::new(SceneTruth::new([(camera.clone(), spec.clone())]));
        let agent = EdgeAgent::new(camera.clone(), provider, 0.0, 300_000, Arc::new(SystemClock));
        let options = RuntimeOptions {
            fog_addr: addr.to_string(),
            status_addr: None,
            fps: 20.0,
            heartbeat: Duration::from_millis(100),
            limit: None,
        };
        EdgeRuntime::start(agent, SceneSource::new(spec, camera), options).unwrap()
    };
    wait_for("first link", || connected(&first, "cam1"));
    first.stop();

    // rebind the same port; the edge keeps retrying until it gets through
    let deadline = Instant::now() + Duration::from_secs(10);
    let second = loop {
        let node = fog_node(&["cam1"]);
        match FogServer::start(Arc::new(node), &addr.to_string(), "127.0.0.1:0") {
            Ok(s) => break s,
            Err(e) => {
                assert!(Instant::now() < deadline, "could not rebind: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    };
    wait_for("second link", || connected(&second, "cam1"));
    assert!(EdgeStats::get(&runtime.stats().reconnects) >= 1);
    runtime.stop();
    second.stop();
}
