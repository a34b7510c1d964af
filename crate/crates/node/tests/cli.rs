use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use ivise_core::operator_api::{Reply, OPERATOR_GREETING};

const SIM: &str = env!("CARGO_BIN_EXE_sim");
const FOG: &str = env!("CARGO_BIN_EXE_fog");
const EDGE: &str = env!("CARGO_BIN_EXE_edge");

fn sim(out: &Path, seed: &str) -> std::process::Output {
    Command::new(SIM)
        .args(["--edges", "2", "--frames", "20", "--query", "black hair", "--seed", seed, "--out"])
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn sim_writes_reproducible_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let run = sim(out, "4");
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        assert!(String::from_utf8_lossy(&run.stdout).contains("precision"));
    }
    let metrics = fs::read_to_string(a.join("metrics.csv")).unwrap();
    let header = metrics.lines().next().unwrap();
    assert!(header.starts_with("frame,camera_id,processed,persons,raw_bytes,sent_bytes,sent_raw_ratio"));
    // latency stays empty unless requested, so reruns are byte-identical
    assert!(header.ends_with(",latency_ms"));
    assert!(metrics.lines().nth(1).unwrap().ends_with(','));
    assert_eq!(metrics.lines().count(), 1 + 2 * 20 + 1);
    assert!(metrics.lines().last().unwrap().starts_with("summary,all,"));
    assert_eq!(metrics, fs::read_to_string(b.join("metrics.csv")).unwrap());
    assert_eq!(fs::read(a.join("reports.jsonl")).unwrap(), fs::read(b.join("reports.jsonl")).unwrap());
    assert!(fs::read_to_string(a.join("summary.csv")).unwrap().starts_with("name,value\n"));
    assert_eq!(fs::read_to_string(a.join("cameras.txt")).unwrap().lines().count(), 2);
}

#[test]
fn sim_rejects_zero_edges() {
    let dir = tempfile::tempdir().unwrap();
    let run = Command::new(SIM)
        .args(["--edges", "0", "--frames", "5", "--query", "red shirt", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!run.status.success());
}

#[test]
fn bad_configs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "this is = = not toml").unwrap();
    for bin in [FOG, EDGE] {
        for path in [bad.clone(), dir.path().join("missing.toml")] {
            let status = Command::new(bin).arg("--config").arg(&path).stderr(Stdio::null()).status().unwrap();
            assert_eq!(status.code(), Some(2), "{bin} {}", path.display());
        }
    }
}

fn free_port() -> String {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().to_string()
}

struct Killed(Child);

impl Drop for Killed {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn connect_retry(addr: &str) -> TcpStream {
    let deadline = Instant::now() + Duration::from_secs(10);
    loop {
        match TcpStream::connect(addr) {
            Ok(s) => return s,
            Err(e) => {
                assert!(Instant::now() < deadline, "{addr}: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
    }
}

#[test]
fn fog_and_edge_binaries_answer_a_query() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (edge_addr, operator_addr, status_addr) = (free_port(), free_port(), free_port());
    fs::write(d.join("cameras.txt"), "gate 127.0.0.1:9000 45.5 9.25\n").unwrap();
    fs::write(
        d.join("fog.toml"),
        format!("[fog]\nlisten_addr = \"{edge_addr}\"\noperator_addr = \"{operator_addr}\"\nregistry = \"cameras.txt\"\n"),
    )
    .unwrap();
    fs::write(
        d.join("scene.toml"),
        "seed = 3\nwidth = 320\nheight = 240\nnoise = 2\n\n[[persons]]\nx = 160.0\ny = 40.0\nscale = 0.8\ntorso = \"grey\"\nlegs = \"blue\"\nhair = \"black\"\nface = \"white\"\n",
    )
    .unwrap();
    fs::write(
        d.join("edge.toml"),
        format!(
            "camera_id = \"gate\"\n[fog]\nlisten_addr = \"{edge_addr}\"\n[frames]\nscene = \"scene.toml\"\nfps = 20.0\n[pose]\nbackend = \"synthetic\"\n[status]\nlisten_addr = \"{status_addr}\"\n"
        ),
    )
    .unwrap();
    let _fog = Killed(Command::new(FOG).arg("--config").arg(d.join("fog.toml")).stderr(Stdio::null()).spawn().unwrap());
    let _edge = Killed(Command::new(EDGE).arg("--config").arg(d.join("edge.toml")).stderr(Stdio::null()).spawn().unwrap());

    let mut page = String::new();
    connect_retry(&status_addr).read_to_string(&mut page).unwrap();
    assert!(page.starts_with("ivise-edge-stats v1\ncamera_id gate\n"), "{page}");

    let stream = connect_retry(&operator_addr);
    stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let mut out = stream.try_clone().unwrap();
    let mut lines = BufReader::new(stream).lines();
    assert_eq!(lines.next().unwrap().unwrap(), OPERATOR_GREETING);
    let mut next = || Reply::parse(&lines.next().unwrap().unwrap()).unwrap();

    // the edge may still be connecting; a warning is fine, reports arrive once it links up
    writeln!(out, "SUBMIT all grey T-shirt").unwrap();
    let mut reply = next();
    if let Reply::Warn { .. } = reply {
        reply = next();
    }
    let Reply::Ok(id) = reply else { panic!("submit refused: {reply:?}") };
    writeln!(out, "STREAM {id}").unwrap();
    assert_eq!(next(), Reply::Ok(id));
    let Reply::Report(report) = next() else { panic!("expected a report") };
    assert_eq!(report.camera_id().as_str(), "gate");
    assert_eq!(report.geolocation(), (45.5, 9.25));
}
