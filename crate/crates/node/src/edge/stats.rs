use std::fmt::Write as _;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

pub const STATUS_HEADER: &str = "ivise-edge-stats v1";

/// Pipeline stages timed per processed frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Preprocess,
    Infer,
    Extract,
    EncodeSend,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Preprocess, Stage::Infer, Stage::Extract, Stage::EncodeSend];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Preprocess => "preprocess",
            Stage::Infer => "infer",
            Stage::Extract => "extract",
            Stage::EncodeSend => "encode_send",
        }
    }
}

/// Upper bounds (ms) of the latency histogram buckets; the last bucket is open.
pub const LATENCY_BUCKETS_MS: [f64; 8] = [1.0, 5.0, 10.0, 25.0, 50.0, 100.0, 250.0, 1000.0];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Histogram {
    pub count: u64,
    pub sum_ms: f64,
    pub max_ms: f64,
    pub buckets: [u64; LATENCY_BUCKETS_MS.len() + 1],
}

impl Histogram {
    pub fn record(&mut self, ms: f64) {
        self.count += 1;
        self.sum_ms += ms;
        self.max_ms = self.max_ms.max(ms);
        let slot = LATENCY_BUCKETS_MS.iter().position(|&b| ms <= b).unwrap_or(LATENCY_BUCKETS_MS.len());
        self.buckets[slot] += 1;
    }

    pub fn mean_ms(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum_ms / self.count as f64
        }
    }
}

/// Counters shared between the capture loop, the sender and the status server.
#[derive(Debug, Default)]
pub struct EdgeStats {
    pub frames_seen: AtomicU64,
    pub frames_processed: AtomicU64,
    pub frames_dropped: AtomicU64,
    pub frames_idle: AtomicU64,
    pub frames_without_persons: AtomicU64,
    pub frame_errors: AtomicU64,
    pub persons_detected: AtomicU64,
    pub raw_bytes: AtomicU64,
    pub messages_sent: AtomicU64,
    pub bytes_sent: AtomicU64,
    pub outbox_dropped: AtomicU64,
    pub reconnects: AtomicU64,
    latency: Mutex<[Histogram; 4]>,
}

impl EdgeStats {
    pub fn bump(counter: &AtomicU64, by: u64) {
        counter.fetch_add(by, Ordering::Relaxed);
    }

    pub fn get(counter: &AtomicU64) -> u64 {
        counter.load(Ordering::Relaxed)
    }

    pub fn record_latency(&self, stage: Stage, ms: f64) {
        let mut h = self.latency.lock().unwrap_or_else(|e| e.into_inner());
        h[stage as usize].record(ms);
    }

    pub fn latency(&self, stage: Stage) -> Histogram {
        self.latency.lock().unwrap_or_else(|e| e.into_inner())[stage as usize].clone()
    }

    /// Plain-text status page: a version line, then `name value` lines.
    pub fn render(&self, camera_id: &str, active_queries: usize) -> String {
        let mut out = format!("{STATUS_HEADER}\ncamera_id {camera_id}\nactive_queries {active_queries}\n");
        for (name, c) in [
            ("frames_seen", &self.frames_seen),
            ("frames_processed", &self.frames_processed),
            ("frames_dropped", &self.frames_dropped),
            ("frames_idle", &self.frames_idle),
            ("frames_without_persons", &self.frames_without_persons),
            ("frame_errors", &self.frame_errors),
            ("persons_detected", &self.persons_detected),
            ("raw_bytes", &self.raw_bytes),
            ("messages_sent", &self.messages_sent),
            ("bytes_sent", &self.bytes_sent),
            ("outbox_dropped", &self.outbox_dropped),
            ("reconnects", &self.reconnects),
        ] {
            let _ = writeln!(out, "{name} {}", Self::get(c));
        }
        for stage in Stage::ALL {
            let h = self.latency(stage);
            let _ = write!(out, "latency_ms {} count={} mean={:.3} max={:.3} buckets=", stage.name(), h.count, h.mean_ms(), h.max_ms);
            let buckets: Vec<String> = h.buckets.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{}", buckets.join(","));
        }
        out
    }
}

/// Parses a status page back into `(name, value)` pairs; `None` on a wrong header.
pub fn parse_status(text: &str) -> Option<Vec<(String, String)>> {
    let mut lines = text.lines();
    if lines.next()? != STATUS_HEADER {
        return None;
    }
    Some(
        lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let (k, v) = l.split_once(' ').unwrap_or((l, ""));
                (k.to_string(), v.to_string())
            })
            .collect(),
    )
}
