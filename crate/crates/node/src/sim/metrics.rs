//! Per-frame run metrics and their CSV form.

use std::collections::BTreeMap;
use std::path::Path;

use ivise_core::CameraId;
use serde::Serialize;

/// Fixed per-frame size the `sent_100kb_ratio` column is measured against,
/// standing in for one compressed full frame.
pub const REFERENCE_FRAME_BYTES: f64 = 100_000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameRow {
    pub frame: String,
    pub camera_id: String,
    pub processed: u64,
    pub persons: u64,
    pub raw_bytes: u64,
    pub sent_bytes: u64,
    pub sent_raw_ratio: f64,
    pub sent_100kb_ratio: f64,
    pub reports: u64,
    pub expected_matches: u64,
    pub true_positives: u64,
    pub latency_ms: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeTotals {
    pub frames_processed: u64,
    pub raw_bytes: u64,
    pub sent_bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<FrameRow>,
    pub per_edge: BTreeMap<CameraId, EdgeTotals>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub frames: usize,
    pub frames_processed: u64,
    /// Mean of `sent / raw` over processed frames; `None` when nothing was processed.
    pub mean_ratio: Option<f64>,
    pub raw_bytes: u64,
    pub sent_bytes: u64,
    pub reports: u64,
    pub true_positives: u64,
    pub expected_matches: u64,
    /// 1.0 when nothing was reported.
    pub precision: f64,
    /// 1.0 when nothing was expected.
    pub recall: f64,
    pub mean_latency_ms: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, sum) = values.fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / n as f64)
}

impl RunMetrics {
    pub fn push(&mut self, camera: &CameraId, row: FrameRow) {
        let t = self.per_edge.entry(camera.clone()).or_default();
        if row.processed == 1 {
            t.frames_processed += 1;
            t.raw_bytes += row.raw_bytes;
            t.sent_bytes += row.sent_bytes;
        }
        self.rows.push(row);
    }

    pub fn summary(&self) -> Summary {
        let processed: Vec<&FrameRow> = self.rows.iter().filter(|r| r.processed == 1).collect();
        let sum = |f: fn(&FrameRow) -> u64| processed.iter().map(|r| f(r)).sum::<u64>();
        let (reports, tp, expected) = (sum(|r| r.reports), sum(|r| r.true_positives), sum(|r| r.expected_matches));
        Summary {
            frames: self.rows.len(),
            frames_processed: processed.len() as u64,
            mean_ratio: mean(processed.iter().map(|r| r.sent_raw_ratio)),
            raw_bytes: sum(|r| r.raw_bytes),
            sent_bytes: sum(|r| r.sent_bytes),
            reports,
            true_positives: tp,
            expected_matches: expected,
            precision: if reports == 0 { 1.0 } else { tp as f64 / reports as f64 },
            recall: if expected == 0 { 1.0 } else { tp as f64 / expected as f64 },
            mean_latency_ms: mean(processed.iter().filter_map(|r| r.latency_ms)),
        }
    }

    /// Writes the header, one row per edge frame, and a closing `summary` row
    /// whose ratio columns hold means over processed frames. An empty run
    /// yields the header alone.
    pub fn write_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        w.write_record([
            "frame",
            "camera_id",
            "processed",
            "persons",
            "raw_bytes",
            "sent_bytes",
            "sent_raw_ratio",
            "sent_100kb_ratio",
            "reports",
            "expected_matches",
            "true_positives",
            "latency_ms",
        ])?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        if !self.rows.is_empty() {
            let s = self.summary();
            let processed: Vec<&FrameRow> = self.rows.iter().filter(|r| r.processed == 1).collect();
            w.serialize(FrameRow {
                frame: "summary".into(),
                camera_id: "all".into(),
                processed: s.frames_processed,
                persons: processed.iter().map(|r| r.persons).sum(),
                raw_bytes: s.raw_bytes,
                sent_bytes: s.sent_bytes,
                sent_raw_ratio: s.mean_ratio.unwrap_or(0.0),
                sent_100kb_ratio: mean(processed.iter().map(|r| r.sent_100kb_ratio)).unwrap_or(0.0),
                reports: s.reports,
                expected_matches: s.expected_matches,
                true_positives: s.true_positives,
                latency_ms: s.mean_latency_ms,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// `name,value` lines with the headline numbers of the run.
    pub fn write_summary_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let s = self.summary();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["name", "value"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
        for (name, value) in [
            ("frames", s.frames.to_string()),
            ("frames_processed", s.frames_processed.to_string()),
            ("mean_sent_raw_ratio", opt(s.mean_ratio)),
            ("raw_bytes", s.raw_bytes.to_string()),
            ("sent_bytes", s.sent_bytes.to_string()),
            ("reports", s.reports.to_string()),
            ("true_positives", s.true_positives.to_string()),
            ("expected_matches", s.expected_matches.to_string()),
            ("precision", s.precision.to_string()),
            ("recall", s.recall.to_string()),
            ("mean_latency_ms", opt(s.mean_latency_ms)),
        ] {
            w.write_record([name, value.as_str()])?;
        }
        for (camera, t) in &self.per_edge {
            w.write_record([format!("edge.{camera}.sent_bytes"), t.sent_bytes.to_string()])?;
            w.write_record([format!("edge.{camera}.raw_bytes"), t.raw_bytes.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(frame: u64, processed: u64, raw: u64, sent: u64) -> FrameRow {
        FrameRow {
            frame: frame.to_string(),
            camera_id: "cam1".into(),
            processed,
            persons: 1,
            raw_bytes: raw,
            sent_bytes: sent,
            sent_raw_ratio: if processed == 1 { sent as f64 / raw as f64 } else { 0.0 },
            sent_100kb_ratio: sent as f64 / REFERENCE_FRAME_BYTES,
            reports: 0,
            expected_matches: 0,
            true_positives: 0,
            latency_ms: None,
        }
    }

    #[test]
    fn empty_run_writes_only_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        RunMetrics::default().write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with("frame,camera_id,processed"));
    }

    #[test]
    fn summary_averages_processed_frames_only() {
        let mut m = RunMetrics::default();
        let cam: CameraId = "cam1".into();
        m.push(&cam, row(0, 0, 1000, 0));
        m.push(&cam, row(1, 1, 1000, 100));
        m.push(&cam, row(2, 1, 1000, 300));
        let s = m.summary();
        assert_eq!(s.frames_processed, 2);
        assert!((s.mean_ratio.unwrap() - 0.2).abs() < 1e-12);
        assert_eq!(m.per_edge[&cam].sent_bytes, 400);
        assert_eq!((s.precision, s.recall), (1.0, 1.0));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        m.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().last().unwrap().starts_with("summary,all,2,2,2000,400,0.2,"));
    }
}
