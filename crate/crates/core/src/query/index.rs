//! Append-only store of person descriptions, optionally backed by a log file.
//!
//! Log format: the header line `ivise-index v1`, then one JSON
//! [`IndexRecord`] per line. A final line cut short by a crash (no trailing
//! newline, not parseable) is discarded on open.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use super::{build_report, CameraRegistry, MatchReport, PersonDescription, Query};

pub const INDEX_HEADER: &str = "ivise-index v1";

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("{0}: not an index log (missing `{INDEX_HEADER}` header)")]
    BadHeader(PathBuf),
    #[error("index log line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("index log: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub description: PersonDescription,
    pub inserted_at_ms: u64,
}

/// Half-open window `[start_ms, end_ms)` over frame timestamps; `None` is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TimeRange {
    pub start_ms: Option<u64>,
    pub end_ms: Option<u64>,
}

impl TimeRange {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn between(start_ms: u64, end_ms: u64) -> Self {
        Self { start_ms: Some(start_ms), end_ms: Some(end_ms) }
    }

    pub fn contains(&self, t: u64) -> bool {
        self.start_ms.is_none_or(|s| t >= s) && self.end_ms.is_none_or(|e| t < e)
    }
}

/// Single-writer, multi-reader description store. Scans work on a snapshot
/// taken when they start.
#[derive(Debug, Default)]
pub struct FeatureIndex {
    records: RwLock<Vec<Arc<IndexRecord>>>,
    log: Mutex<Option<BufWriter<File>>>,
}

impl FeatureIndex {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a log file, replaying any records it holds.
    pub fn open(path: &Path) -> Result<Self, IndexError> {
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        let mut records = Vec::new();
        if text.is_empty() {
            writeln!(file, "{INDEX_HEADER}")?;
        } else {
            let mut lines = text.split_inclusive('\n');
            if lines.next().map(str::trim_end) != Some(INDEX_HEADER) {
                return Err(IndexError::BadHeader(path.to_path_buf()));
            }
            let mut offset = INDEX_HEADER.len() + 1;
            for (i, line) in lines.enumerate() {
                let parsed = serde_json::from_str::<IndexRecord>(line.trim_end());
                if !line.ends_with('\n') {
                    match parsed {
                        Ok(r) => {
                            records.push(Arc::new(r));
                            file.write_all(b"\n")?;
                        }
                        Err(_) => file.set_len(offset as u64)?,
                    }
                    break;
                }
                let r = parsed.map_err(|e| IndexError::Corrupt { line: i + 2, message: e.to_string() })?;
                records.push(Arc::new(r));
                offset += line.len();
            }
        }
        file.flush()?;
        Ok(Self { records: RwLock::new(records), log: Mutex::new(Some(BufWriter::new(file))) })
    }

    /// Appends a record, writing it to the log (if any) before it becomes visible.
    pub fn insert(&self, record: IndexRecord) -> Result<usize, IndexError> {
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(w) = log.as_mut() {
            serde_json::to_writer(&mut *w, &record).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        let mut records = self.records.write().unwrap_or_else(|e| e.into_inner());
        records.push(Arc::new(record));
        Ok(records.len())
    }

    pub fn len(&self) -> usize {
        self.records.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<Arc<IndexRecord>> {
        self.records.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Replays `query` over the stored records in insertion order.
    pub fn scan(&self, query: &Query, range: TimeRange, registry: &CameraRegistry) -> Vec<MatchReport> {
        self.snapshot()
            .iter()
            .filter(|r| range.contains(r.description.timestamp_ms))
            .filter_map(|r| build_report(query, &r.description, registry).ok())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::PaletteSet;
    use crate::query::{parse_query, CameraInfo};
    use crate::regions::{PersonRef, Section};
    use std::collections::BTreeMap;

    fn record(seq: u64, torso: &str) -> IndexRecord {
        IndexRecord {
            description: PersonDescription {
                source: PersonRef { camera_id: "cam1".into(), sequence: seq, person_index: 0 },
                timestamp_ms: seq * 100,
                sections: [(Section::Torso, vec![(torso.to_string(), 10)])].into_iter().collect(),
                missing: vec![],
                evidence: BTreeMap::new(),
            },
            inserted_at_ms: seq * 100 + 5,
        }
    }

    fn registry() -> CameraRegistry {
        let mut r = CameraRegistry::default();
        r.insert("cam1".into(), CameraInfo { address: "h:1".into(), latitude: 1.0, longitude: 2.0 }).unwrap();
        r
    }

    #[test]
    fn scan_ranges() {
        let idx = FeatureIndex::in_memory();
        let q = parse_query("red shirt", &PaletteSet::default()).unwrap();
        assert!(idx.scan(&q, TimeRange::all(), &registry()).is_empty());
        for s in 0..10 {
            idx.insert(record(s, if s % 3 == 0 { "red" } else { "blue" })).unwrap();
        }
        let hits: Vec<u64> = idx.scan(&q, TimeRange::all(), &registry()).iter().map(|r| r.sequence()).collect();
        assert_eq!(hits, vec![0, 3, 6, 9]);
        assert_eq!(idx.scan(&q, TimeRange::between(300, 900), &registry()).len(), 2);
        assert!(idx.scan(&q, TimeRange::between(5000, 6000), &registry()).is_empty());
    }

    #[test]
    fn log_replay_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.log");
        {
            let idx = FeatureIndex::open(&path).unwrap();
            idx.insert(record(1, "red")).unwrap();
            idx.insert(record(2, "blue")).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"description\":").unwrap();
        drop(f);

        let idx = FeatureIndex::open(&path).unwrap();
        assert_eq!(idx.len(), 2);
        idx.insert(record(3, "red")).unwrap();
        drop(idx);
        let idx = FeatureIndex::open(&path).unwrap();
        let seqs: Vec<u64> = idx.snapshot().iter().map(|r| r.description.source.sequence).collect();
        assert_eq!(seqs, vec![1, 2, 3]);
        assert!(std::fs::read_to_string(&path).unwrap().starts_with("ivise-index v1\n"));
    }

    #[test]
    fn rejects_foreign_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.log");
        std::fs::write(&path, "hello\n").unwrap();
        assert!(matches!(FeatureIndex::open(&path), Err(IndexError::BadHeader(_))));
        std::fs::write(&path, "ivise-index v1\nnot json\n").unwrap();
        assert!(matches!(FeatureIndex::open(&path), Err(IndexError::Corrupt { line: 2, .. })));
    }
}
