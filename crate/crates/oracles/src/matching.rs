//! Linear-scan query evaluation written directly from the matching rules.

use ivise_core::query::{CameraRegistry, IndexRecord, Query, TimeRange};
use ivise_core::CameraId;

/// `(camera, sequence, person)` of every record whose person satisfies every
/// clause, in record order.
pub fn linear_scan(
    records: &[IndexRecord],
    query: &Query,
    range: TimeRange,
    registry: &CameraRegistry,
) -> Vec<(CameraId, u64, usize)> {
    let mut out = Vec::new();
    for r in records {
        let d = &r.description;
        if !range.contains(d.timestamp_ms) || !query.scope.contains(&d.source.camera_id) {
            continue;
        }
        if !registry.contains(&d.source.camera_id) {
            continue;
        }
        let mut ok = true;
        for clause in &query.clauses {
            let hit = match d.sections.get(&clause.section) {
                None => false,
                Some(colors) => {
                    let mut found = false;
                    for (rank, (name, _)) in colors.iter().enumerate() {
                        if rank < clause.k && *name == clause.color {
                            found = true;
                        }
                    }
                    found
                }
            };
            ok &= hit;
        }
        if ok {
            out.push((d.source.camera_id.clone(), d.source.sequence, d.source.person_index));
        }
    }
    out
}
