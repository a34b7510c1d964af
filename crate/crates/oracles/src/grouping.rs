//! Exhaustive keypoint-to-person assignment.

use std::collections::BTreeSet;

use ivise_core::geometry::{limb_affinity_score, AffinityField, Keypoint, LimbSpec, PartKind};

/// Candidate index sets, one per person, in a canonical order.
pub type Partition = BTreeSet<BTreeSet<usize>>;

/// Tries every way of giving each candidate a person label (at most one
/// candidate of each kind per person) and returns the partition with the
/// highest total affinity over same-person limb pairs. Pairs scoring below
/// `threshold` contribute nothing. Returns `None` if the best total is tied.
pub fn best_assignment(
    candidates: &[Keypoint<f64>],
    fields: &[AffinityField<f64>],
    catalog: &[LimbSpec<f64>],
    persons: usize,
    samples: usize,
    threshold: f64,
) -> Option<Partition> {
    let kinds: Vec<PartKind> = candidates.iter().map(|c| c.kind).collect::<BTreeSet<_>>().into_iter().collect();
    let by_kind: Vec<Vec<usize>> =
        kinds.iter().map(|k| (0..candidates.len()).filter(|&i| candidates[i].kind == *k).collect()).collect();

    let n = candidates.len();
    let mut score = vec![vec![0.0; n]; n];
    for limb in catalog {
        let Some(field) = fields.iter().find(|f| f.limb == limb.key()) else { continue };
        for i in 0..n {
            for j in 0..n {
                if candidates[i].kind == limb.part_a && candidates[j].kind == limb.part_b {
                    let s = limb_affinity_score(candidates[i].position, candidates[j].position, field, samples)
                        .unwrap_or(0.0);
                    if s >= threshold {
                        score[i][j] += s;
                        score[j][i] += s;
                    }
                }
            }
        }
    }

    let mut label = vec![usize::MAX; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut tied = false;
    search(&by_kind, 0, persons, &mut label, &score, &mut best, &mut tied);
    if tied {
        return None;
    }
    let (_, labels) = best?;
    Some(partition_of(&labels, persons))
}

fn search(
    by_kind: &[Vec<usize>],
    depth: usize,
    persons: usize,
    label: &mut Vec<usize>,
    score: &[Vec<f64>],
    best: &mut Option<(f64, Vec<usize>)>,
    tied: &mut bool,
) {
    if depth == by_kind.len() {
        let mut total = 0.0;
        for i in 0..label.len() {
            for j in i + 1..label.len() {
                if label[i] == label[j] {
                    total += score[i][j];
                }
            }
        }
        match best {
            Some((b, l)) if (total - *b).abs() < 1e-12 => {
                if partition_of(l, persons) != partition_of(label, persons) {
                    *tied = true;
                }
            }
            Some((b, _)) if total < *b => {}
            _ => {
                *best = Some((total, label.clone()));
                *tied = false;
            }
        }
        return;
    }
    let group = &by_kind[depth];
    let mut used = vec![false; persons];
    assign(group, 0, &mut used, by_kind, depth, persons, label, score, best, tied);
}

#[allow(clippy::too_many_arguments)]
fn assign(
    group: &[usize],
    pos: usize,
    used: &mut Vec<bool>,
    by_kind: &[Vec<usize>],
    depth: usize,
    persons: usize,
    label: &mut Vec<usize>,
    score: &[Vec<f64>],
    best: &mut Option<(f64, Vec<usize>)>,
    tied: &mut bool,
) {
    if pos == group.len() {
        search(by_kind, depth + 1, persons, label, score, best, tied);
        return;
    }
    for p in 0..persons {
        if !used[p] {
            used[p] = true;
            label[group[pos]] = p;
            assign(group, pos + 1, used, by_kind, depth, persons, label, score, best, tied);
            used[p] = false;
        }
    }
}

fn partition_of(labels: &[usize], persons: usize) -> Partition {
    (0..persons)
        .map(|p| (0..labels.len()).filter(|&i| labels[i] == p).collect::<BTreeSet<usize>>())
        .filter(|s| !s.is_empty())
        .collect()
}
