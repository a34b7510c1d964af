use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{limb_affinity_score, AffinityField, LimbSpec, PartKind, Point2D};
use crate::scalar::Real;

/// A detected body part with its pixel position and confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint<T> {
    pub kind: PartKind,
    pub position: Point2D<T>,
    pub confidence: T,
}

impl<T: Real> Keypoint<T> {
    pub fn new(kind: PartKind, x: T, y: T, confidence: T) -> Self {
        Self { kind, position: Point2D::new(x, y), confidence }
    }

    pub fn confidence_valid(&self) -> bool {
        self.confidence >= T::zero() && self.confidence <= T::one()
    }
}

/// One person's keypoints; at most one per part kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton<T> {
    pub person_index: usize,
    pub keypoints: BTreeMap<PartKind, Keypoint<T>>,
}

impl<T: Real> Skeleton<T> {
    pub fn new(person_index: usize) -> Self {
        Self { person_index, keypoints: BTreeMap::new() }
    }

    pub fn from_keypoints(person_index: usize, keypoints: impl IntoIterator<Item = Keypoint<T>>) -> Self {
        let mut s = Self::new(person_index);
        for kp in keypoints {
            s.keypoints.insert(kp.kind, kp);
        }
        s
    }

    pub fn get(&self, kind: PartKind) -> Option<&Keypoint<T>> {
        self.keypoints.get(&kind)
    }

    pub fn position(&self, kind: PartKind) -> Option<Point2D<T>> {
        self.get(kind).map(|k| k.position)
    }

    pub fn insert(&mut self, keypoint: Keypoint<T>) -> Option<Keypoint<T>> {
        self.keypoints.insert(keypoint.kind, keypoint)
    }

    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn translated(&self, offset: Point2D<T>) -> Self {
        let mut out = self.clone();
        for kp in out.keypoints.values_mut() {
            kp.position = kp.position + offset;
        }
        out
    }

    /// Scales every coordinate component-wise.
    pub fn scaled(&self, sx: T, sy: T) -> Self {
        let mut out = self.clone();
        for kp in out.keypoints.values_mut() {
            kp.position = Point2D::new(kp.position.x * sx, kp.position.y * sy);
        }
        out
    }

    /// Converts coordinates and confidences to another scalar type.
    pub fn cast<U: Real>(&self) -> Skeleton<U> {
        Skeleton {
            person_index: self.person_index,
            keypoints: self
                .keypoints
                .iter()
                .map(|(&k, kp)| (k, Keypoint { kind: kp.kind, position: kp.position.cast(), confidence: U::lit(kp.confidence.to_f64_lossy()) }))
                .collect(),
        }
    }

    pub fn in_bounds(&self, width: u32, height: u32) -> bool {
        self.keypoints.values().all(|k| k.position.in_bounds(width, height))
    }
}

/// Tunables of [`group_keypoints`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupingParams<T> {
    /// Candidate limbs scoring below this are never accepted.
    pub score_threshold: T,
    /// Points sampled along each candidate limb.
    pub samples: usize,
    /// A candidate with no accepted limb survives as a one-point skeleton
    /// only when its confidence exceeds this.
    pub keypoint_threshold: T,
}

impl<T: Real> Default for GroupingParams<T> {
    fn default() -> Self {
        Self { score_threshold: T::lit(0.05), samples: 10, keypoint_threshold: T::lit(0.5) }
    }
}

/// Groups candidate keypoints into per-person skeletons.
///
/// Limb types are visited in catalog order. For each, every
/// `(part_a candidate, part_b candidate)` pair is scored against that limb's
/// field and pairs are accepted greedily by descending score (ties to the
/// lower candidate indices), skipping endpoints already consumed for this
/// limb type. A pair that would put two keypoints of one kind into the same
/// person is skipped too. Accepted limbs are joined into connected
/// components, which become the skeletons, numbered by their lowest
/// candidate index.
pub fn group_keypoints<T: Real>(
    candidates: &[Keypoint<T>],
    fields: &[AffinityField<T>],
    limb_catalog: &[LimbSpec<T>],
    params: &GroupingParams<T>,
) -> Vec<Skeleton<T>> {
    let mut owner: Vec<Option<usize>> = vec![None; candidates.len()];
    // person slot -> kind -> candidate index; merged slots become None
    let mut persons: Vec<Option<BTreeMap<PartKind, usize>>> = Vec::new();

    for limb in limb_catalog {
        let Some(field) = fields.iter().find(|f| f.limb == limb.key()) else {
            continue;
        };
        let side_a: Vec<usize> = indices_of(candidates, limb.part_a);
        let side_b: Vec<usize> = indices_of(candidates, limb.part_b);
        let mut pairs: Vec<(T, usize, usize)> = Vec::with_capacity(side_a.len() * side_b.len());
        for &i in &side_a {
            for &j in &side_b {
                let (pa, pb) = (candidates[i].position, candidates[j].position);
                if let Ok(score) = limb_affinity_score(pa, pb, field, params.samples) {
                    pairs.push((score, i, j));
                }
            }
        }
        pairs.sort_by(|x, y| {
            y.0.partial_cmp(&x.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(x.1.cmp(&y.1))
                .then(x.2.cmp(&y.2))
        });

        let mut used_a = vec![false; candidates.len()];
        let mut used_b = vec![false; candidates.len()];
        for (score, i, j) in pairs {
            if !(score >= params.score_threshold) {
                break;
            }
            if used_a[i] || used_b[j] {
                continue;
            }
            if link(candidates, &mut owner, &mut persons, i, j) {
                used_a[i] = true;
                used_b[j] = true;
            }
        }
    }

    for (i, cand) in candidates.iter().enumerate() {
        if owner[i].is_none() && cand.confidence > params.keypoint_threshold {
            owner[i] = Some(persons.len());
            persons.push(Some(BTreeMap::from([(cand.kind, i)])));
        }
    }

    let mut groups: Vec<Vec<usize>> = persons
        .into_iter()
        .flatten()
        .map(|members| {
            let mut idx: Vec<usize> = members.into_values().collect();
            idx.sort_unstable();
            idx
        })
        .collect();
    groups.sort_by_key(|g| g[0]);
    groups
        .into_iter()
        .enumerate()
        .map(|(person_index, idx)| {
            Skeleton::from_keypoints(person_index, idx.into_iter().map(|i| candidates[i]))
        })
        .collect()
}

fn indices_of<T>(candidates: &[Keypoint<T>], kind: PartKind) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.kind == kind)
        .map(|(i, _)| i)
        .collect()
}

fn link<T>(
    candidates: &[Keypoint<T>],
    owner: &mut [Option<usize>],
    persons: &mut Vec<Option<BTreeMap<PartKind, usize>>>,
    i: usize,
    j: usize,
) -> bool {
    let (ki, kj) = (candidates[i].kind, candidates[j].kind);
    match (owner[i], owner[j]) {
        (None, None) => {
            let slot = persons.len();
            persons.push(Some(BTreeMap::from([(ki, i), (kj, j)])));
            owner[i] = Some(slot);
            owner[j] = Some(slot);
            true
        }
        (Some(p), None) | (None, Some(p)) => {
            let (new, kind) = if owner[i].is_none() { (i, ki) } else { (j, kj) };
            let members = persons[p].as_mut().expect("live person slot");
            if members.contains_key(&kind) {
                return false;
            }
            members.insert(kind, new);
            owner[new] = Some(p);
            true
        }
        (Some(p), Some(q)) if p == q => true,
        (Some(p), Some(q)) => {
            let other = persons[q].take().expect("live person slot");
            let members = persons[p].as_ref().expect("live person slot");
            if other.keys().any(|k| members.contains_key(k)) {
                persons[q] = Some(other);
                return false;
            }
            let members = persons[p].as_mut().expect("live person slot");
            for (kind, idx) in other {
                members.insert(kind, idx);
                owner[idx] = Some(p);
            }
            true
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::default_limb_catalog;

    #[test]
    fn empty_input_gives_no_skeletons() {
        let out = group_keypoints::<f64>(&[], &[], &default_limb_catalog(2.0), &GroupingParams::default());
        assert!(out.is_empty());
    }

    #[test]
    fn lone_candidates_respect_keypoint_threshold() {
        let cands = [
            Keypoint::new(PartKind::Nose, 5.0, 5.0, 0.9),
            Keypoint::new(PartKind::Neck, 50.0, 50.0, 0.2),
        ];
        let out = group_keypoints(&cands, &[], &default_limb_catalog(2.0), &GroupingParams::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 1);
        assert!(out[0].get(PartKind::Nose).is_some());
    }

    #[test]
    fn single_limb_is_joined() {
        let limb = (PartKind::Neck, PartKind::Nose);
        let a = Point2D::new(10.0, 20.0);
        let b = Point2D::new(10.0, 5.0);
        let field = AffinityField::from_limbs(limb, 32, 32, &[(a, b)], 2.0).unwrap();
        let cands = [
            Keypoint::new(PartKind::Nose, b.x, b.y, 0.9),
            Keypoint::new(PartKind::Neck, a.x, a.y, 0.9),
        ];
        let catalog = [LimbSpec { part_a: limb.0, part_b: limb.1, width: 2.0 }];
        let out = group_keypoints(&cands, &[field], &catalog, &GroupingParams::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 2);
        assert_eq!(out[0].person_index, 0);
    }
}
