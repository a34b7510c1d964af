use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GeometryError, Point2D};
use crate::scalar::Real;

/// Body-part catalog, in the 18-part COCO ordering used by bottom-up pose models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartKind {
    Nose,
    Neck,
    RightShoulder,
    RightElbow,
    RightWrist,
    LeftShoulder,
    LeftElbow,
    LeftWrist,
    RightHip,
    RightKnee,
    RightAnkle,
    LeftHip,
    LeftKnee,
    LeftAnkle,
    RightEye,
    LeftEye,
    RightEar,
    LeftEar,
}

impl PartKind {
    pub const ALL: [PartKind; 18] = [
        PartKind::Nose,
        PartKind::Neck,
        PartKind::RightShoulder,
        PartKind::RightElbow,
        PartKind::RightWrist,
        PartKind::LeftShoulder,
        PartKind::LeftElbow,
        PartKind::LeftWrist,
        PartKind::RightHip,
        PartKind::RightKnee,
        PartKind::RightAnkle,
        PartKind::LeftHip,
        PartKind::LeftKnee,
        PartKind::LeftAnkle,
        PartKind::RightEye,
        PartKind::LeftEye,
        PartKind::RightEar,
        PartKind::LeftEar,
    ];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: u8) -> Option<Self> {
        Self::ALL.get(usize::from(index)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            PartKind::Nose => "nose",
            PartKind::Neck => "neck",
            PartKind::RightShoulder => "right_shoulder",
            PartKind::RightElbow => "right_elbow",
            PartKind::RightWrist => "right_wrist",
            PartKind::LeftShoulder => "left_shoulder",
            PartKind::LeftElbow => "left_elbow",
            PartKind::LeftWrist => "left_wrist",
            PartKind::RightHip => "right_hip",
            PartKind::RightKnee => "right_knee",
            PartKind::RightAnkle => "right_ankle",
            PartKind::LeftHip => "left_hip",
            PartKind::LeftKnee => "left_knee",
            PartKind::LeftAnkle => "left_ankle",
            PartKind::RightEye => "right_eye",
            PartKind::LeftEye => "left_eye",
            PartKind::RightEar => "right_ear",
            PartKind::LeftEar => "left_ear",
        }
    }
}

impl fmt::Display for PartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown body part `{0}`")]
pub struct UnknownPart(pub String);

impl FromStr for PartKind {
    type Err = UnknownPart;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PartKind::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownPart(s.to_string()))
    }
}

/// A limb type: the connection between two part kinds and its band half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimbSpec<T> {
    pub part_a: PartKind,
    pub part_b: PartKind,
    /// Transverse half-width of the limb band, in pixels.
    pub width: T,
}

impl<T: Real> LimbSpec<T> {
    pub fn new(part_a: PartKind, part_b: PartKind, width: T) -> Result<Self, GeometryError> {
        if part_a == part_b {
            return Err(GeometryError::InvalidLimb(part_a, part_b));
        }
        if !(width > T::zero()) {
            return Err(GeometryError::NonPositiveWidth);
        }
        Ok(Self { part_a, part_b, width })
    }

    pub fn key(&self) -> (PartKind, PartKind) {
        (self.part_a, self.part_b)
    }

    /// Limb length for a concrete pair of endpoints.
    pub fn length(&self, a: Point2D<T>, b: Point2D<T>) -> T {
        (b - a).norm()
    }
}

/// The 17-limb tree used by COCO-style bottom-up models, spanning all 18 parts.
pub fn default_limb_catalog<T: Real>(width: T) -> Vec<LimbSpec<T>> {
    use PartKind::*;
    [
        (Neck, RightShoulder),
        (Neck, LeftShoulder),
        (RightShoulder, RightElbow),
        (RightElbow, RightWrist),
        (LeftShoulder, LeftElbow),
        (LeftElbow, LeftWrist),
        (Neck, RightHip),
        (RightHip, RightKnee),
        (RightKnee, RightAnkle),
        (Neck, LeftHip),
        (LeftHip, LeftKnee),
        (LeftKnee, LeftAnkle),
        (Neck, Nose),
        (Nose, RightEye),
        (RightEye, RightEar),
        (Nose, LeftEye),
        (LeftEye, LeftEar),
    ]
    .into_iter()
    .map(|(a, b)| LimbSpec { part_a: a, part_b: b, width })
    .collect()
}

/// Checks that a catalog's limbs form a tree connecting every part they mention.
pub fn check_catalog_tree<T>(catalog: &[LimbSpec<T>]) -> Result<(), GeometryError> {
    let mut parent: Vec<usize> = (0..PartKind::ALL.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut mentioned = [false; 18];
    for limb in catalog {
        let (a, b) = (usize::from(limb.part_a.index()), usize::from(limb.part_b.index()));
        if a == b {
            return Err(GeometryError::InvalidLimb(limb.part_a, limb.part_b));
        }
        mentioned[a] = true;
        mentioned[b] = true;
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return Err(GeometryError::InvalidCatalog("limb catalog contains a cycle"));
        }
        parent[ra] = rb;
    }
    let mut roots = (0..18)
        .filter(|&i| mentioned[i])
        .map(|i| find(&mut parent, i))
        .collect::<Vec<_>>();
    roots.sort_unstable();
    roots.dedup();
    if roots.len() > 1 {
        return Err(GeometryError::InvalidCatalog("limb catalog is not connected"));
    }
    Ok(())
}
