//! Body-region cropping.
//!
//! Each person yields up to five regions, cut from the native-resolution
//! frame:
//!
//! | section     | shape                                                  |
//! |-------------|--------------------------------------------------------|
//! | `torso`     | triangle (left hip, right hip, neck)                   |
//! | `left_leg`  | 3-pixel-wide line, left hip to left knee               |
//! | `right_leg` | 3-pixel-wide line, right hip to right knee             |
//! | `face`      | triangle (left ear, right ear, neck)                   |
//! | `hair`      | ear-distance square above the ear line, minus the face |
//!
//! Sections whose keypoints are missing or degenerate are reported as missing
//! rather than failing the person.

mod preprocess;
pub mod raster;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::frame::{CameraId, Frame, Rgb};
use crate::geometry::{PartKind, Point2D, Skeleton, DEGENERATE_TOLERANCE};
use crate::provider::PoseResult;
use crate::scalar::Real;

pub use preprocess::{preprocess, PreprocessError, PreprocessedFrame, MODEL_INPUT_SIZE};
pub use raster::PixelCoord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Torso,
    LeftLeg,
    RightLeg,
    Face,
    Hair,
}

impl Section {
    pub const ALL: [Section; 5] = [Section::Torso, Section::LeftLeg, Section::RightLeg, Section::Face, Section::Hair];

    pub fn name(self) -> &'static str {
        match self {
            Section::Torso => "torso",
            Section::LeftLeg => "left_leg",
            Section::RightLeg => "right_leg",
            Section::Face => "face",
            Section::Hair => "hair",
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Self::ALL.get(usize::from(i)).copied()
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Section {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Section::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| format!("unknown section `{s}`"))
    }
}

/// Identifies one person in one frame of one camera.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PersonRef {
    pub camera_id: CameraId,
    pub sequence: u64,
    pub person_index: usize,
}

/// Inclusive pixel bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: u32,
    pub min_y: u32,
    pub max_x: u32,
    pub max_y: u32,
}

impl BoundingBox {
    pub fn of(coords: &[PixelCoord]) -> Option<Self> {
        let first = coords.first()?;
        let mut b = BoundingBox { min_x: first.0, min_y: first.1, max_x: first.0, max_y: first.1 };
        for &(x, y) in coords {
            b.min_x = b.min_x.min(x);
            b.min_y = b.min_y.min(y);
            b.max_x = b.max_x.max(x);
            b.max_y = b.max_y.max(y);
        }
        Some(b)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.max_x - self.min_x + 1) * u64::from(self.max_y - self.min_y + 1)
    }
}

/// Colors sampled from one body section.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelRegion {
    pub section: Section,
    pub pixels: Vec<Rgb>,
    pub source: PersonRef,
    pub bbox: BoundingBox,
}

impl PixelRegion {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegionError {
    #[error("{section}: missing keypoints {parts:?}")]
    MissingKeypoint { section: Section, parts: Vec<PartKind> },
    #[error("{0}: degenerate region")]
    DegenerateRegion(Section),
    #[error("{0}: region covers no pixels inside the frame")]
    EmptyRegion(Section),
    #[error("frame has no pixel buffer")]
    NoPixels,
}

/// All regions found for one person. `regions` and `missing` partition the five sections.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSet {
    pub person: PersonRef,
    pub regions: BTreeMap<Section, PixelRegion>,
    pub missing: Vec<Section>,
}

fn require<T: Real>(
    skeleton: &Skeleton<T>,
    section: Section,
    parts: &[PartKind],
) -> Result<Vec<Point2D<T>>, RegionError> {
    let absent: Vec<PartKind> = parts.iter().copied().filter(|p| skeleton.get(*p).is_none()).collect();
    if !absent.is_empty() {
        return Err(RegionError::MissingKeypoint { section, parts: absent });
    }
    Ok(parts.iter().filter_map(|p| skeleton.position(*p)).collect())
}

fn non_empty(section: Section, px: Vec<PixelCoord>) -> Result<Vec<PixelCoord>, RegionError> {
    if px.is_empty() {
        Err(RegionError::EmptyRegion(section))
    } else {
        Ok(px)
    }
}

/// Pixel coordinates of the torso triangle.
pub fn torso_pixels<T: Real>(skeleton: &Skeleton<T>, width: u32, height: u32) -> Result<Vec<PixelCoord>, RegionError> {
    let p = require(skeleton, Section::Torso, &[PartKind::LeftHip, PartKind::RightHip, PartKind::Neck])?;
    let px = raster::triangle(p[0], p[1], p[2], width, height).ok_or(RegionError::DegenerateRegion(Section::Torso))?;
    non_empty(Section::Torso, px)
}

/// Pixel coordinates of the face triangle.
pub fn face_pixels<T: Real>(skeleton: &Skeleton<T>, width: u32, height: u32) -> Result<Vec<PixelCoord>, RegionError> {
    let p = require(skeleton, Section::Face, &[PartKind::LeftEar, PartKind::RightEar, PartKind::Neck])?;
    let px = raster::triangle(p[0], p[1], p[2], width, height).ok_or(RegionError::DegenerateRegion(Section::Face))?;
    non_empty(Section::Face, px)
}

/// Pixel coordinates of one leg line (`Section::LeftLeg` or `Section::RightLeg`).
pub fn leg_pixels<T: Real>(
    skeleton: &Skeleton<T>,
    side: Section,
    width: u32,
    height: u32,
) -> Result<Vec<PixelCoord>, RegionError> {
    let parts = match side {
        Section::LeftLeg => [PartKind::LeftHip, PartKind::LeftKnee],
        Section::RightLeg => [PartKind::RightHip, PartKind::RightKnee],
        other => panic!("{other} is not a leg section"),
    };
    let p = require(skeleton, side, &parts)?;
    if !((p[1] - p[0]).norm() > T::lit(DEGENERATE_TOLERANCE)) {
        return Err(RegionError::DegenerateRegion(side));
    }
    non_empty(side, raster::thick_line(p[0], p[1], width, height))
}

/// Pixel coordinates of the hair square: side equal to the ear distance,
/// centered on the ear midpoint, extending away from the neck (upward when
/// the neck is absent), minus any face-triangle pixels.
pub fn hair_pixels<T: Real>(skeleton: &Skeleton<T>, width: u32, height: u32) -> Result<Vec<PixelCoord>, RegionError> {
    let p = require(skeleton, Section::Hair, &[PartKind::LeftEar, PartKind::RightEar])?;
    let side = (p[1] - p[0]).norm();
    if !(side > T::lit(DEGENERATE_TOLERANCE)) {
        return Err(RegionError::DegenerateRegion(Section::Hair));
    }
    let two = T::lit(2.0);
    let mid = Point2D::new((p[0].x + p[1].x) / two, (p[0].y + p[1].y) / two);
    let neck_above = skeleton.position(PartKind::Neck).is_some_and(|n| n.y < mid.y);
    let top = if neck_above { mid.y } else { mid.y - side };
    let square = raster::square(mid.x - side / two, top, side, width, height);
    let face: BTreeSet<PixelCoord> = face_pixels(skeleton, width, height).unwrap_or_default().into_iter().collect();
    let px = square.into_iter().filter(|c| !face.contains(c)).collect();
    non_empty(Section::Hair, px)
}

fn sample(frame: &Frame, section: Section, source: PersonRef, coords: &[PixelCoord]) -> Result<PixelRegion, RegionError> {
    if !frame.has_pixels() {
        return Err(RegionError::NoPixels);
    }
    let pixels: Vec<Rgb> = coords.iter().filter_map(|&(x, y)| frame.pixel(x, y)).collect();
    let bbox = BoundingBox::of(coords).ok_or(RegionError::EmptyRegion(section))?;
    Ok(PixelRegion { section, pixels, source, bbox })
}

fn person_ref<T>(frame: &Frame, skeleton: &Skeleton<T>) -> PersonRef {
    PersonRef { camera_id: frame.camera_id.clone(), sequence: frame.sequence, person_index: skeleton.person_index }
}

pub fn torso_region<T: Real>(skeleton: &Skeleton<T>, frame: &Frame) -> Result<PixelRegion, RegionError> {
    let coords = torso_pixels(skeleton, frame.width(), frame.height())?;
    sample(frame, Section::Torso, person_ref(frame, skeleton), &coords)
}

pub fn face_region<T: Real>(skeleton: &Skeleton<T>, frame: &Frame) -> Result<PixelRegion, RegionError> {
    let coords = face_pixels(skeleton, frame.width(), frame.height())?;
    sample(frame, Section::Face, person_ref(frame, skeleton), &coords)
}

pub fn hair_region<T: Real>(skeleton: &Skeleton<T>, frame: &Frame) -> Result<PixelRegion, RegionError> {
    let coords = hair_pixels(skeleton, frame.width(), frame.height())?;
    sample(frame, Section::Hair, person_ref(frame, skeleton), &coords)
}

/// Per-leg outcome of [`leg_regions`].
#[derive(Debug, Clone, PartialEq)]
pub struct LegRegions {
    pub left: Result<PixelRegion, RegionError>,
    pub right: Result<PixelRegion, RegionError>,
}

/// Both leg regions; fails only when neither hip/knee pair is present.
pub fn leg_regions<T: Real>(skeleton: &Skeleton<T>, frame: &Frame) -> Result<LegRegions, RegionError> {
    let leg = |side| {
        let coords = leg_pixels(skeleton, side, frame.width(), frame.height())?;
        sample(frame, side, person_ref(frame, skeleton), &coords)
    };
    let (left, right) = (leg(Section::LeftLeg), leg(Section::RightLeg));
    let absent = |r: &Result<PixelRegion, RegionError>| matches!(r, Err(RegionError::MissingKeypoint { .. }));
    if absent(&left) && absent(&right) {
        let mut parts = Vec::new();
        for r in [&left, &right] {
            if let Err(RegionError::MissingKeypoint { parts: p, .. }) = r {
                parts.extend_from_slice(p);
            }
        }
        return Err(RegionError::MissingKeypoint { section: Section::LeftLeg, parts });
    }
    Ok(LegRegions { left, right })
}

/// Extracts every region of every skeleton. Never fails: unavailable
/// sections are listed in `missing`.
pub fn extract_all<T: Real>(pose: &PoseResult<T>, frame: &Frame) -> Vec<RegionSet> {
    pose.skeletons
        .iter()
        .map(|skeleton| {
            let mut regions = BTreeMap::new();
            let mut missing = Vec::new();
            let results = [
                torso_region(skeleton, frame),
                leg_region(skeleton, frame, Section::LeftLeg),
                leg_region(skeleton, frame, Section::RightLeg),
                face_region(skeleton, frame),
                hair_region(skeleton, frame),
            ];
            for (section, result) in Section::ALL.into_iter().zip(results) {
                match result {
                    Ok(region) => {
                        regions.insert(section, region);
                    }
                    Err(_) => missing.push(section),
                }
            }
            RegionSet { person: person_ref(frame, skeleton), regions, missing }
        })
        .collect()
}

fn leg_region<T: Real>(skeleton: &Skeleton<T>, frame: &Frame, side: Section) -> Result<PixelRegion, RegionError> {
    let coords = leg_pixels(skeleton, side, frame.width(), frame.height())?;
    sample(frame, side, person_ref(frame, skeleton), &coords)
}
