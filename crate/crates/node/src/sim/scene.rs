//! Synthetic scenes: flat-colored geometric persons on a noisy background,
//! with the exact skeletons used to draw them.

use std::collections::BTreeMap;
use std::path::Path;

use ivise_core::color::PaletteSet;
use ivise_core::geometry::{Keypoint, PartKind, Point2D, Skeleton};
use ivise_core::provider::{GroundTruth, PoseResult};
use ivise_core::regions::raster::{square, triangle};
use ivise_core::regions::BoundingBox;
use ivise_core::{CameraId, Frame, Rgb, Section};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{parse_toml, ConfigError};

/// Keypoint offsets from the neck at scale 1, in pixels (y down). The
/// person's left side is drawn at +x.
const TEMPLATE: [(PartKind, f64, f64); 18] = [
    (PartKind::Nose, 0.0, -20.0),
    (PartKind::Neck, 0.0, 0.0),
    (PartKind::RightShoulder, -22.0, 6.0),
    (PartKind::RightElbow, -28.0, 50.0),
    (PartKind::RightWrist, -30.0, 90.0),
    (PartKind::LeftShoulder, 22.0, 6.0),
    (PartKind::LeftElbow, 28.0, 50.0),
    (PartKind::LeftWrist, 30.0, 90.0),
    (PartKind::RightHip, -16.0, 100.0),
    (PartKind::RightKnee, -18.0, 150.0),
    (PartKind::RightAnkle, -18.0, 195.0),
    (PartKind::LeftHip, 16.0, 100.0),
    (PartKind::LeftKnee, 18.0, 150.0),
    (PartKind::LeftAnkle, 18.0, 195.0),
    (PartKind::RightEye, -5.0, -24.0),
    (PartKind::LeftEye, 5.0, -24.0),
    (PartKind::RightEar, -12.0, -28.0),
    (PartKind::LeftEar, 12.0, -28.0),
];

/// Half-width of the drawn legs at scale 1.
const LEG_HALF_WIDTH: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonSpec {
    /// Neck position in pixels.
    pub x: f64,
    pub y: f64,
    #[serde(default = "one")]
    pub scale: f64,
    /// Palette names: clothing for torso and legs, hair palette, skin palette.
    pub torso: String,
    pub legs: String,
    pub hair: String,
    pub face: String,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_background")]
    pub background: Rgb,
    /// Uniform per-channel jitter applied to every pixel, ± this many levels.
    #[serde(default)]
    pub noise: u8,
    #[serde(default = "default_interval")]
    pub frame_interval_ms: u64,
    #[serde(default)]
    pub start_ms: u64,
    #[serde(default)]
    pub persons: Vec<PersonSpec>,
}

fn default_background() -> Rgb {
    [70, 90, 60]
}

fn default_interval() -> u64 {
    100
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("persons {0} and {1} overlap")]
    Overlap(usize, usize),
    #[error("person {person}: `{name}` is not a {section} palette anchor")]
    UnknownColor { person: usize, section: Section, name: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
}

/// Colors a person was drawn with, per section visible in the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedPerson {
    pub person_index: usize,
    pub colors: BTreeMap<Section, String>,
    pub bbox: Option<BoundingBox>,
}

#[derive(Debug, Clone)]
pub struct RenderedFrame {
    pub frame: Frame,
    pub truth: PoseResult<f64>,
    pub expected: Vec<ExpectedPerson>,
}

struct Layout {
    skeleton: Skeleton<f64>,
    hair: Vec<(u32, u32)>,
    face: Vec<(u32, u32)>,
    torso: Vec<(u32, u32)>,
    legs: [Vec<(u32, u32)>; 2],
    colors: [Rgb; 4],
}

impl Layout {
    fn all(&self) -> impl Iterator<Item = &(u32, u32)> {
        self.hair.iter().chain(&self.face).chain(&self.torso).chain(self.legs.iter().flatten())
    }
}

impl PersonSpec {
    pub fn skeleton(&self, person_index: usize) -> Skeleton<f64> {
        let neck = Point2D::new(self.x, self.y);
        Skeleton::from_keypoints(
            person_index,
            TEMPLATE.iter().map(|&(kind, dx, dy)| {
                let p = neck + Point2D::new(dx, dy) * self.scale;
                Keypoint { kind, position: p, confidence: 1.0 }
            }),
        )
    }
}

fn anchor(palettes: &PaletteSet, person: usize, section: Section, name: &str) -> Result<Rgb, SceneError> {
    palettes.for_section(section).anchor(name).ok_or_else(|| SceneError::UnknownColor {
        person,
        section,
        name: name.to_string(),
    })
}

fn leg_quad(a: Point2D<f64>, b: Point2D<f64>, half: f64, w: u32, h: u32) -> Vec<(u32, u32)> {
    let d = b - a;
    let n = Point2D::new(-d.y, d.x) * (half / d.norm());
    let (a0, a1, b0, b1) = (a + n, a - n, b + n, b - n);
    let mut px = triangle(a0, a1, b1, w, h).unwrap_or_default();
    px.extend(triangle(a0, b1, b0, w, h).unwrap_or_default());
    px
}

impl SceneSpec {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        parse_toml(path)
    }

    fn layouts(&self, palettes: &PaletteSet) -> Result<Vec<Layout>, SceneError> {
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::Invalid("frame size must be positive".into()));
        }
        let (w, h) = (self.width, self.height);
        let mut out = Vec::with_capacity(self.persons.len());
        for (i, p) in self.persons.iter().enumerate() {
            if !(p.scale > 0.0) || !p.x.is_finite() || !p.y.is_finite() {
                return Err(SceneError::Invalid(format!("person {i}: bad position or scale")));
            }
            let colors = [
                anchor(palettes, i, Section::Torso, &p.torso)?,
                anchor(palettes, i, Section::LeftLeg, &p.legs)?,
                anchor(palettes, i, Section::Hair, &p.hair)?,
                anchor(palettes, i, Section::Face, &p.face)?,
            ];
            let s = p.skeleton(i);
            let at = |k| s.position(k).expect("template part");
            let (le, re, neck) = (at(PartKind::LeftEar), at(PartKind::RightEar), at(PartKind::Neck));
            let side = (le - re).norm();
            let mid = Point2D::new((le.x + re.x) / 2.0, (le.y + re.y) / 2.0);
            let face = triangle(le, re, neck, w, h).unwrap_or_default();
            let hair = square(mid.x - side / 2.0, mid.y - side, side, w, h);
            let torso = triangle(at(PartKind::LeftHip), at(PartKind::RightHip), neck, w, h).unwrap_or_default();
            let half = LEG_HALF_WIDTH * p.scale;
            let leg = |hip, knee, ankle| {
                let mut px = leg_quad(at(hip), at(knee), half, w, h);
                px.extend(leg_quad(at(knee), at(ankle), half, w, h));
                px.sort_unstable();
                px.dedup();
                px
            };
            let legs = [
                leg(PartKind::LeftHip, PartKind::LeftKnee, PartKind::LeftAnkle),
                leg(PartKind::RightHip, PartKind::RightKnee, PartKind::RightAnkle),
            ];
            out.push(Layout { skeleton: s, hair, face, torso, legs, colors });
        }
        let boxes: Vec<Option<BoundingBox>> =
            out.iter().map(|l| BoundingBox::of(&l.all().copied().collect::<Vec<_>>())).collect();
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if let (Some(a), Some(b)) = (boxes[i], boxes[j]) {
                    let disjoint = a.max_x < b.min_x || b.max_x < a.min_x || a.max_y < b.min_y || b.max_y < a.min_y;
                    if !disjoint {
                        return Err(SceneError::Overlap(i, j));
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn validate(&self, palettes: &PaletteSet) -> Result<(), SceneError> {
        self.layouts(palettes).map(|_| ())
    }

    pub fn timestamp_ms(&self, sequence: u64) -> u64 {
        self.start_ms + sequence * self.frame_interval_ms
    }

    /// Ground-truth skeletons (independent of the frame sequence: scenes are static).
    pub fn skeletons(&self) -> Vec<Skeleton<f64>> {
        self.persons.iter().enumerate().map(|(i, p)| p.skeleton(i)).collect()
    }
}

fn noise_seed(seed: u64, camera: &CameraId, sequence: u64) -> u64 {
    let cam = camera.as_str().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3));
    seed ^ cam ^ sequence.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Draws frame `sequence` of the scene for `camera`.
///
/// Draw order is hair, torso, legs, face, so each region's pixels carry its
/// own color except where a leg meets the torso at the hips.
pub fn render_scene(spec: &SceneSpec, camera: &CameraId, sequence: u64) -> Result<RenderedFrame, SceneError> {
    render_scene_with(spec, camera, sequence, &PaletteSet::default())
}

pub fn render_scene_with(
    spec: &SceneSpec,
    camera: &CameraId,
    sequence: u64,
    palettes: &PaletteSet,
) -> Result<RenderedFrame, SceneError> {
    let layouts = spec.layouts(palettes)?;
    let (w, h) = (spec.width as usize, spec.height as usize);
    let mut buf = spec.background.repeat(w * h);
    let mut paint = |px: &[(u32, u32)], c: Rgb| {
        for &(x, y) in px {
            let i = (y as usize * w + x as usize) * 3;
            buf[i..i + 3].copy_from_slice(&c);
        }
    };
    for l in &layouts {
        let [torso, legs, hair, face] = l.colors;
        paint(&l.hair, hair);
        paint(&l.torso, torso);
        paint(&l.legs[0], legs);
        paint(&l.legs[1], legs);
        paint(&l.face, face);
    }
    if spec.noise > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(spec.seed, camera, sequence));
        let n = i16::from(spec.noise);
        for v in buf.iter_mut() {
            *v = (i16::from(*v) + rng.random_range(-n..=n)).clamp(0, 255) as u8;
        }
    }
    let frame = Frame::new(camera.clone(), sequence, spec.timestamp_ms(sequence), spec.width, spec.height, Some(buf))
        .map_err(|e| SceneError::Invalid(e.to_string()))?;

    let expected = layouts
        .iter()
        .zip(&spec.persons)
        .enumerate()
        .map(|(i, (l, p))| {
            let mut colors = BTreeMap::new();
            for (section, px, name) in [
                (Section::Torso, &l.torso, &p.torso),
                (Section::LeftLeg, &l.legs[0], &p.legs),
                (Section::RightLeg, &l.legs[1], &p.legs),
                (Section::Face, &l.face, &p.face),
                (Section::Hair, &l.hair, &p.hair),
            ] {
                if !px.is_empty() {
                    colors.insert(section, name.clone());
                }
            }
            ExpectedPerson { person_index: i, colors, bbox: BoundingBox::of(&l.all().copied().collect::<Vec<_>>()) }
        })
        .collect();
    let truth = PoseResult {
        camera_id: camera.clone(),
        sequence,
        skeletons: layouts.into_iter().map(|l| l.skeleton).collect(),
        inference_millis: 0.0,
    };
    Ok(RenderedFrame { frame, truth, expected })
}

/// Ground truth for a set of per-camera scenes.
#[derive(Debug, Clone, Default)]
pub struct SceneTruth {
    scenes: BTreeMap<CameraId, SceneSpec>,
}

impl SceneTruth {
    pub fn new(scenes: impl IntoIterator<Item = (CameraId, SceneSpec)>) -> Self {
        Self { scenes: scenes.into_iter().collect() }
    }
}

impl GroundTruth for SceneTruth {
    fn skeletons(&self, camera: &CameraId, _sequence: u64) -> Option<Vec<Skeleton<f64>>> {
        self.scenes.get(camera).map(SceneSpec::skeletons)
    }
}
