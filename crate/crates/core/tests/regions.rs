use std::collections::BTreeSet;

use ivise_core::geometry::{Keypoint, PartKind, Point2D, Skeleton};
use ivise_core::provider::PoseResult;
use ivise_core::regions::raster::{bresenham, is_degenerate_triangle};
use ivise_core::regions::{extract_all, face_pixels, hair_pixels, leg_pixels, torso_pixels, RegionError, Section};
use ivise_core::Frame;
use ivise_oracles::raster as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const W: u32 = 120;
const H: u32 = 100;

const PARTS: [PartKind; 7] = [
    PartKind::LeftHip,
    PartKind::RightHip,
    PartKind::LeftKnee,
    PartKind::RightKnee,
    PartKind::LeftEar,
    PartKind::RightEar,
    PartKind::Neck,
];

/// Keypoints anywhere in (and a little outside) the frame; each may be absent.
fn random_skeleton(rng: &mut ChaCha8Rng) -> Skeleton<f64> {
    let mut s = Skeleton::new(0);
    for kind in PARTS {
        if rng.random_bool(0.12) {
            continue;
        }
        let x = rng.random_range(-10.0..(W as f64 + 10.0));
        let y = rng.random_range(-10.0..(H as f64 + 10.0));
        s.insert(Keypoint::new(kind, x, y, 0.9));
    }
    s
}

fn set(v: Vec<(u32, u32)>) -> BTreeSet<(u32, u32)> {
    let n = v.len();
    let s: BTreeSet<_> = v.into_iter().collect();
    assert_eq!(s.len(), n, "duplicate pixels");
    s
}

fn pos(s: &Skeleton<f64>, k: PartKind) -> Option<Point2D<f64>> {
    s.position(k)
}

fn check_triangle(
    result: Result<Vec<(u32, u32)>, RegionError>,
    corners: [Option<Point2D<f64>>; 3],
    section: Section,
) -> Option<BTreeSet<(u32, u32)>> {
    let [Some(a), Some(b), Some(c)] = corners else {
        assert!(matches!(result, Err(RegionError::MissingKeypoint { .. })), "{section}: {result:?}");
        return None;
    };
    if is_degenerate_triangle(a, b, c) {
        assert_eq!(result, Err(RegionError::DegenerateRegion(section)));
        return None;
    }
    let expected = oracle::triangle(a, b, c, W, H);
    match result {
        Ok(px) => assert_eq!(set(px), expected, "{section} {a:?} {b:?} {c:?}"),
        Err(RegionError::EmptyRegion(_)) => assert!(expected.is_empty()),
        Err(e) => panic!("{section}: {e}"),
    }
    Some(expected)
}

fn check_leg(s: &Skeleton<f64>, side: Section, hip: PartKind, knee: PartKind) {
    let result = leg_pixels(s, side, W, H);
    let (Some(a), Some(b)) = (pos(s, hip), pos(s, knee)) else {
        assert!(matches!(result, Err(RegionError::MissingKeypoint { .. })));
        return;
    };
    let (x0, y0, x1, y1) = (a.x.floor() as i64, a.y.floor() as i64, b.x.floor() as i64, b.y.floor() as i64);
    let line = bresenham(x0, y0, x1, y1);
    assert!(oracle::line_is_admissible(&line, x0, y0, x1, y1), "{side} ({x0},{y0})->({x1},{y1}): {line:?}");
    let y_major = (y1 - y0).abs() >= (x1 - x0).abs();
    let expected = oracle::dilate(&line, y_major, W, H);
    match result {
        Ok(px) => assert_eq!(set(px), expected),
        Err(RegionError::EmptyRegion(_)) => assert!(expected.is_empty()),
        Err(e) => panic!("{side}: {e}"),
    }
}

#[test]
fn rasterization_matches_brute_force_on_random_skeletons() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let frame = Frame::filled("cam1".into(), 0, 0, W, H, [10, 20, 30]);
    for _ in 0..1000 {
        let s = random_skeleton(&mut rng);
        use PartKind::*;
        check_triangle(torso_pixels(&s, W, H), [pos(&s, LeftHip), pos(&s, RightHip), pos(&s, Neck)], Section::Torso);
        let face = check_triangle(face_pixels(&s, W, H), [pos(&s, LeftEar), pos(&s, RightEar), pos(&s, Neck)], Section::Face);
        check_leg(&s, Section::LeftLeg, LeftHip, LeftKnee);
        check_leg(&s, Section::RightLeg, RightHip, RightKnee);

        let hair = hair_pixels(&s, W, H);
        if let (Some(l), Some(r)) = (pos(&s, LeftEar), pos(&s, RightEar)) {
            let side = (r - l).norm();
            let mid = Point2D::new((l.x + r.x) / 2.0, (l.y + r.y) / 2.0);
            let neck_above = pos(&s, Neck).is_some_and(|n| n.y < mid.y);
            let top = if neck_above { mid.y } else { mid.y - side };
            let face = face.unwrap_or_default();
            let expected: BTreeSet<_> =
                oracle::square(mid.x - side / 2.0, top, side, W, H).difference(&face).copied().collect();
            match hair {
                Ok(px) => assert_eq!(set(px), expected),
                Err(RegionError::EmptyRegion(_)) => assert!(expected.is_empty()),
                Err(e) => panic!("hair: {e}"),
            }
        } else {
            assert!(matches!(hair, Err(RegionError::MissingKeypoint { .. })));
        }

        // Whole-person extraction never fails and partitions the sections.
        let pose = PoseResult { camera_id: "cam1".into(), sequence: 0, skeletons: vec![s.clone()], inference_millis: 0.0 };
        let sets = extract_all(&pose, &frame);
        assert_eq!(sets.len(), 1);
        let mut all: Vec<Section> = sets[0].regions.keys().copied().chain(sets[0].missing.iter().copied()).collect();
        all.sort();
        assert_eq!(all, Section::ALL.to_vec());
    }
}

#[test]
fn absent_ears_only_lose_head_sections() {
    let mut s = Skeleton::new(0);
    for (kind, x, y) in [
        (PartKind::Neck, 50.0, 20.0),
        (PartKind::LeftHip, 40.0, 60.0),
        (PartKind::RightHip, 60.0, 60.0),
        (PartKind::LeftKnee, 40.0, 85.0),
        (PartKind::RightKnee, 60.0, 85.0),
    ] {
        s.insert(Keypoint::new(kind, x, y, 0.9));
    }
    let frame = Frame::filled("cam1".into(), 0, 0, W, H, [1, 2, 3]);
    let pose = PoseResult { camera_id: "cam1".into(), sequence: 0, skeletons: vec![s], inference_millis: 0.0 };
    let sets = extract_all(&pose, &frame);
    assert_eq!(sets[0].missing, vec![Section::Face, Section::Hair]);
    assert_eq!(sets[0].regions.len(), 3);
}
