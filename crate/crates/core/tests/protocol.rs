use ivise_core::geometry::{Keypoint, PartKind, Point2D, Skeleton};
use ivise_core::protocol::{
    byte_size, decode, encode, should_transmit, Ack, DispatchAction, FrameFeaturesMsg, Heartbeat, Message,
    PersonFeatures, ProtocolError, QueryDispatch, RegionBlob, HEADER_LEN,
};
use ivise_core::provider::PoseResult;
use ivise_core::query::QueryId;
use ivise_core::regions::BoundingBox;
use ivise_core::{CameraId, Section};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f32> {
    -5000.0f32..5000.0
}

fn keypoint() -> impl Strategy<Value = Keypoint<f32>> {
    (0u8..18, finite(), finite(), 0.0f32..=1.0).prop_map(|(k, x, y, c)| Keypoint {
        kind: PartKind::from_index(k).unwrap(),
        position: Point2D::new(x, y),
        confidence: c,
    })
}

fn region() -> impl Strategy<Value = RegionBlob> {
    let runs = prop::collection::vec((1usize..40, any::<[u8; 3]>()), 0..20);
    (0u8..5, any::<[u32; 4]>(), runs).prop_map(|(s, b, runs)| RegionBlob {
        section: Section::from_index(s).unwrap(),
        bbox: BoundingBox { min_x: b[0], min_y: b[1], max_x: b[2], max_y: b[3] },
        pixels: runs.into_iter().flat_map(|(n, c)| std::iter::repeat_n(c, n)).collect(),
    })
}

fn features() -> impl Strategy<Value = FrameFeaturesMsg> {
    let person = (any::<u32>(), prop::collection::vec(keypoint(), 0..18), prop::collection::vec(region(), 0..5))
        .prop_map(|(person_index, keypoints, regions)| PersonFeatures { person_index, keypoints, regions });
    ("[a-z0-9_-]{1,12}", any::<u64>(), any::<u64>(), prop::collection::vec(person, 0..4)).prop_map(
        |(cam, sequence, timestamp_ms, persons)| FrameFeaturesMsg { camera_id: CameraId(cam), sequence, timestamp_ms, persons },
    )
}

fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        features().prop_map(Message::FrameFeatures),
        (any::<u64>(), prop::option::of(any::<u32>()), ".{0,40}").prop_map(|(id, ttl, text)| {
            let action = ttl.map_or(DispatchAction::Cancel, |ttl_ms| DispatchAction::Activate { ttl_ms });
            Message::QueryDispatch(QueryDispatch { query_id: QueryId(id), action, text })
        }),
        ("[a-z0-9]{1,8}", any::<u64>(), any::<u64>(), any::<u64>()).prop_map(|(c, a, b, d)| {
            Message::Heartbeat(Heartbeat { camera_id: CameraId(c), sent_at_ms: a, frames_seen: b, frames_processed: d })
        }),
        (any::<u8>(), any::<u64>()).prop_map(|(kind, reference)| Message::Ack(Ack { kind, reference })),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn encode_decode_round_trips(msg in message(), sender in any::<u64>()) {
        let bytes = encode(sender, &msg).unwrap();
        prop_assert_eq!(bytes.len(), byte_size(&msg).unwrap());
        prop_assert_eq!(&bytes, &encode(sender, &msg.clone()).unwrap());
        let (s, back) = decode(&bytes).unwrap();
        prop_assert_eq!(s, sender);
        prop_assert_eq!(back, msg);
    }
}

proptest! {
    #[test]
    fn every_strict_prefix_is_rejected(msg in message(), cut in any::<prop::sample::Index>()) {
        let bytes = encode(1, &msg).unwrap();
        let cut = cut.index(bytes.len());
        let truncated = matches!(decode(&bytes[..cut]), Err(ProtocolError::TruncatedPayload { .. }));
        prop_assert!(truncated);
    }

    #[test]
    fn foreign_versions_are_rejected(msg in message(), version in 2u8..) {
        let mut bytes = encode(1, &msg).unwrap();
        bytes[0] = version;
        let rejected = matches!(decode(&bytes), Err(ProtocolError::VersionMismatch(v)) if v == version);
        prop_assert!(rejected);
    }
}

#[test]
fn transmit_only_frames_with_people() {
    let mut pose: PoseResult<f64> = PoseResult::empty("cam1".into(), 0);
    assert!(!should_transmit(&pose));
    for n in 1..=4 {
        pose.skeletons.push(Skeleton::from_keypoints(n, [Keypoint::new(PartKind::Neck, 1.0, 1.0, 0.9)]));
        assert!(should_transmit(&pose));
    }
}

#[test]
fn region_heavy_1080p_message_is_under_half_the_raw_frame() {
    // Regions covering 20% of a 1080p frame, every pixel a different color (no RLE gain).
    let covered = 1920 * 1080 / 5;
    let pixels: Vec<[u8; 3]> = (0..covered).map(|i| [(i % 251) as u8, (i % 241) as u8, (i % 239) as u8]).collect();
    let msg = Message::FrameFeatures(FrameFeaturesMsg {
        camera_id: "cam1".into(),
        sequence: 0,
        timestamp_ms: 0,
        persons: vec![PersonFeatures {
            person_index: 0,
            keypoints: vec![],
            regions: vec![RegionBlob {
                section: Section::Torso,
                bbox: BoundingBox { min_x: 0, min_y: 0, max_x: 10, max_y: 10 },
                pixels,
            }],
        }],
    });
    let size = byte_size(&msg).unwrap();
    // Distinct neighbors make every run length 1: 5 bytes per pixel.
    assert!(size > HEADER_LEN + covered * 5);
    assert!((size as f64) < 1920.0 * 1080.0 * 3.0 * 0.5);
}
