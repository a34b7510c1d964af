//! Client for an external pose-inference endpoint.
//!
//! The model-input frame is POSTed as a binary PPM (`P6`) image. The endpoint
//! answers with a line-oriented body in model-input coordinates:
//!
//! ```text
//! ivise-pose-response v1
//! grouped true|false
//! person <person_index> <part_kind> <x> <y> <confidence>    # grouped answers
//! candidate <part_kind> <x> <y> <confidence>                # ungrouped answers
//! field <part_a> <part_b> <x> <y> <vx> <vy>                 # ungrouped: nonzero field samples
//! ```
//!
//! Ungrouped answers are assembled into skeletons locally with
//! [`group_keypoints`](crate::geometry::group_keypoints) over the default limb
//! catalog; field samples not listed are zero.

use std::collections::BTreeMap;
use std::io::Read;
use std::time::{Duration, Instant};

use super::{PoseProvider, PoseResult, ProviderError};
use crate::frame::Frame;
use crate::geometry::{
    default_limb_catalog, group_keypoints, AffinityField, GroupingParams, Keypoint, PartKind, Point2D, Skeleton,
};
use crate::regions::PreprocessedFrame;

pub const RESPONSE_HEADER: &str = "ivise-pose-response v1";

/// Limb band half-width assumed when grouping remote candidates, in model pixels.
const REMOTE_LIMB_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    /// Endpoint URL, config key `pose.remote_url`.
    pub url: String,
    pub timeout: Duration,
}

impl RemoteConfig {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(5);

    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), timeout: Self::DEFAULT_TIMEOUT }
    }
}

pub struct RemoteProvider {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, agent }
    }

    fn post(&self, body: &[u8]) -> Result<String, ProviderError> {
        let mut response = self
            .agent
            .post(&self.config.url)
            .header("Content-Type", "image/x-portable-pixmap")
            .send(body)
            .map_err(|e| ProviderError::RemoteUnavailable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(ProviderError::RemoteUnavailable(format!("endpoint answered {status}")));
        }
        let mut text = String::new();
        response
            .body_mut()
            .as_reader()
            .read_to_string(&mut text)
            .map_err(|e| ProviderError::RemoteUnavailable(e.to_string()))?;
        Ok(text)
    }
}

impl PoseProvider for RemoteProvider {
    fn infer(&mut self, frame: &PreprocessedFrame) -> Result<PoseResult<f64>, ProviderError> {
        let model = frame.model.as_ref().ok_or(ProviderError::MissingPixels)?;
        let body = encode_ppm(model).ok_or(ProviderError::MissingPixels)?;
        let start = Instant::now();
        let text = self.post(&body)?;
        let inference_millis = start.elapsed().as_secs_f64() * 1e3;
        let skeletons = parse_response(&text, model.width(), model.height())?;
        let src = &frame.source;
        let native: Vec<Skeleton<f64>> = skeletons
            .into_iter()
            .map(|s| clamp_to_frame(s.scaled(frame.scale_x, frame.scale_y), src.width(), src.height()))
            .collect();
        Ok(PoseResult { camera_id: src.camera_id.clone(), sequence: src.sequence, skeletons: native, inference_millis })
    }
}

fn clamp_to_frame(mut s: Skeleton<f64>, width: u32, height: u32) -> Skeleton<f64> {
    let max_x = f64::from(width) - 1e-6;
    let max_y = f64::from(height) - 1e-6;
    for kp in s.keypoints.values_mut() {
        kp.position = Point2D::new(kp.position.x.clamp(0.0, max_x), kp.position.y.clamp(0.0, max_y));
    }
    s
}

pub fn encode_ppm(frame: &Frame) -> Option<Vec<u8>> {
    let pixels = frame.pixels()?;
    let mut out = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    out.extend_from_slice(pixels);
    Some(out)
}

/// Parses a response body into skeletons in model-input coordinates.
pub fn parse_response(text: &str, model_width: u32, model_height: u32) -> Result<Vec<Skeleton<f64>>, ProviderError> {
    let bad = |n: usize, msg: &str| ProviderError::MalformedResponse(format!("line {n}: {msg}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, RESPONSE_HEADER)) => {}
        Some((n, _)) => return Err(bad(n, "missing response header")),
        None => return Err(ProviderError::MalformedResponse("empty response".into())),
    }
    let grouped = match lines.next() {
        Some((_, "grouped true")) => true,
        Some((_, "grouped false")) => false,
        Some((n, _)) => return Err(bad(n, "expected `grouped true|false`")),
        None => return Err(ProviderError::MalformedResponse("missing grouped flag".into())),
    };

    let mut persons: BTreeMap<usize, Skeleton<f64>> = BTreeMap::new();
    let mut candidates: Vec<Keypoint<f64>> = Vec::new();
    let mut fields: BTreeMap<(PartKind, PartKind), AffinityField<f64>> = BTreeMap::new();
    let (w, h) = (model_width as usize, model_height as usize);

    for (n, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(n, "bad number"));
        let part = |s: &str| s.parse::<PartKind>().map_err(|e| bad(n, &e.to_string()));
        let checked = |kp: Keypoint<f64>| {
            if !kp.confidence_valid() {
                Err(bad(n, "confidence outside [0, 1]"))
            } else if !kp.position.in_bounds(model_width, model_height) {
                Err(bad(n, "keypoint outside model frame"))
            } else {
                Ok(kp)
            }
        };
        match (f.first().copied(), f.len(), grouped) {
            (Some("person"), 6, true) => {
                let index: usize = f[1].parse().map_err(|_| bad(n, "bad person index"))?;
                let kp = checked(Keypoint::new(part(f[2])?, num(f[3])?, num(f[4])?, num(f[5])?))?;
                let skel = persons.entry(index).or_insert_with(|| Skeleton::new(index));
                if skel.insert(kp).is_some() {
                    return Err(bad(n, "duplicate part for person"));
                }
            }
            (Some("candidate"), 5, false) => {
                candidates.push(checked(Keypoint::new(part(f[1])?, num(f[2])?, num(f[3])?, num(f[4])?))?);
            }
            (Some("field"), 7, false) => {
                let key = (part(f[1])?, part(f[2])?);
                let (x, y) = (num(f[3])?, num(f[4])?);
                if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 || x.fract() != 0.0 || y.fract() != 0.0 {
                    return Err(bad(n, "field sample off the model grid"));
                }
                let field = fields.entry(key).or_insert_with(|| AffinityField::zeros(key, w, h));
                field
                    .set(x as usize, y as usize, Point2D::new(num(f[5])?, num(f[6])?))
                    .map_err(|e| bad(n, &e.to_string()))?;
            }
            _ => return Err(bad(n, "unexpected line")),
        }
    }

    if grouped {
        return Ok(persons.into_values().collect());
    }
    let fields: Vec<AffinityField<f64>> = fields.into_values().collect();
    let catalog = default_limb_catalog(REMOTE_LIMB_WIDTH);
    Ok(group_keypoints(&candidates, &fields, &catalog, &GroupingParams::default()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grouped_response() {
        let text = format!("{RESPONSE_HEADER}\ngrouped true\nperson 0 neck 10 20 0.9\nperson 0 nose 10 5 0.8\nperson 1 neck 80 20 0.7\n");
        let skels = parse_response(&text, 160, 160).unwrap();
        assert_eq!(skels.len(), 2);
        assert_eq!(skels[0].len(), 2);
    }

    #[test]
    fn ungrouped_response_is_grouped_locally() {
        let mut text = format!("{RESPONSE_HEADER}\ngrouped false\ncandidate neck 10 20 0.9\ncandidate nose 10 5 0.9\n");
        for y in 5..=20 {
            for x in 8..=12 {
                text.push_str(&format!("field neck nose {x} {y} 0 -1\n"));
            }
        }
        let skels = parse_response(&text, 32, 32).unwrap();
        assert_eq!(skels.len(), 1);
        assert_eq!(skels[0].len(), 2);
    }

    #[test]
    fn malformed_responses() {
        assert!(matches!(parse_response("", 10, 10), Err(ProviderError::MalformedResponse(_))));
        assert!(matches!(parse_response("hello\n", 10, 10), Err(ProviderError::MalformedResponse(_))));
        let oob = format!("{RESPONSE_HEADER}\ngrouped true\nperson 0 neck 50 5 0.9\n");
        assert!(matches!(parse_response(&oob, 10, 10), Err(ProviderError::MalformedResponse(_))));
        let mixed = format!("{RESPONSE_HEADER}\ngrouped true\ncandidate neck 5 5 0.9\n");
        assert!(matches!(parse_response(&mixed, 10, 10), Err(ProviderError::MalformedResponse(_))));
    }

    #[test]
    fn ppm_body() {
        let f = Frame::filled("c".into(), 0, 0, 2, 1, [9, 8, 7]);
        let ppm = encode_ppm(&f).unwrap();
        assert!(ppm.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(&ppm[ppm.len() - 6..], &[9, 8, 7, 9, 8, 7]);
    }
}
