//! Model-input preparation: 3x3 box blur, then bilinear resize to 160x160.

use crate::frame::Frame;

/// Side of the square model input.
pub const MODEL_INPUT_SIZE: u32 = 160;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreprocessError {
    #[error("frame has no pixel buffer")]
    EmptyFrame,
}

/// A native frame together with its model-input copy.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedFrame {
    /// Native-resolution frame; regions are cropped from here.
    pub source: Frame,
    /// Smoothed 160x160 copy fed to pose inference; absent for metadata-only frames.
    pub model: Option<Frame>,
    /// Native pixels per model pixel along x.
    pub scale_x: f64,
    /// Native pixels per model pixel along y.
    pub scale_y: f64,
}

impl PreprocessedFrame {
    /// Wraps a frame without producing a model input, for keypoint-only runs.
    pub fn metadata_only(source: Frame) -> Self {
        let scale_x = f64::from(source.width()) / f64::from(MODEL_INPUT_SIZE);
        let scale_y = f64::from(source.height()) / f64::from(MODEL_INPUT_SIZE);
        Self { source, model: None, scale_x, scale_y }
    }
}

/// Blurs with a 3x3 box filter (edges replicated) and resamples to 160x160.
///
/// Only the blurred pixels the bilinear taps touch are computed, so the cost
/// is independent of the native resolution.
pub fn preprocess(frame: &Frame) -> Result<PreprocessedFrame, PreprocessError> {
    let src = frame.pixels().ok_or(PreprocessError::EmptyFrame)?;
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let n = MODEL_INPUT_SIZE as usize;
    let scale_x = w as f64 / n as f64;
    let scale_y = h as f64 / n as f64;

    let blurred = |x: usize, y: usize, c: usize| -> f64 {
        let mut sum = 0u32;
        for dy in [-1i64, 0, 1] {
            let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
            for dx in [-1i64, 0, 1] {
                let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                sum += u32::from(src[(yy * w + xx) * 3 + c]);
            }
        }
        f64::from(sum) / 9.0
    };
    let taps = |dst: usize, scale: f64, len: usize| -> (usize, usize, f64) {
        let s = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = s.floor() as usize;
        (i0, (i0 + 1).min(len - 1), s - i0 as f64)
    };

    let xtaps: Vec<_> = (0..n).map(|x| taps(x, scale_x, w)).collect();
    let mut out = vec![0u8; n * n * 3];
    for y in 0..n {
        let (y0, y1, fy) = taps(y, scale_y, h);
        for (x, &(x0, x1, fx)) in xtaps.iter().enumerate() {
            for c in 0..3 {
                let top = blurred(x0, y0, c) * (1.0 - fx) + blurred(x1, y0, c) * fx;
                let bottom = blurred(x0, y1, c) * (1.0 - fx) + blurred(x1, y1, c) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                out[(y * n + x) * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    let model = Frame::new(
        frame.camera_id.clone(),
        frame.sequence,
        frame.timestamp_ms,
        MODEL_INPUT_SIZE,
        MODEL_INPUT_SIZE,
        Some(out),
    )
    .expect("model frame dimensions are consistent");
    Ok(PreprocessedFrame { source: frame.clone(), model: Some(model), scale_x, scale_y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Full-image reference: blur every pixel, then resample.
    fn reference(frame: &Frame) -> Vec<u8> {
        let (w, h) = (frame.width() as usize, frame.height() as usize);
        let src = frame.pixels().unwrap();
        let mut blur = vec![0f64; w * h * 3];
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut s = 0.0;
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let yy = (y as i64 + dy).max(0).min(h as i64 - 1) as usize;
                            let xx = (x as i64 + dx).max(0).min(w as i64 - 1) as usize;
                            s += f64::from(src[(yy * w + xx) * 3 + c]);
                        }
                    }
                    blur[(y * w + x) * 3 + c] = s / 9.0;
                }
            }
        }
        let n = 160usize;
        let mut out = vec![0u8; n * n * 3];
        for y in 0..n {
            let sy = ((y as f64 + 0.5) * h as f64 / n as f64 - 0.5).max(0.0).min((h - 1) as f64);
            for x in 0..n {
                let sx = ((x as f64 + 0.5) * w as f64 / n as f64 - 0.5).max(0.0).min((w - 1) as f64);
                let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                for c in 0..3 {
                    let g = |xx: usize, yy: usize| blur[(yy * w + xx) * 3 + c];
                    let v = (g(x0, y0) * (1.0 - fx) + g(x1, y0) * fx) * (1.0 - fy)
                        + (g(x0, y1) * (1.0 - fx) + g(x1, y1) * fx) * fy;
                    out[(y * n + x) * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        out
    }

    fn noisy(w: u32, h: u32, seed: u64) -> Frame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let buf: Vec<u8> = (0..w * h * 3).map(|_| rng.random()).collect();
        Frame::new("cam".into(), 0, 0, w, h, Some(buf)).unwrap()
    }

    #[test]
    fn matches_full_image_reference() {
        for (w, h, seed) in [(160, 160, 1), (320, 180, 2), (97, 211, 3), (40, 30, 4)] {
            let f = noisy(w, h, seed);
            let pre = preprocess(&f).unwrap();
            assert_eq!(pre.model.unwrap().pixels().unwrap(), reference(&f).as_slice(), "{w}x{h}");
        }
    }

    #[test]
    fn full_hd_scale_factors() {
        let f = Frame::filled("cam".into(), 0, 0, 1920, 1080, [10, 20, 30]);
        let pre = preprocess(&f).unwrap();
        assert_eq!((pre.scale_x, pre.scale_y), (12.0, 6.75));
        let model = pre.model.unwrap();
        assert_eq!((model.width(), model.height()), (160, 160));
        assert_eq!(model.pixel(80, 80), Some([10, 20, 30]));
        assert_eq!(pre.source.width(), 1920);
    }

    #[test]
    fn identity_size_still_blurs() {
        let mut f = Frame::filled("cam".into(), 0, 0, 160, 160, [0, 0, 0]);
        let buf = f.pixels_mut().unwrap();
        let i = (80 * 160 + 80) * 3;
        buf[i] = 90;
        let pre = preprocess(&f).unwrap();
        let model = pre.model.unwrap();
        assert_eq!((model.width(), model.height()), (160, 160));
        assert_eq!(model.pixel(80, 80), Some([10, 0, 0]));
        assert_eq!(model.pixel(79, 81), Some([10, 0, 0]));
        assert_eq!(model.pixel(78, 80), Some([0, 0, 0]));
    }

    #[test]
    fn no_pixels_is_empty_frame() {
        let f = Frame::new("cam".into(), 0, 0, 10, 10, None).unwrap();
        assert_eq!(preprocess(&f).unwrap_err(), PreprocessError::EmptyFrame);
    }
}
