//! Frames and camera identity.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub type Rgb = [u8; 3];

/// Stable camera identifier, as listed in the camera registry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CameraId(pub String);

impl CameraId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CameraId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CameraId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame dimensions must be positive, got {0}x{1}")]
    ZeroSize(u32, u32),
    #[error("pixel buffer holds {actual} bytes, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
}

/// One captured frame. The pixel buffer is row-major RGB and may be absent
/// for keypoint-only fixture runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub camera_id: CameraId,
    pub sequence: u64,
    pub timestamp_ms: u64,
    width: u32,
    height: u32,
    pixels: Option<Arc<Vec<u8>>>,
}

impl Frame {
    pub fn new(
        camera_id: CameraId,
        sequence: u64,
        timestamp_ms: u64,
        width: u32,
        height: u32,
        pixels: Option<Vec<u8>>,
    ) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::ZeroSize(width, height));
        }
        if let Some(buf) = &pixels {
            let expected = width as usize * height as usize * 3;
            if buf.len() != expected {
                return Err(FrameError::BufferLength { expected, actual: buf.len() });
            }
        }
        Ok(Self { camera_id, sequence, timestamp_ms, width, height, pixels: pixels.map(Arc::new) })
    }

    /// A frame filled with one color.
    pub fn filled(camera_id: CameraId, sequence: u64, timestamp_ms: u64, width: u32, height: u32, color: Rgb) -> Self {
        let buf = color.repeat(width as usize * height as usize);
        Self::new(camera_id, sequence, timestamp_ms, width, height, Some(buf)).expect("consistent buffer")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> Option<&[u8]> {
        self.pixels.as_deref().map(Vec::as_slice)
    }

    pub fn has_pixels(&self) -> bool {
        self.pixels.is_some()
    }

    /// Uncompressed RGB size of the frame.
    pub fn raw_bytes(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }

    pub fn pixel(&self, x: u32, y: u32) -> Option<Rgb> {
        let buf = self.pixels.as_ref()?;
        if x >= self.width || y >= self.height {
            return None;
        }
        let i = (y as usize * self.width as usize + x as usize) * 3;
        Some([buf[i], buf[i + 1], buf[i + 2]])
    }

    /// Mutable access to the pixel buffer, cloning it if shared.
    pub fn pixels_mut(&mut self) -> Option<&mut Vec<u8>> {
        self.pixels.as_mut().map(Arc::make_mut)
    }

    pub fn without_pixels(&self) -> Self {
        Self { pixels: None, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_invariants() {
        assert!(Frame::new("c".into(), 0, 0, 0, 10, None).is_err());
        assert!(Frame::new("c".into(), 0, 0, 2, 2, Some(vec![0; 11])).is_err());
        let f = Frame::filled("c".into(), 1, 2, 4, 3, [1, 2, 3]);
        assert_eq!(f.pixel(3, 2), Some([1, 2, 3]));
        assert_eq!(f.pixel(4, 2), None);
        assert_eq!(f.raw_bytes(), 36);
    }
}
