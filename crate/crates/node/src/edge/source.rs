//! Frame sources for the edge agent.

use std::path::{Path, PathBuf};

use ivise_core::{CameraId, Frame};

use super::EdgeError;
use crate::sim::{render_scene, SceneSpec};

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "ppm", "pnm", "jpg", "jpeg", "bmp"];

/// Sort key putting `frame2.png` before `frame10.png`.
fn numeric_key(path: &Path) -> (Option<u64>, String) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let digits: String = stem.chars().rev().take_while(char::is_ascii_digit).collect::<Vec<_>>().into_iter().rev().collect();
    (digits.parse().ok(), stem.to_string())
}

/// Image files of a directory, in numeric order of the trailing digits of
/// their names. Frame `i` gets sequence `i` and timestamp `start_ms + i * interval`.
#[derive(Debug)]
pub struct DirectorySource {
    camera_id: CameraId,
    files: Vec<PathBuf>,
    next: usize,
    start_ms: u64,
    interval_ms: f64,
}

impl DirectorySource {
    pub fn open(dir: &Path, camera_id: CameraId, fps: f64, start_ms: u64) -> Result<Self, EdgeError> {
        let mut files = Vec::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(EdgeError::Source(format!("no images in {}", dir.display())));
        }
        files.sort_by_key(|p| numeric_key(p));
        Ok(Self { camera_id, files, next: 0, start_ms, interval_ms: 1000.0 / fps })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    /// Dimensions of the first image, read from its header.
    pub fn frame_size(&self) -> Result<(u32, u32), EdgeError> {
        let first = &self.files[0];
        image::image_dimensions(first).map_err(|e| EdgeError::Source(format!("{}: {e}", first.display())))
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

pub fn load_image(path: &Path, camera_id: CameraId, sequence: u64, timestamp_ms: u64) -> Result<Frame, EdgeError> {
    let img = image::open(path).map_err(|e| EdgeError::Source(format!("{}: {e}", path.display())))?.into_rgb8();
    let (w, h) = img.dimensions();
    Frame::new(camera_id, sequence, timestamp_ms, w, h, Some(img.into_raw())).map_err(|e| EdgeError::Source(e.to_string()))
}

impl Iterator for DirectorySource {
    type Item = Result<Frame, EdgeError>;

    fn next(&mut self) -> Option<Self::Item> {
        let path = self.files.get(self.next)?;
        let seq = self.next as u64;
        self.next += 1;
        let ts = self.start_ms + (seq as f64 * self.interval_ms).round() as u64;
        Some(load_image(path, self.camera_id.clone(), seq, ts))
    }
}

/// Renders a synthetic scene frame by frame, without end.
#[derive(Debug, Clone)]
pub struct SceneSource {
    spec: SceneSpec,
    camera_id: CameraId,
    next: u64,
}

impl SceneSource {
    pub fn new(spec: SceneSpec, camera_id: CameraId) -> Self {
        Self { spec, camera_id, next: 0 }
    }
}

impl Iterator for SceneSource {
    type Item = Result<Frame, EdgeError>;

    fn next(&mut self) -> Option<Self::Item> {
        let seq = self.next;
        self.next += 1;
        Some(render_scene(&self.spec, &self.camera_id, seq).map(|r| r.frame).map_err(|e| EdgeError::Source(e.to_string())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_frames_in_numeric_order() {
        let dir = tempfile::tempdir().unwrap();
        for (name, shade) in [("f10.png", 10u8), ("f2.png", 2), ("f1.ppm", 1)] {
            let img = image::RgbImage::from_pixel(4, 3, image::Rgb([shade, 0, 0]));
            img.save(dir.path().join(name)).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let src = DirectorySource::open(dir.path(), "cam1".into(), 10.0, 1000).unwrap();
        assert_eq!(src.len(), 3);
        let frames: Vec<Frame> = src.map(Result::unwrap).collect();
        let shades: Vec<u8> = frames.iter().map(|f| f.pixel(0, 0).unwrap()[0]).collect();
        assert_eq!(shades, vec![1, 2, 10]);
        assert_eq!(frames[2].sequence, 2);
        assert_eq!(frames[2].timestamp_ms, 1200);
        assert_eq!((frames[0].width(), frames[0].height()), (4, 3));
        let src = DirectorySource::open(dir.path(), "cam1".into(), 10.0, 0).unwrap();
        assert_eq!(src.frame_size().unwrap(), (4, 3));
    }

    #[test]
    fn empty_directory_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(DirectorySource::open(dir.path(), "cam1".into(), 10.0, 0).is_err());
    }
}
