//! Camera registry file: one `camera_id host:port latitude longitude` per
//! line; blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::path::Path;

use crate::frame::CameraId;

#[derive(Debug, Clone, PartialEq)]
pub struct CameraInfo {
    pub address: String,
    pub latitude: f64,
    pub longitude: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("registry line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("camera `{0}` registered twice")]
    Duplicate(CameraId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CameraRegistry {
    cameras: BTreeMap<CameraId, CameraInfo>,
}

impl CameraRegistry {
    pub fn insert(&mut self, camera: CameraId, info: CameraInfo) -> Result<(), RegistryError> {
        if self.cameras.contains_key(&camera) {
            return Err(RegistryError::Duplicate(camera));
        }
        self.cameras.insert(camera, info);
        Ok(())
    }

    pub fn get(&self, camera: &CameraId) -> Option<&CameraInfo> {
        self.cameras.get(camera)
    }

    pub fn contains(&self, camera: &CameraId) -> bool {
        self.cameras.contains_key(camera)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CameraId, &CameraInfo)> {
        self.cameras.iter()
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, RegistryError> {
        let mut registry = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| RegistryError::Parse { line: line_no, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [camera, address, lat, lon] = fields[..] else {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            };
            if !address.rsplit_once(':').is_some_and(|(host, port)| !host.is_empty() && port.parse::<u16>().is_ok()) {
                return Err(err(format!("bad address `{address}`")));
            }
            let latitude: f64 = lat.parse().map_err(|_| err(format!("bad latitude `{lat}`")))?;
            let longitude: f64 = lon.parse().map_err(|_| err(format!("bad longitude `{lon}`")))?;
            if !(-90.0..=90.0).contains(&latitude) {
                return Err(err(format!("latitude {latitude} out of range")));
            }
            if !(-180.0..=180.0).contains(&longitude) {
                return Err(err(format!("longitude {longitude} out of range")));
            }
            registry.insert(CameraId::from(camera), CameraInfo { address: address.to_string(), latitude, longitude })?;
        }
        Ok(registry)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        self.cameras
            .iter()
            .map(|(id, c)| format!("{id} {} {} {}\n", c.address, c.latitude, c.longitude))
            .collect()
    }
}
