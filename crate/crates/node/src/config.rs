//! TOML configuration for the `edge` and `fog` services.
//!
//! Edge:
//!
//! ```toml
//! camera_id = "cam1"
//! drop_ratio = 0.5
//!
//! [fog]
//! listen_addr = "127.0.0.1:7100"   # the fog's edge port
//!
//! [frames]
//! directory = "frames/"            # or: scene = "scene.toml"
//! fps = 10.0
//!
//! [pose]
//! backend = "remote"               # fixture | synthetic | remote
//! remote_url = "http://127.0.0.1:8500/infer"
//!
//! [status]
//! listen_addr = "127.0.0.1:7300"
//! ```
//!
//! Fog:
//!
//! ```toml
//! [fog]
//! listen_addr = "0.0.0.0:7100"
//! operator_addr = "127.0.0.1:7200"
//! registry = "cameras.txt"
//! index_log = "index.log"
//!
//! [palette]
//! clothing = "clothing.palette"     # optional overrides of the built-in palettes
//!
//! [garments]
//! coat = ["torso"]
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ivise_core::color::{ColorDictionary, PaletteError, PaletteKind, PaletteSet, HAIR_OTHER_DISTANCE};
use ivise_core::query::GarmentVocabulary;
use ivise_core::{CameraId, Section};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Palette(#[from] PaletteError),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn parse_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ConfigError> {
    toml::from_str(&read(path)?).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(e) })
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseBackend {
    Fixture,
    Synthetic,
    Remote,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFogSection {
    pub listen_addr: String,
    #[serde(default = "default_heartbeat_secs")]
    pub heartbeat_secs: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramesSection {
    pub directory: Option<PathBuf>,
    pub scene: Option<PathBuf>,
    #[serde(default = "default_fps")]
    pub fps: f64,
    /// Stop after this many frames; unbounded when absent.
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSection {
    pub backend: PoseBackend,
    pub remote_url: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    pub fixture: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusSection {
    pub listen_addr: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub camera_id: CameraId,
    #[serde(default = "default_drop_ratio")]
    pub drop_ratio: f64,
    #[serde(default = "default_ttl_secs")]
    pub query_ttl_secs: u64,
    pub fog: EdgeFogSection,
    pub frames: FramesSection,
    pub pose: PoseSection,
    pub status: Option<StatusSection>,
}

fn default_drop_ratio() -> f64 {
    0.5
}
fn default_ttl_secs() -> u64 {
    300
}
fn default_heartbeat_secs() -> u64 {
    5
}
fn default_fps() -> f64 {
    10.0
}
fn default_timeout_ms() -> u64 {
    5000
}
fn default_missed() -> u32 {
    3
}

impl EdgeConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut c: Self = parse_toml(path)?;
        let base = base_dir(path);
        for p in [&mut c.frames.directory, &mut c.frames.scene, &mut c.pose.fixture].into_iter().flatten() {
            resolve(&base, p);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.camera_id.as_str().is_empty() || self.camera_id.as_str().contains(char::is_whitespace) {
            return bad("camera_id must be a non-empty word");
        }
        if !(0.0..1.0).contains(&self.drop_ratio) {
            return bad("drop_ratio must be in [0, 1)");
        }
        if !(self.frames.fps > 0.0) {
            return bad("frames.fps must be positive");
        }
        match (&self.frames.directory, &self.frames.scene) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return bad("set exactly one of frames.directory and frames.scene"),
        }
        match self.pose.backend {
            PoseBackend::Remote if self.pose.remote_url.is_none() => bad("pose.remote_url is required for the remote backend"),
            PoseBackend::Fixture if self.pose.fixture.is_none() => bad("pose.fixture is required for the fixture backend"),
            PoseBackend::Synthetic if self.frames.scene.is_none() => bad("the synthetic backend needs frames.scene"),
            _ => Ok(()),
        }
    }

    pub fn query_ttl(&self) -> Duration {
        Duration::from_secs(self.query_ttl_secs)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FogSection {
    pub listen_addr: String,
    pub operator_addr: String,
    pub registry: PathBuf,
    pub index_log: Option<PathBuf>,
    #[serde(default = "default_ttl_secs")]
    pub query_ttl_secs: u64,
    #[serde(default = "default_heartbeat_secs")]
    pub heartbeat_secs: u64,
    #[serde(default = "default_missed")]
    pub missed_heartbeats: u32,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaletteSection {
    pub clothing: Option<PathBuf>,
    pub skin: Option<PathBuf>,
    pub hair: Option<PathBuf>,
    pub hair_other_distance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FogConfig {
    pub fog: FogSection,
    #[serde(default)]
    pub palette: PaletteSection,
    /// Extra or replacement garment words, mapped to section names.
    #[serde(default)]
    pub garments: BTreeMap<String, Vec<String>>,
}

impl FogConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut c: Self = parse_toml(path)?;
        let base = base_dir(path);
        resolve(&base, &mut c.fog.registry);
        let p = &mut c.palette;
        for path in [&mut c.fog.index_log, &mut p.clothing, &mut p.skin, &mut p.hair].into_iter().flatten() {
            resolve(&base, path);
        }
        c.vocabulary()?;
        if c.fog.heartbeat_secs == 0 || c.fog.missed_heartbeats == 0 {
            return Err(ConfigError::Invalid("heartbeat settings must be positive".into()));
        }
        Ok(c)
    }

    pub fn palettes(&self) -> Result<PaletteSet, ConfigError> {
        let distance = self.palette.hair_other_distance.unwrap_or(HAIR_OTHER_DISTANCE);
        let mut set = PaletteSet { hair: ColorDictionary::hair_with_threshold(distance), ..PaletteSet::default() };
        for (path, slot, kind) in [
            (&self.palette.clothing, &mut set.clothing, PaletteKind::Clothing),
            (&self.palette.skin, &mut set.skin, PaletteKind::Skin),
            (&self.palette.hair, &mut set.hair, PaletteKind::Hair),
        ] {
            if let Some(path) = path {
                let dict = ColorDictionary::load(path, distance)?;
                if dict.kind() != kind {
                    return Err(ConfigError::Invalid(format!("{} holds a {} palette, expected {kind}", path.display(), dict.kind())));
                }
                *slot = dict;
            }
        }
        Ok(set)
    }

    pub fn vocabulary(&self) -> Result<GarmentVocabulary, ConfigError> {
        let mut v = GarmentVocabulary::default();
        for (word, sections) in &self.garments {
            let parsed = sections
                .iter()
                .map(|s| s.parse::<Section>().map_err(ConfigError::Invalid))
                .collect::<Result<Vec<_>, _>>()?;
            if parsed.is_empty() || word.is_empty() || word.contains(char::is_whitespace) {
                return Err(ConfigError::Invalid(format!("bad garment entry `{word}`")));
            }
            v.insert(word, &parsed);
        }
        Ok(v)
    }
}
