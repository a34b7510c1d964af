//! Color dictionaries: the 24-name clothing palette, the two-name skin palette
//! and the hair palette with its `other` fallback.
//!
//! Palette files:
//!
//! ```text
//! ivise-palette v1 <clothing|skin|hair>
//! <name> <r> <g> <b>
//! ```
//!
//! Hair files list only the anchored names; `other` is implied.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::frame::Rgb;
use crate::regions::Section;
use crate::scalar::Real;

pub const PALETTE_HEADER: &str = "ivise-palette v1";
pub const OTHER_COLOR: &str = "other";
/// Hair centroids farther than this from every anchor are named `other`.
pub const HAIR_OTHER_DISTANCE: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PaletteKind {
    Clothing,
    Skin,
    Hair,
}

impl PaletteKind {
    pub fn name(self) -> &'static str {
        match self {
            PaletteKind::Clothing => "clothing",
            PaletteKind::Skin => "skin",
            PaletteKind::Hair => "hair",
        }
    }

    fn required_names(self) -> Option<&'static [&'static str]> {
        match self {
            PaletteKind::Clothing => None,
            PaletteKind::Skin => Some(&["white", "black"]),
            PaletteKind::Hair => Some(&["black", "brown", "blond", "red"]),
        }
    }
}

impl fmt::Display for PaletteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PaletteKind {
    type Err = PaletteError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clothing" => Ok(PaletteKind::Clothing),
            "skin" => Ok(PaletteKind::Skin),
            "hair" => Ok(PaletteKind::Hair),
            other => Err(PaletteError::Invalid(format!("unknown palette kind `{other}`"))),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PaletteError {
    #[error("palette line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid palette: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Named RGB anchors; lookups return the nearest anchor's name.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorDictionary {
    kind: PaletteKind,
    entries: Vec<(String, Rgb)>,
    /// Name returned when every anchor is farther than the given distance.
    fallback: Option<(String, f64)>,
}

const CLOTHING_24: [(&str, Rgb); 24] = [
    ("red", [255, 0, 0]),
    ("orange", [255, 140, 0]),
    ("yellow", [255, 255, 0]),
    ("green", [0, 160, 0]),
    ("cyan", [0, 255, 255]),
    ("blue", [0, 0, 255]),
    ("purple", [128, 0, 128]),
    ("pink", [255, 150, 200]),
    ("brown", [140, 80, 30]),
    ("grey", [128, 128, 128]),
    ("black", [0, 0, 0]),
    ("white", [255, 255, 255]),
    ("dark-red", [139, 0, 0]),
    ("light-red", [255, 110, 110]),
    ("dark-green", [0, 90, 0]),
    ("light-green", [144, 238, 144]),
    ("dark-blue", [0, 0, 139]),
    ("light-blue", [135, 206, 250]),
    ("dark-purple", [75, 0, 110]),
    ("light-purple", [200, 160, 220]),
    ("dark-grey", [64, 64, 64]),
    ("light-grey", [192, 192, 192]),
    ("dark-brown", [90, 50, 20]),
    ("light-brown", [200, 150, 100]),
];

impl ColorDictionary {
    pub fn new(kind: PaletteKind, entries: Vec<(String, Rgb)>, hair_other_distance: f64) -> Result<Self, PaletteError> {
        if entries.is_empty() {
            return Err(PaletteError::Invalid("no entries".into()));
        }
        let mut seen = HashSet::new();
        for (name, _) in &entries {
            if name.is_empty() || name.chars().any(char::is_whitespace) || name.contains(',') || name.contains(':') {
                return Err(PaletteError::Invalid(format!("bad color name `{name}`")));
            }
            if !seen.insert(name.as_str()) {
                return Err(PaletteError::Invalid(format!("duplicate color `{name}`")));
            }
        }
        match kind.required_names() {
            None if entries.len() != 24 => {
                return Err(PaletteError::Invalid(format!("clothing palette needs 24 colors, found {}", entries.len())));
            }
            Some(required) => {
                let want: HashSet<&str> = required.iter().copied().collect();
                if seen != want {
                    return Err(PaletteError::Invalid(format!("{kind} palette must name exactly {required:?}")));
                }
            }
            None => {}
        }
        let fallback = (kind == PaletteKind::Hair).then(|| (OTHER_COLOR.to_string(), hair_other_distance));
        Ok(Self { kind, entries, fallback })
    }

    pub fn clothing24() -> Self {
        let entries = CLOTHING_24.iter().map(|&(n, c)| (n.to_string(), c)).collect();
        Self::new(PaletteKind::Clothing, entries, HAIR_OTHER_DISTANCE).expect("built-in palette is valid")
    }

    pub fn skin() -> Self {
        let entries = vec![("white".to_string(), [235, 210, 190]), ("black".to_string(), [90, 60, 45])];
        Self::new(PaletteKind::Skin, entries, HAIR_OTHER_DISTANCE).expect("built-in palette is valid")
    }

    pub fn hair() -> Self {
        Self::hair_with_threshold(HAIR_OTHER_DISTANCE)
    }

    pub fn hair_with_threshold(other_distance: f64) -> Self {
        let entries = vec![
            ("black".to_string(), [25, 20, 20]),
            ("brown".to_string(), [110, 70, 40]),
            ("blond".to_string(), [225, 195, 120]),
            ("red".to_string(), [170, 50, 30]),
        ];
        Self::new(PaletteKind::Hair, entries, other_distance).expect("built-in palette is valid")
    }

    pub fn kind(&self) -> PaletteKind {
        self.kind
    }

    pub fn entries(&self) -> &[(String, Rgb)] {
        &self.entries
    }

    pub fn anchor(&self, name: &str) -> Option<Rgb> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, c)| *c)
    }

    /// Every name a lookup can return, including the fallback.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str()).chain(self.fallback.iter().map(|(n, _)| n.as_str()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names().any(|n| n == name)
    }

    pub fn parse(text: &str, hair_other_distance: f64) -> Result<Self, PaletteError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let (n, header) = lines.next().ok_or(PaletteError::Parse { line: 1, message: "empty palette".into() })?;
        let kind = header
            .strip_prefix(PALETTE_HEADER)
            .map(str::trim)
            .ok_or_else(|| PaletteError::Parse { line: n, message: format!("expected `{PALETTE_HEADER} <kind>`") })?
            .parse::<PaletteKind>()?;
        let mut entries = Vec::new();
        for (n, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(PaletteError::Parse { line: n, message: "expected `name r g b`".into() });
            }
            let ch = |s: &str| s.parse::<u8>().map_err(|_| PaletteError::Parse { line: n, message: format!("bad channel `{s}`") });
            entries.push((f[0].to_string(), [ch(f[1])?, ch(f[2])?, ch(f[3])?]));
        }
        Self::new(kind, entries, hair_other_distance)
    }

    pub fn load(path: &Path, hair_other_distance: f64) -> Result<Self, PaletteError> {
        Self::parse(&std::fs::read_to_string(path)?, hair_other_distance)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{PALETTE_HEADER} {}\n", self.kind);
        for (name, [r, g, b]) in &self.entries {
            out.push_str(&format!("{name} {r} {g} {b}\n"));
        }
        out
    }
}

/// Name of the anchor nearest to `centroid` (Euclidean RGB distance, ties to
/// the earlier entry). Falls back to `other` on the hair palette when every
/// anchor is too far away.
pub fn name_color<T: Real>(centroid: [T; 3], dictionary: &ColorDictionary) -> &str {
    let mut best: Option<(&str, f64)> = None;
    for (name, anchor) in &dictionary.entries {
        let d2: f64 = (0..3)
            .map(|c| {
                let d = centroid[c].to_f64_lossy() - f64::from(anchor[c]);
                d * d
            })
            .sum();
        if best.is_none_or(|(_, b)| d2 < b) {
            best = Some((name, d2));
        }
    }
    let (name, d2) = best.expect("dictionaries are never empty");
    match &dictionary.fallback {
        Some((other, limit)) if d2.sqrt() > *limit => other,
        _ => name,
    }
}

/// The three palettes the fog uses, selected by body section.
#[derive(Debug, Clone, PartialEq)]
pub struct PaletteSet {
    pub clothing: ColorDictionary,
    pub skin: ColorDictionary,
    pub hair: ColorDictionary,
}

impl Default for PaletteSet {
    fn default() -> Self {
        Self { clothing: ColorDictionary::clothing24(), skin: ColorDictionary::skin(), hair: ColorDictionary::hair() }
    }
}

impl PaletteSet {
    pub fn for_section(&self, section: Section) -> &ColorDictionary {
        match section {
            Section::Torso | Section::LeftLeg | Section::RightLeg => &self.clothing,
            Section::Face => &self.skin,
            Section::Hair => &self.hair,
        }
    }
}
