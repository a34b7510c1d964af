use std::collections::BTreeMap;

use crate::regions::Section;

const LEGS: &[Section] = &[Section::LeftLeg, Section::RightLeg];

/// Maps garment words to the body sections they describe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarmentVocabulary {
    words: BTreeMap<String, Vec<Section>>,
}

impl Default for GarmentVocabulary {
    fn default() -> Self {
        let mut v = Self { words: BTreeMap::new() };
        for w in ["shirt", "t-shirt", "top", "jacket"] {
            v.insert(w, &[Section::Torso]);
        }
        for w in ["jeans", "pants", "trousers"] {
            v.insert(w, LEGS);
        }
        for w in ["hat", "hair"] {
            v.insert(w, &[Section::Hair]);
        }
        for w in ["face", "skin"] {
            v.insert(w, &[Section::Face]);
        }
        // Section names are always accepted so any clause list can be written down.
        for s in Section::ALL {
            v.insert(s.name(), &[s]);
        }
        v
    }
}

impl GarmentVocabulary {
    pub fn empty() -> Self {
        Self { words: BTreeMap::new() }
    }

    /// Adds or replaces a garment word (stored lowercase).
    pub fn insert(&mut self, word: &str, sections: &[Section]) {
        self.words.insert(word.to_lowercase(), sections.to_vec());
    }

    pub fn sections(&self, word: &str) -> Option<&[Section]> {
        self.words.get(&word.to_lowercase()).map(Vec::as_slice).filter(|s| !s.is_empty())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.words.keys().map(String::as_str)
    }
}
