use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub clip_path: String,
    pub label: String,
}

/// Labelled clip list. `class_names` fixes the class index order used
/// everywhere downstream (score columns, confusion rows, fusion weights).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
}

impl DatasetManifest {
    /// Builds a manifest, deriving class order from first appearance.
    pub fn from_entries(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut class_names: Vec<String> = Vec::new();
        for e in &entries {
            if !class_names.contains(&e.label) {
                class_names.push(e.label.clone());
            }
        }
        Self::with_classes(entries, class_names)
    }

    /// Builds a manifest against an explicit class list (which may contain
    /// classes with no entries, as happens for a split subset).
    pub fn with_classes(entries: Vec<ManifestEntry>, class_names: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.clip_path.as_str()) {
                return Err(Error::invalid(format!("duplicate clip path {:?}", e.clip_path)));
            }
            if !class_names.contains(&e.label) {
                return Err(Error::invalid(format!("label {:?} not in class list", e.label)));
            }
        }
        Ok(DatasetManifest {
            entries,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == label)
    }

    /// Class index of every entry, in entry order.
    pub fn labels(&self) -> Vec<usize> {
        self.entries
            .iter()
            .map(|e| self.class_index(&e.label).expect("validated at construction"))
            .collect()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&e.clip_path);
            out.push('\t');
            out.push_str(&e.label);
            out.push('\n');
        }
        out
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, &path.display().to_string())
}

/// Parses `path<TAB>label` lines. Lines starting with `#` and blank lines are skipped.
pub fn parse_manifest(text: &str, origin: &str) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(err(format!("expected `path<TAB>label`, got {} field(s)", fields.len())));
        }
        if !seen.insert(fields[0].to_string()) {
            return Err(err(format!("duplicate clip path {:?}", fields[0])));
        }
        entries.push(ManifestEntry {
            clip_path: fields[0].to_string(),
            label: fields[1].to_string(),
        });
    }
    if entries.is_empty() {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: 0,
            message: "empty manifest".into(),
        });
    }
    DatasetManifest::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_order_is_first_appearance() {
        let m = parse_manifest("a.wav\tbus\nb.wav\tcar\n", "t").unwrap();
        assert_eq!(m.class_names, ["bus", "car"]);
        assert_eq!(m.len(), 2);

        let m = parse_manifest("a.wav\tcar\nb.wav\tbus\nc.wav\tcar\n", "t").unwrap();
        assert_eq!(m.class_names, ["car", "bus"]);
        assert_eq!(m.labels(), [0, 1, 0]);
    }

    #[test]
    fn comments_are_ignored() {
        let m = parse_manifest("# header\na.wav\tbus\n#b.wav\tcar\n", "t").unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn fifteen_scene_manifest() {
        let scenes = [
            "bus", "cafe/restaurant", "car", "city_center", "forest_path", "grocery_store", "home",
            "beach", "library", "metro_station", "office", "residential_area", "train", "tram",
            "park",
        ];
        let text: String = scenes
            .iter()
            .enumerate()
            .map(|(i, s)| format!("audio/{i}.wav\t{s}\n"))
            .collect();
        assert_eq!(parse_manifest(&text, "t").unwrap().n_classes(), 15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_manifest("", "t").is_err());
        assert!(parse_manifest("# only comments\n", "t").is_err());
        assert!(parse_manifest("a.wav bus\n", "t").is_err());
        assert!(parse_manifest("a.wav\tbus\textra\n", "t").is_err());
        let dup = parse_manifest("a.wav\tbus\na.wav\tcar\n", "t").unwrap_err();
        assert!(dup.to_string().contains("duplicate"), "{dup}");
    }

    #[test]
    fn tsv_round_trip() {
        let m = parse_manifest("x/a.wav\tbus\nx/b.wav\tcar\n", "t").unwrap();
        assert_eq!(parse_manifest(&m.to_tsv(), "t").unwrap(), m);
    }
}
