use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maps::DEFAULT_IGNORE_INDEX;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image_id: String,
    /// `(C, H, W)` float32 array, relative to the manifest's directory.
    pub prediction_path: PathBuf,
    /// `(H, W)` uint8 or uint16 array, relative to the manifest's directory.
    pub label_path: PathBuf,
}

fn default_schema_version() -> u32 {
    MANIFEST_SCHEMA_VERSION
}

fn default_ignore_index() -> u16 {
    DEFAULT_IGNORE_INDEX
}

/// Dataset description pairing predictions with labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub num_classes: usize,
    #[serde(default = "default_ignore_index")]
    pub ignore_index: u16,
    #[serde(default)]
    pub renormalize: bool,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative entry paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(Error::InvalidArgument)
    }

    fn check(&self) -> std::result::Result<(), String> {
        let fail = Err;
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return fail(format!(
                "unsupported manifest schema version {} (expected {MANIFEST_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.num_classes < 2 {
            return fail(format!(
                "num_classes must be at least 2, got {}",
                self.num_classes
            ));
        }
        if (self.ignore_index as usize) < self.num_classes {
            return fail(format!(
                "ignore_index {} collides with a class index (num_classes = {})",
                self.ignore_index, self.num_classes
            ));
        }
        if self.entries.is_empty() {
            return fail("manifest has no entries".into());
        }
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if let Some(first) = seen.insert(&e.image_id, i) {
                return fail(format!(
                    "duplicate image_id {:?}: entry {first} ({:?}) and entry {i} ({:?})",
                    e.image_id, self.entries[first].image_id, e.image_id
                ));
            }
        }
        Ok(())
    }

    pub fn prediction_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.prediction_path)
    }

    pub fn label_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.base_dir.join(&entry.label_path)
    }

    /// Writes the manifest as pretty JSON.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text =
            serde_json::to_string_pretty(self).map_err(|e| Error::Consistency(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Loads and validates a manifest; entry paths resolve against its directory.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::load(path, format!("invalid manifest: {e}")))?;
    manifest.check().map_err(|m| Error::load(path, m))?;
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(manifest)
}
