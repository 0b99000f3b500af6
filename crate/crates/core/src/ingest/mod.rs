//! Reading prediction/label pairs from disk.

mod manifest;
mod npy;

pub use manifest::{read_manifest, Manifest, ManifestEntry, MANIFEST_SCHEMA_VERSION};
pub use npy::{
    load_entropy_map, load_label_map, load_probability_map, write_entropy_map, write_label_map,
    write_probability_map,
};
