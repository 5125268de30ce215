//! Audio decoding, dataset manifests, stratified splitting and the feature store.

mod manifest;
mod split;
mod store;
mod wav;

pub use manifest::{load_manifest, parse_manifest, DatasetManifest, ManifestEntry};
pub use split::split_dataset;
pub use store::{load_features, save_features, FeatureStore, FEATURE_FORMAT_VERSION};
pub use wav::{read_wav, write_wav, AudioClip, WavEncoding};
