//! Deterministic synthetic scenes, the polynomial corruption sampler and
//! the dataset builder.

mod corruption;
mod dataset;
mod rng;
mod scene;

pub use corruption::{corrupt, sample_corruption, CorruptionSpec, MAX_SCALE_RAD};
pub use dataset::{
    build_dataset, synthesize_pair, DatasetConfig, DatasetManifest, ManifestRecord, Split,
    SyntheticPair, MANIFEST_FILE,
};
pub use rng::{derive_seed, splitmix64, Rng};
pub use scene::{gen_scene, SceneSpec, Texture};
