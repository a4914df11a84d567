//! The Formal Languages model zoo: trains populations of subject LSTMs
//! on randomly drawn languages, checkpoints weights and rollouts with
//! metadata, and serves them back for representation learning.

pub mod build;
pub mod config;
pub mod files;
pub mod split;
pub mod train;

pub use build::{build_zoo, load_zoo, CheckpointMeta, LoadedZoo, ZooManifest, ZooRecord};
pub use config::ZooConfig;
pub use files::{read_rollouts, write_rollouts};
pub use split::{assign_split, desk_language_pool, ood_half_a, Split};
pub use train::{train_model, TrainedCheckpoint, ZooError};
