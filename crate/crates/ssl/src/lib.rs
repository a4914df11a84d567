//! Emulation-based self-supervised training: an encoder and a
//! conditional emulator are trained jointly so that the emulator,
//! conditioned on a subject's representation, reproduces that subject's
//! rollout distributions. Mode-seeking reverse KL is the behavioral
//! distance.

pub mod emulator;
pub mod eval;
pub mod kl;
pub mod train;

pub use emulator::{EmulatorModel, EmulatorWeights};
pub use eval::{evaluate_emulation, pearson, EmulationPoint};
pub use kl::reverse_kl;
pub use train::{load_split_dataset, ssl_train, SslConfig, SslDataset, SslError, SslItem, SslRun};
