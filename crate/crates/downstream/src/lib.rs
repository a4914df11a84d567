//! Downstream analysis: property prediction from frozen
//! representations, supervised end-to-end baselines, the permutation
//! invariance grid, and embedding-space export with PCA.

pub mod export;
pub mod invariance;
pub mod pca;
pub mod predictor;

pub use export::{cluster_separation, export_embeddings, EmbeddingRow};
pub use invariance::{invariance_grid, GridColumn, InvarianceGrid};
pub use pca::{pca_project, PcaResult};
pub use predictor::{
    collect_examples, predictor_group, train_property_predictor, train_supervised_baseline,
    DownstreamError, EvalGroup, PredictorConfig, PropertyExample, PropertyMetrics, TargetKind,
};
