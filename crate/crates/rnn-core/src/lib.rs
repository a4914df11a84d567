//! Subject networks: multi-layer LSTMs with an output projection, the
//! canonical named-weight record, hidden-neuron permutation machinery,
//! and both a fast inference path and a tape graph for training.

pub mod forward;
pub mod graph;
pub mod permute;
pub mod weights;

pub use forward::{lstm_forward, lstm_step, HiddenState, TokenLstm};
pub use graph::{build_graph, load_weights, teacher_forced_nll, LstmGraph, LstmLeaves};
pub use permute::{
    apply_permutation, corrupt_permutation, PermGroup, PermutationSpec, ALL_GROUPS,
};
pub use weights::{LayerWeights, LstmDims, LstmWeights, RnnError, GATES, GATE_NAMES};
