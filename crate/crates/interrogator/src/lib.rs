//! Function identification with exact interaction accounting.
//!
//! An interrogator knows a finite set `D` of pairwise-distinct total
//! functions over a declared probe domain and must identify which
//! member a black-box oracle is, counting every oracle interaction.
//! Non-interactive strategies fix all probes up front; interactive ones
//! choose each probe from previous answers. The language strategies
//! realize both sides of the exponential separation between the two.

pub mod language;
pub mod set;
pub mod transcript;
pub mod tree;

pub use language::{
    identify_language_interactive, noninteractive_language_probe_set, LanguageTranscript,
    NoninteractiveProbeSet,
};
pub use set::{
    constants_family, language_family, worstcase_family, FunctionSet, InterrogateError,
};
pub use transcript::Transcript;
pub use tree::{
    build_identification_tree, identify_by_single_probe, identify_interactive_tree,
    identify_noninteractive, IdentificationTree,
};
