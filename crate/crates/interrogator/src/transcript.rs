//! Audit trail of an identification run.

use serde::Serialize;

/// Ordered (probe, answer) pairs, the identified member index, and the
/// interaction count (always the number of recorded pairs).
#[derive(Clone, Debug, Serialize)]
pub struct Transcript<X, Y> {
    pub probes: Vec<(X, Y)>,
    /// `None` when the oracle's answers are inconsistent with every
    /// member (oracle outside the set).
    pub identified: Option<usize>,
}

impl<X, Y> Transcript<X, Y> {
    pub fn count(&self) -> usize {
        self.probes.len()
    }
}
