//! Hidden-neuron permutations: the complete (function-preserving) form
//! and the incomplete corruptions used to probe encoder invariance.
//!
//! A complete permutation of layer `l` applies one bijection to all six
//! weight groups touching that layer's hidden axis: rows of the four
//! input-to-hidden matrices, rows of the four hidden-to-hidden
//! matrices, both bias vector groups, columns of the next layer's
//! input-to-hidden matrices (the output projection for the last
//! layer), and columns of the hidden-to-hidden matrices. Applying any
//! proper subset generally changes the computed function.

use numkit::{Real, RngStream, Tensor};

use crate::weights::{LstmWeights, RnnError, GATES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PermGroup {
    IhRows,
    HhRows,
    IhBias,
    HhBias,
    NextIhCols,
    HhCols,
}

pub const ALL_GROUPS: [PermGroup; 6] = [
    PermGroup::IhRows,
    PermGroup::HhRows,
    PermGroup::IhBias,
    PermGroup::HhBias,
    PermGroup::NextIhCols,
    PermGroup::HhCols,
];

impl PermGroup {
    pub fn label(&self) -> &'static str {
        match self {
            PermGroup::IhRows => "ih_rows",
            PermGroup::HhRows => "hh_rows",
            PermGroup::IhBias => "ih_bias",
            PermGroup::HhBias => "hh_bias",
            PermGroup::NextIhCols => "next_ih_cols",
            PermGroup::HhCols => "hh_cols",
        }
    }
}

/// One bijection per layer, in gather convention: entry `j` names the
/// source index that lands at position `j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationSpec {
    pub perms: Vec<Vec<usize>>,
}

impl PermutationSpec {
    pub fn identity(layers: usize, hidden: usize) -> Self {
        Self {
            perms: vec![(0..hidden).collect(); layers],
        }
    }

    pub fn random(layers: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let perms = (0..layers)
            .map(|_| {
                let mut p: Vec<usize> = (0..hidden).collect();
                rng.shuffle(&mut p);
                p
            })
            .collect();
        Self { perms }
    }

    pub fn validate(&self, layers: usize, hidden: usize) -> Result<(), RnnError> {
        if self.perms.len() != layers {
            return Err(RnnError::BadPermutation {
                detail: format!("{} per-layer entries, expected {layers}", self.perms.len()),
            });
        }
        for (l, p) in self.perms.iter().enumerate() {
            let mut seen = vec![false; hidden];
            if p.len() != hidden {
                return Err(RnnError::BadPermutation {
                    detail: format!("layer {l}: length {} vs hidden {hidden}", p.len()),
                });
            }
            for &idx in p {
                if idx >= hidden || seen[idx] {
                    return Err(RnnError::BadPermutation {
                        detail: format!("layer {l}: not a bijection"),
                    });
                }
                seen[idx] = true;
            }
        }
        Ok(())
    }

    /// `apply(apply(w, self), then)` equals `apply(w, self.compose(then))`.
    pub fn compose(&self, then: &PermutationSpec) -> PermutationSpec {
        let perms = self
            .perms
            .iter()
            .zip(then.perms.iter())
            .map(|(first, second)| second.iter().map(|&j| first[j]).collect())
            .collect();
        PermutationSpec { perms }
    }
}

fn gather_rows<T: Real>(t: &Tensor<T>, p: &[usize]) -> Tensor<T> {
    let cols = t.shape()[1];
    let mut out = Tensor::zeros(t.shape());
    for (j, &src) in p.iter().enumerate() {
        out.data_mut()[j * cols..(j + 1) * cols]
            .copy_from_slice(&t.data()[src * cols..(src + 1) * cols]);
    }
    out
}

fn gather_cols<T: Real>(t: &Tensor<T>, p: &[usize]) -> Tensor<T> {
    let (rows, cols) = (t.shape()[0], t.shape()[1]);
    let mut out = Tensor::zeros(t.shape());
    for r in 0..rows {
        for (j, &src) in p.iter().enumerate() {
            out.data_mut()[r * cols + j] = t.data()[r * cols + src];
        }
    }
    out
}

fn gather_vec<T: Real>(t: &Tensor<T>, p: &[usize]) -> Tensor<T> {
    let mut out = Tensor::zeros(t.shape());
    for (j, &src) in p.iter().enumerate() {
        out.data_mut()[j] = t.data()[src];
    }
    out
}

/// Apply `perm` to the listed weight groups only. Function behavior is
/// preserved exactly when `groups` covers all six.
pub fn corrupt_permutation<T: Real>(
    weights: &LstmWeights<T>,
    perm: &PermutationSpec,
    groups: &[PermGroup],
) -> Result<LstmWeights<T>, RnnError> {
    perm.validate(weights.dims.layers, weights.dims.hidden)?;
    let mut out = weights.clone();
    let last = weights.dims.layers - 1;

    for (l, p) in perm.perms.iter().enumerate() {
        for g in 0..GATES {
            if groups.contains(&PermGroup::IhRows) {
                out.layers[l].w_ih[g] = gather_rows(&out.layers[l].w_ih[g], p);
            }
            if groups.contains(&PermGroup::HhRows) {
                out.layers[l].w_hh[g] = gather_rows(&out.layers[l].w_hh[g], p);
            }
            if groups.contains(&PermGroup::IhBias) {
                out.layers[l].b_ih[g] = gather_vec(&out.layers[l].b_ih[g], p);
            }
            if groups.contains(&PermGroup::HhBias) {
                out.layers[l].b_hh[g] = gather_vec(&out.layers[l].b_hh[g], p);
            }
            if groups.contains(&PermGroup::HhCols) {
                out.layers[l].w_hh[g] = gather_cols(&out.layers[l].w_hh[g], p);
            }
            if groups.contains(&PermGroup::NextIhCols) {
                if l < last {
                    out.layers[l + 1].w_ih[g] = gather_cols(&out.layers[l + 1].w_ih[g], p);
                } else if g == 0 {
                    // The output projection reads the last layer's hidden
                    // axis once, not per gate.
                    out.w_out = gather_cols(&out.w_out, p);
                }
            }
        }
    }
    Ok(out)
}

/// The complete, function-preserving permutation (all six groups).
pub fn apply_permutation<T: Real>(
    weights: &LstmWeights<T>,
    perm: &PermutationSpec,
) -> Result<LstmWeights<T>, RnnError> {
    corrupt_permutation(weights, perm, &ALL_GROUPS)
}
