//! Permutation-equivariant weight-space layers for LSTMs.
//!
//! Each weight group of the subject becomes a feature map `[C, P]`
//! (channels x flattened positions; the four gates initialize the
//! channels). A layer updates every group as a sum of channel-mixed
//! terms, each term a reduction of some group broadcast back along an
//! axis that transforms identically under hidden-neuron permutation:
//!
//! * global sums over every group (per source, per target);
//! * row-direction features of layer `l` (indexed by that layer's
//!   hidden axis): row sums of `W_ih^l` and `W_hh^l`, column sums of
//!   `W_hh^l`, column sums of the next layer's `W_ih` (the output
//!   projection after the last layer), and both bias vectors;
//! * column-direction features of `W_ih^l` (indexed by the previous
//!   layer's hidden axis): its own column sums plus the row-direction
//!   features of layer `l-1`; the first layer's input axis is fixed,
//!   so only its own column sums apply;
//! * a passthrough term per group.
//!
//! Every term's free index transforms like the output position it is
//! broadcast to; the equivariance test verifies this end to end for
//! random parameters and permutations. Reductions broadcast back via
//! constant 0/1 matrices so the whole layer stays inside the
//! differentiable op set.

use std::collections::HashMap;

use numkit::{NumError, Real, RngStream, Tape, Tensor, TensorId};
use rnn_core::{LstmDims, LstmWeights, PermutationSpec, GATES};

use crate::mlp::MlpDef;
use crate::params::{ParamIds, ParamSet};
use crate::EncoderArch;

/// Feature maps per subject weight group, each `[C, positions]`
/// (row-major positions).
pub struct DwsFeatureMap {
    pub channels: usize,
    pub w_ih: Vec<TensorId>,
    pub w_hh: Vec<TensorId>,
    pub b_ih: Vec<TensorId>,
    pub b_hh: Vec<TensorId>,
    pub w_out: TensorId,
    pub b_out: TensorId,
}

/// Addressing for position-permutation helpers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DwsGroup {
    WIh(usize),
    WHh(usize),
    BIh(usize),
    BHh(usize),
    WOut,
    BOut,
}

/// Constant 0/1 structural matrices, cached per shape within one
/// encode call.
struct Structurals {
    cache: HashMap<(u8, usize, usize), TensorId>,
}

impl Structurals {
    fn new() -> Self {
        Self {
            cache: HashMap::new(),
        }
    }

    /// `[R*C, R]`: sums positions over the column index.
    fn row_sum<T: Real>(&mut self, tape: &mut Tape<T>, r: usize, c: usize) -> TensorId {
        *self.cache.entry((0, r, c)).or_insert_with(|| {
            let mut t = Tensor::zeros(&[r * c, r]);
            for i in 0..r {
                for j in 0..c {
                    t.data_mut()[(i * c + j) * r + i] = T::ONE;
                }
            }
            tape.constant(t)
        })
    }

    /// `[R*C, C]`: sums positions over the row index.
    fn col_sum<T: Real>(&mut self, tape: &mut Tape<T>, r: usize, c: usize) -> TensorId {
        *self.cache.entry((1, r, c)).or_insert_with(|| {
            let mut t = Tensor::zeros(&[r * c, c]);
            for i in 0..r {
                for j in 0..c {
                    t.data_mut()[(i * c + j) * c + j] = T::ONE;
                }
            }
            tape.constant(t)
        })
    }

    /// `[R, R*C]`: broadcasts a row-indexed feature over the columns.
    fn row_bcast<T: Real>(&mut self, tape: &mut Tape<T>, r: usize, c: usize) -> TensorId {
        *self.cache.entry((2, r, c)).or_insert_with(|| {
            let mut t = Tensor::zeros(&[r, r * c]);
            for i in 0..r {
                for j in 0..c {
                    t.data_mut()[i * (r * c) + i * c + j] = T::ONE;
                }
            }
            tape.constant(t)
        })
    }

    /// `[C, R*C]`: broadcasts a column-indexed feature over the rows.
    fn col_bcast<T: Real>(&mut self, tape: &mut Tape<T>, r: usize, c: usize) -> TensorId {
        *self.cache.entry((3, r, c)).or_insert_with(|| {
            let mut t = Tensor::zeros(&[c, r * c]);
            for i in 0..r {
                for j in 0..c {
                    t.data_mut()[j * (r * c) + i * c + j] = T::ONE;
                }
            }
            tape.constant(t)
        })
    }

    /// `[P, 1]` of ones.
    fn ones_col<T: Real>(&mut self, tape: &mut Tape<T>, p: usize) -> TensorId {
        *self
            .cache
            .entry((4, p, 0))
            .or_insert_with(|| tape.constant(Tensor::full(&[p, 1], T::ONE)))
    }

    /// `[1, P]` of ones.
    fn ones_row<T: Real>(&mut self, tape: &mut Tape<T>, p: usize) -> TensorId {
        *self
            .cache
            .entry((5, p, 0))
            .or_insert_with(|| tape.constant(Tensor::full(&[1, p], T::ONE)))
    }
}

fn group_cols(dims: LstmDims, group: DwsGroup) -> (usize, usize) {
    match group {
        DwsGroup::WIh(l) => (dims.hidden, dims.layer_input(l)),
        DwsGroup::WHh(_) => (dims.hidden, dims.hidden),
        DwsGroup::BIh(_) | DwsGroup::BHh(_) => (1, dims.hidden),
        DwsGroup::WOut => (dims.output, dims.hidden),
        DwsGroup::BOut => (1, dims.output),
    }
}

fn positions(dims: LstmDims, group: DwsGroup) -> usize {
    let (r, c) = group_cols(dims, group);
    r * c
}

/// Number of global-sum features: one per group.
fn global_count(dims: LstmDims) -> usize {
    4 * dims.layers + 2
}

const J_FEATURES: usize = 6;
const Y_FEATURES: usize = 2;

fn k_feature_count(l: usize) -> usize {
    if l == 0 {
        1
    } else {
        J_FEATURES
    }
}

fn group_names(dims: LstmDims) -> Vec<(String, DwsGroup)> {
    let mut out = Vec::new();
    for l in 0..dims.layers {
        out.push((format!("wih{l}"), DwsGroup::WIh(l)));
        out.push((format!("whh{l}"), DwsGroup::WHh(l)));
        out.push((format!("bih{l}"), DwsGroup::BIh(l)));
        out.push((format!("bhh{l}"), DwsGroup::BHh(l)));
    }
    out.push(("wout".into(), DwsGroup::WOut));
    out.push(("bout".into(), DwsGroup::BOut));
    out
}

/// Mixing-parameter names for one target group in one layer.
fn target_mix_names(dims: LstmDims, layer_prefix: &str, name: &str, group: DwsGroup) -> Vec<String> {
    let mut out = vec![format!("{layer_prefix}.{name}.pass")];
    for g in 0..global_count(dims) {
        out.push(format!("{layer_prefix}.{name}.g{g}"));
    }
    match group {
        DwsGroup::WIh(l) => {
            for i in 0..J_FEATURES {
                out.push(format!("{layer_prefix}.{name}.j{i}"));
            }
            for i in 0..k_feature_count(l) {
                out.push(format!("{layer_prefix}.{name}.k{i}"));
            }
        }
        DwsGroup::WHh(_) => {
            for i in 0..J_FEATURES {
                out.push(format!("{layer_prefix}.{name}.j{i}"));
            }
            for i in 0..J_FEATURES {
                out.push(format!("{layer_prefix}.{name}.jc{i}"));
            }
        }
        DwsGroup::BIh(_) | DwsGroup::BHh(_) => {
            for i in 0..J_FEATURES {
                out.push(format!("{layer_prefix}.{name}.j{i}"));
            }
        }
        DwsGroup::WOut => {
            for i in 0..J_FEATURES {
                out.push(format!("{layer_prefix}.{name}.h{i}"));
            }
            for i in 0..Y_FEATURES {
                out.push(format!("{layer_prefix}.{name}.y{i}"));
            }
        }
        DwsGroup::BOut => {
            for i in 0..Y_FEATURES {
                out.push(format!("{layer_prefix}.{name}.y{i}"));
            }
        }
    }
    out
}

pub fn init<T: Real>(
    dims: LstmDims,
    arch: &EncoderArch,
    params: &mut ParamSet<T>,
    rng: &mut RngStream,
) {
    let c = arch.dws_channels;
    // Lift: gate channels (or the single out-head channel) to C.
    for (name, group) in group_names(dims) {
        let in_ch = match group {
            DwsGroup::WOut | DwsGroup::BOut => 1,
            _ => GATES,
        };
        params.push_uniform(
            format!("dws.lift.{name}"),
            &[c, in_ch],
            1.0 / (in_ch as f64).sqrt(),
            rng,
        );
    }
    for t in 0..arch.dws_layers {
        let prefix = format!("dws{t}");
        for (name, group) in group_names(dims) {
            let mixes = target_mix_names(dims, &prefix, &name, group);
            let bound = (1.0 / (c as f64 * mixes.len() as f64)).sqrt();
            for m in mixes {
                params.push_uniform(m, &[c, c], bound, rng);
            }
            params.push_zeros(format!("{prefix}.{name}.bias"), &[c, 1]);
        }
    }
    let head_in = c * global_count(dims);
    MlpDef::new("dws.head", vec![head_in, arch.dws_head_hidden, arch.z_dim]).init(params, rng);
}

/// Lift subject weights into gate-channel feature maps and mix to the
/// working channel count.
pub fn lift_subject<T: Real>(
    tape: &mut Tape<T>,
    ids: &ParamIds,
    subject: &LstmWeights<T>,
) -> Result<DwsFeatureMap, NumError> {
    let channels = tape.value(ids.get("dws.lift.wih0")).shape()[0];

    let gate_stack = |tensors: &[Tensor<T>; GATES]| -> Tensor<T> {
        let p = tensors[0].len();
        let mut data = Vec::with_capacity(GATES * p);
        for t in tensors {
            data.extend_from_slice(t.data());
        }
        Tensor::new(vec![GATES, p], data).expect("gate stack")
    };

    let mut w_ih = Vec::new();
    let mut w_hh = Vec::new();
    let mut b_ih = Vec::new();
    let mut b_hh = Vec::new();
    for (l, layer) in subject.layers.iter().enumerate() {
        for (vec, name, raw) in [
            (&mut w_ih, "wih", gate_stack(&layer.w_ih)),
            (&mut w_hh, "whh", gate_stack(&layer.w_hh)),
            (&mut b_ih, "bih", gate_stack(&layer.b_ih)),
            (&mut b_hh, "bhh", gate_stack(&layer.b_hh)),
        ] {
            let raw = tape.constant(raw);
            let lift = ids.get(&format!("dws.lift.{name}{l}"));
            vec.push(tape.matmul(lift, raw)?);
        }
    }
    let p_out = subject.w_out.len();
    let raw = tape.constant(Tensor::new(vec![1, p_out], subject.w_out.data().to_vec())?);
    let w_out = tape.matmul(ids.get("dws.lift.wout"), raw)?;
    let p_bout = subject.b_out.len();
    let raw = tape.constant(Tensor::new(vec![1, p_bout], subject.b_out.data().to_vec())?);
    let b_out = tape.matmul(ids.get("dws.lift.bout"), raw)?;

    Ok(DwsFeatureMap {
        channels,
        w_ih,
        w_hh,
        b_ih,
        b_hh,
        w_out,
        b_out,
    })
}

struct LayerFeatures {
    /// `[C, 1]` per group.
    global: Vec<TensorId>,
    /// Per layer: the six row-direction features, each `[C, H]`.
    j_feats: Vec<Vec<TensorId>>,
    /// `[C, Y]` output-axis features.
    y_feats: Vec<TensorId>,
}

fn compute_features<T: Real>(
    tape: &mut Tape<T>,
    fm: &DwsFeatureMap,
    dims: LstmDims,
    st: &mut Structurals,
) -> Result<LayerFeatures, NumError> {
    let h = dims.hidden;
    let last = dims.layers - 1;

    let mut global = Vec::new();
    for l in 0..dims.layers {
        for id in [fm.w_ih[l], fm.w_hh[l], fm.b_ih[l], fm.b_hh[l]] {
            let p = tape.value(id).shape()[1];
            let ones = st.ones_col(tape, p);
            global.push(tape.matmul(id, ones)?);
        }
    }
    for id in [fm.w_out, fm.b_out] {
        let p = tape.value(id).shape()[1];
        let ones = st.ones_col(tape, p);
        global.push(tape.matmul(id, ones)?);
    }

    let mut j_feats = Vec::with_capacity(dims.layers);
    for l in 0..dims.layers {
        let d = dims.layer_input(l);
        let rs_ih = st.row_sum(tape, h, d);
        let rs_hh = st.row_sum(tape, h, h);
        let cs_hh = st.col_sum(tape, h, h);
        let f0 = tape.matmul(fm.w_ih[l], rs_ih)?;
        let f1 = tape.matmul(fm.w_hh[l], rs_hh)?;
        let f2 = tape.matmul(fm.w_hh[l], cs_hh)?;
        let f3 = if l < last {
            let cs_next = st.col_sum(tape, h, h);
            tape.matmul(fm.w_ih[l + 1], cs_next)?
        } else {
            let cs_out = st.col_sum(tape, dims.output, h);
            tape.matmul(fm.w_out, cs_out)?
        };
        j_feats.push(vec![f0, f1, f2, f3, fm.b_ih[l], fm.b_hh[l]]);
    }

    let rs_out = st.row_sum(tape, dims.output, h);
    let y0 = tape.matmul(fm.w_out, rs_out)?;
    let y_feats = vec![y0, fm.b_out];

    Ok(LayerFeatures {
        global,
        j_feats,
        y_feats,
    })
}

fn mix_sum<T: Real>(
    tape: &mut Tape<T>,
    ids: &ParamIds,
    names: &[String],
    feats: &[TensorId],
) -> Result<Option<TensorId>, NumError> {
    let mut acc: Option<TensorId> = None;
    for (name, &feat) in names.iter().zip(feats.iter()) {
        let mixed = tape.matmul(ids.get(name), feat)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, mixed)?,
            None => mixed,
        });
    }
    Ok(acc)
}

/// One equivariant layer: every group updated from the shared feature
/// set. Linear (no activation); zero parameters except an identity
/// passthrough reproduce the input exactly.
pub fn dws_layer<T: Real>(
    tape: &mut Tape<T>,
    ids: &ParamIds,
    layer_prefix: &str,
    fm: &DwsFeatureMap,
    dims: LstmDims,
) -> Result<DwsFeatureMap, NumError> {
    let mut st = Structurals::new();
    let feats = compute_features(tape, fm, dims, &mut st)?;
    let h = dims.hidden;

    let glob_names = |name: &str| -> Vec<String> {
        (0..global_count(dims))
            .map(|g| format!("{layer_prefix}.{name}.g{g}"))
            .collect()
    };
    let idx_names = |name: &str, tag: &str, count: usize| -> Vec<String> {
        (0..count)
            .map(|i| format!("{layer_prefix}.{name}.{tag}{i}"))
            .collect()
    };

    let mut update_target = |tape: &mut Tape<T>,
                             name: &str,
                             group: DwsGroup,
                             input: TensorId|
     -> Result<TensorId, NumError> {
        let (rows, cols) = group_cols(dims, group);
        let p = positions(dims, group);

        // Passthrough.
        let pass = ids.get(&format!("{layer_prefix}.{name}.pass"));
        let mut acc = tape.matmul(pass, input)?;

        // Global terms fold into the per-channel bias.
        let bias = ids.get(&format!("{layer_prefix}.{name}.bias"));
        let gsum = mix_sum(tape, ids, &glob_names(name), &feats.global)?.expect("globals");
        let base = tape.add(gsum, bias)?;
        let ones = st.ones_row(tape, p);
        let base_term = tape.matmul(base, ones)?;
        acc = tape.add(acc, base_term)?;

        match group {
            DwsGroup::WIh(l) => {
                let jmix = mix_sum(
                    tape,
                    ids,
                    &idx_names(name, "j", J_FEATURES),
                    &feats.j_feats[l],
                )?
                .expect("j");
                let bcast = st.row_bcast(tape, rows, cols);
                let term = tape.matmul(jmix, bcast)?;
                acc = tape.add(acc, term)?;

                // Column-direction features are indexed by the previous
                // layer's hidden axis, which is exactly that layer's
                // row-direction feature set (its next-layer column sums
                // are this group's own column sums). The first layer's
                // input axis is fixed, so only its own column sums apply.
                let kfeats: Vec<TensorId> = if l == 0 {
                    let cs = st.col_sum(tape, h, cols);
                    vec![tape.matmul(fm.w_ih[0], cs)?]
                } else {
                    feats.j_feats[l - 1].clone()
                };
                let kmix = mix_sum(
                    tape,
                    ids,
                    &idx_names(name, "k", k_feature_count(l)),
                    &kfeats,
                )?
                .expect("k");
                let bcast = st.col_bcast(tape, rows, cols);
                let term = tape.matmul(kmix, bcast)?;
                acc = tape.add(acc, term)?;
            }
            DwsGroup::WHh(l) => {
                let jmix = mix_sum(
                    tape,
                    ids,
                    &idx_names(name, "j", J_FEATURES),
                    &feats.j_feats[l],
                )?
                .expect("j");
                let bcast = st.row_bcast(tape, rows, cols);
                let term = tape.matmul(jmix, bcast)?;
                acc = tape.add(acc, term)?;

                let cmix = mix_sum(
                    tape,
                    ids,
                    &idx_names(name, "jc", J_FEATURES),
                    &feats.j_feats[l],
                )?
                .expect("jc");
                let bcast = st.col_bcast(tape, rows, cols);
                let term = tape.matmul(cmix, bcast)?;
                acc = tape.add(acc, term)?;
            }
            DwsGroup::BIh(l) | DwsGroup::BHh(l) => {
                let jmix = mix_sum(
                    tape,
                    ids,
                    &idx_names(name, "j", J_FEATURES),
                    &feats.j_feats[l],
                )?
                .expect("j");
                acc = tape.add(acc, jmix)?;
            }
            DwsGroup::WOut => {
                let hmix = mix_sum(
                    tape,
                    ids,
                    &idx_names(name, "h", J_FEATURES),
                    &feats.j_feats[dims.layers - 1],
                )?
                .expect("h");
                let bcast = st.col_bcast(tape, rows, cols);
                let term = tape.matmul(hmix, bcast)?;
                acc = tape.add(acc, term)?;

                let ymix = mix_sum(tape, ids, &idx_names(name, "y", Y_FEATURES), &feats.y_feats)?
                    .expect("y");
                let bcast = st.row_bcast(tape, rows, cols);
                let term = tape.matmul(ymix, bcast)?;
                acc = tape.add(acc, term)?;
            }
            DwsGroup::BOut => {
                let ymix = mix_sum(tape, ids, &idx_names(name, "y", Y_FEATURES), &feats.y_feats)?
                    .expect("y");
                acc = tape.add(acc, ymix)?;
            }
        }
        Ok(acc)
    };

    let mut w_ih = Vec::new();
    let mut w_hh = Vec::new();
    let mut b_ih = Vec::new();
    let mut b_hh = Vec::new();
    for l in 0..dims.layers {
        w_ih.push(update_target(tape, &format!("wih{l}"), DwsGroup::WIh(l), fm.w_ih[l])?);
        w_hh.push(update_target(tape, &format!("whh{l}"), DwsGroup::WHh(l), fm.w_hh[l])?);
        b_ih.push(update_target(tape, &format!("bih{l}"), DwsGroup::BIh(l), fm.b_ih[l])?);
        b_hh.push(update_target(tape, &format!("bhh{l}"), DwsGroup::BHh(l), fm.b_hh[l])?);
    }
    let w_out = update_target(tape, "wout", DwsGroup::WOut, fm.w_out)?;
    let b_out = update_target(tape, "bout", DwsGroup::BOut, fm.b_out)?;

    Ok(DwsFeatureMap {
        channels: fm.channels,
        w_ih,
        w_hh,
        b_ih,
        b_hh,
        w_out,
        b_out,
    })
}

fn relu_map<T: Real>(tape: &mut Tape<T>, fm: DwsFeatureMap) -> DwsFeatureMap {
    DwsFeatureMap {
        channels: fm.channels,
        w_ih: fm.w_ih.into_iter().map(|id| tape.relu(id)).collect(),
        w_hh: fm.w_hh.into_iter().map(|id| tape.relu(id)).collect(),
        b_ih: fm.b_ih.into_iter().map(|id| tape.relu(id)).collect(),
        b_hh: fm.b_hh.into_iter().map(|id| tape.relu(id)).collect(),
        w_out: tape.relu(fm.w_out),
        b_out: tape.relu(fm.b_out),
    }
}

pub fn encode<T: Real>(
    tape: &mut Tape<T>,
    ids: &ParamIds,
    subject: &LstmWeights<T>,
    arch: &EncoderArch,
) -> Result<TensorId, NumError> {
    let dims = subject.dims;
    let mut fm = lift_subject(tape, ids, subject)?;
    for t in 0..arch.dws_layers {
        fm = dws_layer(tape, ids, &format!("dws{t}"), &fm, dims)?;
        if t + 1 < arch.dws_layers {
            fm = relu_map(tape, fm);
        }
    }

    // Invariant pooling: mean over positions per group.
    let mut st = Structurals::new();
    let mut pooled = Vec::new();
    let group_ids: Vec<TensorId> = (0..dims.layers)
        .flat_map(|l| vec![fm.w_ih[l], fm.w_hh[l], fm.b_ih[l], fm.b_hh[l]])
        .chain([fm.w_out, fm.b_out])
        .collect();
    for id in group_ids {
        let p = tape.value(id).shape()[1];
        let ones = st.ones_col(tape, p);
        let sum = tape.matmul(id, ones)?;
        let mean = tape.scale(sum, T::from_f64(1.0 / p as f64));
        pooled.push(tape.transpose(mean)?);
    }
    let features = tape.concat_last_dim(&pooled)?;
    let head_in = tape.value(features).shape()[1];
    let head = MlpDef::new(
        "dws.head",
        vec![head_in, arch.dws_head_hidden, arch.z_dim],
    );
    head.apply(tape, ids, features)
}

/// Apply the position action of a hidden-neuron permutation to a
/// feature-map value (validation helper for the equivariance oracle).
pub fn permute_positions<T: Real>(
    value: &Tensor<T>,
    group: DwsGroup,
    dims: LstmDims,
    perm: &PermutationSpec,
) -> Tensor<T> {
    let (rows, cols) = group_cols(dims, group);
    let channels = value.shape()[0];
    let p = rows * cols;
    assert_eq!(value.shape()[1], p, "position count mismatch");
    let identity: Vec<usize> = (0..rows.max(cols)).collect();
    let (row_perm, col_perm): (&[usize], &[usize]) = match group {
        DwsGroup::WIh(0) => (&perm.perms[0], &identity[..cols]),
        DwsGroup::WIh(l) => (&perm.perms[l], &perm.perms[l - 1]),
        DwsGroup::WHh(l) => (&perm.perms[l], &perm.perms[l]),
        DwsGroup::BIh(l) | DwsGroup::BHh(l) => (&identity[..1], &perm.perms[l]),
        DwsGroup::WOut => (&identity[..rows], &perm.perms[dims.layers - 1]),
        DwsGroup::BOut => (&identity[..1], &identity[..cols]),
    };

    let mut out = Tensor::zeros(value.shape());
    for ch in 0..channels {
        for r in 0..rows {
            for c in 0..cols {
                let src = row_perm[r] * cols + col_perm[c];
                out.data_mut()[ch * p + r * cols + c] = value.data()[ch * p + src];
            }
        }
    }
    out
}
