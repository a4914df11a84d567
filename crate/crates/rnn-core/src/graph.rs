//! Tape graph for the subject LSTM. Weight leaves are loaded per named
//! tensor; the per-layer gate matrices are then fused once into
//! `[D, 4H]` blocks so each time step costs two matmuls per layer.

use formal_lang::Token;
use numkit::{NumError, Real, Tape, Tensor, TensorId};

use crate::weights::{LstmDims, LstmWeights, GATES};

/// Probability floor added before logs in loss compositions.
pub const LOG_EPS: f64 = 1e-9;

/// Tape leaves for every named weight tensor, in canonical order.
pub struct LstmLeaves {
    pub dims: LstmDims,
    /// Per layer: `[w_ih x4, w_hh x4, b_ih x4, b_hh x4]`.
    pub per_layer: Vec<Vec<TensorId>>,
    pub w_out: TensorId,
    pub b_out: TensorId,
}

impl LstmLeaves {
    /// Leaf ids in flatten order (for optimizer gradient collection).
    pub fn ordered(&self) -> Vec<TensorId> {
        let mut out = Vec::new();
        for layer in &self.per_layer {
            out.extend_from_slice(layer);
        }
        out.push(self.w_out);
        out.push(self.b_out);
        out
    }
}

pub fn load_weights<T: Real>(
    tape: &mut Tape<T>,
    weights: &LstmWeights<T>,
    requires_grad: bool,
) -> LstmLeaves {
    let mut per_layer = Vec::with_capacity(weights.dims.layers);
    for layer in &weights.layers {
        let mut ids = Vec::with_capacity(4 * GATES);
        for group in [&layer.w_ih, &layer.w_hh] {
            for t in group.iter() {
                ids.push(tape.leaf(t.clone(), requires_grad));
            }
        }
        for group in [&layer.b_ih, &layer.b_hh] {
            for t in group.iter() {
                // Bias vectors participate in row-broadcast adds as rank-1
                // rows of width H.
                ids.push(tape.leaf(t.clone(), requires_grad));
            }
        }
        per_layer.push(ids);
    }
    let w_out = tape.leaf(weights.w_out.clone(), requires_grad);
    let b_out = tape.leaf(weights.b_out.clone(), requires_grad);
    LstmLeaves {
        dims: weights.dims,
        per_layer,
        w_out,
        b_out,
    }
}

/// Fused step-ready weight nodes: `wt_ih[l]: [D_l, 4H]`,
/// `wt_hh[l]: [H, 4H]`, `bias[l]: [4H]`, `wt_out: [H, Y]`.
pub struct LstmGraph {
    pub dims: LstmDims,
    wt_ih: Vec<TensorId>,
    wt_hh: Vec<TensorId>,
    bias: Vec<TensorId>,
    wt_out: TensorId,
    b_out: TensorId,
}

pub fn build_graph<T: Real>(tape: &mut Tape<T>, leaves: &LstmLeaves) -> Result<LstmGraph, NumError> {
    let dims = leaves.dims;
    let mut wt_ih = Vec::with_capacity(dims.layers);
    let mut wt_hh = Vec::with_capacity(dims.layers);
    let mut bias = Vec::with_capacity(dims.layers);

    for layer in &leaves.per_layer {
        let fuse = |tape: &mut Tape<T>, ids: &[TensorId]| -> Result<TensorId, NumError> {
            let transposed: Vec<TensorId> = ids
                .iter()
                .map(|&id| tape.transpose(id))
                .collect::<Result<_, _>>()?;
            tape.concat_last_dim(&transposed)
        };
        wt_ih.push(fuse(tape, &layer[0..4])?);
        wt_hh.push(fuse(tape, &layer[4..8])?);
        // b_ih + b_hh per gate, concatenated to a [4H] row.
        let b_ih = tape.concat_last_dim(&layer[8..12])?;
        let b_hh = tape.concat_last_dim(&layer[12..16])?;
        bias.push(tape.add(b_ih, b_hh)?);
    }

    let wt_out = tape.transpose(leaves.w_out)?;
    Ok(LstmGraph {
        dims,
        wt_ih,
        wt_hh,
        bias,
        wt_out,
        b_out: leaves.b_out,
    })
}

/// Per-layer `(h, c)` node pairs for a batch of size `batch`.
pub type GraphState = Vec<(TensorId, TensorId)>;

impl LstmGraph {
    pub fn init_state<T: Real>(&self, tape: &mut Tape<T>, batch: usize) -> GraphState {
        (0..self.dims.layers)
            .map(|_| {
                let h = tape.constant(Tensor::zeros(&[batch, self.dims.hidden]));
                let c = tape.constant(Tensor::zeros(&[batch, self.dims.hidden]));
                (h, c)
            })
            .collect()
    }

    /// One step over a `[B, X]` input. Returns output probabilities
    /// `[B, Y]` and updates the state nodes in place.
    pub fn step<T: Real>(
        &self,
        tape: &mut Tape<T>,
        x: TensorId,
        state: &mut GraphState,
    ) -> Result<TensorId, NumError> {
        let logits = self.step_logits(tape, x, state)?;
        tape.softmax_last_dim(logits)
    }

    /// Like [`LstmGraph::step`] but returning pre-softmax logits.
    pub fn step_logits<T: Real>(
        &self,
        tape: &mut Tape<T>,
        x: TensorId,
        state: &mut GraphState,
    ) -> Result<TensorId, NumError> {
        let hidden = self.step_hidden(tape, x, state)?;
        let proj = tape.matmul(hidden, self.wt_out)?;
        tape.add(proj, self.b_out)
    }

    /// Advance the recurrence one step and return the top layer's
    /// hidden state `[B, H]` without applying the output head.
    pub fn step_hidden<T: Real>(
        &self,
        tape: &mut Tape<T>,
        x: TensorId,
        state: &mut GraphState,
    ) -> Result<TensorId, NumError> {
        let h_size = self.dims.hidden;
        let mut layer_in = x;
        for l in 0..self.dims.layers {
            let (h_prev, c_prev) = state[l];
            let xa = tape.matmul(layer_in, self.wt_ih[l])?;
            let ha = tape.matmul(h_prev, self.wt_hh[l])?;
            let lin = tape.add(xa, ha)?;
            let pre = tape.add(lin, self.bias[l])?;

            let i_pre = tape.slice_last_dim(pre, 0, h_size)?;
            let f_pre = tape.slice_last_dim(pre, h_size, h_size)?;
            let c_pre = tape.slice_last_dim(pre, 2 * h_size, h_size)?;
            let o_pre = tape.slice_last_dim(pre, 3 * h_size, h_size)?;

            let i_g = tape.sigmoid(i_pre);
            let f_g = tape.sigmoid(f_pre);
            let c_g = tape.tanh(c_pre);
            let o_g = tape.sigmoid(o_pre);

            let keep = tape.elementwise_mul(f_g, c_prev)?;
            let write = tape.elementwise_mul(i_g, c_g)?;
            let c_new = tape.add(keep, write)?;
            let c_act = tape.tanh(c_new);
            let h_new = tape.elementwise_mul(o_g, c_act)?;

            state[l] = (h_new, c_new);
            layer_in = h_new;
        }
        Ok(layer_in)
    }
}

/// One-hot rows for a batch of tokens.
pub fn one_hot_batch<T: Real>(tokens: &[Token], width: usize) -> Tensor<T> {
    let mut t = Tensor::zeros(&[tokens.len(), width]);
    for (row, &tok) in tokens.iter().enumerate() {
        t.data_mut()[row * width + tok as usize] = T::ONE;
    }
    t
}

/// Mean teacher-forced negative log-likelihood over a batch of
/// fixed-length token sequences. `inputs` and `targets` are
/// `[batch][time]`; every position contributes (EOS padding included).
pub fn teacher_forced_nll<T: Real>(
    tape: &mut Tape<T>,
    graph: &LstmGraph,
    inputs: &[Vec<Token>],
    targets: &[Vec<Token>],
) -> Result<TensorId, NumError> {
    let batch = inputs.len();
    assert!(batch > 0 && targets.len() == batch);
    let steps = inputs[0].len();
    let width = graph.dims.input;
    let eps = tape.constant(Tensor::scalar(T::from_f64(LOG_EPS)));

    let mut state = graph.init_state(tape, batch);
    let mut total: Option<TensorId> = None;
    for t in 0..steps {
        let x_tokens: Vec<Token> = inputs.iter().map(|seq| seq[t]).collect();
        let y_tokens: Vec<Token> = targets.iter().map(|seq| seq[t]).collect();
        let x = tape.constant(one_hot_batch(&x_tokens, width));
        let probs = graph.step(tape, x, &mut state)?;
        let safe = tape.add(probs, eps)?;
        let logp = tape.log(safe)?;
        let mask = tape.constant(one_hot_batch(&y_tokens, graph.dims.output));
        let picked = tape.elementwise_mul(logp, mask)?;
        let s = tape.sum_all(picked);
        total = Some(match total {
            Some(acc) => tape.add(acc, s)?,
            None => s,
        });
    }
    let total = total.expect("at least one step");
    Ok(tape.scale(total, T::from_f64(-1.0 / (batch * steps) as f64)))
}
