//! Fast (non-recording) forward path. Used for rollouts, accuracy
//! measurement, and permutation-invariance checks; a test pins it
//! against the tape graph.

use formal_lang::{Alphabet, SequenceModel, Token};
use numkit::{Real, Tensor};

use crate::weights::{LstmDims, LstmWeights, RnnError};

/// Per-layer hidden and cell vectors; the initial state is all zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState<T> {
    pub h: Vec<Vec<T>>,
    pub c: Vec<Vec<T>>,
}

impl<T: Real> HiddenState<T> {
    pub fn zeros(dims: LstmDims) -> Self {
        Self {
            h: vec![vec![T::ZERO; dims.hidden]; dims.layers],
            c: vec![vec![T::ZERO; dims.hidden]; dims.layers],
        }
    }
}

fn matvec<T: Real>(m: &Tensor<T>, v: &[T], out: &mut [T]) {
    let cols = m.shape()[1];
    for (j, o) in out.iter_mut().enumerate() {
        let row = &m.data()[j * cols..(j + 1) * cols];
        let mut acc = T::ZERO;
        for (&w, &x) in row.iter().zip(v.iter()) {
            acc += w * x;
        }
        *o += acc;
    }
}

/// One step of the stacked LSTM: gate equations per layer, then a
/// softmax over the output projection.
pub fn lstm_step<T: Real>(
    weights: &LstmWeights<T>,
    x: &[T],
    state: &mut HiddenState<T>,
) -> Result<Vec<T>, RnnError> {
    let dims = weights.dims;
    if x.len() != dims.input {
        return Err(RnnError::Shape {
            detail: format!("input length {} vs X = {}", x.len(), dims.input),
        });
    }
    let h = dims.hidden;
    let mut layer_in: Vec<T> = x.to_vec();

    for (l, layer) in weights.layers.iter().enumerate() {
        let mut gates = [
            vec![T::ZERO; h],
            vec![T::ZERO; h],
            vec![T::ZERO; h],
            vec![T::ZERO; h],
        ];
        for g in 0..4 {
            let acc = &mut gates[g];
            for (a, (&bi, &bh)) in acc
                .iter_mut()
                .zip(layer.b_ih[g].data().iter().zip(layer.b_hh[g].data().iter()))
            {
                *a = bi + bh;
            }
            matvec(&layer.w_ih[g], &layer_in, acc);
            matvec(&layer.w_hh[g], &state.h[l], acc);
        }
        let sigmoid = |v: T| T::ONE / (T::ONE + (-v).exp());
        let mut new_h = vec![T::ZERO; h];
        for j in 0..h {
            let i_g = sigmoid(gates[0][j]);
            let f_g = sigmoid(gates[1][j]);
            let c_g = gates[2][j].tanh();
            let o_g = sigmoid(gates[3][j]);
            let c_new = f_g * state.c[l][j] + i_g * c_g;
            state.c[l][j] = c_new;
            new_h[j] = o_g * c_new.tanh();
        }
        state.h[l] = new_h.clone();
        layer_in = new_h;
    }

    // Output head with a stable softmax.
    let mut logits = weights.b_out.data().to_vec();
    matvec(&weights.w_out, &layer_in, &mut logits);
    let mut max = logits[0];
    for &v in &logits {
        max = max.maximum(v);
    }
    let mut sum = T::ZERO;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v = *v / sum;
    }
    Ok(logits)
}

/// Fold [`lstm_step`] over a sequence from the zero initial state.
pub fn lstm_forward<T: Real>(
    weights: &LstmWeights<T>,
    inputs: &[Vec<T>],
) -> Result<Vec<Vec<T>>, RnnError> {
    let mut state = HiddenState::zeros(weights.dims);
    inputs
        .iter()
        .map(|x| lstm_step(weights, x, &mut state))
        .collect()
}

/// Token-level view of a subject LSTM: one-hot inputs over an alphabet.
/// Implements the rollout environment's model interface.
pub struct TokenLstm<'a> {
    weights: &'a LstmWeights<f32>,
    alphabet: Alphabet,
    state: HiddenState<f32>,
}

impl<'a> TokenLstm<'a> {
    pub fn new(weights: &'a LstmWeights<f32>, alphabet: Alphabet) -> Result<Self, RnnError> {
        if weights.dims.input != alphabet.size() || weights.dims.output != alphabet.size() {
            return Err(RnnError::Shape {
                detail: format!(
                    "model dims ({}, {}) vs alphabet size {}",
                    weights.dims.input,
                    weights.dims.output,
                    alphabet.size()
                ),
            });
        }
        Ok(Self {
            weights,
            alphabet,
            state: HiddenState::zeros(weights.dims),
        })
    }
}

impl SequenceModel for TokenLstm<'_> {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn reset(&mut self) {
        self.state = HiddenState::zeros(self.weights.dims);
    }

    fn step(&mut self, token: Token) -> Vec<f32> {
        let mut x = vec![0.0f32; self.alphabet.size()];
        x[token as usize] = 1.0;
        lstm_step(self.weights, &x, &mut self.state).expect("validated dims")
    }
}
