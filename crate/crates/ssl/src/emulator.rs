//! The conditional emulator: an LSTM language model whose BOS input
//! embedding is augmented with a linear projection of the subject
//! representation `z`.

use formal_lang::{Alphabet, SequenceModel, Token};
use numkit::{NumError, Real, RngStream, Tape, Tensor, TensorId};
use rnn_core::{
    build_graph, lstm_step, HiddenState, LstmDims, LstmGraph, LstmLeaves, LstmWeights, GATES,
};

use encoders::{ParamIds, ParamSet};

#[derive(Clone, Debug)]
pub struct EmulatorWeights<T> {
    pub lstm: LstmWeights<T>,
    /// `[Z, X]` projection added to the BOS one-hot.
    pub cond: Tensor<T>,
}

impl<T: Real> EmulatorWeights<T> {
    pub fn init(
        layers: usize,
        hidden: usize,
        alphabet_size: usize,
        z_dim: usize,
        rng: &mut RngStream,
    ) -> Self {
        let dims = LstmDims::new(layers, hidden, alphabet_size, alphabet_size);
        let bound = 1.0 / (z_dim as f64).sqrt();
        let cond_data = (0..z_dim * alphabet_size)
            .map(|_| T::from_f64(rng.uniform(-bound, bound)))
            .collect();
        Self {
            lstm: LstmWeights::init_uniform(dims, rng),
            cond: Tensor::new(vec![z_dim, alphabet_size], cond_data).expect("cond shape"),
        }
    }

    /// Register every tensor under the `em.` prefix.
    pub fn register(&self, params: &mut ParamSet<T>) {
        for (name, t) in self.lstm.named_tensors() {
            params.push(format!("em.{name}"), t.clone());
        }
        params.push("em.cond", self.cond.clone());
    }

    /// Rebuild from a parameter set written by [`register`].
    pub fn from_params(dims: LstmDims, z_dim: usize, params: &ParamSet<T>) -> Self {
        let entries: Vec<(String, Tensor<T>)> = params
            .entries()
            .iter()
            .filter_map(|(n, t)| {
                n.strip_prefix("em.")
                    .filter(|rest| *rest != "cond")
                    .map(|rest| (rest.to_string(), t.clone()))
            })
            .collect();
        let lstm = LstmWeights::from_named(dims, &entries).expect("emulator tensors");
        let cond = params.get("em.cond").clone();
        assert_eq!(cond.shape(), [z_dim, dims.input]);
        Self { lstm, cond }
    }

    pub fn dims(&self) -> LstmDims {
        self.lstm.dims
    }
}

/// Tape leaves for the emulator out of a prefixed parameter set.
pub fn emulator_leaves(ids: &ParamIds, dims: LstmDims) -> LstmLeaves {
    let mut per_layer = Vec::with_capacity(dims.layers);
    for l in 0..dims.layers {
        let mut layer = Vec::with_capacity(4 * GATES);
        for group in ["w_ih", "w_hh", "b_ih", "b_hh"] {
            for g in ["i", "f", "c", "o"] {
                layer.push(ids.get(&format!("em.l{l}.{group}.{g}")));
            }
        }
        per_layer.push(layer);
    }
    LstmLeaves {
        dims,
        per_layer,
        w_out: ids.get("em.w_out"),
        b_out: ids.get("em.b_out"),
    }
}

/// Teacher-forced emulator forward over a padded token batch.
///
/// `inputs[b]` must start with BOS; shorter sequences are padded to the
/// longest (padded positions are masked out by the caller's weights).
/// Returns the per-step output-distribution nodes `[B, A]`.
pub fn emulator_forward_batch<T: Real>(
    tape: &mut Tape<T>,
    graph: &LstmGraph,
    cond: TensorId,
    z_rows: TensorId,
    inputs: &[Vec<Token>],
    steps: usize,
    alphabet: Alphabet,
) -> Result<Vec<TensorId>, NumError> {
    let batch = inputs.len();
    let width = alphabet.size();
    if inputs.iter().any(|seq| seq.first() != Some(&Alphabet::BOS)) {
        return Err(NumError::InvalidArgument {
            op: "emulator_forward",
            detail: "every input sequence must start with BOS".into(),
        });
    }

    let mut state = graph.init_state(tape, batch);
    let mut outputs = Vec::with_capacity(steps);
    for t in 0..steps {
        let tokens: Vec<Token> = inputs
            .iter()
            .map(|seq| seq.get(t).copied().unwrap_or(alphabet.eos()))
            .collect();
        let mut x = tape.constant(rnn_core::graph::one_hot_batch(&tokens, width));
        if t == 0 {
            let proj = tape.matmul(z_rows, cond)?;
            x = tape.add(x, proj)?;
        }
        outputs.push(graph.step(tape, x, &mut state)?);
    }
    Ok(outputs)
}

/// Build the emulator graph from registered parameters.
pub fn emulator_graph<T: Real>(
    tape: &mut Tape<T>,
    ids: &ParamIds,
    dims: LstmDims,
) -> Result<(LstmGraph, TensorId), NumError> {
    let leaves = emulator_leaves(ids, dims);
    let graph = build_graph(tape, &leaves)?;
    Ok((graph, ids.get("em.cond")))
}

/// Fast-path autoregressive emulator conditioned on a fixed `z`;
/// implements the rollout environment's model interface.
pub struct EmulatorModel {
    weights: EmulatorWeights<f32>,
    z: Vec<f32>,
    alphabet: Alphabet,
    state: HiddenState<f32>,
    step_index: usize,
}

impl EmulatorModel {
    pub fn new(weights: EmulatorWeights<f32>, alphabet: Alphabet, z: Vec<f32>) -> Self {
        assert_eq!(weights.cond.shape()[0], z.len());
        assert_eq!(weights.dims().input, alphabet.size());
        let dims = weights.dims();
        Self {
            weights,
            z,
            alphabet,
            state: HiddenState::zeros(dims),
            step_index: 0,
        }
    }
}

impl SequenceModel for EmulatorModel {
    fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    fn reset(&mut self) {
        self.state = HiddenState::zeros(self.weights.dims());
        self.step_index = 0;
    }

    fn step(&mut self, token: Token) -> Vec<f32> {
        let width = self.alphabet.size();
        let mut x = vec![0.0f32; width];
        x[token as usize] = 1.0;
        if self.step_index == 0 {
            // z projects onto the sequence-opening BOS embedding only.
            let zc = &self.weights.cond;
            for (j, xv) in x.iter_mut().enumerate() {
                let mut acc = 0.0f32;
                for (i, zi) in self.z.iter().enumerate() {
                    acc += zi * zc.data()[i * width + j];
                }
                *xv += acc;
            }
        }
        self.step_index += 1;
        lstm_step(&self.weights.lstm, &x, &mut self.state).expect("emulator dims")
    }
}
