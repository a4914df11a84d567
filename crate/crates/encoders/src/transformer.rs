//! Parameter transformer: one token per hidden neuron (its four
//! input-to-hidden rows, four hidden-to-hidden rows, and eight bias
//! entries), a final token for the output head, learned positional
//! encodings, and an encoder-only self-attention stack with mean
//! pooling.

use numkit::{NumError, Real, RngStream, Tape, Tensor, TensorId};
use rnn_core::{LstmDims, LstmWeights, GATES};

use crate::params::{ParamIds, ParamSet};
use crate::{vstack, EncoderArch};

fn neuron_token_dim(dims: LstmDims, layer: usize) -> usize {
    GATES * dims.layer_input(layer) + GATES * dims.hidden + 2 * GATES
}

fn out_token_dim(dims: LstmDims) -> usize {
    dims.output * dims.hidden + dims.output
}

fn token_count(dims: LstmDims) -> usize {
    dims.layers * dims.hidden + 1
}

pub fn init<T: Real>(
    dims: LstmDims,
    arch: &EncoderArch,
    params: &mut ParamSet<T>,
    rng: &mut RngStream,
) {
    let w = arch.tr_width;
    for l in 0..dims.layers {
        let d = neuron_token_dim(dims, l);
        params.push_uniform(format!("tr.proj.l{l}"), &[d, w], 1.0 / (d as f64).sqrt(), rng);
    }
    let d = out_token_dim(dims);
    params.push_uniform("tr.proj.out", &[d, w], 1.0 / (d as f64).sqrt(), rng);
    params.push_uniform("tr.pos", &[token_count(dims), w], 0.02, rng);

    let bound = 1.0 / (w as f64).sqrt();
    for b in 0..arch.tr_layers {
        for name in ["wq", "wk", "wv", "wo"] {
            params.push_uniform(format!("tr.blk{b}.{name}"), &[w, w], bound, rng);
        }
        params.push_uniform(format!("tr.blk{b}.ff1"), &[w, arch.tr_ff], bound, rng);
        params.push_zeros(format!("tr.blk{b}.ff1b"), &[arch.tr_ff]);
        params.push_uniform(
            format!("tr.blk{b}.ff2"),
            &[arch.tr_ff, w],
            1.0 / (arch.tr_ff as f64).sqrt(),
            rng,
        );
        params.push_zeros(format!("tr.blk{b}.ff2b"), &[w]);
    }
    params.push_uniform("tr.head.w", &[w, arch.z_dim], bound, rng);
    params.push_zeros("tr.head.b", &[arch.z_dim]);
}

/// Raw token rows for one subject layer: `[H, 4D + 4H + 8]`.
fn layer_tokens<T: Real>(subject: &LstmWeights<T>, l: usize) -> Tensor<T> {
    let dims = subject.dims;
    let h = dims.hidden;
    let d = dims.layer_input(l);
    let width = neuron_token_dim(dims, l);
    let layer = &subject.layers[l];
    let mut data = Vec::with_capacity(h * width);
    for j in 0..h {
        for g in 0..GATES {
            data.extend_from_slice(&layer.w_ih[g].data()[j * d..(j + 1) * d]);
        }
        for g in 0..GATES {
            data.extend_from_slice(&layer.w_hh[g].data()[j * h..(j + 1) * h]);
        }
        for g in 0..GATES {
            data.push(layer.b_ih[g].data()[j]);
        }
        for g in 0..GATES {
            data.push(layer.b_hh[g].data()[j]);
        }
    }
    Tensor::new(vec![h, width], data).expect("token shape")
}

/// Multi-head self-attention over `[N, W]`; rows of every attention
/// matrix softmax to one.
pub fn attention_block<T: Real>(
    tape: &mut Tape<T>,
    ids: &ParamIds,
    block: usize,
    x: TensorId,
    heads: usize,
) -> Result<TensorId, NumError> {
    let w = tape.value(x).shape()[1];
    assert!(w % heads == 0, "width must divide into heads");
    let dh = w / heads;

    let q = tape.matmul(x, ids.get(&format!("tr.blk{block}.wq")))?;
    let k = tape.matmul(x, ids.get(&format!("tr.blk{block}.wk")))?;
    let v = tape.matmul(x, ids.get(&format!("tr.blk{block}.wv")))?;

    let mut head_outs = Vec::with_capacity(heads);
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    for hd in 0..heads {
        let qh = tape.slice_last_dim(q, hd * dh, dh)?;
        let kh = tape.slice_last_dim(k, hd * dh, dh)?;
        let vh = tape.slice_last_dim(v, hd * dh, dh)?;
        let kt = tape.transpose(kh)?;
        let logits = tape.matmul(qh, kt)?;
        let scaled = tape.scale(logits, scale);
        let attn = tape.softmax_last_dim(scaled)?;
        head_outs.push(tape.matmul(attn, vh)?);
    }
    let merged = tape.concat_last_dim(&head_outs)?;
    let proj = tape.matmul(merged, ids.get(&format!("tr.blk{block}.wo")))?;
    let x = tape.add(x, proj)?;

    // Position-wise feedforward with residual.
    let f1 = tape.matmul(x, ids.get(&format!("tr.blk{block}.ff1")))?;
    let f1 = tape.add(f1, ids.get(&format!("tr.blk{block}.ff1b")))?;
    let f1 = tape.relu(f1);
    let f2 = tape.matmul(f1, ids.get(&format!("tr.blk{block}.ff2")))?;
    let f2 = tape.add(f2, ids.get(&format!("tr.blk{block}.ff2b")))?;
    tape.add(x, f2)
}

pub fn encode<T: Real>(
    tape: &mut Tape<T>,
    ids: &ParamIds,
    subject: &LstmWeights<T>,
    arch: &EncoderArch,
) -> Result<TensorId, NumError> {
    let dims = subject.dims;
    let mut projected = Vec::with_capacity(dims.layers + 1);
    for l in 0..dims.layers {
        let raw = tape.constant(layer_tokens(subject, l));
        projected.push(tape.matmul(raw, ids.get(&format!("tr.proj.l{l}")))?);
    }
    let mut out_token: Vec<T> = subject.w_out.data().to_vec();
    out_token.extend_from_slice(subject.b_out.data());
    let dim = out_token.len();
    let raw = tape.constant(Tensor::new(vec![1, dim], out_token)?);
    projected.push(tape.matmul(raw, ids.get("tr.proj.out"))?);

    let tokens = vstack(tape, &projected)?;
    let mut x = tape.add(tokens, ids.get("tr.pos"))?;
    for b in 0..arch.tr_layers {
        x = attention_block(tape, ids, b, x, arch.tr_heads)?;
    }

    // Mean-pool tokens, then the linear head.
    let n = token_count(dims);
    let pool = tape.constant(Tensor::full(&[1, n], T::from_f64(1.0 / n as f64)));
    let pooled = tape.matmul(pool, x)?;
    let z = tape.matmul(pooled, ids.get("tr.head.w"))?;
    tape.add(z, ids.get("tr.head.b"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Encoder, EncoderKind};

    #[test]
    fn attention_rows_sum_to_one_and_single_token_is_value_path() {
        // With one token, softmax over a single key is exactly 1, so the
        // attention output equals that token's value row.
        let mut rng = RngStream::from_seed(1);
        let mut params = ParamSet::<f64>::new();
        let w = 8;
        for name in ["wq", "wk", "wv", "wo"] {
            params.push_uniform(format!("tr.blk0.{name}"), &[w, w], 0.3, &mut rng);
        }
        params.push_uniform("tr.blk0.ff1", &[w, 8], 0.3, &mut rng);
        params.push_zeros("tr.blk0.ff1b", &[8]);
        params.push_uniform("tr.blk0.ff2", &[8, w], 0.3, &mut rng);
        params.push_zeros("tr.blk0.ff2b", &[w]);

        let mut tape = Tape::new();
        let ids = params.load_on_tape(&mut tape, false);
        let x = tape.constant(Tensor::new(vec![1, w], (0..w).map(|i| i as f64 * 0.1).collect()).unwrap());
        let y = attention_block(&mut tape, &ids, 0, x, 2).unwrap();

        // Reference: value path only (attention weight exactly 1).
        let xv = tape.value(x).clone();
        let v = numkit::tensor::matmul(&xv, params.get("tr.blk0.wv")).unwrap();
        let attn_out = numkit::tensor::matmul(&v, params.get("tr.blk0.wo")).unwrap();
        let after_res: Vec<f64> = xv
            .data()
            .iter()
            .zip(attn_out.data())
            .map(|(a, b)| a + b)
            .collect();
        let f1 = numkit::tensor::matmul(
            &Tensor::new(vec![1, w], after_res.clone()).unwrap(),
            params.get("tr.blk0.ff1"),
        )
        .unwrap();
        let f1 = numkit::tensor::relu(&f1);
        let f2 = numkit::tensor::matmul(&f1, params.get("tr.blk0.ff2")).unwrap();
        for (i, got) in tape.value(y).data().iter().enumerate() {
            let want = after_res[i] + f2.data()[i];
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn permuting_neurons_changes_the_representation() {
        let dims = LstmDims::new(2, 6, 4, 4);
        let arch = EncoderArch::tiny();
        let mut rng = RngStream::from_seed(3);
        let enc = Encoder::<f32>::new(EncoderKind::Transformer, dims, &arch, &mut rng);
        let subject = LstmWeights::<f32>::init_uniform(dims, &mut rng);
        let perm = rnn_core::PermutationSpec::random(2, 6, &mut rng);
        let permuted = rnn_core::apply_permutation(&subject, &perm).unwrap();

        let za = enc.encode(&subject).unwrap();
        let zb = enc.encode(&permuted).unwrap();
        let diff: f32 = za.iter().zip(&zb).map(|(a, b)| (a - b).abs()).sum();
        assert!(diff > 1e-4, "transformer was unexpectedly invariant");
    }
}
