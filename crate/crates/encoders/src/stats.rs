//! Layer-wise statistics encoder: seven order statistics (mean, std,
//! quantiles 0/.25/.5/.75/1) per gate per weight group, concatenated
//! and passed through an MLP. Invariant to hidden-neuron permutations
//! by construction.

use numkit::{NumError, Real, RngStream, Tape, Tensor, TensorId};
use rnn_core::{LstmDims, LstmWeights, GATES};

use crate::mlp::MlpDef;
use crate::params::{ParamIds, ParamSet};
use crate::EncoderArch;

pub const STATS_PER_VECTOR: usize = 7;

/// mean, population std, and linearly interpolated quantiles
/// 0, 0.25, 0.5, 0.75, 1.
pub fn seven_stats<T: Real>(values: &[T]) -> [T; STATS_PER_VECTOR] {
    assert!(!values.is_empty());
    let n = values.len();
    let mut mean = 0.0f64;
    for v in values {
        mean += v.to_f64();
    }
    mean /= n as f64;
    let mut var = 0.0f64;
    for v in values {
        let d = v.to_f64() - mean;
        var += d * d;
    }
    var /= n as f64;

    let mut sorted: Vec<f64> = values.iter().map(|v| v.to_f64()).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |p: f64| -> f64 {
        let pos = p * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if lo + 1 < n {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[n - 1]
        }
    };

    [
        T::from_f64(mean),
        T::from_f64(var.sqrt()),
        T::from_f64(quantile(0.0)),
        T::from_f64(quantile(0.25)),
        T::from_f64(quantile(0.5)),
        T::from_f64(quantile(0.75)),
        T::from_f64(quantile(1.0)),
    ]
}

pub fn feature_len(dims: LstmDims) -> usize {
    (dims.layers * 3 * GATES + 2) * STATS_PER_VECTOR
}

/// The full feature vector: per layer and gate, stats over the
/// input-to-hidden weights, the hidden-to-hidden weights, and the
/// concatenated bias pair; then stats over the output projection and
/// its bias.
pub fn feature_vector<T: Real>(subject: &LstmWeights<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(feature_len(subject.dims));
    for layer in &subject.layers {
        for g in 0..GATES {
            out.extend_from_slice(&seven_stats(layer.w_ih[g].data()));
            out.extend_from_slice(&seven_stats(layer.w_hh[g].data()));
            let mut bias: Vec<T> = layer.b_ih[g].data().to_vec();
            bias.extend_from_slice(layer.b_hh[g].data());
            out.extend_from_slice(&seven_stats(&bias));
        }
    }
    out.extend_from_slice(&seven_stats(subject.w_out.data()));
    out.extend_from_slice(&seven_stats(subject.b_out.data()));
    out
}

fn mlp_def(dims: LstmDims, arch: &EncoderArch) -> MlpDef {
    let mut widths = vec![feature_len(dims)];
    widths.extend(std::iter::repeat(arch.stats_hidden).take(arch.stats_layers - 1));
    widths.push(arch.z_dim);
    MlpDef::new("stats", widths)
}

pub fn init<T: Real>(
    dims: LstmDims,
    arch: &EncoderArch,
    params: &mut ParamSet<T>,
    rng: &mut RngStream,
) {
    mlp_def(dims, arch).init(params, rng);
}

pub fn encode<T: Real>(
    tape: &mut Tape<T>,
    ids: &ParamIds,
    subject: &LstmWeights<T>,
    arch: &EncoderArch,
) -> Result<TensorId, NumError> {
    let features = feature_vector(subject);
    let len = features.len();
    let x = tape.constant(Tensor::new(vec![1, len], features)?);
    mlp_def(subject.dims, arch).apply(tape, ids, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_values_have_degenerate_stats() {
        let s = seven_stats(&vec![3.5f64; 20]);
        assert_eq!(s, [3.5, 0.0, 3.5, 3.5, 3.5, 3.5, 3.5]);
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let s = seven_stats(&[0.0f64, 1.0, 2.0, 3.0]);
        assert!((s[2] - 0.0).abs() < 1e-12);
        assert!((s[3] - 0.75).abs() < 1e-12);
        assert!((s[4] - 1.5).abs() < 1e-12);
        assert!((s[5] - 2.25).abs() < 1e-12);
        assert!((s[6] - 3.0).abs() < 1e-12);
        // Population std of [0,1,2,3]: sqrt(5/4).
        assert!((s[1] - (1.25f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unsorted_input_gives_same_stats() {
        let a = seven_stats(&[3.0f64, 0.0, 2.0, 1.0]);
        let b = seven_stats(&[0.0f64, 1.0, 2.0, 3.0]);
        assert_eq!(a, b);
    }
}
