//! Flattened-weights encoder: the whole parameter vector straight into
//! an MLP. Deliberately not permutation-invariant.

use numkit::{NumError, Real, RngStream, Tape, Tensor, TensorId};
use rnn_core::{LstmDims, LstmWeights};

use crate::mlp::MlpDef;
use crate::params::{ParamIds, ParamSet};
use crate::EncoderArch;

fn mlp_def(dims: LstmDims, arch: &EncoderArch) -> MlpDef {
    let mut widths = vec![dims.param_count()];
    widths.extend(std::iter::repeat(arch.flat_hidden).take(arch.flat_layers - 1));
    widths.push(arch.z_dim);
    MlpDef::new("flat", widths)
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
    let flat = subject.flatten();
    let expected = tape.value(ids.get("flat.w0")).shape()[0];
    if flat.len() != expected {
        return Err(NumError::ShapeMismatch {
            op: "encode_flattened",
            detail: format!("flatten length {} vs MLP input width {expected}", flat.len()),
        });
    }
    let len = flat.len();
    let x = tape.constant(Tensor::new(vec![1, len], flat)?);
    mlp_def(subject.dims, arch).apply(tape, ids, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Encoder, EncoderKind};
    use numkit::RngStream;

    #[test]
    fn zero_subject_with_zero_biases_maps_to_final_bias() {
        let dims = LstmDims::new(1, 4, 3, 3);
        let arch = EncoderArch::tiny();
        let mut rng = RngStream::from_seed(7);
        let mut enc = Encoder::<f64>::new(EncoderKind::Flat, dims, &arch, &mut rng);
        // Zero every MLP bias: ReLU(0 W) = 0 layer по layer, so z is the
        // final bias exactly (here also zero).
        let names = enc.params.names();
        let mut flat = enc.params.flatten();
        let mut pos = 0;
        for (name, t) in enc.params.entries().iter().map(|(n, t)| (n.clone(), t.clone())) {
            if name.contains(".b") {
                flat[pos..pos + t.len()].iter_mut().for_each(|v| *v = 0.0);
            }
            pos += t.len();
        }
        let _ = names;
        enc.params.set_from_flat(&flat);
        let z = enc.encode(&LstmWeights::<f64>::zeros(dims)).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn subject_of_wrong_size_rejected() {
        let dims = LstmDims::new(1, 4, 3, 3);
        let other = LstmDims::new(1, 5, 3, 3);
        let arch = EncoderArch::tiny();
        let mut rng = RngStream::from_seed(8);
        let enc = Encoder::<f32>::new(EncoderKind::Flat, dims, &arch, &mut rng);
        let subject = LstmWeights::<f32>::zeros(other);
        assert!(enc.encode(&subject).is_err());
    }
}
