//! Probing encoders: drive the subject with learned probing inputs and
//! read the representation off the resulting outputs.
//!
//! Per probing step `i`, an input MLP turns the step embedding (plus,
//! in interactive mode, the recurrent module's previous output) into a
//! batch of parallel probing inputs. Each parallel sequence keeps its
//! own subject hidden state. The subject's softmax outputs are
//! concatenated, compressed by an output MLP, and consumed by a
//! recurrent LSTM whose final hidden state maps linearly to `z`.
//! Gradients flow through the subject into the probing inputs; the
//! subject's weights themselves stay constant.

use numkit::{NumError, Real, RngStream, Tape, Tensor, TensorId};
use rnn_core::{build_graph, load_weights, LstmDims, LstmLeaves, LstmWeights, GATES};

use crate::mlp::MlpDef;
use crate::params::{ParamIds, ParamSet};
use crate::{flatten_rows, EncoderArch};

/// Probing inputs actually fed to the subject, one `[M, X]` matrix per
/// step (captured for analysis and tests).
#[derive(Clone, Debug)]
pub struct ProbeTrace<T> {
    pub inputs: Vec<Tensor<T>>,
}

pub(crate) struct PendingTrace {
    ids: Vec<TensorId>,
}

impl PendingTrace {
    pub(crate) fn resolve<T: Real>(&self, tape: &Tape<T>) -> ProbeTrace<T> {
        ProbeTrace {
            inputs: self.ids.iter().map(|&id| tape.value(id).clone()).collect(),
        }
    }
}

fn er_dims(arch: &EncoderArch) -> LstmDims {
    LstmDims::new(arch.er_layers, arch.er_hidden, arch.probe_o_dim, arch.z_dim)
}

fn e_i_def(dims: LstmDims, arch: &EncoderArch, interactive: bool) -> MlpDef {
    let in_dim = if interactive {
        arch.probe_s_dim + arch.er_hidden
    } else {
        arch.probe_s_dim
    };
    let out = arch.probe_parallel * dims.input;
    MlpDef::new(
        if interactive { "iprobe.ei" } else { "probe.ei" },
        vec![in_dim, arch.probe_io_hidden, out],
    )
}

fn e_o_def(dims: LstmDims, arch: &EncoderArch, interactive: bool) -> MlpDef {
    let in_dim = arch.probe_parallel * dims.output;
    MlpDef::new(
        if interactive { "iprobe.eo" } else { "probe.eo" },
        vec![in_dim, arch.probe_io_hidden, arch.probe_o_dim],
    )
}

fn prefix(interactive: bool) -> &'static str {
    if interactive {
        "iprobe"
    } else {
        "probe"
    }
}

pub fn init<T: Real>(
    dims: LstmDims,
    arch: &EncoderArch,
    params: &mut ParamSet<T>,
    rng: &mut RngStream,
    interactive: bool,
) {
    let p = prefix(interactive);
    params.push_uniform(
        format!("{p}.steps"),
        &[1, arch.probe_len * arch.probe_s_dim],
        1.0,
        rng,
    );
    e_i_def(dims, arch, interactive).init(params, rng);
    e_o_def(dims, arch, interactive).init(params, rng);

    let er = er_dims(arch);
    let bound = 1.0 / (er.hidden as f64).sqrt();
    for l in 0..er.layers {
        let d = er.layer_input(l);
        for group in ["w_ih", "w_hh"] {
            let cols = if group == "w_ih" { d } else { er.hidden };
            for g in 0..GATES {
                params.push_uniform(
                    format!("{p}.er.l{l}.{group}.{g}"),
                    &[er.hidden, cols],
                    bound,
                    rng,
                );
            }
        }
        for group in ["b_ih", "b_hh"] {
            for g in 0..GATES {
                params.push_uniform(format!("{p}.er.l{l}.{group}.{g}"), &[er.hidden], bound, rng);
            }
        }
    }
    params.push_uniform(format!("{p}.er.w_out"), &[er.output, er.hidden], bound, rng);
    params.push_zeros(format!("{p}.er.b_out"), &[er.output]);
}

fn er_leaves(ids: &ParamIds, er: LstmDims, p: &str) -> LstmLeaves {
    let mut per_layer = Vec::with_capacity(er.layers);
    for l in 0..er.layers {
        let mut layer = Vec::with_capacity(4 * GATES);
        for group in ["w_ih", "w_hh", "b_ih", "b_hh"] {
            for g in 0..GATES {
                layer.push(ids.get(&format!("{p}.er.l{l}.{group}.{g}")));
            }
        }
        per_layer.push(layer);
    }
    LstmLeaves {
        dims: er,
        per_layer,
        w_out: ids.get(&format!("{p}.er.w_out")),
        b_out: ids.get(&format!("{p}.er.b_out")),
    }
}

/// Encode one subject; returns the `[1, Z]` node and the probing-input
/// trace handles.
pub(crate) fn encode<T: Real>(
    tape: &mut Tape<T>,
    ids: &ParamIds,
    subject: &LstmWeights<T>,
    arch: &EncoderArch,
    interactive: bool,
) -> Result<(TensorId, PendingTrace), NumError> {
    let dims = subject.dims;
    let p = prefix(interactive);
    let m = arch.probe_parallel;

    // Subject enters as constants; probing gradients flow through it.
    let subject_leaves = load_weights(tape, subject, false);
    let subject_graph = build_graph(tape, &subject_leaves)?;
    let mut subject_state = subject_graph.init_state(tape, m);

    let er = er_dims(arch);
    let er_graph = build_graph(tape, &er_leaves(ids, er, p))?;
    let mut er_state = er_graph.init_state(tape, 1);

    let steps = ids.get(&format!("{p}.steps"));
    let e_i = e_i_def(dims, arch, interactive);
    let e_o = e_o_def(dims, arch, interactive);

    let mut r_prev = tape.constant(Tensor::zeros(&[1, arch.er_hidden]));
    let mut r_final = r_prev;
    let mut trace = PendingTrace { ids: Vec::new() };

    for i in 0..arch.probe_len {
        let s_i = tape.slice_last_dim(steps, i * arch.probe_s_dim, arch.probe_s_dim)?;
        let e_in = if interactive {
            tape.concat_last_dim(&[s_i, r_prev])?
        } else {
            s_i
        };
        let flat_inputs = e_i.apply(tape, ids, e_in)?; // [1, M*X]

        // Reshape to a batch of M probing inputs.
        let rows: Vec<TensorId> = (0..m)
            .map(|j| tape.slice_last_dim(flat_inputs, j * dims.input, dims.input))
            .collect::<Result<_, _>>()?;
        let x_hat = crate::vstack(tape, &rows)?; // [M, X]
        trace.ids.push(x_hat);

        let y_hat = subject_graph.step(tape, x_hat, &mut subject_state)?; // [M, Y] softmax
        let y_row = flatten_rows(tape, y_hat)?; // [1, M*Y]
        let o_i = e_o.apply(tape, ids, y_row)?;

        let r = er_graph.step_hidden(tape, o_i, &mut er_state)?;
        r_prev = r;
        r_final = r;
    }

    // Linear head off the recurrent module's final hidden state.
    let head_w = ids.get(&format!("{p}.er.w_out"));
    let head_wt = tape.transpose(head_w)?;
    let z = tape.matmul(r_final, head_wt)?;
    let z = tape.add(z, ids.get(&format!("{p}.er.b_out")))?;
    Ok((z, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Encoder, EncoderKind};
    use rnn_core::{apply_permutation, PermutationSpec};

    fn l2(a: &[f32], b: &[f32]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| ((x - y) as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn probing_sees_only_behavior_so_permutations_vanish() {
        let dims = LstmDims::new(2, 8, 6, 6);
        let arch = EncoderArch::tiny();
        let mut rng = RngStream::from_seed(1);
        let subject = LstmWeights::<f32>::init_uniform(dims, &mut rng);
        let perm = PermutationSpec::random(dims.layers, dims.hidden, &mut rng);
        let permuted = apply_permutation(&subject, &perm).unwrap();
        let other = LstmWeights::<f32>::init_uniform(dims, &mut rng);

        for kind in [EncoderKind::Probe, EncoderKind::IProbe] {
            let enc = Encoder::<f32>::new(kind, dims, &arch, &mut rng);
            let z = enc.encode(&subject).unwrap();
            let zp = enc.encode(&permuted).unwrap();
            let zo = enc.encode(&other).unwrap();
            let ratio = l2(&zp, &z) / l2(&zo, &z);
            assert!(ratio <= 1e-4, "{kind:?}: ratio {ratio}");
        }
    }

    #[test]
    fn noninteractive_probes_do_not_depend_on_the_subject() {
        let dims = LstmDims::new(1, 6, 6, 6);
        let arch = EncoderArch::tiny();
        let mut rng = RngStream::from_seed(2);
        let enc = Encoder::<f32>::new(EncoderKind::Probe, dims, &arch, &mut rng);
        let a = LstmWeights::<f32>::init_uniform(dims, &mut rng);
        let b = LstmWeights::<f32>::init_uniform(dims, &mut rng);

        let (_, trace_a) = enc.encode_traced(&a).unwrap();
        let (_, trace_b) = enc.encode_traced(&b).unwrap();
        for (ta, tb) in trace_a.inputs.iter().zip(trace_b.inputs.iter()) {
            assert_eq!(ta, tb, "fixed probing inputs must ignore the subject");
        }
    }

    #[test]
    fn interactive_probes_adapt_to_the_subject_from_step_two() {
        let dims = LstmDims::new(1, 6, 6, 6);
        let arch = EncoderArch::tiny();
        let mut rng = RngStream::from_seed(3);
        let enc = Encoder::<f32>::new(EncoderKind::IProbe, dims, &arch, &mut rng);
        let a = LstmWeights::<f32>::init_uniform(dims, &mut rng);
        let b = LstmWeights::<f32>::init_uniform(dims, &mut rng);

        let (_, trace_a) = enc.encode_traced(&a).unwrap();
        let (_, trace_b) = enc.encode_traced(&b).unwrap();
        // Step 1 depends only on the shared embeddings.
        assert_eq!(trace_a.inputs[0], trace_b.inputs[0]);
        // From step 2 the feedback path has seen subject outputs.
        let d: f32 = trace_a.inputs[1]
            .data()
            .iter()
            .zip(trace_b.inputs[1].data())
            .map(|(x, y)| (x - y).abs())
            .sum();
        assert!(d > 0.0, "interactive probes ignored the subject");
    }

    #[test]
    fn deterministic_encoding() {
        let dims = LstmDims::new(1, 4, 6, 6);
        let arch = EncoderArch::tiny();
        let mut rng = RngStream::from_seed(4);
        let enc = Encoder::<f32>::new(EncoderKind::IProbe, dims, &arch, &mut rng);
        let subject = LstmWeights::<f32>::init_uniform(dims, &mut rng);
        assert_eq!(enc.encode(&subject).unwrap(), enc.encode(&subject).unwrap());
    }
}
