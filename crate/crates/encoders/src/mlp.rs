//! Small MLP helper: ReLU hidden layers, linear output.

use numkit::{NumError, Real, RngStream, Tape, TensorId};

use crate::params::{ParamIds, ParamSet};

#[derive(Clone, Debug)]
pub struct MlpDef {
    pub prefix: String,
    /// Layer widths including input and output.
    pub widths: Vec<usize>,
}

impl MlpDef {
    pub fn new(prefix: impl Into<String>, widths: Vec<usize>) -> Self {
        assert!(widths.len() >= 2);
        Self {
            prefix: prefix.into(),
            widths,
        }
    }

    pub fn init<T: Real>(&self, params: &mut ParamSet<T>, rng: &mut RngStream) {
        for (i, pair) in self.widths.windows(2).enumerate() {
            let bound = 1.0 / (pair[0] as f64).sqrt();
            params.push_uniform(format!("{}.w{i}", self.prefix), &[pair[0], pair[1]], bound, rng);
            params.push_uniform(format!("{}.b{i}", self.prefix), &[pair[1]], bound, rng);
        }
    }

    /// Apply to a `[B, in]` node, producing `[B, out]`.
    pub fn apply<T: Real>(
        &self,
        tape: &mut Tape<T>,
        ids: &ParamIds,
        x: TensorId,
    ) -> Result<TensorId, NumError> {
        let mut h = x;
        let last = self.widths.len() - 2;
        for i in 0..=last {
            let w = ids.get(&format!("{}.w{i}", self.prefix));
            let b = ids.get(&format!("{}.b{i}", self.prefix));
            let lin = tape.matmul(h, w)?;
            h = tape.add(lin, b)?;
            if i != last {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use numkit::Tensor;

    #[test]
    fn zero_input_yields_bias_composition() {
        // With ReLU hidden layers and zero input, the output is the
        // forward image of the biases alone.
        let def = MlpDef::new("m", vec![4, 3, 2]);
        let mut rng = RngStream::from_seed(3);
        let mut params = ParamSet::<f64>::new();
        def.init(&mut params, &mut rng);

        let mut tape = Tape::new();
        let ids = params.load_on_tape(&mut tape, false);
        let x = tape.constant(Tensor::zeros(&[1, 4]));
        let y = def.apply(&mut tape, &ids, x).unwrap();

        // Hand-compute: h = relu(b0); out = h W1 + b1.
        let b0 = params.get("m.b0").data();
        let w1 = params.get("m.w1");
        let b1 = params.get("m.b1").data();
        let h: Vec<f64> = b0.iter().map(|v| v.max(0.0)).collect();
        for j in 0..2 {
            let mut want = b1[j];
            for (i, hv) in h.iter().enumerate() {
                want += hv * w1.data()[i * 2 + j];
            }
            let got = tape.value(y).data()[j];
            assert!((got - want).abs() < 1e-12);
        }
    }
}
