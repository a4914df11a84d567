//! The autoregressive rollout environment: feed BOS, sample each next
//! token from the model's output distribution, stop on EOS or at the
//! length cap.

use numkit::RngStream;

use crate::alphabet::{Alphabet, Token};
use crate::language::{LangError, LanguageSpec};

/// Default rollout length cap (matches the training sequence length).
pub const MAX_ROLLOUT_LEN: usize = 42;

/// A stateful autoregressive token model. Implementations carry their
/// own hidden state between [`SequenceModel::step`] calls.
pub trait SequenceModel {
    fn alphabet(&self) -> Alphabet;

    /// Reset hidden state to the fixed initial state.
    fn reset(&mut self);

    /// Feed one input token and return the output distribution over the
    /// full alphabet.
    fn step(&mut self, token: Token) -> Vec<f32>;
}

/// Alternating input/output trace of a model interacting with the
/// environment.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    pub inputs: Vec<Token>,
    pub outputs: Vec<Vec<f32>>,
    /// True when the rollout ended because EOS was sampled (rather than
    /// hitting the length cap).
    pub terminated: bool,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Tokens after BOS; the generated string body.
    pub fn body(&self) -> &[Token] {
        &self.inputs[1..]
    }
}

pub fn sample_rollout(
    model: &mut dyn SequenceModel,
    max_len: usize,
    rng: &mut RngStream,
) -> Result<Rollout, LangError> {
    let alphabet = model.alphabet();
    let eos = alphabet.eos();
    model.reset();

    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut terminated = false;
    let mut x = Alphabet::BOS;

    for _ in 0..max_len {
        let y = model.step(x);
        if y.len() != alphabet.size() {
            return Err(LangError::BadModelOutput {
                detail: format!("distribution length {} vs alphabet {}", y.len(), alphabet.size()),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(LangError::NonFiniteModelOutput);
        }
        let sum: f32 = y.iter().sum();
        if (sum - 1.0).abs() > 1e-3 || y.iter().any(|&v| v < -1e-6) {
            return Err(LangError::BadModelOutput {
                detail: format!("output is not a distribution (sum = {sum})"),
            });
        }
        inputs.push(x);
        let weights: Vec<f64> = y.iter().map(|&v| v.max(0.0) as f64).collect();
        outputs.push(y);
        let next = rng.sample_categorical(&weights) as Token;
        if next == eos {
            terminated = true;
            break;
        }
        x = next;
    }

    Ok(Rollout {
        inputs,
        outputs,
        terminated,
    })
}

/// Fraction of sampled rollouts whose body (between BOS and the
/// terminating EOS) is a member of the language.
pub fn generation_accuracy(
    model: &mut dyn SequenceModel,
    spec: &dyn LanguageSpec,
    num_samples: usize,
    max_len: usize,
    rng: &mut RngStream,
) -> Result<f64, LangError> {
    assert!(num_samples >= 1);
    let mut correct = 0usize;
    for _ in 0..num_samples {
        let rollout = sample_rollout(model, max_len, rng)?;
        if rollout.terminated && spec.is_member(rollout.body()) {
            correct += 1;
        }
    }
    Ok(correct as f64 / num_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::language::DatasetLanguageSpec;

    /// Plays a fixed token script, then EOS forever.
    struct ScriptModel {
        alphabet: Alphabet,
        script: Vec<Token>,
        pos: usize,
    }

    impl ScriptModel {
        fn new(alphabet: Alphabet, script: Vec<Token>) -> Self {
            Self {
                alphabet,
                script,
                pos: 0,
            }
        }
    }

    impl SequenceModel for ScriptModel {
        fn alphabet(&self) -> Alphabet {
            self.alphabet
        }

        fn reset(&mut self) {
            self.pos = 0;
        }

        fn step(&mut self, _token: Token) -> Vec<f32> {
            let next = self.script.get(self.pos).copied().unwrap_or(self.alphabet.eos());
            self.pos += 1;
            let mut y = vec![0.0; self.alphabet.size()];
            y[next as usize] = 1.0;
            y
        }
    }

    struct UniformModel(Alphabet);

    impl SequenceModel for UniformModel {
        fn alphabet(&self) -> Alphabet {
            self.0
        }
        fn reset(&mut self) {}
        fn step(&mut self, _token: Token) -> Vec<f32> {
            vec![1.0 / self.0.size() as f32; self.0.size()]
        }
    }

    #[test]
    fn immediate_eos_gives_length_one_rollout() {
        let a = Alphabet::dataset();
        let mut model = ScriptModel::new(a, vec![]);
        let mut rng = RngStream::from_seed(1);
        let r = sample_rollout(&mut model, MAX_ROLLOUT_LEN, &mut rng).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.inputs, vec![Alphabet::BOS]);
        assert!(r.terminated);
        assert!(r.body().is_empty());
    }

    #[test]
    fn outputs_are_distributions_and_runs_are_deterministic() {
        let a = Alphabet::dataset();
        let mut model = UniformModel(a);
        let r1 = sample_rollout(&mut model, 20, &mut RngStream::from_seed(7)).unwrap();
        let r2 = sample_rollout(&mut model, 20, &mut RngStream::from_seed(7)).unwrap();
        assert_eq!(r1, r2);
        for y in &r1.outputs {
            let sum: f32 = y.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-5);
        }
        assert_eq!(r1.inputs[0], Alphabet::BOS);
    }

    #[test]
    fn oracle_replay_model_scores_perfect_accuracy() {
        let spec = DatasetLanguageSpec::new(1, -1, 2).unwrap();
        let script = spec.string_for_n(1).unwrap();
        let mut model = ScriptModel::new(spec.alphabet(), script);
        let mut rng = RngStream::from_seed(3);
        let acc =
            generation_accuracy(&mut model, &spec, 50, MAX_ROLLOUT_LEN, &mut rng).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn always_eos_model_scores_zero() {
        let spec = DatasetLanguageSpec::new(0, 0, 0).unwrap();
        let mut model = ScriptModel::new(spec.alphabet(), vec![]);
        let mut rng = RngStream::from_seed(4);
        let acc = generation_accuracy(&mut model, &spec, 20, MAX_ROLLOUT_LEN, &mut rng).unwrap();
        assert_eq!(acc, 0.0);
    }

    #[test]
    fn uniform_model_rarely_generates_members() {
        // Monte-Carlo: a random token per step almost never forms a
        // well-ordered a^n b^n c^n d^n string.
        let spec = DatasetLanguageSpec::new(0, 0, 0).unwrap();
        let mut model = UniformModel(spec.alphabet());
        let mut rng = RngStream::from_seed(5);
        let acc =
            generation_accuracy(&mut model, &spec, 1000, MAX_ROLLOUT_LEN, &mut rng).unwrap();
        assert!(acc < 0.05, "accuracy {acc}");
    }

    #[test]
    fn non_finite_output_rejected() {
        struct NanModel(Alphabet);
        impl SequenceModel for NanModel {
            fn alphabet(&self) -> Alphabet {
                self.0
            }
            fn reset(&mut self) {}
            fn step(&mut self, _token: Token) -> Vec<f32> {
                vec![f32::NAN; self.0.size()]
            }
        }
        let mut model = NanModel(Alphabet::dataset());
        let mut rng = RngStream::from_seed(6);
        assert!(matches!(
            sample_rollout(&mut model, 10, &mut rng),
            Err(LangError::NonFiniteModelOutput)
        ));
    }
}
