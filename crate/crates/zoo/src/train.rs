//! Teacher-forced training of one subject model with checkpoint
//! capture.

use std::error::Error;
use std::fmt;

use formal_lang::{
    encoding, generation_accuracy, sample_rollout, DatasetLanguageSpec, LangError, LanguageSpec,
    Rollout, Token,
};
use numkit::{AdamW, NumError, PiecewiseLinear, RngStream};
use rnn_core::{
    build_graph, load_weights, teacher_forced_nll, LstmDims, LstmWeights, RnnError, TokenLstm,
};

use crate::config::ZooConfig;

#[derive(Debug)]
pub enum ZooError {
    Diverged {
        task: DatasetLanguageSpec,
        step: u64,
        loss: f64,
    },
    Num(NumError),
    Lang(LangError),
    Rnn(RnnError),
    Io(std::io::Error),
    Manifest(String),
    ChecksumMismatch {
        path: String,
    },
}

impl fmt::Display for ZooError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZooError::Diverged { task, step, loss } => {
                write!(f, "training diverged on {task} at step {step} (loss {loss})")
            }
            ZooError::Num(e) => write!(f, "numerics: {e}"),
            ZooError::Lang(e) => write!(f, "language engine: {e}"),
            ZooError::Rnn(e) => write!(f, "rnn: {e}"),
            ZooError::Io(e) => write!(f, "io: {e}"),
            ZooError::Manifest(m) => write!(f, "manifest: {m}"),
            ZooError::ChecksumMismatch { path } => write!(f, "checksum mismatch for {path}"),
        }
    }
}

impl Error for ZooError {}

impl From<NumError> for ZooError {
    fn from(e: NumError) -> Self {
        ZooError::Num(e)
    }
}
impl From<LangError> for ZooError {
    fn from(e: LangError) -> Self {
        ZooError::Lang(e)
    }
}
impl From<RnnError> for ZooError {
    fn from(e: RnnError) -> Self {
        ZooError::Rnn(e)
    }
}
impl From<std::io::Error> for ZooError {
    fn from(e: std::io::Error) -> Self {
        ZooError::Io(e)
    }
}

#[derive(Clone, Debug)]
pub struct TrainedCheckpoint {
    pub step: u64,
    pub weights: LstmWeights<f32>,
    pub accuracy: f64,
    pub rollouts: Vec<Rollout>,
}

fn capture(
    step: u64,
    weights: &LstmWeights<f32>,
    task: &DatasetLanguageSpec,
    config: &ZooConfig,
    rng: &RngStream,
) -> Result<TrainedCheckpoint, ZooError> {
    let alphabet = task.alphabet();
    let mut model = TokenLstm::new(weights, alphabet)?;
    let mut acc_rng = rng.child(0x1000_0000 + step);
    let accuracy = generation_accuracy(
        &mut model,
        task,
        config.accuracy_samples,
        config.total_len,
        &mut acc_rng,
    )?;
    let mut roll_rng = rng.child(0x2000_0000 + step);
    let rollouts = (0..config.rollouts_per_checkpoint)
        .map(|_| sample_rollout(&mut model, config.total_len, &mut roll_rng))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrainedCheckpoint {
        step,
        weights: weights.clone(),
        accuracy,
        rollouts,
    })
}

/// Train one LSTM on `task` with AdamW under the piecewise-linear
/// schedule, capturing weights, generation accuracy, and rollouts at
/// every checkpoint step. Aborts with diagnostics when the loss stops
/// being finite.
pub fn train_model(
    task: &DatasetLanguageSpec,
    config: &ZooConfig,
    rng: &RngStream,
) -> Result<Vec<TrainedCheckpoint>, ZooError> {
    let alphabet = task.alphabet();
    let dims = LstmDims::new(config.layers, config.hidden, alphabet.size(), alphabet.size());
    let mut init_rng = rng.child(0);
    let mut weights = LstmWeights::<f32>::init_uniform(dims, &mut init_rng);
    let mut batch_rng = rng.child(1);

    let schedule = PiecewiseLinear::new(config.lr_knots.clone())?;
    let mut opt = AdamW::<f32>::new(dims.param_count(), schedule.at(0), config.weight_decay);

    let n_lo = task.min_n();
    let n_hi = encoding::max_fitting_n(task, config.total_len, encoding::MAX_TRAIN_N)
        .unwrap_or(n_lo)
        .max(n_lo);

    let mut checkpoints = Vec::with_capacity(config.checkpoint_steps.len());
    for step in 0..=config.steps {
        if config.checkpoint_steps.contains(&step) {
            checkpoints.push(capture(step, &weights, task, config, rng)?);
        }
        if step == config.steps {
            break;
        }

        let mut inputs: Vec<Vec<Token>> = Vec::with_capacity(config.batch_size);
        let mut targets: Vec<Vec<Token>> = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let n = n_lo + (batch_rng.index((n_hi - n_lo + 1) as usize) as u64);
            let seq = encoding::encode_training_sequence(task, n, config.total_len)?;
            inputs.push(seq.inputs);
            targets.push(seq.targets);
        }

        let mut tape = numkit::Tape::<f32>::new();
        let leaves = load_weights(&mut tape, &weights, true);
        let graph = build_graph(&mut tape, &leaves)?;
        let loss = teacher_forced_nll(&mut tape, &graph, &inputs, &targets)?;
        let loss_value = tape.value(loss).data()[0] as f64;
        if !loss_value.is_finite() {
            return Err(ZooError::Diverged {
                task: *task,
                step,
                loss: loss_value,
            });
        }

        let ordered = leaves.ordered();
        let grads = tape.backward(loss)?;
        let mut flat = weights.flatten();
        let mut grad_flat = Vec::with_capacity(flat.len());
        for (id, (_, t)) in ordered.iter().zip(weights.named_tensors()) {
            grad_flat.extend_from_slice(grads.get_or_zeros(*id, t.shape()).data());
        }
        opt.set_lr(schedule.at(step));
        opt.step(&mut flat, &grad_flat)?;
        weights = LstmWeights::unflatten(dims, &flat)?;
    }

    Ok(checkpoints)
}
