//! Joint encoder + emulator training with validation-based early
//! stopping.

use std::error::Error;
use std::fmt;

use encoders::{Encoder, EncoderArch, EncoderKind, ParamSet};
use formal_lang::{Alphabet, DatasetLanguageSpec, Rollout, Token};
use numkit::{clip_global_norm, AdamW, NumError, RngStream, Tape, Tensor, TensorId};
use rnn_core::{apply_permutation, LstmDims, LstmWeights, PermutationSpec};
use zoo::{LoadedZoo, Split, ZooError};

use crate::emulator::{emulator_graph, emulator_forward_batch, EmulatorWeights};
use crate::kl::{clamped_log_targets, reverse_kl_node};

#[derive(Debug)]
pub enum SslError {
    Num(NumError),
    Zoo(ZooError),
    Diverged { kind: EncoderKind, step: u64, loss: f64 },
    EmptySplit(Split),
}

impl fmt::Display for SslError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SslError::Num(e) => write!(f, "numerics: {e}"),
            SslError::Zoo(e) => write!(f, "zoo: {e}"),
            SslError::Diverged { kind, step, loss } => {
                write!(f, "{} training diverged at step {step} (loss {loss})", kind.label())
            }
            SslError::EmptySplit(s) => write!(f, "split {s:?} has no checkpoints"),
        }
    }
}

impl Error for SslError {}

impl From<NumError> for SslError {
    fn from(e: NumError) -> Self {
        SslError::Num(e)
    }
}
impl From<ZooError> for SslError {
    fn from(e: ZooError) -> Self {
        SslError::Zoo(e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SslConfig {
    pub batch_size: usize,
    pub max_steps: u64,
    pub eval_interval: u64,
    /// Fixed (subject, rollout) pairs used for every validation pass.
    pub val_pairs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub em_hidden: usize,
    pub em_layers: usize,
    pub max_rollout_len: usize,
    pub seed: u64,
}

impl SslConfig {
    /// Published hyperparameters (batch 64, emulator hidden 256).
    pub fn paper(seed: u64) -> Self {
        Self {
            batch_size: 64,
            max_steps: 100_000,
            eval_interval: 500,
            val_pairs: 512,
            lr: 1e-4,
            weight_decay: 0.01,
            clip_norm: 0.1,
            em_hidden: 256,
            em_layers: 2,
            max_rollout_len: formal_lang::encoding::TOTAL_LEN,
            seed,
        }
    }

    /// Desk scale: same optimizer settings, smaller emulator and budget.
    pub fn desk(seed: u64) -> Self {
        Self {
            batch_size: 16,
            max_steps: 400,
            eval_interval: 20,
            val_pairs: 96,
            lr: 1e-4,
            weight_decay: 0.01,
            clip_norm: 0.1,
            em_hidden: 64,
            em_layers: 2,
            max_rollout_len: formal_lang::encoding::TOTAL_LEN,
            seed,
        }
    }
}

/// One zoo checkpoint held in memory for training.
pub struct SslItem {
    pub model_id: usize,
    pub step: u64,
    pub task: DatasetLanguageSpec,
    pub accuracy: f64,
    pub weights: LstmWeights<f32>,
    pub rollouts: Vec<Rollout>,
}

pub struct SslDataset {
    pub items: Vec<SslItem>,
}

pub fn load_split_dataset(loaded: &LoadedZoo, split: Split) -> Result<SslDataset, SslError> {
    let mut items = Vec::new();
    for record in loaded.records() {
        if record.split != split {
            continue;
        }
        for ckpt in &record.checkpoints {
            items.push(SslItem {
                model_id: record.model_id,
                step: ckpt.step,
                task: record.task,
                accuracy: ckpt.accuracy,
                weights: loaded.load_weights(ckpt)?,
                rollouts: loaded.load_rollouts(ckpt)?,
            });
        }
    }
    if items.is_empty() {
        return Err(SslError::EmptySplit(split));
    }
    Ok(SslDataset { items })
}

/// Result of one training run: best-validation snapshots and curves.
pub struct SslRun {
    pub kind: EncoderKind,
    pub encoder: Encoder<f32>,
    pub emulator: EmulatorWeights<f32>,
    /// `(step, train_loss, val_loss)`; val is NaN between evaluations.
    pub curves: Vec<(u64, f64, f64)>,
    pub best_val: f64,
    pub best_step: u64,
}

struct BatchPair {
    item: usize,
    rollout: usize,
}

/// Mean-over-steps, mean-over-batch reverse KL of the emulator against
/// the stored rollout distributions, conditioned on per-subject
/// representations.
#[allow(clippy::too_many_arguments)]
fn batch_loss(
    tape: &mut Tape<f32>,
    encoder: &Encoder<f32>,
    enc_ids: &encoders::ParamIds,
    em_dims: LstmDims,
    em_ids: &encoders::ParamIds,
    dataset: &SslDataset,
    pairs: &[BatchPair],
    alphabet: Alphabet,
    augment: Option<&mut RngStream>,
) -> Result<TensorId, NumError> {
    let batch = pairs.len();
    let mut aug_rng = augment;

    // Per-subject representations, stacked to [B, Z].
    let mut z_rows = Vec::with_capacity(batch);
    for pair in pairs {
        let item = &dataset.items[pair.item];
        let z = match aug_rng.as_deref_mut() {
            Some(rng) => {
                let perm = PermutationSpec::random(
                    item.weights.dims.layers,
                    item.weights.dims.hidden,
                    rng,
                );
                let permuted = apply_permutation(&item.weights, &perm)
                    .expect("random permutation is valid");
                encoder.encode_on_tape(tape, enc_ids, &permuted)?
            }
            None => encoder.encode_on_tape(tape, enc_ids, &item.weights)?,
        };
        z_rows.push(z);
    }
    let z = encoders_vstack(tape, &z_rows)?;

    let rollouts: Vec<&Rollout> = pairs
        .iter()
        .map(|p| &dataset.items[p.item].rollouts[p.rollout])
        .collect();
    let steps = rollouts.iter().map(|r| r.len()).max().unwrap_or(1);
    let inputs: Vec<Vec<Token>> = rollouts.iter().map(|r| r.inputs.clone()).collect();

    let (graph, cond) = emulator_graph(tape, em_ids, em_dims)?;
    let outputs = emulator_forward_batch(tape, &graph, cond, z, &inputs, steps, alphabet)?;

    // Entry weights: 1 / (B * T_b) on live positions, 0 on padding.
    let width = alphabet.size();
    let mut total: Option<TensorId> = None;
    for (t, q) in outputs.into_iter().enumerate() {
        let mut any = false;
        let mut target_rows: Vec<Vec<f32>> = Vec::with_capacity(batch);
        let mut weights = Tensor::<f32>::zeros(&[batch, width]);
        for (b, rollout) in rollouts.iter().enumerate() {
            if t < rollout.len() {
                any = true;
                target_rows.push(rollout.outputs[t].clone());
                let w = 1.0 / (batch as f32 * rollout.len() as f32);
                for j in 0..width {
                    weights.data_mut()[b * width + j] = w;
                }
            } else {
                target_rows.push(vec![1.0 / width as f32; width]);
            }
        }
        if !any {
            break;
        }
        let logs = tape.constant(clamped_log_targets::<f32>(&target_rows));
        let w = tape.constant(weights);
        let term = reverse_kl_node(tape, q, logs, w)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, term)?,
            None => term,
        });
    }
    Ok(total.expect("non-empty batch"))
}

fn encoders_vstack(tape: &mut Tape<f32>, rows: &[TensorId]) -> Result<TensorId, NumError> {
    if rows.len() == 1 {
        return Ok(rows[0]);
    }
    let cols: Vec<TensorId> = rows
        .iter()
        .map(|&r| tape.transpose(r))
        .collect::<Result<_, _>>()?;
    let wide = tape.concat_last_dim(&cols)?;
    tape.transpose(wide)
}

/// Evaluation is side-effect-free: fresh tape, no gradients, no state.
fn evaluate_loss(
    encoder: &Encoder<f32>,
    enc_params: &ParamSet<f32>,
    em_params: &ParamSet<f32>,
    em_dims: LstmDims,
    dataset: &SslDataset,
    pairs: &[BatchPair],
    alphabet: Alphabet,
    batch_size: usize,
) -> Result<f64, NumError> {
    let mut total = 0.0f64;
    let mut count = 0usize;
    for chunk in pairs.chunks(batch_size) {
        let mut tape = Tape::new();
        let enc_ids = enc_params.load_on_tape(&mut tape, false);
        let em_ids = em_params.load_on_tape(&mut tape, false);
        let loss = batch_loss(
            &mut tape, encoder, &enc_ids, em_dims, &em_ids, dataset, chunk, alphabet, None,
        )?;
        total += tape.value(loss).data()[0] as f64 * chunk.len() as f64;
        count += chunk.len();
    }
    Ok(total / count as f64)
}

/// Jointly train an encoder of the given kind and the emulator on the
/// zoo's train split, early-stopping on the val split. Returns the
/// best-validation snapshot.
pub fn ssl_train(
    kind: EncoderKind,
    loaded: &LoadedZoo,
    config: &SslConfig,
    arch: &EncoderArch,
) -> Result<SslRun, SslError> {
    let train = load_split_dataset(loaded, Split::Train)?;
    let val = load_split_dataset(loaded, Split::Val)?;
    let alphabet = Alphabet::dataset();
    let subject_dims = train.items[0].weights.dims;

    let root = RngStream::from_seed(config.seed);
    let mut init_rng = root.child(0);
    let mut encoder = Encoder::<f32>::new(kind, subject_dims, arch, &mut init_rng);
    let emulator = EmulatorWeights::<f32>::init(
        config.em_layers,
        config.em_hidden,
        alphabet.size(),
        arch.z_dim,
        &mut init_rng,
    );
    let em_dims = emulator.dims();
    let mut em_params = ParamSet::<f32>::new();
    emulator.register(&mut em_params);

    // Pre-assigned batch composition and a fixed validation subset.
    let mut batch_rng = root.child(1);
    let mut aug_rng = root.child(2);
    let mut val_rng = root.child(3);
    let val_pairs: Vec<BatchPair> = (0..config.val_pairs)
        .map(|_| {
            let item = val_rng.index(val.items.len());
            let rollout = val_rng.index(val.items[item].rollouts.len());
            BatchPair { item, rollout }
        })
        .collect();

    let enc_len = encoder.params.flat_len();
    let em_len = em_params.flat_len();
    let mut opt = AdamW::<f32>::new(enc_len + em_len, config.lr, config.weight_decay);

    let mut curves = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_step = 0;
    let mut best_enc = encoder.params.clone();
    let mut best_em = em_params.clone();

    for step in 0..=config.max_steps {
        // Validation / early-stopping bookkeeping.
        let mut val_loss = f64::NAN;
        if step % config.eval_interval == 0 || step == config.max_steps {
            val_loss = evaluate_loss(
                &encoder,
                &encoder.params,
                &em_params,
                em_dims,
                &val,
                &val_pairs,
                alphabet,
                config.batch_size,
            )?;
            if val_loss < best_val {
                best_val = val_loss;
                best_step = step;
                best_enc = encoder.params.clone();
                best_em = em_params.clone();
            }
        }
        if step == config.max_steps {
            curves.push((step, f64::NAN, val_loss));
            break;
        }

        let pairs: Vec<BatchPair> = (0..config.batch_size)
            .map(|_| {
                let item = batch_rng.index(train.items.len());
                let rollout = batch_rng.index(train.items[item].rollouts.len());
                BatchPair { item, rollout }
            })
            .collect();

        let mut tape = Tape::new();
        let enc_ids = encoder.params.load_on_tape(&mut tape, true);
        let em_ids = em_params.load_on_tape(&mut tape, true);
        let augment = kind.wants_permutation_augmentation().then_some(&mut aug_rng);
        let loss = batch_loss(
            &mut tape, &encoder, &enc_ids, em_dims, &em_ids, &train, &pairs, alphabet, augment,
        )?;
        let train_loss = tape.value(loss).data()[0] as f64;
        if !train_loss.is_finite() {
            return Err(SslError::Diverged {
                kind,
                step,
                loss: train_loss,
            });
        }
        curves.push((step, train_loss, val_loss));

        let grads = tape.backward(loss)?;
        let mut flat_grads = encoder.params.grads_flat(&enc_ids, &grads);
        flat_grads.extend(em_params.grads_flat(&em_ids, &grads));
        clip_global_norm(&mut flat_grads, config.clip_norm)?;

        let mut flat = encoder.params.flatten();
        flat.extend(em_params.flatten());
        opt.step(&mut flat, &flat_grads)?;
        encoder.params.set_from_flat(&flat[..enc_len]);
        em_params.set_from_flat(&flat[enc_len..]);
    }

    encoder.params = best_enc;
    let emulator = EmulatorWeights::from_params(em_dims, arch.z_dim, &best_em);
    Ok(SslRun {
        kind,
        encoder,
        emulator,
        curves,
        best_val,
        best_step,
    })
}

/// Re-evaluate a snapshot on the validation split (used to confirm the
/// early-stopping bookkeeping and for reporting).
pub fn revalidate(
    run: &SslRun,
    loaded: &LoadedZoo,
    config: &SslConfig,
) -> Result<f64, SslError> {
    let val = load_split_dataset(loaded, Split::Val)?;
    let mut em_params = ParamSet::<f32>::new();
    run.emulator.register(&mut em_params);
    let mut val_rng = RngStream::from_seed(config.seed).child(3);
    let val_pairs: Vec<BatchPair> = (0..config.val_pairs)
        .map(|_| {
            let item = val_rng.index(val.items.len());
            let rollout = val_rng.index(val.items[item].rollouts.len());
            BatchPair { item, rollout }
        })
        .collect();
    Ok(evaluate_loss(
        &run.encoder,
        &run.encoder.params,
        &em_params,
        run.emulator.dims(),
        &val,
        &val_pairs,
        Alphabet::dataset(),
        config.batch_size,
    )?)
}

/// Write loss curves as CSV (`step,train_loss,val_loss`).
pub fn write_curves(path: &std::path::Path, curves: &[(u64, f64, f64)]) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "step,train_loss,val_loss")?;
    for (step, train, val) in curves {
        let fmt = |v: f64| if v.is_nan() { String::new() } else { format!("{v}") };
        writeln!(f, "{step},{},{}", fmt(*train), fmt(*val))?;
    }
    f.flush()
}

impl SslRun {
    /// Mean reverse KL loss the Eq-1 objective assigns to a single
    /// subject/rollout pair under this run's snapshot (evaluation mode).
    pub fn pair_loss(&self, weights: &LstmWeights<f32>, rollout: &Rollout) -> Result<f64, SslError> {
        let mut em_params = ParamSet::<f32>::new();
        self.emulator.register(&mut em_params);
        let dataset = SslDataset {
            items: vec![SslItem {
                model_id: 0,
                step: 0,
                task: DatasetLanguageSpec::new(0, 0, 0).expect("valid"),
                accuracy: 0.0,
                weights: weights.clone(),
                rollouts: vec![rollout.clone()],
            }],
        };
        let pairs = [BatchPair { item: 0, rollout: 0 }];
        Ok(evaluate_loss(
            &self.encoder,
            &self.encoder.params,
            &em_params,
            self.emulator.dims(),
            &dataset,
            &pairs,
            Alphabet::dataset(),
            1,
        )?)
    }
}
