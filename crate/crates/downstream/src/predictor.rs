//! Property prediction from representations: the task as a three-hot
//! target (one class per offset) with binary cross-entropy, scalar
//! accuracy with mean squared error. The predictor trains on the train
//! split plus half of the OOD split and is evaluated on the val split
//! and the held-out OOD half.

use std::error::Error;
use std::fmt;

use encoders::{mlp::MlpDef, Encoder, EncoderArch, EncoderKind, ParamSet};
use formal_lang::DatasetLanguageSpec;
use numkit::{clip_global_norm, AdamW, NumError, RngStream, Tape, Tensor, TensorId};
use rnn_core::LstmWeights;
use zoo::{ood_half_a, LoadedZoo, Split, ZooError};

pub const OFFSET_CLASSES: usize = 6;
pub const THREE_HOT_DIM: usize = 3 * OFFSET_CLASSES;

#[derive(Debug)]
pub enum DownstreamError {
    Num(NumError),
    Zoo(ZooError),
    DegenerateTargets { detail: String },
    NoExamples,
}

impl fmt::Display for DownstreamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DownstreamError::Num(e) => write!(f, "numerics: {e}"),
            DownstreamError::Zoo(e) => write!(f, "zoo: {e}"),
            DownstreamError::DegenerateTargets { detail } => {
                write!(f, "degenerate targets: {detail}")
            }
            DownstreamError::NoExamples => write!(f, "no examples for the requested group"),
        }
    }
}

impl Error for DownstreamError {}

impl From<NumError> for DownstreamError {
    fn from(e: NumError) -> Self {
        DownstreamError::Num(e)
    }
}
impl From<ZooError> for DownstreamError {
    fn from(e: ZooError) -> Self {
        DownstreamError::Zoo(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    TaskThreeHot,
    Accuracy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalGroup {
    /// Zoo train split plus OOD half A: the predictor's training data.
    PredictorTrain,
    Val,
    /// OOD half B, never seen by the predictor.
    OodHeld,
}

/// Group assignment implementing the half-OOD protocol.
pub fn predictor_group(split: Split, task: &DatasetLanguageSpec) -> EvalGroup {
    match split {
        Split::Train => EvalGroup::PredictorTrain,
        Split::Val => EvalGroup::Val,
        Split::Ood => {
            if ood_half_a(task) {
                EvalGroup::PredictorTrain
            } else {
                EvalGroup::OodHeld
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct PropertyExample {
    pub z: Vec<f32>,
    pub task: DatasetLanguageSpec,
    pub accuracy: f64,
    pub group: EvalGroup,
}

/// Encode every zoo checkpoint with a frozen encoder.
pub fn collect_examples(
    loaded: &LoadedZoo,
    encoder: &Encoder<f32>,
) -> Result<Vec<PropertyExample>, DownstreamError> {
    let mut out = Vec::new();
    for record in loaded.records() {
        for ckpt in &record.checkpoints {
            let weights = loaded.load_weights(ckpt)?;
            let z = encoder.encode(&weights)?;
            out.push(PropertyExample {
                z,
                task: record.task,
                accuracy: ckpt.accuracy,
                group: predictor_group(record.split, &record.task),
            });
        }
    }
    if out.is_empty() {
        return Err(DownstreamError::NoExamples);
    }
    Ok(out)
}

pub fn three_hot(task: &DatasetLanguageSpec) -> [f32; THREE_HOT_DIM] {
    let mut t = [0.0f32; THREE_HOT_DIM];
    for (g, m) in task.offsets().into_iter().enumerate() {
        t[g * OFFSET_CLASSES + (m + 3) as usize] = 1.0;
    }
    t
}

/// All three argmaxes correct.
pub fn exact_task_match(pred: &[f32], task: &DatasetLanguageSpec) -> bool {
    let target = three_hot(task);
    for g in 0..3 {
        let seg = &pred[g * OFFSET_CLASSES..(g + 1) * OFFSET_CLASSES];
        let tseg = &target[g * OFFSET_CLASSES..(g + 1) * OFFSET_CLASSES];
        let pi = argmax(seg);
        let ti = argmax(tseg);
        if pi != ti {
            return false;
        }
    }
    true
}

fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug)]
pub struct PredictorConfig {
    pub hidden: usize,
    pub hidden_layers: usize,
    pub steps: u64,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub eval_interval: u64,
    pub seed: u64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            hidden_layers: 2,
            steps: 1500,
            batch_size: 64,
            lr: 1e-3,
            weight_decay: 1e-4,
            eval_interval: 50,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PropertyMetrics {
    pub train_loss: f64,
    pub val_loss: f64,
    pub ood_held_loss: f64,
    /// Exact-task accuracy (three-hot target only; NaN for scalars).
    pub train_exact: f64,
    pub val_exact: f64,
    pub ood_held_exact: f64,
}

fn target_dim(kind: TargetKind) -> usize {
    match kind {
        TargetKind::TaskThreeHot => THREE_HOT_DIM,
        TargetKind::Accuracy => 1,
    }
}

fn target_rows(kind: TargetKind, examples: &[&PropertyExample]) -> Tensor<f32> {
    let dim = target_dim(kind);
    let mut t = Tensor::zeros(&[examples.len(), dim]);
    for (row, ex) in examples.iter().enumerate() {
        match kind {
            TargetKind::TaskThreeHot => {
                t.data_mut()[row * dim..(row + 1) * dim].copy_from_slice(&three_hot(&ex.task));
            }
            TargetKind::Accuracy => {
                t.data_mut()[row * dim] = ex.accuracy as f32;
            }
        }
    }
    t
}

fn z_rows(examples: &[&PropertyExample]) -> Tensor<f32> {
    let dim = examples[0].z.len();
    let mut t = Tensor::zeros(&[examples.len(), dim]);
    for (row, ex) in examples.iter().enumerate() {
        t.data_mut()[row * dim..(row + 1) * dim].copy_from_slice(&ex.z);
    }
    t
}

/// BCE over sigmoid outputs for three-hot, MSE for scalars; returns the
/// scalar loss node given prediction logits.
fn loss_node(
    tape: &mut Tape<f32>,
    kind: TargetKind,
    logits: TensorId,
    targets: TensorId,
) -> Result<TensorId, NumError> {
    match kind {
        TargetKind::TaskThreeHot => {
            let eps = tape.constant(Tensor::scalar(1e-7f32));
            let ones = {
                let shape = tape.value(logits).shape().to_vec();
                tape.constant(Tensor::full(&shape, 1.0f32))
            };
            let s = tape.sigmoid(logits);
            let s_safe = tape.add(s, eps)?;
            let log_s = tape.log(s_safe)?;
            let not_s = tape.sub(ones, s)?;
            let not_s_safe = tape.add(not_s, eps)?;
            let log_not_s = tape.log(not_s_safe)?;
            let not_t = tape.sub(ones, targets)?;
            let pos = tape.elementwise_mul(targets, log_s)?;
            let neg = tape.elementwise_mul(not_t, log_not_s)?;
            let sum = tape.add(pos, neg)?;
            let mean = tape.mean_all(sum)?;
            Ok(tape.scale(mean, -1.0))
        }
        TargetKind::Accuracy => {
            let diff = tape.sub(logits, targets)?;
            let sq = tape.elementwise_mul(diff, diff)?;
            tape.mean_all(sq)
        }
    }
}

fn group_refs<'a>(examples: &'a [PropertyExample], group: EvalGroup) -> Vec<&'a PropertyExample> {
    examples.iter().filter(|e| e.group == group).collect()
}

fn check_not_degenerate(
    kind: TargetKind,
    train: &[&PropertyExample],
) -> Result<(), DownstreamError> {
    if kind != TargetKind::TaskThreeHot {
        return Ok(());
    }
    for g in 0..3 {
        let mut seen = std::collections::BTreeSet::new();
        for ex in train {
            seen.insert(ex.task.offsets()[g]);
        }
        if seen.len() < 2 {
            return Err(DownstreamError::DegenerateTargets {
                detail: format!("offset group {g} has a single class in the training data"),
            });
        }
    }
    Ok(())
}

pub struct PredictorRun {
    pub params: ParamSet<f32>,
    pub def: MlpDef,
    pub kind: TargetKind,
    pub metrics: PropertyMetrics,
}

fn eval_group_metrics(
    def: &MlpDef,
    params: &ParamSet<f32>,
    kind: TargetKind,
    examples: &[&PropertyExample],
) -> Result<(f64, f64), NumError> {
    if examples.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let mut tape = Tape::new();
    let ids = params.load_on_tape(&mut tape, false);
    let x = tape.constant(z_rows(examples));
    let logits = def.apply(&mut tape, &ids, x)?;
    let targets = tape.constant(target_rows(kind, examples));
    let loss = loss_node(&mut tape, kind, logits, targets)?;
    let loss_v = tape.value(loss).data()[0] as f64;

    let exact = match kind {
        TargetKind::TaskThreeHot => {
            let preds = tape.value(logits);
            let dim = THREE_HOT_DIM;
            let hits = examples
                .iter()
                .enumerate()
                .filter(|(row, ex)| {
                    exact_task_match(&preds.data()[row * dim..(row + 1) * dim], &ex.task)
                })
                .count();
            hits as f64 / examples.len() as f64
        }
        TargetKind::Accuracy => f64::NAN,
    };
    Ok((loss_v, exact))
}

/// Train the predictor MLP on frozen representations.
pub fn train_property_predictor(
    examples: &[PropertyExample],
    kind: TargetKind,
    config: &PredictorConfig,
) -> Result<PredictorRun, DownstreamError> {
    let train = group_refs(examples, EvalGroup::PredictorTrain);
    if train.is_empty() {
        return Err(DownstreamError::NoExamples);
    }
    check_not_degenerate(kind, &train)?;

    let z_dim = train[0].z.len();
    let mut widths = vec![z_dim];
    widths.extend(std::iter::repeat(config.hidden).take(config.hidden_layers));
    widths.push(target_dim(kind));
    let def = MlpDef::new("pred", widths);

    let mut rng = RngStream::from_seed(config.seed);
    let mut params = ParamSet::<f32>::new();
    def.init(&mut params, &mut rng);

    let val = group_refs(examples, EvalGroup::Val);
    let mut opt = AdamW::<f32>::new(params.flat_len(), config.lr, config.weight_decay);
    let mut best = (f64::INFINITY, params.clone());

    for step in 0..=config.steps {
        if step % config.eval_interval == 0 || step == config.steps {
            let probe = if val.is_empty() { &train } else { &val };
            let (loss, _) = eval_group_metrics(&def, &params, kind, probe)?;
            if loss < best.0 {
                best = (loss, params.clone());
            }
        }
        if step == config.steps {
            break;
        }
        let batch: Vec<&PropertyExample> = (0..config.batch_size)
            .map(|_| train[rng.index(train.len())])
            .collect();
        let mut tape = Tape::new();
        let ids = params.load_on_tape(&mut tape, true);
        let x = tape.constant(z_rows(&batch));
        let logits = def.apply(&mut tape, &ids, x)?;
        let targets = tape.constant(target_rows(kind, &batch));
        let loss = loss_node(&mut tape, kind, logits, targets)?;
        let grads = tape.backward(loss)?;
        let mut gflat = params.grads_flat(&ids, &grads);
        clip_global_norm(&mut gflat, 1.0)?;
        let mut flat = params.flatten();
        opt.step(&mut flat, &gflat)?;
        params.set_from_flat(&flat);
    }

    let params = best.1;
    let metrics = full_metrics(&def, &params, kind, examples)?;
    Ok(PredictorRun {
        params,
        def,
        kind,
        metrics,
    })
}

fn full_metrics(
    def: &MlpDef,
    params: &ParamSet<f32>,
    kind: TargetKind,
    examples: &[PropertyExample],
) -> Result<PropertyMetrics, NumError> {
    let (train_loss, train_exact) =
        eval_group_metrics(def, params, kind, &group_refs(examples, EvalGroup::PredictorTrain))?;
    let (val_loss, val_exact) =
        eval_group_metrics(def, params, kind, &group_refs(examples, EvalGroup::Val))?;
    let (ood_held_loss, ood_held_exact) =
        eval_group_metrics(def, params, kind, &group_refs(examples, EvalGroup::OodHeld))?;
    Ok(PropertyMetrics {
        train_loss,
        val_loss,
        ood_held_loss,
        train_exact,
        val_exact,
        ood_held_exact,
    })
}

/// End-to-end supervised baseline: a randomly initialized encoder and
/// the same predictor head, trained jointly on the property target
/// under the same split protocol.
pub struct SupervisedExample {
    pub weights: LstmWeights<f32>,
    pub task: DatasetLanguageSpec,
    pub accuracy: f64,
    pub group: EvalGroup,
}

pub fn load_supervised_examples(
    loaded: &LoadedZoo,
) -> Result<Vec<SupervisedExample>, DownstreamError> {
    let mut out = Vec::new();
    for record in loaded.records() {
        for ckpt in &record.checkpoints {
            out.push(SupervisedExample {
                weights: loaded.load_weights(ckpt)?,
                task: record.task,
                accuracy: ckpt.accuracy,
                group: predictor_group(record.split, &record.task),
            });
        }
    }
    if out.is_empty() {
        return Err(DownstreamError::NoExamples);
    }
    Ok(out)
}

pub fn train_supervised_baseline(
    kind: EncoderKind,
    examples: &[SupervisedExample],
    target: TargetKind,
    config: &PredictorConfig,
    arch: &EncoderArch,
) -> Result<PropertyMetrics, DownstreamError> {
    let train: Vec<&SupervisedExample> =
        examples.iter().filter(|e| e.group == EvalGroup::PredictorTrain).collect();
    if train.is_empty() {
        return Err(DownstreamError::NoExamples);
    }
    let dims = train[0].weights.dims;

    let mut rng = RngStream::from_seed(config.seed);
    let mut encoder = Encoder::<f32>::new(kind, dims, arch, &mut rng);
    let mut widths = vec![arch.z_dim];
    widths.extend(std::iter::repeat(config.hidden).take(config.hidden_layers));
    widths.push(target_dim(target));
    let def = MlpDef::new("pred", widths);
    let mut head = ParamSet::<f32>::new();
    def.init(&mut head, &mut rng);

    let enc_len = encoder.params.flat_len();
    let mut opt = AdamW::<f32>::new(enc_len + head.flat_len(), config.lr, config.weight_decay);

    let batch_forward = |tape: &mut Tape<f32>,
                         encoder: &Encoder<f32>,
                         enc_ids: &encoders::ParamIds,
                         head_ids: &encoders::ParamIds,
                         batch: &[&SupervisedExample]|
     -> Result<TensorId, NumError> {
        let mut zs = Vec::with_capacity(batch.len());
        for ex in batch {
            zs.push(encoder.encode_on_tape(tape, enc_ids, &ex.weights)?);
        }
        let cols: Vec<TensorId> = zs
            .iter()
            .map(|&z| tape.transpose(z))
            .collect::<Result<_, _>>()?;
        let wide = tape.concat_last_dim(&cols)?;
        let stacked = tape.transpose(wide)?;
        def.apply(tape, head_ids, stacked)
    };

    let as_property = |batch: &[&SupervisedExample]| -> Vec<PropertyExample> {
        batch
            .iter()
            .map(|e| PropertyExample {
                z: Vec::new(),
                task: e.task,
                accuracy: e.accuracy,
                group: e.group,
            })
            .collect()
    };

    for _step in 0..config.steps {
        let batch: Vec<&SupervisedExample> = (0..config.batch_size.min(train.len()))
            .map(|_| train[rng.index(train.len())])
            .collect();
        let mut tape = Tape::new();
        let enc_ids = encoder.params.load_on_tape(&mut tape, true);
        let head_ids = head.load_on_tape(&mut tape, true);
        let logits = batch_forward(&mut tape, &encoder, &enc_ids, &head_ids, &batch)?;
        let props = as_property(&batch);
        let prop_refs: Vec<&PropertyExample> = props.iter().collect();
        let targets = tape.constant(target_rows(target, &prop_refs));
        let loss = loss_node(&mut tape, target, logits, targets)?;
        let grads = tape.backward(loss)?;
        let mut gflat = encoder.params.grads_flat(&enc_ids, &grads);
        gflat.extend(head.grads_flat(&head_ids, &grads));
        clip_global_norm(&mut gflat, 1.0)?;
        let mut flat = encoder.params.flatten();
        flat.extend(head.flatten());
        opt.step(&mut flat, &gflat)?;
        encoder.params.set_from_flat(&flat[..enc_len]);
        head.set_from_flat(&flat[enc_len..]);
    }

    // Final metrics: encode everything with the trained encoder, then
    // reuse the frozen-path evaluation.
    let property: Vec<PropertyExample> = examples
        .iter()
        .map(|e| {
            Ok(PropertyExample {
                z: encoder.encode(&e.weights)?,
                task: e.task,
                accuracy: e.accuracy,
                group: e.group,
            })
        })
        .collect::<Result<_, NumError>>()?;
    Ok(full_metrics(&def, &head, target, &property)?)
}
