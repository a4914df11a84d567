//! Emulation-quality evaluation: compare each subject's generation
//! accuracy with the accuracy of its conditioned emulation, aggregated
//! at equally spaced performance levels.

use encoders::Encoder;
use formal_lang::{generation_accuracy, Alphabet};
use numkit::RngStream;
use zoo::Split;

use crate::emulator::{EmulatorModel, EmulatorWeights};
use crate::train::{load_split_dataset, SslError};

#[derive(Clone, Debug)]
pub struct EmulationPoint {
    pub level: f64,
    pub original_mean: f64,
    pub emulated_mean: f64,
}

/// For each of `num_levels` equally spaced accuracy targets between the
/// split's best and worst, select the `per_level` checkpoints closest
/// to the target, emulate each (autoregressive sampling conditioned on
/// its representation), and average both accuracies.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_emulation(
    encoder: &Encoder<f32>,
    emulator: &EmulatorWeights<f32>,
    loaded: &zoo::LoadedZoo,
    split: Split,
    num_levels: usize,
    per_level: usize,
    samples_per_model: usize,
    max_len: usize,
    rng: &mut RngStream,
) -> Result<Vec<EmulationPoint>, SslError> {
    let dataset = load_split_dataset(loaded, split)?;
    let alphabet = Alphabet::dataset();

    let lo = dataset
        .items
        .iter()
        .map(|i| i.accuracy)
        .fold(f64::INFINITY, f64::min);
    let hi = dataset
        .items
        .iter()
        .map(|i| i.accuracy)
        .fold(f64::NEG_INFINITY, f64::max);

    // Emulated accuracy per checkpoint, computed lazily (levels overlap).
    let mut emulated: Vec<Option<f64>> = vec![None; dataset.items.len()];
    let mut points = Vec::with_capacity(num_levels);
    for level_idx in 0..num_levels {
        let level = if num_levels == 1 {
            lo
        } else {
            lo + (hi - lo) * level_idx as f64 / (num_levels - 1) as f64
        };
        let mut order: Vec<usize> = (0..dataset.items.len()).collect();
        order.sort_by(|&a, &b| {
            let da = (dataset.items[a].accuracy - level).abs();
            let db = (dataset.items[b].accuracy - level).abs();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        order.truncate(per_level.min(order.len()));

        let mut orig_sum = 0.0;
        let mut emu_sum = 0.0;
        for &idx in &order {
            let item = &dataset.items[idx];
            orig_sum += item.accuracy;
            if emulated[idx].is_none() {
                let z = encoder.encode(&item.weights)?;
                let mut model = EmulatorModel::new(emulator.clone(), alphabet, z);
                let mut sample_rng = rng.child((idx as u64) << 8);
                let acc = generation_accuracy(
                    &mut model,
                    &item.task,
                    samples_per_model,
                    max_len,
                    &mut sample_rng,
                )
                .map_err(|e| SslError::Zoo(zoo::ZooError::Lang(e)))?;
                emulated[idx] = Some(acc);
            }
            emu_sum += emulated[idx].unwrap();
        }
        points.push(EmulationPoint {
            level,
            original_mean: orig_sum / order.len() as f64,
            emulated_mean: emu_sum / order.len() as f64,
        });
    }
    Ok(points)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx.sqrt() * vy.sqrt())
}
