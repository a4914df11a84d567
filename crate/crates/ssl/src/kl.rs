//! Reverse Kullback-Leibler divergence: `sum_c q_c (log q_c - log p_c)`
//! with the model distribution `q` first. Mode-seeking: q pays for mass
//! it places where the target has none.

use numkit::{NumError, Real, Tape, Tensor, TensorId};

/// Floor applied to target entries (then renormalized) before logs.
pub const TARGET_CLAMP: f64 = 1e-6;

/// Plain scalar form with `0 * log 0 = 0`.
pub fn reverse_kl<T: Real>(model: &[T], target: &[T]) -> f64 {
    assert_eq!(model.len(), target.len());
    let clamped: Vec<f64> = target
        .iter()
        .map(|v| v.to_f64().max(TARGET_CLAMP))
        .collect();
    let norm: f64 = clamped.iter().sum();
    let mut kl = 0.0;
    for (q, p) in model.iter().zip(clamped.iter()) {
        let q = q.to_f64();
        if q > 0.0 {
            kl += q * (q.ln() - (p / norm).ln());
        }
    }
    kl
}

/// Target rows clamped and renormalized, returned as log-probabilities
/// ready for the tape composition.
pub fn clamped_log_targets<T: Real>(rows: &[Vec<f32>]) -> Tensor<T> {
    let width = rows[0].len();
    let mut data = Vec::with_capacity(rows.len() * width);
    for row in rows {
        let clamped: Vec<f64> = row.iter().map(|&v| (v as f64).max(TARGET_CLAMP)).collect();
        let norm: f64 = clamped.iter().sum();
        for v in clamped {
            data.push(T::from_f64((v / norm).ln()));
        }
    }
    Tensor::new(vec![rows.len(), width], data).expect("target shape")
}

/// Tape composition of the reverse KL between a distribution node `q`
/// (`[B, A]`, rows summing to one) and constant log-targets, weighted
/// per entry and summed to a scalar. The model side is floored at
/// `TARGET_CLAMP` and renormalized so logs stay finite; the perturbation
/// is far below every tolerance used against the plain form.
pub fn reverse_kl_node<T: Real>(
    tape: &mut Tape<T>,
    q: TensorId,
    log_targets: TensorId,
    entry_weights: TensorId,
) -> Result<TensorId, NumError> {
    let width = tape.value(q).shape()[1] as f64;
    let eps = tape.constant(Tensor::scalar(T::from_f64(TARGET_CLAMP)));
    let shifted = tape.add(q, eps)?;
    let q_safe = tape.scale(shifted, T::from_f64(1.0 / (1.0 + width * TARGET_CLAMP)));
    let log_q = tape.log(q_safe)?;
    let diff = tape.sub(log_q, log_targets)?;
    let terms = tape.elementwise_mul(q_safe, diff)?;
    let weighted = tape.elementwise_mul(terms, entry_weights)?;
    Ok(tape.sum_all(weighted))
}
