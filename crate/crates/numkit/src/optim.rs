//! AdamW with decoupled weight decay, global-norm gradient clipping,
//! and the piecewise-linear learning-rate schedule used for subject
//! training.

use crate::scalar::Real;
use crate::tensor::{NumError, Tensor};

/// AdamW optimizer state over one flat parameter vector.
///
/// Steps with non-finite gradients are skipped and counted rather than
/// poisoning the moments.
#[derive(Clone, Debug)]
pub struct AdamW<T> {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<T>,
    v: Vec<T>,
    skipped: u64,
}

impl<T: Real> AdamW<T> {
    pub fn new(len: usize, lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![T::ZERO; len],
            v: vec![T::ZERO; len],
            skipped: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn skipped_steps(&self) -> u64 {
        self.skipped
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    /// One decoupled-weight-decay update with bias correction:
    ///
    /// ```text
    /// m <- b1 m + (1-b1) g          m_hat = m / (1 - b1^t)
    /// v <- b2 v + (1-b2) g^2        v_hat = v / (1 - b2^t)
    /// p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
    /// ```
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<(), NumError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NumError::ShapeMismatch {
                op: "adamw_step",
                detail: format!(
                    "state len {} vs params {} vs grads {}",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            self.skipped += 1;
            return Ok(());
        }
        self.step += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one_minus_b1 = T::from_f64(1.0 - self.beta1);
        let one_minus_b2 = T::from_f64(1.0 - self.beta2);
        let bc1 = T::from_f64(1.0 - self.beta1.powi(self.step as i32));
        let bc2 = T::from_f64(1.0 - self.beta2.powi(self.step as i32));
        let lr = T::from_f64(self.lr);
        let wd = T::from_f64(self.weight_decay);
        let eps = T::from_f64(self.epsilon);

        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + one_minus_b1 * g;
            *v = b2 * *v + one_minus_b2 * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p = *p - lr * (m_hat / (v_hat.sqrt() + eps) + wd * *p);
        }
        Ok(())
    }
}

/// Scale all gradients by `max_norm / norm` when the global L2 norm
/// exceeds `max_norm`. Returns the pre-clip norm.
pub fn clip_global_norm<T: Real>(grads: &mut [T], max_norm: f64) -> Result<f64, NumError> {
    if max_norm <= 0.0 {
        return Err(NumError::InvalidArgument {
            op: "clip_global_norm",
            detail: "max_norm must be positive".into(),
        });
    }
    let mut sq = 0.0f64;
    for g in grads.iter() {
        let v = g.to_f64();
        sq += v * v;
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let s = T::from_f64(max_norm / norm);
        for g in grads.iter_mut() {
            *g *= s;
        }
    }
    Ok(norm)
}

/// Piecewise-linear schedule through `(step, value)` knots; constant
/// extrapolation outside the knot range.
#[derive(Clone, Debug)]
pub struct PiecewiseLinear {
    knots: Vec<(u64, f64)>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<(u64, f64)>) -> Result<Self, NumError> {
        if knots.is_empty() || knots.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(NumError::InvalidArgument {
                op: "piecewise_linear",
                detail: "knots must be non-empty and strictly increasing in step".into(),
            });
        }
        Ok(Self { knots })
    }

    pub fn at(&self, step: u64) -> f64 {
        if step <= self.knots[0].0 {
            return self.knots[0].1;
        }
        for w in self.knots.windows(2) {
            let (s0, v0) = w[0];
            let (s1, v1) = w[1];
            if step <= s1 {
                let t = (step - s0) as f64 / (s1 - s0) as f64;
                return v0 + t * (v1 - v0);
            }
        }
        self.knots.last().unwrap().1
    }

    pub fn knots(&self) -> &[(u64, f64)] {
        &self.knots
    }
}

// Tensor-level convenience used by training loops that keep parameters
// as a list of named tensors.
pub fn flat_len<T: Real>(tensors: &[Tensor<T>]) -> usize {
    tensors.iter().map(|t| t.len()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_applies_pure_decay() {
        // p = 1, lr = 1e-4, wd = 0.01 -> p - lr*wd*p = 0.999999.
        let mut opt = AdamW::<f64>::new(1, 1e-4, 0.01);
        let mut p = vec![1.0];
        opt.step(&mut p, &[0.0]).unwrap();
        assert!((p[0] - 0.999999).abs() < 1e-12, "{}", p[0]);
    }

    #[test]
    fn unit_grad_fresh_state_matches_hand_evaluation() {
        // m = 0.1, v = 1e-3, m_hat = v_hat = 1 after bias correction:
        // p = 1 - 1e-4 * (1/(1 + 1e-8) + 0.01) ~= 0.999899.
        let mut opt = AdamW::<f64>::new(1, 1e-4, 0.01);
        let mut p = vec![1.0];
        opt.step(&mut p, &[1.0]).unwrap();
        let expected = 1.0 - 1e-4 * (1.0 / (1.0 + 1e-8) + 0.01);
        assert!((p[0] - expected).abs() < 1e-12);
        assert!((p[0] - 0.999899).abs() < 1e-9);
    }

    #[test]
    fn no_decay_zero_grad_is_identity() {
        let mut opt = AdamW::<f64>::new(3, 1e-3, 0.0);
        let mut p = vec![0.5, -2.0, 7.0];
        opt.step(&mut p, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.5, -2.0, 7.0]);
    }

    #[test]
    fn lr_zero_wd_zero_is_identity_even_with_grads() {
        let mut opt = AdamW::<f64>::new(2, 0.0, 0.0);
        let mut p = vec![1.5, -0.25];
        opt.step(&mut p, &[3.0, -1.0]).unwrap();
        assert_eq!(p, vec![1.5, -0.25]);
    }

    #[test]
    fn non_finite_grads_skip_and_count() {
        let mut opt = AdamW::<f64>::new(2, 1e-3, 0.01);
        let mut p = vec![1.0, 2.0];
        opt.step(&mut p, &[f64::NAN, 0.0]).unwrap();
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(opt.skipped_steps(), 1);
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn clip_scales_above_threshold() {
        let mut g = vec![3.0, 4.0];
        let norm = clip_global_norm(&mut g, 1.0).unwrap();
        assert!((norm - 5.0).abs() < 1e-12);
        assert!((g[0] - 0.6).abs() < 1e-12);
        assert!((g[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut g = vec![0.03, 0.04];
        clip_global_norm(&mut g, 0.1).unwrap();
        assert_eq!(g, vec![0.03, 0.04]);
    }

    #[test]
    fn schedule_interpolates_between_knots() {
        let s = PiecewiseLinear::new(vec![(0, 0.01), (1000, 0.003), (2000, 0.0003)]).unwrap();
        assert!((s.at(0) - 0.01).abs() < 1e-15);
        assert!((s.at(500) - 0.0065).abs() < 1e-15);
        assert!((s.at(1000) - 0.003).abs() < 1e-15);
        assert!((s.at(5000) - 0.0003).abs() < 1e-15);
    }
}
