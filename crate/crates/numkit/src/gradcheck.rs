//! Finite-difference verification of tape gradients.
//!
//! Checks run in `f64`: central differences at `eps ~ 1e-5` give
//! roughly eight significant digits there, which makes the 1e-4
//! acceptance threshold meaningful.

use crate::rng::RngStream;
use crate::tape::{Tape, TensorId};
use crate::tensor::{NumError, Tensor};

type Result<T> = std::result::Result<T, NumError>;

/// Maximum relative error between analytic and central-difference
/// gradients over every coordinate of every parameter tensor.
///
/// `build` must construct the scalar loss from the given leaves and be
/// deterministic; it is re-evaluated twice per checked coordinate.
pub fn grad_check_multi<F>(params: &[Tensor<f64>], eps: f64, build: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[TensorId]) -> Result<TensorId>,
{
    let coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, t)| (0..t.len()).map(move |i| (p, i)))
        .collect();
    check_coords(params, eps, &coords, build)
}

/// Single-parameter form of [`grad_check_multi`].
pub fn grad_check<F>(params: &Tensor<f64>, eps: f64, build: F) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, TensorId) -> Result<TensorId>,
{
    grad_check_multi(std::slice::from_ref(params), eps, |tape, ids| {
        build(tape, ids[0])
    })
}

/// Like [`grad_check_multi`] but verifying only `max_coords` randomly
/// chosen coordinates. Used for parameter sets too large to sweep.
pub fn grad_check_sampled<F>(
    params: &[Tensor<f64>],
    eps: f64,
    max_coords: usize,
    rng: &mut RngStream,
    build: F,
) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[TensorId]) -> Result<TensorId>,
{
    let mut coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, t)| (0..t.len()).map(move |i| (p, i)))
        .collect();
    if coords.len() > max_coords {
        rng.shuffle(&mut coords);
        coords.truncate(max_coords);
    }
    check_coords(params, eps, &coords, build)
}

fn check_coords<F>(
    params: &[Tensor<f64>],
    eps: f64,
    coords: &[(usize, usize)],
    build: F,
) -> Result<f64>
where
    F: Fn(&mut Tape<f64>, &[TensorId]) -> Result<TensorId>,
{
    if eps <= 0.0 {
        return Err(NumError::InvalidArgument {
            op: "grad_check",
            detail: "eps must be positive".into(),
        });
    }

    // Analytic pass.
    let mut tape = Tape::new();
    let ids: Vec<TensorId> = params.iter().map(|p| tape.leaf(p.clone(), true)).collect();
    let loss = build(&mut tape, &ids)?;
    if !tape.value(loss).all_finite() {
        return Err(NumError::NonFinite { op: "grad_check" });
    }
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor<f64>> = ids
        .iter()
        .zip(params.iter())
        .map(|(id, p)| grads.get_or_zeros(*id, p.shape()))
        .collect();

    let eval = |perturbed: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let ids: Vec<TensorId> = perturbed
            .iter()
            .map(|p| tape.leaf(p.clone(), false))
            .collect();
        let loss = build(&mut tape, &ids)?;
        let v = tape.value(loss).data()[0];
        if !v.is_finite() {
            return Err(NumError::NonFinite { op: "grad_check" });
        }
        Ok(v)
    };

    let mut worst: f64 = 0.0;
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    for &(p, i) in coords {
        let orig = work[p].data()[i];
        work[p].data_mut()[i] = orig + eps;
        let plus = eval(&work)?;
        work[p].data_mut()[i] = orig - eps;
        let minus = eval(&work)?;
        work[p].data_mut()[i] = orig;

        let fd = (plus - minus) / (2.0 * eps);
        let an = analytic[p].data()[i];
        let diff = (an - fd).abs();
        // Central differences carry cancellation roundoff of a few ulps
        // of the loss divided by 2*eps. Differences inside that bound
        // are agreement at working precision, not gradient error; any
        // genuine defect shows up orders of magnitude above it.
        let noise = 64.0 * f64::EPSILON * plus.abs().max(minus.abs()).max(1.0) / (2.0 * eps);
        if diff <= noise {
            continue;
        }
        let denom = an.abs().max(fd.abs()).max(1e-8);
        worst = worst.max(diff / denom);
    }
    Ok(worst)
}
