//! Optimization attack that pushes a latent away from an estimate of its
//! initial noise while staying close to the original.
//!
//! Loss: `L(x) = 0.5 |x - z|^2 / |z|^2 + w cos(x, e)`. The fidelity term is
//! measured relative to `|z|^2` so the attack is invariant to the latent's
//! scale, like the score it targets.

use crate::error::{Error, Result};
use crate::tensor::LatentTensor;

/// Consecutive loss increases tolerated before declaring divergence.
pub const DIVERGENCE_PATIENCE: usize = 10;

#[derive(Debug, Clone)]
pub struct DecorrelateOutcome {
    pub attacked: LatentTensor,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub steps: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Adversary's noise estimate: `sqrt(1 - mix) eps + sqrt(mix) other`.
/// `mix` is the fraction of the estimate's variance that is unrelated noise.
pub fn mixed_estimate(eps: &LatentTensor, other: &LatentTensor, mix: f64) -> Result<LatentTensor> {
    eps.ensure_same_shape(other)?;
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::OutOfRange(format!("mix {mix} outside [0, 1]")));
    }
    if mix == 0.0 {
        return Ok(eps.clone());
    }
    let (a, b) = ((1.0 - mix).sqrt(), mix.sqrt());
    let data = eps
        .data()
        .iter()
        .zip(other.data())
        .map(|(&x, &y)| (a * f64::from(x) + b * f64::from(y)) as f32)
        .collect();
    LatentTensor::new(eps.channels(), eps.height(), eps.width(), data)
}

/// Fixed-step gradient descent on the loss above, starting from `z`.
/// Step size is `|z|^2 / 2`, half the inverse curvature of the fidelity term.
pub fn decorrelate_attack(
    z: &LatentTensor,
    eps_estimate: &LatentTensor,
    w: f64,
    steps: usize,
) -> Result<DecorrelateOutcome> {
    descend(z, eps_estimate, w, steps, 0.5)
}

fn descend(
    z: &LatentTensor,
    eps_estimate: &LatentTensor,
    w: f64,
    steps: usize,
    step_scale: f64,
) -> Result<DecorrelateOutcome> {
    z.ensure_same_shape(eps_estimate)?;
    if !w.is_finite() || w < 0.0 {
        return Err(Error::OutOfRange(format!("weight {w} must be finite and >= 0")));
    }
    let z64 = z.to_f64();
    let zz = dot(&z64, &z64);
    let e = eps_estimate.to_f64();
    let ne = dot(&e, &e).sqrt();
    if zz == 0.0 || ne == 0.0 {
        return Err(Error::Degenerate("zero-norm latent or noise estimate".into()));
    }
    let e: Vec<f64> = e.iter().map(|v| v / ne).collect();

    let loss = |x: &[f64]| -> (f64, f64, f64) {
        let xx = dot(x, x);
        let xe = dot(x, &e);
        let fid: f64 = x.iter().zip(&z64).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let cos = xe / xx.sqrt();
        (0.5 * fid / zz + w * cos, xx, xe)
    };

    let eta = step_scale * zz;
    let mut x = z64.clone();
    let (initial_loss, mut xx, mut xe) = loss(&x);
    let mut current = initial_loss;
    let mut rising = 0usize;
    let mut taken = 0usize;
    if w > 0.0 {
        for step in 0..steps {
            let nx = xx.sqrt();
            let cos = xe / nx;
            // d cos / dx = e / |x| - cos x / |x|^2
            for i in 0..x.len() {
                let g = (x[i] - z64[i]) / zz + w * (e[i] / nx - cos * x[i] / xx);
                x[i] -= eta * g;
            }
            let (next, nxx, nxe) = loss(&x);
            if !next.is_finite() {
                return Err(Error::Diverged(format!("non-finite loss at step {step}")));
            }
            rising = if next > current { rising + 1 } else { 0 };
            if rising >= DIVERGENCE_PATIENCE {
                return Err(Error::Diverged(format!(
                    "loss rose for {DIVERGENCE_PATIENCE} consecutive steps (step {step}, loss {next:.6e})"
                )));
            }
            current = next;
            xx = nxx;
            xe = nxe;
            taken = step + 1;
        }
    }
    let attacked = if taken == 0 {
        z.clone()
    } else {
        LatentTensor::from_f64(z.channels(), z.height(), z.width(), &x)?
    };
    Ok(DecorrelateOutcome {
        attacked,
        initial_loss,
        final_loss: current,
        steps: taken,
    })
}
