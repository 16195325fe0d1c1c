use crate::error::{Error, Result};
use crate::filter::lowpass_plane;
use crate::noise::{derive_noise_for, SeedRecord};
use crate::tensor::LatentTensor;

/// Parameters of the synthetic stand-in for a generated latent.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    /// Target NoisePrint, exact by construction.
    pub alpha: f64,
    /// Low-pass radius of the structure field as a fraction of Nyquist.
    pub structure_cutoff: f64,
    pub shape: (usize, usize, usize),
    pub structure_seed: SeedRecord,
    /// Per-element RMS of the result.
    pub scale: f64,
}

impl SyntheticSpec {
    pub fn new(
        alpha: f64,
        structure_cutoff: f64,
        shape: (usize, usize, usize),
        structure_seed: SeedRecord,
    ) -> Self {
        Self {
            alpha,
            structure_cutoff,
            shape,
            structure_seed,
            scale: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `z = scale * sqrt(d) * (alpha e + sqrt(1 - alpha^2) u)` where `e` is the
/// unit derived noise and `u` a unit low-pass field orthogonalized against it.
pub fn synth_latent(seed: &SeedRecord, spec: &SyntheticSpec) -> Result<LatentTensor> {
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(Error::OutOfRange(format!("alpha {} outside [0, 1]", spec.alpha)));
    }
    if !(spec.structure_cutoff > 0.0 && spec.structure_cutoff <= 1.0) {
        return Err(Error::OutOfRange(format!(
            "structure_cutoff {} outside (0, 1]",
            spec.structure_cutoff
        )));
    }
    let (c, h, w) = spec.shape;
    let eps = derive_noise_for(seed, spec.shape)?;
    let e_raw = eps.to_f64();
    let e_norm = dot(&e_raw, &e_raw).sqrt();
    let e: Vec<f64> = e_raw.iter().map(|v| v / e_norm).collect();

    let raw = derive_noise_for(&spec.structure_seed, spec.shape)?.to_f64();
    let mut u = Vec::with_capacity(raw.len());
    for ch in 0..c {
        u.extend(lowpass_plane(&raw[ch * h * w..(ch + 1) * h * w], h, w, spec.structure_cutoff));
    }
    // two Gram-Schmidt passes for orthogonality at f64 precision
    for _ in 0..2 {
        let proj = dot(&u, &e);
        u.iter_mut().zip(&e).for_each(|(x, y)| *x -= proj * y);
    }
    let u_norm = dot(&u, &u).sqrt();
    if u_norm == 0.0 {
        return Err(Error::Degenerate("structure field vanished after filtering".into()));
    }

    let a = spec.alpha;
    let b = (1.0 - a * a).max(0.0).sqrt();
    let gain = spec.scale * (spec.dim() as f64).sqrt();
    let z: Vec<f32> = e
        .iter()
        .zip(&u)
        .map(|(x, y)| (gain * (a * x + b * y / u_norm)) as f32)
        .collect();
    let mut z = LatentTensor::new(c, h, w, z)?;
    refine_cosine(&mut z, eps.data(), a);
    Ok(z)
}

/// Nudges entries of `z` by single f32 ulps until its cosine with `eps`
/// (evaluated on the stored f32 values) is within ~1e-12 of `target`.
fn refine_cosine(z: &mut LatentTensor, eps: &[f32], target: f64) {
    let e: Vec<f64> = eps.iter().map(|&v| f64::from(v)).collect();
    let ne = dot(&e, &e).sqrt();
    let data = z.data_mut();
    let mut dz: f64 = data.iter().zip(&e).map(|(&x, y)| f64::from(x) * y).sum();
    let mut zz: f64 = data.iter().map(|&x| f64::from(x) * f64::from(x)).sum();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&i, &j| e[j].abs().total_cmp(&e[i].abs()));
    let cos = |dz: f64, zz: f64| dz / (zz.sqrt() * ne);
    for _ in 0..4 {
        for &i in &order {
            let err = target - cos(dz, zz);
            if err.abs() < 1e-12 {
                return;
            }
            let x = data[i];
            let up = f32::from_bits(if x >= 0.0 { x.to_bits() + 1 } else { x.to_bits() - 1 });
            let down = if x == 0.0 {
                -f32::from_bits(1)
            } else {
                f32::from_bits(if x > 0.0 { x.to_bits() - 1 } else { x.to_bits() + 1 })
            };
            let mut best = (err.abs(), x);
            for cand in [up, down] {
                let (c, old) = (f64::from(cand), f64::from(x));
                let nd = dz + (c - old) * e[i];
                let nz = zz + c * c - old * old;
                let r = (target - cos(nd, nz)).abs();
                if r < best.0 {
                    best = (r, cand);
                }
            }
            if best.1 != x {
                let (c, old) = (f64::from(best.1), f64::from(x));
                dz += (c - old) * e[i];
                zz += c * c - old * old;
                data[i] = best.1;
            }
        }
    }
}
