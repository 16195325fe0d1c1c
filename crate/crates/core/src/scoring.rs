//! NoisePrint scores: plain, transform-extended and masked, plus spatial
//! correlation maps and the low-entropy diagnostic.
//!
//! Every score is accumulated in f64 sequentially over the flat index, so the
//! same inputs give the same bits on every run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::gaussian_blur_plane_f64;
use crate::tensor::LatentTensor;
use crate::transform::{apply_transform, transform_mask, OverlapMask, TransformSpec};

/// Minimum mask coverage accepted by [`extended_score`].
pub const MIN_MASK_COVERAGE: f64 = 0.01;

pub const LOW_ENTROPY_BLOCK: usize = 8;
pub const LOW_ENTROPY_VARIANCE: f64 = 1e-4;
pub const LOW_ENTROPY_FRACTION: f64 = 0.5;
pub const LOW_ENTROPY_MARGIN: f64 = 0.02;

/// Outcome of scoring one content/seed pair against a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub phi: f64,
    pub tau: f64,
    pub dimension_d: usize,
    pub pass: bool,
    pub transform: Option<TransformSpec>,
    pub masked_fraction: f64,
}

impl ScoreReport {
    pub fn new(
        phi: f64,
        tau: f64,
        dimension_d: usize,
        transform: Option<TransformSpec>,
        masked_fraction: f64,
    ) -> Self {
        Self {
            phi,
            tau,
            dimension_d,
            pass: phi >= tau,
            transform,
            masked_fraction,
        }
    }

    pub fn margin(&self) -> f64 {
        self.phi - self.tau
    }
}

/// Cosine similarity over the positions selected by `mask` (all positions
/// when `None`). Returns the cosine and the number of entries used.
pub fn masked_cosine(
    a: &LatentTensor,
    b: &LatentTensor,
    mask: Option<&OverlapMask>,
) -> Result<(f64, usize)> {
    a.ensure_same_shape(b)?;
    let plane = a.height() * a.width();
    if let Some(m) = mask {
        if m.height() != a.height() || m.width() != a.width() {
            return Err(Error::Shape(format!(
                "mask {}x{} vs tensor {}x{}",
                m.height(),
                m.width(),
                a.height(),
                a.width()
            )));
        }
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    let mut used = 0usize;
    match mask {
        None => {
            for (&x, &y) in a.data().iter().zip(b.data()) {
                let (x, y) = (f64::from(x), f64::from(y));
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            used = a.dim();
        }
        Some(m) => {
            for (i, (&x, &y)) in a.data().iter().zip(b.data()).enumerate() {
                if m.bits()[i % plane] {
                    let (x, y) = (f64::from(x), f64::from(y));
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                    used += 1;
                }
            }
        }
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("zero-norm input to cosine similarity".into()));
    }
    Ok((dot / (na.sqrt() * nb.sqrt()), used))
}

/// `<z, eps> / (|z| |eps|)`.
pub fn noiseprint_score(z: &LatentTensor, eps: &LatentTensor) -> Result<f64> {
    masked_cosine(z, eps, None).map(|(phi, _)| phi)
}

/// Cosine between `g(z)` and `eps` restricted to the overlap of `g`.
/// Returns the score and the mask coverage.
pub fn extended_score(
    z: &LatentTensor,
    eps: &LatentTensor,
    g: &TransformSpec,
) -> Result<(f64, f64)> {
    z.ensure_same_shape(eps)?;
    if g.is_identity() {
        return Ok((noiseprint_score(z, eps)?, 1.0));
    }
    let mask = transform_mask(g, z.height(), z.width());
    let coverage = mask.fraction();
    if coverage < MIN_MASK_COVERAGE {
        return Err(Error::InsufficientOverlap { coverage });
    }
    let aligned = apply_transform(z, g)?;
    let (phi, _) = masked_cosine(&aligned, eps, Some(&mask))?;
    Ok((phi, coverage))
}

/// Spatial correlation map and its threshold mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    pub height: usize,
    pub width: usize,
    /// Row-major smoothed local correlation.
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl CorrelationMap {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn to_tensor(&self) -> Result<LatentTensor> {
        LatentTensor::from_f64(1, self.height, self.width, &self.values)
    }

    /// Binary PGM (P5, maxval 255) of the threshold mask.
    pub fn mask_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.mask.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }
}

/// Per-location correlation of unit-normalized `z` and `eps`, summed over
/// channels and scaled by the number of spatial positions so that the map's
/// mean equals the global score. Smoothed by a Gaussian of width `sigma`
/// (radius `ceil(3 sigma)`, reflected boundary) and thresholded.
pub fn correlation_map(
    z: &LatentTensor,
    eps: &LatentTensor,
    sigma: f64,
    map_threshold: f64,
) -> Result<CorrelationMap> {
    z.ensure_same_shape(eps)?;
    if !(sigma > 0.0) {
        return Err(Error::OutOfRange(format!("sigma must be > 0, got {sigma}")));
    }
    let (nz, ne) = (z.norm(), eps.norm());
    if nz == 0.0 || ne == 0.0 {
        return Err(Error::Degenerate("zero-norm input to correlation map".into()));
    }
    let (h, w) = (z.height(), z.width());
    let plane = h * w;
    let scale = plane as f64 / (nz * ne);
    let mut raw = vec![0.0f64; plane];
    for c in 0..z.channels() {
        for ((acc, &a), &b) in raw.iter_mut().zip(z.plane(c)).zip(eps.plane(c)) {
            *acc += f64::from(a) * f64::from(b) * scale;
        }
    }
    let values = gaussian_blur_plane_f64(&raw, h, w, sigma);
    let mask = values.iter().map(|&v| v > map_threshold).collect();
    Ok(CorrelationMap {
        height: h,
        width: w,
        values,
        mask,
    })
}

/// Diagnostics for content likely to fail verification despite a true seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowEntropyReport {
    pub warning: bool,
    pub low_variance_block_fraction: f64,
    pub margin: f64,
}

/// Flags content dominated by flat blocks, or a pass with a thin margin.
pub fn low_entropy_warning(z: &LatentTensor, tau: f64, phi: f64) -> LowEntropyReport {
    let (h, w) = (z.height(), z.width());
    let mut blocks = 0usize;
    let mut flat = 0usize;
    for c in 0..z.channels() {
        let p = z.plane(c);
        for by in (0..h).step_by(LOW_ENTROPY_BLOCK) {
            for bx in (0..w).step_by(LOW_ENTROPY_BLOCK) {
                let mut n = 0.0;
                let mut s = 0.0;
                let mut s2 = 0.0;
                for y in by..(by + LOW_ENTROPY_BLOCK).min(h) {
                    for x in bx..(bx + LOW_ENTROPY_BLOCK).min(w) {
                        let v = f64::from(p[y * w + x]);
                        n += 1.0;
                        s += v;
                        s2 += v * v;
                    }
                }
                let mean = s / n;
                let var = (s2 / n - mean * mean).max(0.0);
                blocks += 1;
                if var < LOW_ENTROPY_VARIANCE {
                    flat += 1;
                }
            }
        }
    }
    let fraction = flat as f64 / blocks as f64;
    let margin = phi - tau;
    LowEntropyReport {
        warning: fraction > LOW_ENTROPY_FRACTION || (0.0..LOW_ENTROPY_MARGIN).contains(&margin),
        low_variance_block_fraction: fraction,
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{derive_noise_for, SeedRecord};
    use proptest::prelude::*;

    fn noise(byte: u8, shape: (usize, usize, usize)) -> LatentTensor {
        derive_noise_for(&SeedRecord::new([byte; 32], "t"), shape).unwrap()
    }

    /// Unit vector orthogonal to `e` built from `u` by Gram-Schmidt, in f64.
    fn orthogonal_unit(e: &[f64], u: &[f64]) -> Vec<f64> {
        let ee: f64 = e.iter().map(|v| v * v).sum();
        let ue: f64 = u.iter().zip(e).map(|(a, b)| a * b).sum();
        let r: Vec<f64> = u.iter().zip(e).map(|(a, b)| a - ue / ee * b).collect();
        let n = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.into_iter().map(|v| v / n).collect()
    }

    #[test]
    fn self_score_is_one() {
        let e = noise(1, (4, 16, 16));
        assert!((noiseprint_score(&e, &e).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_and_constructed_scores() {
        // Exact construction in f64 with an integer-valued, exactly
        // representable pair keeps f32 rounding out of the oracle.
        let d = 4 * 16 * 16;
        let e: Vec<f64> = (0..d).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let o: Vec<f64> = (0..d)
            .map(|i| match i % 6 {
                0 => 1.0,
                3 => -1.0,
                _ => 0.0,
            })
            .collect();
        assert_eq!(e.iter().zip(&o).map(|(a, b)| a * b).sum::<f64>(), 0.0);
        let et = LatentTensor::from_f64(4, 16, 16, &e).unwrap();
        let ot = LatentTensor::from_f64(4, 16, 16, &o).unwrap();
        assert!(noiseprint_score(&et, &ot).unwrap().abs() < 1e-10);

        // z = alpha e_hat + sqrt(1 - alpha^2) u_hat on Gaussian noise
        let eps = noise(2, (4, 64, 64));
        let e = eps.to_f64();
        let u = orthogonal_unit(&e, &noise(3, (4, 64, 64)).to_f64());
        let ne = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        let alpha = 0.482;
        let z: Vec<f64> = e
            .iter()
            .zip(&u)
            .map(|(a, b)| alpha * a / ne + (1.0 - alpha * alpha).sqrt() * b)
            .collect();
        // score in f64 directly: the oracle for the construction itself
        let dot: f64 = z.iter().zip(&e).map(|(a, b)| a * b).sum();
        let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((dot / (nz * ne) - alpha).abs() < 1e-10);
    }

    #[test]
    fn zero_norm_is_degenerate() {
        let z = LatentTensor::zeros(1, 4, 4);
        let e = noise(1, (1, 4, 4));
        assert!(matches!(noiseprint_score(&z, &e), Err(Error::Degenerate(_))));
    }

    #[test]
    fn extended_identity_is_bit_exact() {
        let z = noise(4, (4, 32, 32));
        let e = noise(5, (4, 32, 32));
        let (ext, cov) = extended_score(&z, &e, &TransformSpec::Identity).unwrap();
        assert_eq!(ext.to_bits(), noiseprint_score(&z, &e).unwrap().to_bits());
        assert_eq!(cov, 1.0);
        let full = OverlapMask::all_true(32, 32);
        let (m, n) = masked_cosine(&z, &e, Some(&full)).unwrap();
        assert_eq!(m.to_bits(), ext.to_bits());
        assert_eq!(n, z.dim());
    }

    #[test]
    fn tiny_overlap_is_rejected() {
        let z = noise(4, (1, 32, 32));
        let g = TransformSpec::Similarity {
            scale: 1.0,
            angle_degrees: 0.0,
            tx: 31.6,
            ty: 31.6,
        };
        assert!(matches!(
            extended_score(&z, &z, &g),
            Err(Error::InsufficientOverlap { .. })
        ));
    }

    #[test]
    fn correlation_map_fixtures() {
        let e = noise(6, (4, 32, 32));
        let m = correlation_map(&e, &e, 2.0, 0.0).unwrap();
        assert!(m.values.iter().all(|&v| v > 0.0));
        assert!(m.mask.iter().all(|&b| b));
        assert!((m.mean() - 1.0).abs() < 1e-9);

        // correlated on the left half only: the map is about 0.8 there and 0
        // on the right, so threshold at the midpoint
        let u = noise(7, (4, 32, 32));
        let mut z = u.clone();
        for c in 0..4 {
            for y in 0..32 {
                for x in 0..16 {
                    let i = (c * 32 + y) * 32 + x;
                    z.data_mut()[i] = 0.8 * e.data()[i] + 0.6 * u.data()[i];
                }
            }
        }
        let m = correlation_map(&z, &e, 2.0, 0.4).unwrap();
        let left = (0..32 * 32).filter(|&i| m.mask[i] && i % 32 < 16).count();
        let total = m.mask.iter().filter(|&&b| b).count();
        assert!(total > 0 && left as f64 / total as f64 > 0.8, "{left}/{total}");

        let pgm = m.mask_pgm();
        assert!(pgm.starts_with(b"P5\n32 32\n255\n"));
        assert_eq!(pgm.len(), 13 + 32 * 32);
    }

    #[test]
    fn correlation_map_independent_mean_near_zero() {
        // Monte Carlo over 40 independent pairs; the map mean equals the
        // score, whose standard deviation is 1/sqrt(d).
        let shape = (4, 32, 32);
        let d = 4096f64;
        let mut means = Vec::new();
        for i in 0..40u8 {
            let m = correlation_map(&noise(100 + i, shape), &noise(200 + i, shape), 2.0, 0.05)
                .unwrap();
            means.push(m.mean());
        }
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        let sd_mc = 1.0 / d.sqrt() / (means.len() as f64).sqrt();
        assert!(avg.abs() < 3.0 * sd_mc, "{avg}");
    }

    #[test]
    fn low_entropy_fixtures() {
        let flat = LatentTensor::new(1, 16, 16, vec![0.3; 256]).unwrap();
        assert!(low_entropy_warning(&flat, 0.1, 0.5).warning);

        let white = noise(8, (4, 64, 64));
        let r = low_entropy_warning(&white, 0.1, 0.4);
        assert!(!r.warning);
        assert_eq!(r.low_variance_block_fraction, 0.0);

        // thin margin
        assert!(low_entropy_warning(&white, 0.1, 0.11).warning);

        // 64 blocks of 8x8, 39 flat (about 61%)
        let mut t = white.clone();
        let mut flat_blocks = 0;
        for c in 0..4 {
            for b in 0..64 {
                if (c * 64 + b) % 5 < 3 || b == 0 {
                    flat_blocks += 1;
                    let (by, bx) = (b / 8 * 8, b % 8 * 8);
                    for y in by..by + 8 {
                        for x in bx..bx + 8 {
                            t.plane_mut(c)[y * 64 + x] = 1.0;
                        }
                    }
                }
            }
        }
        let r = low_entropy_warning(&t, 0.1, 0.4);
        assert!(flat_blocks as f64 / 256.0 > 0.5);
        assert!(r.warning, "{r:?}");
    }

    proptest! {
        #[test]
        fn scale_invariance_and_symmetry(seed in 0u8..255, c in 0.001f32..1000.0) {
            let z = noise(seed, (1, 8, 8));
            let e = noise(seed.wrapping_add(1), (1, 8, 8));
            let s = noiseprint_score(&z, &e).unwrap();
            let scaled = noiseprint_score(&z.map(|v| v * c), &e).unwrap();
            prop_assert!((s - scaled).abs() < 1e-6);
            prop_assert_eq!(s.to_bits(), noiseprint_score(&e, &z).unwrap().to_bits());
        }
    }
}
