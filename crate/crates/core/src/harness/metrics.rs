use crate::error::Result;
use crate::tensor::LatentTensor;

const SSIM_WINDOW: usize = 8;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn extent(a: &LatentTensor) -> (f64, f64) {
    let (lo, hi) = a
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    (f64::from(lo), f64::from(hi))
}

fn dynamic_range(a: &LatentTensor) -> f64 {
    let (lo, hi) = extent(a);
    hi - lo
}

/// Peak signal-to-noise ratio in dB with the dynamic range of `a` as peak.
/// `+inf` when the tensors are identical.
pub fn psnr(a: &LatentTensor, b: &LatentTensor) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum::<f64>()
        / a.dim() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    let range = dynamic_range(a);
    Ok(10.0 * (range * range / mse).log10())
}

/// Mean SSIM over all 8x8 sliding windows of every channel. Both tensors
/// are measured from the minimum of `a`, so `a` spans `[0, range]` like
/// pixel intensities do.
pub fn ssim(a: &LatentTensor, b: &LatentTensor) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let (lo, hi) = extent(a);
    let range = hi - lo;
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let (h, w) = (a.height(), a.width());
    let wh = SSIM_WINDOW.min(h);
    let ww = SSIM_WINDOW.min(w);
    let n = (wh * ww) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..a.channels() {
        let (pa, pb) = (a.plane(ch), b.plane(ch));
        for y0 in 0..=h - wh {
            for x0 in 0..=w - ww {
                let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for y in y0..y0 + wh {
                    for x in x0..x0 + ww {
                        let va = f64::from(pa[y * w + x]) - lo;
                        let vb = f64::from(pb[y * w + x]) - lo;
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                }
                let (ma, mb) = (sa / n, sb / n);
                let va = saa / n - ma * ma;
                let vb = sbb / n - mb * mb;
                let cov = sab / n - ma * mb;
                let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                total += if den == 0.0 { 1.0 } else { num / den };
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{derive_noise_for, SeedRecord};

    fn noise(b: u8) -> LatentTensor {
        derive_noise_for(&SeedRecord::new([b; 32], ""), (2, 32, 32)).unwrap()
    }

    #[test]
    fn identical_inputs() {
        let a = noise(1);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let flat = LatentTensor::new(1, 8, 8, vec![2.0; 64]).unwrap();
        assert_eq!(psnr(&flat, &flat).unwrap(), f64::INFINITY);
    }

    #[test]
    fn psnr_matches_closed_form() {
        // b = a + d where d alternates +-s exactly: MSE = s^2
        let a = noise(2);
        let s = 0.125f32;
        let b = LatentTensor::new(
            2,
            32,
            32,
            a.data()
                .iter()
                .enumerate()
                .map(|(i, &v)| if i % 2 == 0 { v + s } else { v - s })
                .collect(),
        )
        .unwrap();
        let mse: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
            .sum::<f64>()
            / a.dim() as f64;
        assert!((mse - 0.015625).abs() < 1e-9);
        let range = dynamic_range(&a);
        let expected = 10.0 * (range * range / mse).log10();
        assert!((psnr(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_of_negation_is_negative() {
        let a = noise(3);
        let neg = a.map(|v| -v);
        assert!(ssim(&a, &neg).unwrap() < 0.0);
        let other = noise(4);
        let s = ssim(&a, &other).unwrap();
        assert!(s.abs() < 0.1, "{s}");
    }
}
