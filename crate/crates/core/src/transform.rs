//! Spatial transforms over latent grids and the overlap masks they induce.
//!
//! Pixel `(x, y)` has its center at integer coordinates; the frame covers
//! `[-0.5, w - 0.5] x [-0.5, h - 0.5]`. Every transform is described by the
//! inverse map from an output position to its source position, so resampling
//! and masking share one definition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::LatentTensor;

const FRAME_EPS: f64 = 1e-9;

/// A member of the public transform family a claimant may declare.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    Identity,
    /// Rotation about the frame center.
    Rotation { angle_degrees: f64 },
    /// Crop a `crop_factor`-sized window whose top-left pixel is
    /// `(offset_x, offset_y)`, then rescale it back to the full frame.
    CropScale {
        crop_factor: f64,
        offset_x: i64,
        offset_y: i64,
    },
    /// Content point `q` lands at `scale * R(angle) * (q - center) + center + (tx, ty)`.
    Similarity {
        scale: f64,
        angle_degrees: f64,
        tx: f64,
        ty: f64,
    },
}

impl Default for TransformSpec {
    fn default() -> Self {
        TransformSpec::Identity
    }
}

/// Spatial validity mask, broadcast across channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl OverlapMask {
    pub fn all_true(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Shape(format!(
                "mask {height}x{width} needs {} bits, got {}",
                height * width,
                bits.len()
            )));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Fraction of true positions.
    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    pub fn is_all_true(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }
}

/// Inverse map from output pixel to source coordinates.
#[derive(Debug, Clone, Copy)]
struct SourceMap {
    // src = a * (p - pc) + b, with `a` a 2x2 matrix.
    a: [[f64; 2]; 2],
    pc: [f64; 2],
    b: [f64; 2],
}

impl SourceMap {
    #[inline]
    fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.pc[0];
        let dy = y - self.pc[1];
        (
            self.a[0][0] * dx + self.a[0][1] * dy + self.b[0],
            self.a[1][0] * dx + self.a[1][1] * dy + self.b[1],
        )
    }
}

fn center(height: usize, width: usize) -> [f64; 2] {
    [(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0]
}

impl TransformSpec {
    pub fn rotation(angle_degrees: f64) -> Self {
        TransformSpec::Rotation { angle_degrees }
    }

    /// A crop window of relative size `crop_factor` centered in an `h x w` frame.
    pub fn centered_crop(crop_factor: f64, height: usize, width: usize) -> Self {
        let ox = ((width as f64 - crop_factor * width as f64) / 2.0).round() as i64;
        let oy = ((height as f64 - crop_factor * height as f64) / 2.0).round() as i64;
        TransformSpec::CropScale {
            crop_factor,
            offset_x: ox,
            offset_y: oy,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, TransformSpec::Identity)
    }

    /// Checks parameter ranges against an `h x w` frame.
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        match *self {
            TransformSpec::Identity => Ok(()),
            TransformSpec::Rotation { angle_degrees } => {
                if angle_degrees.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidTransform("rotation angle must be finite".into()))
                }
            }
            TransformSpec::CropScale {
                crop_factor,
                offset_x,
                offset_y,
            } => {
                if !(crop_factor > 0.0 && crop_factor <= 1.0) {
                    return Err(Error::InvalidTransform(format!(
                        "crop_factor {crop_factor} outside (0, 1]"
                    )));
                }
                let fits = |off: i64, len: usize| {
                    off >= 0 && off as f64 + crop_factor * len as f64 <= len as f64 + FRAME_EPS
                };
                if !fits(offset_x, width) || !fits(offset_y, height) {
                    return Err(Error::InvalidTransform(format!(
                        "crop window {crop_factor} at ({offset_x}, {offset_y}) exceeds {height}x{width} frame"
                    )));
                }
                Ok(())
            }
            TransformSpec::Similarity {
                scale,
                angle_degrees,
                tx,
                ty,
            } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidTransform(format!("scale {scale} must be > 0")));
                }
                if !(angle_degrees.is_finite() && tx.is_finite() && ty.is_finite()) {
                    return Err(Error::InvalidTransform("non-finite similarity params".into()));
                }
                Ok(())
            }
        }
    }

    fn source_map(&self, height: usize, width: usize) -> SourceMap {
        let c = center(height, width);
        match *self {
            TransformSpec::Identity => SourceMap {
                a: [[1.0, 0.0], [0.0, 1.0]],
                pc: [0.0, 0.0],
                b: [0.0, 0.0],
            },
            TransformSpec::Rotation { angle_degrees } => TransformSpec::Similarity {
                scale: 1.0,
                angle_degrees,
                tx: 0.0,
                ty: 0.0,
            }
            .source_map(height, width),
            TransformSpec::CropScale {
                crop_factor,
                offset_x,
                offset_y,
            } => SourceMap {
                a: [[crop_factor, 0.0], [0.0, crop_factor]],
                pc: [-0.5, -0.5],
                b: [offset_x as f64 - 0.5, offset_y as f64 - 0.5],
            },
            TransformSpec::Similarity {
                scale,
                angle_degrees,
                tx,
                ty,
            } => {
                // src = R(-angle) (p - c - t) / scale + c
                let (s, co) = angle_degrees.to_radians().sin_cos();
                let k = 1.0 / scale;
                SourceMap {
                    a: [[co * k, s * k], [-s * k, co * k]],
                    pc: [c[0] + tx, c[1] + ty],
                    b: c,
                }
            }
        }
    }

    /// The transform that undoes `self` on an `h x w` frame (up to cropping losses).
    pub fn inverse(&self, height: usize, width: usize) -> TransformSpec {
        match *self {
            TransformSpec::Identity => TransformSpec::Identity,
            TransformSpec::Rotation { angle_degrees } => TransformSpec::Rotation {
                angle_degrees: -angle_degrees,
            },
            TransformSpec::CropScale {
                crop_factor,
                offset_x,
                offset_y,
            } => {
                // Forward source map is src = f * p + b; its inverse places the
                // content back into the window.
                let c = center(height, width);
                let bx = offset_x as f64 - 0.5 + 0.5 * crop_factor;
                let by = offset_y as f64 - 0.5 + 0.5 * crop_factor;
                TransformSpec::Similarity {
                    scale: crop_factor,
                    angle_degrees: 0.0,
                    tx: bx - c[0] * (1.0 - crop_factor),
                    ty: by - c[1] * (1.0 - crop_factor),
                }
            }
            TransformSpec::Similarity {
                scale,
                angle_degrees,
                tx,
                ty,
            } => {
                let (s, co) = (-angle_degrees).to_radians().sin_cos();
                let rx = co * tx - s * ty;
                let ry = s * tx + co * ty;
                TransformSpec::Similarity {
                    scale: 1.0 / scale,
                    angle_degrees: -angle_degrees,
                    tx: -rx / scale,
                    ty: -ry / scale,
                }
            }
        }
    }
}

#[inline]
fn inside(xs: f64, ys: f64, height: usize, width: usize) -> bool {
    xs >= -0.5 - FRAME_EPS
        && xs <= width as f64 - 0.5 + FRAME_EPS
        && ys >= -0.5 - FRAME_EPS
        && ys <= height as f64 - 0.5 + FRAME_EPS
}

/// Bilinear sample with edge clamping inside the frame; zero outside it.
#[inline]
pub(crate) fn sample_bilinear(plane: &[f32], height: usize, width: usize, xs: f64, ys: f64) -> f64 {
    if !inside(xs, ys, height, width) {
        return 0.0;
    }
    let xc = xs.clamp(0.0, (width - 1) as f64);
    let yc = ys.clamp(0.0, (height - 1) as f64);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let at = |y: usize, x: usize| f64::from(plane[y * width + x]);
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Resamples every channel of `t` through `g`. Shape is preserved.
pub fn apply_transform(t: &LatentTensor, g: &TransformSpec) -> Result<LatentTensor> {
    let (c, h, w) = t.shape();
    g.validate(h, w)?;
    if g.is_identity() {
        return Ok(t.clone());
    }
    let map = g.source_map(h, w);
    let sources: Vec<(f64, f64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| map.apply(x as f64, y as f64))
        .collect();
    let mut out = LatentTensor::zeros(c, h, w);
    for ch in 0..c {
        let src = t.plane(ch);
        for (dst, &(xs, ys)) in out.plane_mut(ch).iter_mut().zip(&sources) {
            *dst = sample_bilinear(src, h, w, xs, ys) as f32;
        }
    }
    Ok(out)
}

/// True where the resampling source of an output pixel lies inside the frame.
pub fn transform_mask(g: &TransformSpec, height: usize, width: usize) -> OverlapMask {
    if g.is_identity() {
        return OverlapMask::all_true(height, width);
    }
    let map = g.source_map(height, width);
    let bits = (0..height)
        .flat_map(|y| (0..width).map(move |x| (x, y)))
        .map(|(x, y)| {
            let (xs, ys) = map.apply(x as f64, y as f64);
            inside(xs, ys, height, width)
        })
        .collect();
    OverlapMask {
        height,
        width,
        bits,
    }
}

/// Bilinear resize of one plane with pixel-center alignment.
pub(crate) fn resize_plane(
    plane: &[f32],
    height: usize,
    width: usize,
    new_height: usize,
    new_width: usize,
) -> Vec<f32> {
    let sy = height as f64 / new_height as f64;
    let sx = width as f64 / new_width as f64;
    let mut out = Vec::with_capacity(new_height * new_width);
    for y in 0..new_height {
        let ys = (y as f64 + 0.5) * sy - 0.5;
        for x in 0..new_width {
            let xs = (x as f64 + 0.5) * sx - 0.5;
            out.push(sample_bilinear(plane, height, width, xs, ys) as f32);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::gaussian_blur_plane;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_tensor(seed: u64, c: usize, h: usize, w: usize) -> LatentTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = LatentTensor::zeros(c, h, w);
        for ch in 0..c {
            let raw: Vec<f32> = (0..h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let smooth = gaussian_blur_plane(&raw, h, w, 6.0);
            t.plane_mut(ch).copy_from_slice(&smooth);
        }
        // rescale to unit RMS so the tolerance is relative to signal size
        let rms = (t.norm().powi(2) / t.dim() as f64).sqrt() as f32;
        t.map(|v| v / rms)
    }

    #[test]
    fn identity_is_exact() {
        let t = smooth_tensor(1, 2, 16, 16);
        assert_eq!(apply_transform(&t, &TransformSpec::Identity).unwrap(), t);
        assert!(transform_mask(&TransformSpec::Identity, 16, 16).is_all_true());
    }

    #[test]
    fn full_frame_crop_is_identity() {
        let t = smooth_tensor(2, 2, 12, 20);
        let g = TransformSpec::CropScale {
            crop_factor: 1.0,
            offset_x: 0,
            offset_y: 0,
        };
        assert_eq!(apply_transform(&t, &g).unwrap(), t);
        assert!(transform_mask(&g, 12, 20).is_all_true());
    }

    #[test]
    fn crop_outside_frame_is_rejected() {
        let t = smooth_tensor(3, 1, 10, 10);
        let g = TransformSpec::CropScale {
            crop_factor: 0.8,
            offset_x: 3,
            offset_y: 0,
        };
        assert!(matches!(
            apply_transform(&t, &g),
            Err(Error::InvalidTransform(_))
        ));
        let g = TransformSpec::CropScale {
            crop_factor: 1.5,
            offset_x: 0,
            offset_y: 0,
        };
        assert!(apply_transform(&t, &g).is_err());
    }

    #[test]
    fn rotation_round_trip_on_interior() {
        for (seed, angle) in [(10u64, 17.0), (11, -33.5), (12, 45.0)] {
            let t = smooth_tensor(seed, 2, 64, 64);
            let fwd = TransformSpec::rotation(angle);
            let back = fwd.inverse(64, 64);
            let rt = apply_transform(&apply_transform(&t, &fwd).unwrap(), &back).unwrap();
            // interior: both the forward and the backward source inside the frame
            let m1 = transform_mask(&back, 64, 64);
            let mut se = 0.0;
            let mut n = 0usize;
            for c in 0..2 {
                for y in 0..64 {
                    for x in 0..64 {
                        let r = ((x as f64 - 31.5).powi(2) + (y as f64 - 31.5).powi(2)).sqrt();
                        if m1.get(y, x) && r < 30.0 {
                            let d = f64::from(rt.get(c, y, x) - t.get(c, y, x));
                            se += d * d;
                            n += 1;
                        }
                    }
                }
            }
            let rms = (se / n as f64).sqrt();
            assert!(rms < 1e-2, "angle {angle}: rms {rms}");
        }
    }

    #[test]
    fn rotated_square_mask_area() {
        // Oracle: a square rotated by 45 degrees about its center intersects
        // the original in a regular octagon of area 2 (sqrt 2 - 1) side^2.
        let expected = 2.0 * (2f64.sqrt() - 1.0);
        let m = transform_mask(&TransformSpec::rotation(45.0), 256, 256);
        assert!((m.fraction() - expected).abs() < 0.01, "{}", m.fraction());
        let m = transform_mask(&TransformSpec::rotation(45.0), 64, 64);
        assert!((m.fraction() - expected).abs() < 0.01, "{}", m.fraction());
    }

    #[test]
    fn centered_half_crop_mask_is_full() {
        let g = TransformSpec::centered_crop(0.5, 64, 64);
        assert!(transform_mask(&g, 64, 64).is_all_true());
    }

    #[test]
    fn inverse_composes_to_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let g = TransformSpec::Similarity {
                scale: rng.gen_range(0.5..2.0),
                angle_degrees: rng.gen_range(-90.0..90.0),
                tx: rng.gen_range(-5.0..5.0),
                ty: rng.gen_range(-5.0..5.0),
            };
            let (h, w) = (24, 40);
            let fwd = g.source_map(h, w);
            let inv = g.inverse(h, w).source_map(h, w);
            for &(x, y) in &[(0.0, 0.0), (13.0, 7.5), (39.0, 23.0)] {
                // inverse's source, then forward's source, returns to start
                let (a, b) = inv.apply(x, y);
                let (x2, y2) = fwd.apply(a, b);
                assert!((x2 - x).abs() < 1e-9 && (y2 - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn crop_inverse_restores_window_content() {
        let t = smooth_tensor(7, 1, 64, 64);
        let g = TransformSpec::CropScale {
            crop_factor: 0.75,
            offset_x: 5,
            offset_y: 9,
        };
        let inv = g.inverse(64, 64);
        let rt = apply_transform(&apply_transform(&t, &g).unwrap(), &inv).unwrap();
        let mask = transform_mask(&inv, 64, 64);
        // mask is the crop window: 48x48 pixels
        assert!((mask.count() as i64 - 48 * 48).abs() <= 2 * 48 + 1, "{}", mask.count());
        let mut se = 0.0;
        let mut n = 0;
        for y in 12..54 {
            for x in 8..50 {
                assert!(mask.get(y, x));
                let d = f64::from(rt.get(0, y, x) - t.get(0, y, x));
                se += d * d;
                n += 1;
            }
        }
        assert!((se / n as f64).sqrt() < 2e-2);
    }

    #[test]
    fn shape_preserved_for_every_kind() {
        let t = smooth_tensor(9, 3, 10, 14);
        for g in [
            TransformSpec::Identity,
            TransformSpec::rotation(12.0),
            TransformSpec::centered_crop(0.7, 10, 14),
            TransformSpec::Similarity {
                scale: 1.3,
                angle_degrees: -8.0,
                tx: 1.0,
                ty: -2.0,
            },
        ] {
            assert_eq!(apply_transform(&t, &g).unwrap().shape(), t.shape());
        }
    }

    #[test]
    fn json_form_matches_claim_schema() {
        let g: TransformSpec =
            serde_json::from_str(r#"{"kind":"rotation","angle_degrees":30.0}"#).unwrap();
        assert_eq!(g, TransformSpec::rotation(30.0));
        let s = serde_json::to_string(&TransformSpec::Identity).unwrap();
        assert_eq!(s, r#"{"kind":"identity"}"#);
    }
}
