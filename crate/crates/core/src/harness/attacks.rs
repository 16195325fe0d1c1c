//! Attack families re-expressed on latent grids.
//!
//! | kind        | severity                          | range        |
//! |-------------|-----------------------------------|--------------|
//! | none        | ignored                           | any          |
//! | brightness  | multiplier (pure scaling)         | (0, 10]      |
//! | contrast    | multiplier (pure scaling)         | (0, 10]      |
//! | blur        | Gaussian sigma in latent pixels   | [0, 32]      |
//! | noise       | additive Gaussian std             | [0, 10]      |
//! | quantize    | JPEG-style quality factor         | [1, 100]     |
//! | resize      | down-scale factor, then back up   | (0, 1]       |
//! | renoise     | variance-preserving noise level   | [0, 1]       |
//! | decorrelate | loss weight `w`                   | [0, 10]      |
//! | rotation    | angle in degrees                  | [-180, 180]  |
//! | crop_scale  | centered crop factor              | (0, 1]       |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::gaussian_blur_plane;
use crate::harness::decorrelate::{decorrelate_attack, mixed_estimate};
use crate::noise::{derive_noise_for, SeedRecord};
use crate::tensor::LatentTensor;
use crate::transform::{apply_transform, resize_plane, TransformSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    Brightness,
    Contrast,
    Blur,
    Noise,
    Quantize,
    Resize,
    Renoise,
    Decorrelate,
    Rotation,
    CropScale,
}

impl AttackKind {
    pub const ALL: [AttackKind; 11] = [
        AttackKind::None,
        AttackKind::Brightness,
        AttackKind::Contrast,
        AttackKind::Blur,
        AttackKind::Noise,
        AttackKind::Quantize,
        AttackKind::Resize,
        AttackKind::Renoise,
        AttackKind::Decorrelate,
        AttackKind::Rotation,
        AttackKind::CropScale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::None => "none",
            AttackKind::Brightness => "brightness",
            AttackKind::Contrast => "contrast",
            AttackKind::Blur => "blur",
            AttackKind::Noise => "noise",
            AttackKind::Quantize => "quantize",
            AttackKind::Resize => "resize",
            AttackKind::Renoise => "renoise",
            AttackKind::Decorrelate => "decorrelate",
            AttackKind::Rotation => "rotation",
            AttackKind::CropScale => "crop_scale",
        }
    }

    fn severity_range(self) -> (f64, f64, bool) {
        // (lo, hi, lo_inclusive)
        match self {
            AttackKind::None => (f64::NEG_INFINITY, f64::INFINITY, true),
            AttackKind::Brightness | AttackKind::Contrast => (0.0, 10.0, false),
            AttackKind::Blur => (0.0, 32.0, true),
            AttackKind::Noise => (0.0, 10.0, true),
            AttackKind::Quantize => (1.0, 100.0, true),
            AttackKind::Resize | AttackKind::CropScale => (0.0, 1.0, false),
            AttackKind::Renoise => (0.0, 1.0, true),
            AttackKind::Decorrelate => (0.0, 10.0, true),
            AttackKind::Rotation => (-180.0, 180.0, true),
        }
    }

    fn is_stochastic(self) -> bool {
        matches!(
            self,
            AttackKind::Noise | AttackKind::Renoise | AttackKind::Decorrelate
        )
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::OutOfRange(format!("unknown attack kind '{s}'")))
    }
}

/// One attack with its severity and, for stochastic kinds, its seed.
#[derive(Debug, Clone)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub severity: f64,
    pub attack_seed: Option<SeedRecord>,
    /// Decorrelation only: fraction of independent noise in the adversary's
    /// estimate of the initial noise (0 = perfect estimate).
    pub estimate_mix: f64,
    /// Decorrelation only: gradient steps.
    pub steps: usize,
}

impl AttackSpec {
    pub fn new(kind: AttackKind, severity: f64) -> Self {
        Self {
            kind,
            severity,
            attack_seed: None,
            estimate_mix: 0.0,
            steps: 100,
        }
    }

    pub fn with_seed(mut self, seed: SeedRecord) -> Self {
        self.attack_seed = Some(seed);
        self
    }

    pub fn with_estimate_mix(mut self, mix: f64) -> Self {
        self.estimate_mix = mix;
        self
    }

    pub fn label(&self) -> String {
        format!("{}@{}", self.kind, self.severity)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi, lo_inclusive) = self.kind.severity_range();
        let s = self.severity;
        let ok = s.is_finite() && s <= hi && if lo_inclusive { s >= lo } else { s > lo };
        if !ok && self.kind != AttackKind::None {
            return Err(Error::OutOfRange(format!(
                "{} severity {s} outside {}{lo}, {hi}]",
                self.kind,
                if lo_inclusive { "[" } else { "(" }
            )));
        }
        if !(0.0..=1.0).contains(&self.estimate_mix) {
            return Err(Error::OutOfRange(format!(
                "estimate_mix {} outside [0, 1]",
                self.estimate_mix
            )));
        }
        if self.kind.is_stochastic() && self.attack_seed.is_none() {
            return Err(Error::OutOfRange(format!("{} attack needs an attack seed", self.kind)));
        }
        Ok(())
    }
}

fn fresh_noise(a: &AttackSpec, shape: (usize, usize, usize)) -> Result<LatentTensor> {
    let seed = a.attack_seed.as_ref().expect("validated");
    derive_noise_for(seed, shape)
}

fn per_plane(z: &LatentTensor, f: impl Fn(&[f32]) -> Vec<f32>) -> LatentTensor {
    let mut out = z.clone();
    for c in 0..z.channels() {
        let v = f(z.plane(c));
        out.plane_mut(c).copy_from_slice(&v);
    }
    out
}

const JPEG_LUMA: [f64; 64] = [
    16.0, 11.0, 10.0, 16.0, 24.0, 40.0, 51.0, 61.0, 12.0, 12.0, 14.0, 19.0, 26.0, 58.0, 60.0,
    55.0, 14.0, 13.0, 16.0, 24.0, 40.0, 57.0, 69.0, 56.0, 14.0, 17.0, 22.0, 29.0, 51.0, 87.0,
    80.0, 62.0, 18.0, 22.0, 37.0, 56.0, 68.0, 109.0, 103.0, 77.0, 24.0, 35.0, 55.0, 64.0, 81.0,
    104.0, 113.0, 92.0, 49.0, 64.0, 78.0, 87.0, 103.0, 121.0, 120.0, 101.0, 72.0, 92.0, 95.0,
    98.0, 112.0, 100.0, 103.0, 99.0,
];

/// libjpeg quality scaling of the baseline luminance table.
fn quant_table(quality: f64) -> [f64; 64] {
    let q = quality.clamp(1.0, 100.0);
    let s = if q < 50.0 { 5000.0 / q } else { 200.0 - 2.0 * q };
    JPEG_LUMA.map(|v| ((v * s + 50.0) / 100.0).floor().clamp(1.0, 255.0))
}

fn dct_basis() -> [[f64; 8]; 8] {
    let mut m = [[0.0; 8]; 8];
    for (k, row) in m.iter_mut().enumerate() {
        let a = if k == 0 { (1.0f64 / 8.0).sqrt() } else { 0.25f64.sqrt() };
        for (n, v) in row.iter_mut().enumerate() {
            *v = a * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / 16.0).cos();
        }
    }
    m
}

/// 8x8 block-DCT coefficient quantization on values mapped to `[0, 255]`.
fn jpeg_like(z: &LatentTensor, quality: f64) -> LatentTensor {
    let (lo, hi) = z
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let (lo, hi) = (f64::from(lo), f64::from(hi));
    if hi <= lo {
        return z.clone();
    }
    let to_px = 255.0 / (hi - lo);
    let table = quant_table(quality);
    let basis = dct_basis();
    let (h, w) = (z.height(), z.width());
    per_plane(z, |plane| {
        let mut out = plane.to_vec();
        for by in (0..h).step_by(8) {
            for bx in (0..w).step_by(8) {
                let mut block = [[0.0f64; 8]; 8];
                for (i, row) in block.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        let (y, x) = ((by + i).min(h - 1), (bx + j).min(w - 1));
                        *v = (f64::from(plane[y * w + x]) - lo) * to_px - 128.0;
                    }
                }
                let mut coef = [[0.0f64; 8]; 8];
                for u in 0..8 {
                    for v in 0..8 {
                        let mut acc = 0.0;
                        for i in 0..8 {
                            for j in 0..8 {
                                acc += basis[u][i] * basis[v][j] * block[i][j];
                            }
                        }
                        let q = table[u * 8 + v];
                        coef[u][v] = (acc / q).round() * q;
                    }
                }
                for i in 0..8 {
                    for j in 0..8 {
                        let (y, x) = (by + i, bx + j);
                        if y >= h || x >= w {
                            continue;
                        }
                        let mut acc = 0.0;
                        for u in 0..8 {
                            for v in 0..8 {
                                acc += basis[u][i] * basis[v][j] * coef[u][v];
                            }
                        }
                        out[y * w + x] = ((acc + 128.0) / to_px + lo) as f32;
                    }
                }
            }
        }
        out
    })
}

/// Applies `a` to `z`. `true_noise` is required by the decorrelation attack,
/// which models an adversary holding an estimate of the initial noise.
pub fn apply_attack(
    z: &LatentTensor,
    a: &AttackSpec,
    true_noise: Option<&LatentTensor>,
) -> Result<LatentTensor> {
    a.validate()?;
    let s = a.severity;
    let (h, w) = (z.height(), z.width());
    match a.kind {
        AttackKind::None => Ok(z.clone()),
        // no clipping exists on a latent grid, so both reduce to scaling
        AttackKind::Brightness | AttackKind::Contrast => Ok(z.map(|v| (f64::from(v) * s) as f32)),
        AttackKind::Blur => Ok(per_plane(z, |p| gaussian_blur_plane(p, h, w, s))),
        AttackKind::Noise => {
            let n = fresh_noise(a, z.shape())?;
            let data = z
                .data()
                .iter()
                .zip(n.data())
                .map(|(&x, &e)| (f64::from(x) + s * f64::from(e)) as f32)
                .collect();
            LatentTensor::new(z.channels(), h, w, data)
        }
        AttackKind::Quantize => Ok(jpeg_like(z, s)),
        AttackKind::Resize => {
            let nh = ((h as f64 * s).round() as usize).max(1);
            let nw = ((w as f64 * s).round() as usize).max(1);
            Ok(per_plane(z, |p| {
                let small = resize_plane(p, h, w, nh, nw);
                resize_plane(&small, nh, nw, h, w)
            }))
        }
        AttackKind::Renoise => {
            let n = fresh_noise(a, z.shape())?;
            let keep = (1.0 - s * s).sqrt();
            let data = z
                .data()
                .iter()
                .zip(n.data())
                .map(|(&x, &e)| (keep * f64::from(x) + s * f64::from(e)) as f32)
                .collect();
            LatentTensor::new(z.channels(), h, w, data)
        }
        AttackKind::Decorrelate => {
            let eps = true_noise.ok_or_else(|| {
                Error::OutOfRange("decorrelation attack needs the true noise to model its estimate".into())
            })?;
            let independent = fresh_noise(a, z.shape())?;
            let estimate = mixed_estimate(eps, &independent, a.estimate_mix)?;
            Ok(decorrelate_attack(z, &estimate, s, a.steps)?.attacked)
        }
        AttackKind::Rotation => apply_transform(z, &TransformSpec::rotation(s)),
        AttackKind::CropScale => apply_transform(z, &TransformSpec::centered_crop(s, h, w)),
    }
}
