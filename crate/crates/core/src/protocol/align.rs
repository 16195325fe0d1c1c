use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::extended_score;
use crate::tensor::LatentTensor;
use crate::transform::TransformSpec;

const ROTATION_RANGE: f64 = 45.0;
const ROTATION_COARSE: f64 = 1.0;
const ROTATION_FINE: f64 = 0.1;
const CROP_MIN: f64 = 0.6;
const CROP_MAX: f64 = 1.0;
const CROP_COARSE: f64 = 0.02;
const CROP_FINE: f64 = 0.002;
const OFFSET_COARSE: usize = 2;

/// Transform families the claimant-side estimator searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentFamily {
    Rotation,
    CropScale,
}

struct Search<'a> {
    reference: &'a LatentTensor,
    transformed: &'a LatentTensor,
    best: Option<(f64, TransformSpec)>,
}

impl Search<'_> {
    /// Scores the hypothesis that `transformed = g(reference)`.
    fn try_forward(&mut self, g: TransformSpec) {
        let (h, w) = (self.reference.height(), self.reference.width());
        if g.validate(h, w).is_err() {
            return;
        }
        let realign = g.inverse(h, w);
        if let Ok((score, _)) = extended_score(self.transformed, self.reference, &realign) {
            if self.best.map_or(true, |(b, _)| score > b) {
                self.best = Some((score, g));
            }
        }
    }
}

fn steps(lo: f64, hi: f64, step: f64) -> impl Iterator<Item = f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as i64;
    (0..=n).map(move |i| lo + i as f64 * step)
}

fn max_offset(factor: f64, len: usize) -> i64 {
    (len as f64 - factor * len as f64 + 1e-9).floor().max(0.0) as i64
}

/// Estimates the forward transform `g` with `transformed ~ g(original_like)`
/// by a coarse-to-fine grid search over the masked extended score of the
/// re-aligned content. The claimant declares `g.inverse(h, w)` in a dispute.
///
/// Rotation: `[-45, 45]` degrees at 1 degree, then 0.1 degree. Crop-and-scale:
/// factor `[0.6, 1.0]` at 0.02 with window offsets on a 2-pixel grid, then
/// factor at 0.002 with single-pixel offsets around the best cell.
pub fn estimate_alignment(
    original_like: &LatentTensor,
    transformed: &LatentTensor,
    family: AlignmentFamily,
    tau: f64,
) -> Result<TransformSpec> {
    original_like.ensure_same_shape(transformed)?;
    let (h, w) = (original_like.height(), original_like.width());
    let mut search = Search {
        reference: original_like,
        transformed,
        best: None,
    };
    match family {
        AlignmentFamily::Rotation => {
            for a in steps(-ROTATION_RANGE, ROTATION_RANGE, ROTATION_COARSE) {
                search.try_forward(TransformSpec::rotation(a));
            }
            let centre = match search.best {
                Some((_, TransformSpec::Rotation { angle_degrees })) => angle_degrees,
                _ => 0.0,
            };
            for a in steps(centre - ROTATION_COARSE, centre + ROTATION_COARSE, ROTATION_FINE) {
                search.try_forward(TransformSpec::rotation(a));
            }
        }
        AlignmentFamily::CropScale => {
            for f in steps(CROP_MIN, CROP_MAX, CROP_COARSE) {
                let (mx, my) = (max_offset(f, w), max_offset(f, h));
                for oy in (0..=my).step_by(OFFSET_COARSE) {
                    for ox in (0..=mx).step_by(OFFSET_COARSE) {
                        search.try_forward(TransformSpec::CropScale {
                            crop_factor: f,
                            offset_x: ox,
                            offset_y: oy,
                        });
                    }
                }
            }
            if let Some((
                _,
                TransformSpec::CropScale {
                    crop_factor,
                    offset_x,
                    offset_y,
                },
            )) = search.best
            {
                let lo = (crop_factor - CROP_COARSE).max(CROP_MIN);
                let hi = (crop_factor + CROP_COARSE).min(CROP_MAX);
                let r = OFFSET_COARSE as i64;
                for f in steps(lo, hi, CROP_FINE) {
                    for oy in offset_y - r..=offset_y + r {
                        for ox in offset_x - r..=offset_x + r {
                            search.try_forward(TransformSpec::CropScale {
                                crop_factor: f,
                                offset_x: ox,
                                offset_y: oy,
                            });
                        }
                    }
                }
            }
        }
    }
    let required = 2.0 * tau;
    match search.best {
        Some((score, g)) if score >= required => Ok(g),
        Some((score, _)) => Err(Error::EstimationFailed {
            best: score,
            required,
        }),
        None => Err(Error::EstimationFailed {
            best: f64::NEG_INFINITY,
            required,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{synth_latent, SyntheticSpec};
    use crate::noise::SeedRecord;
    use crate::transform::apply_transform;

    fn fixture() -> LatentTensor {
        let spec = SyntheticSpec::new(0.482, 0.25, (4, 64, 64), SeedRecord::new([8; 32], ""));
        synth_latent(&SeedRecord::new([7; 32], "owner"), &spec).unwrap()
    }

    #[test]
    fn recovers_rotation() {
        let x = fixture();
        let t = apply_transform(&x, &TransformSpec::rotation(17.3)).unwrap();
        match estimate_alignment(&x, &t, AlignmentFamily::Rotation, 0.1).unwrap() {
            TransformSpec::Rotation { angle_degrees } => {
                assert!((angle_degrees - 17.3).abs() <= 0.2, "{angle_degrees}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn recovers_centered_crop() {
        let x = fixture();
        let g = TransformSpec::centered_crop(0.75, 64, 64);
        let t = apply_transform(&x, &g).unwrap();
        match estimate_alignment(&x, &t, AlignmentFamily::CropScale, 0.1).unwrap() {
            TransformSpec::CropScale { crop_factor, .. } => {
                assert!((crop_factor - 0.75).abs() <= 0.01, "{crop_factor}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn untouched_content_is_identity_like() {
        let x = fixture();
        match estimate_alignment(&x, &x, AlignmentFamily::Rotation, 0.1).unwrap() {
            TransformSpec::Rotation { angle_degrees } => assert!(angle_degrees.abs() <= 0.1),
            other => panic!("{other:?}"),
        }
        match estimate_alignment(&x, &x, AlignmentFamily::CropScale, 0.1).unwrap() {
            TransformSpec::CropScale { crop_factor, .. } => assert!(crop_factor >= 0.998),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unrelated_content_fails() {
        let x = fixture();
        let spec = SyntheticSpec::new(0.482, 1.0, (4, 64, 64), SeedRecord::new([9; 32], ""));
        let other = synth_latent(&SeedRecord::new([10; 32], ""), &spec).unwrap();
        assert!(matches!(
            estimate_alignment(&x, &other, AlignmentFamily::Rotation, 0.1),
            Err(Error::EstimationFailed { .. })
        ));
    }
}
