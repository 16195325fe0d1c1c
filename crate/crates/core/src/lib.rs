//! NoisePrints: seed-based authorship verification for diffusion outputs.
//!
//! The owner of a generation keeps the seed that produced its initial noise.
//! Verification derives that noise again and checks that the content's latent
//! still correlates with it beyond a threshold calibrated to a target false
//! positive rate.

pub mod calibration;
pub mod error;
pub mod filter;
pub mod harness;
pub mod noise;
pub mod normal;
pub mod protocol;
pub mod scoring;
pub mod special;
pub mod tensor;
pub mod transform;
pub mod zk;

pub use calibration::{calibrate_threshold, cap_bound, exact_cap_probability, CalibrationParams, Fpr};
pub use error::{Error, Result};
pub use noise::{derive_noise, derive_noise_for, NoiseSpec, SeedRecord};
pub use scoring::{correlation_map, extended_score, noiseprint_score, ScoreReport};
pub use tensor::{read_tensor, write_tensor, LatentTensor};
pub use transform::{apply_transform, transform_mask, OverlapMask, TransformSpec};
