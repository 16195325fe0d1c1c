//! Synthetic correlated latents, attack families on latent grids, perceptual
//! metrics and TPR/FPR robustness evaluation.

mod attacks;
mod decorrelate;
mod evaluate;
mod metrics;
mod synth;

pub use attacks::{apply_attack, AttackKind, AttackSpec};
pub use decorrelate::{decorrelate_attack, mixed_estimate, DecorrelateOutcome};
pub use evaluate::{evaluate_robustness, CellReport, EvalConfig, RobustnessReport};
pub use metrics::{psnr, ssim};
pub use synth::{synth_latent, SyntheticSpec};
