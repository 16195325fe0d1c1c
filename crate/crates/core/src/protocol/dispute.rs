use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{derive_noise, NoiseSpec, SeedRecord};
use crate::protocol::claim::ResolvedClaim;
use crate::scoring::{extended_score, noiseprint_score, ScoreReport};
use crate::tensor::LatentTensor;
use crate::transform::TransformSpec;

/// Accept iff the NoisePrint of `x` under `seed` reaches `tau`.
pub fn verify(
    x: &LatentTensor,
    seed: &SeedRecord,
    tau: f64,
    spec: &NoiseSpec,
) -> Result<ScoreReport> {
    if x.dim() != spec.total_length {
        return Err(Error::Shape(format!(
            "content has {} entries, noise length is {}",
            x.dim(),
            spec.total_length
        )));
    }
    let eps = derive_noise(seed, spec, x.shape())?;
    let phi = noiseprint_score(x, &eps)?;
    Ok(ScoreReport::new(phi, tau, x.dim(), None, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winner {
    A,
    B,
    Unresolved,
}

/// Outcome of the dispute protocol with the four underlying scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisputeVerdict {
    pub winner: Winner,
    pub self_pass_a: bool,
    pub cross_pass_a: bool,
    pub self_pass_b: bool,
    pub cross_pass_b: bool,
    pub self_a: ScoreReport,
    pub cross_a: ScoreReport,
    pub self_b: ScoreReport,
    pub cross_b: ScoreReport,
}

impl DisputeVerdict {
    fn from_scores(
        self_a: ScoreReport,
        cross_a: ScoreReport,
        self_b: ScoreReport,
        cross_b: ScoreReport,
    ) -> Self {
        let valid_a = self_a.pass && cross_a.pass;
        let valid_b = self_b.pass && cross_b.pass;
        let winner = match (valid_a, valid_b) {
            (true, false) => Winner::A,
            (false, true) => Winner::B,
            _ => Winner::Unresolved,
        };
        Self {
            winner,
            self_pass_a: self_a.pass,
            cross_pass_a: cross_a.pass,
            self_pass_b: self_b.pass,
            cross_pass_b: cross_b.pass,
            self_a,
            cross_a,
            self_b,
            cross_b,
        }
    }
}

fn cross_check(
    opponent_content: &LatentTensor,
    own_noise: &LatentTensor,
    g: &TransformSpec,
    tau: f64,
) -> Result<ScoreReport> {
    match extended_score(opponent_content, own_noise, g) {
        Ok((phi, coverage)) => Ok(ScoreReport::new(
            phi,
            tau,
            opponent_content.dim(),
            Some(*g),
            coverage,
        )),
        // a transform that leaves no usable overlap simply fails the check
        Err(Error::InsufficientOverlap { coverage }) => Ok(ScoreReport {
            phi: 0.0,
            tau,
            dimension_d: opponent_content.dim(),
            pass: false,
            transform: Some(*g),
            masked_fraction: coverage.max(f64::MIN_POSITIVE),
        }),
        Err(e) => Err(e),
    }
}

/// Resolves two competing claims. Each claimant must pass a self check on
/// their own content and a cross check on the opponent's content after their
/// declared transform (identity when absent).
pub fn dispute(
    claim_a: &ResolvedClaim,
    claim_b: &ResolvedClaim,
    tau: f64,
    spec: &NoiseSpec,
) -> Result<DisputeVerdict> {
    let (xa, xb) = (&claim_a.content, &claim_b.content);
    if !xa.same_shape(xb) {
        return Err(Error::Protocol(format!(
            "claims reference content of different shapes {:?} and {:?}",
            xa.shape(),
            xb.shape()
        )));
    }
    if xa.dim() != spec.total_length {
        return Err(Error::Protocol(format!(
            "content has {} entries, noise length is {}",
            xa.dim(),
            spec.total_length
        )));
    }
    let eps_a = derive_noise(&claim_a.seed, spec, xa.shape())?;
    let eps_b = derive_noise(&claim_b.seed, spec, xb.shape())?;
    let g_a = claim_a.transform.unwrap_or_default();
    let g_b = claim_b.transform.unwrap_or_default();

    let self_score = |x: &LatentTensor, eps: &LatentTensor| -> Result<ScoreReport> {
        let phi = noiseprint_score(x, eps)?;
        Ok(ScoreReport::new(
            phi,
            tau,
            x.dim(),
            Some(TransformSpec::Identity),
            1.0,
        ))
    };
    let self_a = self_score(xa, &eps_a)?;
    let cross_a = cross_check(xb, &eps_a, &g_a, tau)?;
    let self_b = self_score(xb, &eps_b)?;
    let cross_b = cross_check(xa, &eps_b, &g_b, tau)?;
    Ok(DisputeVerdict::from_scores(self_a, cross_a, self_b, cross_b))
}
