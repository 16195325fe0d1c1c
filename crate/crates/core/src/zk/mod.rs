//! Emulated zero-knowledge circuits over a prime field.
//!
//! Two circuits are modelled as witness generation plus constraint checks:
//!
//! * DPM, one per noise chunk: re-derives the chunk's noise from the seed,
//!   accumulates the fixed-point dot product with the public image chunk and
//!   the squared noise magnitude, and opens a hash commitment to both.
//! * Combine: opens every chunk commitment, aggregates, and checks the
//!   magnitude bracket, the cosine bracket and the threshold comparison.
//!
//! **The emulation does not hide anything.** A [`ProofBundle`] carries the
//! private seed and every witness value so that a verifier can replay each
//! constraint. It demonstrates what a succinct proof would attest to; it is
//! not one, and must never be published in place of a real proof.

mod bundle;
mod combine;
mod dpm;
mod field;
mod nd;

pub use bundle::{image_magnitude, quantize_image, zk_prove_emulated, zk_verify_emulated, ChunkRecord, ProofBundle};
pub use combine::{combine_check, combine_witness, CombineInstance, Opening};
pub use dpm::{commit, dpm_check, dpm_generate_witness, DpmInstance};
pub use field::{FieldConfig, NdMode, SignedFixed, BN254_SCALAR_PRIME_HEX};
pub use nd::{nd_lookup, quantize};

use std::fmt;

/// The constraint a rejected instance violates first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Public inputs or witness vectors have inconsistent sizes.
    Shape,
    /// A value exceeds its declared bit width.
    Range,
    /// A noise entry differs from the lookup of its derived uniform.
    Lookup,
    DotAccumulator,
    SqAccumulator,
    Commitment,
    MagnitudeBracket,
    CosineBracket,
    Threshold,
    /// Public data in the bundle disagrees with the verifier's own.
    PublicInput,
}

impl Constraint {
    pub fn name(self) -> &'static str {
        match self {
            Constraint::Shape => "shape",
            Constraint::Range => "range",
            Constraint::Lookup => "lookup",
            Constraint::DotAccumulator => "dot-product accumulator",
            Constraint::SqAccumulator => "squared-magnitude accumulator",
            Constraint::Commitment => "commitment",
            Constraint::MagnitudeBracket => "magnitude bracket",
            Constraint::CosineBracket => "cosine bracket",
            Constraint::Threshold => "threshold",
            Constraint::PublicInput => "public input",
        }
    }
}

/// Where a check failed: the circuit (chunk index for DPM), the constraint,
/// and the element index within it when there is one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub chunk: Option<usize>,
    pub constraint: Constraint,
    pub index: Option<usize>,
}

impl Violation {
    pub(crate) fn new(constraint: Constraint) -> Self {
        Self {
            chunk: None,
            constraint,
            index: None,
        }
    }

    pub(crate) fn at(mut self, index: usize) -> Self {
        self.index = Some(index);
        self
    }

    pub(crate) fn in_chunk(mut self, chunk: usize) -> Self {
        self.chunk = Some(chunk);
        self
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.chunk {
            Some(c) => write!(f, "DPM circuit {c}: ")?,
            None => write!(f, "combine circuit: ")?,
        }
        write!(f, "{} constraint violated", self.constraint.name())?;
        if let Some(i) = self.index {
            write!(f, " at index {i}")?;
        }
        Ok(())
    }
}

/// Accept, or the first violated constraint.
pub type CheckResult = std::result::Result<(), Violation>;
