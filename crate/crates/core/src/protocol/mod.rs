//! Verification and dispute protocols, claimant-side alignment, and the
//! append-only claim registry.

mod align;
mod claim;
mod dispute;
mod registry;

pub use align::{estimate_alignment, AlignmentFamily};
pub use claim::{Claim, ResolvedClaim, CLAIM_VERSION};
pub use dispute::{dispute, verify, DisputeVerdict, Winner};
pub use registry::{registry_append, registry_list, RegistryRecord};
