use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{read_seed, sha256, Digest32, SeedRecord};
use crate::tensor::{read_tensor, LatentTensor};
use crate::transform::TransformSpec;

pub const CLAIM_VERSION: u32 = 1;

/// Claim file contents: who claims which content with which seed, and the
/// transform that maps the opponent's content back onto theirs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub version: u32,
    pub claimant_id: String,
    pub content_ref: PathBuf,
    pub seed_ref: PathBuf,
    pub transform: Option<TransformSpec>,
}

impl Claim {
    pub fn new(
        claimant_id: impl Into<String>,
        content_ref: impl Into<PathBuf>,
        seed_ref: impl Into<PathBuf>,
        transform: Option<TransformSpec>,
    ) -> Self {
        Self {
            version: CLAIM_VERSION,
            claimant_id: claimant_id.into(),
            content_ref: content_ref.into(),
            seed_ref: seed_ref.into(),
            transform,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let claim: Claim = serde_json::from_str(text)?;
        if claim.version != CLAIM_VERSION {
            return Err(Error::Protocol(format!(
                "unsupported claim version {}",
                claim.version
            )));
        }
        Ok(claim)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Protocol(format!("cannot read claim {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// SHA-256 of the compact JSON encoding (fields in declaration order).
    pub fn digest(&self) -> Result<Digest32> {
        Ok(sha256(&serde_json::to_vec(self)?))
    }

    /// Loads the referenced tensor and seed; relative references resolve
    /// against `base_dir`.
    pub fn resolve(&self, base_dir: impl AsRef<Path>) -> Result<ResolvedClaim> {
        let base = base_dir.as_ref();
        let at = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let content_path = at(&self.content_ref);
        let seed_path = at(&self.seed_ref);
        let content = read_tensor(&content_path).map_err(|e| {
            Error::Protocol(format!("claim content {}: {e}", content_path.display()))
        })?;
        let seed = read_seed(&seed_path)
            .map_err(|e| Error::Protocol(format!("claim seed {}: {e}", seed_path.display())))?;
        Ok(ResolvedClaim {
            claimant_id: self.claimant_id.clone(),
            content,
            seed,
            transform: self.transform,
        })
    }

    /// Loads a claim file and everything it references.
    pub fn load_resolved(path: impl AsRef<Path>) -> Result<(Claim, ResolvedClaim)> {
        let path = path.as_ref();
        let claim = Self::load(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolved = claim.resolve(base)?;
        Ok((claim, resolved))
    }
}

/// A claim with its content and seed in memory.
#[derive(Debug, Clone)]
pub struct ResolvedClaim {
    pub claimant_id: String,
    pub content: LatentTensor,
    pub seed: SeedRecord,
    pub transform: Option<TransformSpec>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claim_json_schema() {
        let text = r#"{"version":1,"claimant_id":"alice","content_ref":"x.npt",
            "seed_ref":"alice.nps","transform":{"kind":"rotation","angle_degrees":-30.0}}"#;
        let c = Claim::from_json(text).unwrap();
        assert_eq!(c.transform, Some(TransformSpec::rotation(-30.0)));
        let c2 = Claim::from_json(
            r#"{"version":1,"claimant_id":"b","content_ref":"y","seed_ref":"s","transform":null}"#,
        )
        .unwrap();
        assert_eq!(c2.transform, None);
        assert!(Claim::from_json(
            r#"{"version":2,"claimant_id":"b","content_ref":"y","seed_ref":"s","transform":null}"#
        )
        .is_err());
        assert_eq!(c.digest().unwrap(), c.clone().digest().unwrap());
        assert_ne!(c.digest().unwrap(), c2.digest().unwrap());
    }

    #[test]
    fn unreadable_references_are_protocol_errors() {
        let dir = tempfile::tempdir().unwrap();
        let c = Claim::new("a", "missing.npt", "missing.nps", None);
        assert!(matches!(c.resolve(dir.path()), Err(Error::Protocol(_))));
    }
}
