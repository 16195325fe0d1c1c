use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use noiseprints::calibration::{calibrate_threshold, Fpr};
use noiseprints::noise::NoiseSpec;
use noiseprints::zk::FieldConfig;
use serde::Deserialize;

/// Bad invocation: reported with exit code 3.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Optional `--config` file. Command-line flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tau: Option<f64>,
    pub dim: Option<usize>,
    pub fpr_log2: Option<f64>,
    pub chunk_count: Option<usize>,
    pub field_config: Option<PathBuf>,
    pub registry: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn noise_spec(&self, flag_chunks: Option<usize>, length: usize) -> Result<NoiseSpec> {
        match flag_chunks.or(self.chunk_count) {
            Some(n) => NoiseSpec::new(length, n).map_err(|e| usage(e.to_string())),
            None => Ok(NoiseSpec::canonical(length)),
        }
    }

    pub fn field_config(&self, flag: Option<&Path>, noise: NoiseSpec) -> Result<FieldConfig> {
        match flag.or(self.field_config.as_deref()) {
            Some(path) => {
                let cfg = FieldConfig::load(path)
                    .with_context(|| format!("loading field config {}", path.display()))?;
                if cfg.noise.total_length != noise.total_length {
                    return Err(usage(format!(
                        "field config is for L={}, content has {} entries",
                        cfg.noise.total_length, noise.total_length
                    )));
                }
                Ok(cfg)
            }
            None => Ok(FieldConfig::new(noise)),
        }
    }
}

/// Threshold flags shared by the scoring subcommands.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ThresholdArgs {
    /// Decision threshold on the cosine score.
    #[arg(long, allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Calibrate the threshold for this log2 false-positive rate instead.
    #[arg(long, allow_negative_numbers = true)]
    pub fpr_log2: Option<f64>,
    /// Dimension used for calibration (default: the content's dimension).
    #[arg(long)]
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Threshold {
    pub tau: f64,
    /// Present when the threshold was calibrated.
    pub fpr_log2: Option<f64>,
    pub dim: Option<usize>,
}

fn calibrated(dim: usize, fpr_log2: f64) -> Result<Threshold> {
    let delta = if fpr_log2.fract() == 0.0 && fpr_log2.abs() < f64::from(i32::MAX) {
        Fpr::from_log2(fpr_log2 as i32)
    } else {
        Fpr::from_f64(fpr_log2.exp2())
    };
    let p = calibrate_threshold(dim, delta).map_err(|e| usage(e.to_string()))?;
    Ok(Threshold {
        tau: p.tau,
        fpr_log2: Some(fpr_log2),
        dim: Some(dim),
    })
}

impl ThresholdArgs {
    /// Exactly one of `tau` or `fpr_log2` must be given, on the command line
    /// or else in the config file.
    pub fn resolve(&self, cfg: &RunConfig, content_dim: usize) -> Result<Threshold> {
        let pick = |tau: Option<f64>, fpr: Option<f64>, dim: Option<usize>, origin: &str| {
            match (tau, fpr) {
                (Some(_), Some(_)) => Some(Err(usage(format!(
                    "{origin}: give either tau or fpr_log2, not both"
                )))),
                (Some(t), None) => Some(Ok(Threshold {
                    tau: t,
                    fpr_log2: None,
                    dim: None,
                })),
                (None, Some(f)) => Some(calibrated(dim.unwrap_or(content_dim), f)),
                (None, None) => None,
            }
        };
        pick(self.tau, self.fpr_log2, self.dim.or(cfg.dim), "flags")
            .or_else(|| pick(cfg.tau, cfg.fpr_log2, self.dim.or(cfg.dim), "config"))
            .unwrap_or_else(|| Err(usage("a threshold is required: --tau or --fpr-log2")))
    }
}
