//! TPR at calibrated thresholds over synthetic trials.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use crate::calibration::{calibrate_threshold, Fpr};
use crate::error::{Error, Result};
use crate::harness::attacks::{apply_attack, AttackKind, AttackSpec};
use crate::harness::metrics::{psnr, ssim};
use crate::harness::synth::{synth_latent, SyntheticSpec};
use crate::noise::{derive_noise_for, SeedRecord};
use crate::scoring::noiseprint_score;

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub master: SeedRecord,
    pub trials: usize,
    pub alpha: f64,
    pub shape: (usize, usize, usize),
    pub structure_cutoff: f64,
    pub attacks: Vec<AttackSpec>,
    /// log2 of each false-positive rate to report.
    pub fpr_log2_grid: Vec<i32>,
}

impl EvalConfig {
    pub fn new(master: SeedRecord, trials: usize, alpha: f64, attacks: Vec<AttackSpec>) -> Self {
        Self {
            master,
            trials,
            alpha,
            shape: (4, 64, 64),
            structure_cutoff: 0.25,
            attacks,
            fpr_log2_grid: vec![-10, -32, -64, -128],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub attack: String,
    pub severity: f64,
    /// `(fpr_log2, tau, tpr)` in the order of the configured grid.
    pub tpr: Vec<(i32, f64, f64)>,
    /// Mean over trials with finite PSNR; `inf` when every trial was lossless.
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub dimension_d: usize,
    pub alpha: f64,
    pub cells: Vec<CellReport>,
}

impl RobustnessReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attack,severity,fpr_log2,tpr,mean_psnr_db,mean_ssim,trials\n");
        for c in &self.cells {
            for &(f, _, tpr) in &c.tpr {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    c.attack, c.severity, f, tpr, c.mean_psnr_db, c.mean_ssim, c.trials
                );
            }
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn cell(&self, kind: AttackKind, severity: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.attack == kind.name() && c.severity == severity)
    }
}

struct TrialResult {
    phi: f64,
    psnr: f64,
    ssim: f64,
}

fn run_trial(cfg: &EvalConfig, attack_index: usize, t: u64) -> Result<TrialResult> {
    let seed = cfg.master.derive_child("trial", t);
    let spec = SyntheticSpec::new(
        cfg.alpha,
        cfg.structure_cutoff,
        cfg.shape,
        cfg.master.derive_child("structure", t),
    );
    let z = synth_latent(&seed, &spec)?;
    let eps = derive_noise_for(&seed, cfg.shape)?;
    let base = &cfg.attacks[attack_index];
    let mut a = base.clone();
    if a.attack_seed.is_none() {
        a.attack_seed = Some(
            cfg.master
                .derive_child(&format!("attack/{}", base.label()), t),
        );
    }
    let attacked = apply_attack(&z, &a, Some(&eps))?;
    Ok(TrialResult {
        phi: noiseprint_score(&attacked, &eps)?,
        psnr: psnr(&z, &attacked)?,
        ssim: ssim(&z, &attacked)?,
    })
}

fn run_cell(cfg: &EvalConfig, attack_index: usize) -> Result<Vec<TrialResult>> {
    let trials = 0..cfg.trials as u64;
    #[cfg(feature = "parallel")]
    let results: Vec<Result<TrialResult>> =
        trials.into_par_iter().map(|t| run_trial(cfg, attack_index, t)).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<TrialResult>> =
        trials.map(|t| run_trial(cfg, attack_index, t)).collect();
    results.into_iter().collect()
}

/// Synthesizes `trials` latents per attack, attacks them and scores them
/// against their own noise. Each trial's seeds derive from the master seed
/// and the trial index only, so results do not depend on scheduling.
pub fn evaluate_robustness(cfg: &EvalConfig) -> Result<RobustnessReport> {
    if cfg.trials == 0 {
        return Err(Error::OutOfRange("trials must be >= 1".into()));
    }
    let d = cfg.shape.0 * cfg.shape.1 * cfg.shape.2;
    let mut grid = cfg.fpr_log2_grid.clone();
    grid.sort_unstable_by(|a, b| b.cmp(a));
    grid.dedup();
    let taus = grid
        .iter()
        .map(|&f| calibrate_threshold(d, Fpr::from_log2(f)).map(|p| (f, p.tau)))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(cfg.attacks.len());
    for (i, a) in cfg.attacks.iter().enumerate() {
        let results = run_cell(cfg, i)?;
        let n = results.len() as f64;
        let tpr = taus
            .iter()
            .map(|&(f, tau)| {
                let pass = results.iter().filter(|r| r.phi > tau).count();
                (f, tau, pass as f64 / n)
            })
            .collect();
        let finite: Vec<f64> = results.iter().map(|r| r.psnr).filter(|p| p.is_finite()).collect();
        let mean_psnr_db = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        cells.push(CellReport {
            attack: a.kind.name().to_string(),
            severity: a.severity,
            tpr,
            mean_psnr_db,
            mean_ssim: results.iter().map(|r| r.ssim).sum::<f64>() / n,
            trials: results.len(),
        });
    }
    Ok(RobustnessReport {
        dimension_d: d,
        alpha: cfg.alpha,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(attacks: Vec<AttackSpec>) -> EvalConfig {
        let mut c = EvalConfig::new(SeedRecord::new([7; 32], "eval"), 12, 0.3, attacks);
        c.shape = (4, 16, 16);
        c.fpr_log2_grid = vec![-128, -4, -16];
        c
    }

    #[test]
    fn tpr_monotone_in_fpr() {
        let r = evaluate_robustness(&config(vec![AttackSpec::new(AttackKind::Noise, 0.5)])).unwrap();
        let cell = &r.cells[0];
        assert_eq!(cell.tpr.iter().map(|t| t.0).collect::<Vec<_>>(), vec![-4, -16, -128]);
        for pair in cell.tpr.windows(2) {
            assert!(pair[0].2 >= pair[1].2);
        }
    }

    #[test]
    fn deterministic_and_csv_shape() {
        let attacks = vec![
            AttackSpec::new(AttackKind::None, 0.0),
            AttackSpec::new(AttackKind::Renoise, 0.4),
        ];
        let a = evaluate_robustness(&config(attacks.clone())).unwrap().to_csv();
        let b = evaluate_robustness(&config(attacks)).unwrap().to_csv();
        assert_eq!(a, b);
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines[0], "attack,severity,fpr_log2,tpr,mean_psnr_db,mean_ssim,trials");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[1].starts_with("none,0,-4,1,inf,1,12"));
    }

    #[test]
    fn zero_trials_rejected() {
        let mut c = config(vec![]);
        c.trials = 0;
        assert!(evaluate_robustness(&c).is_err());
    }
}
