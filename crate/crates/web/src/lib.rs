//! Browser demo: threshold calibration curves, spatial correlation maps of
//! partially replaced content, and recovery of a rotated copy by alignment.
//!
//! Every export returns a JSON string so the page needs no generated type
//! bindings beyond plain functions.

use noiseprints::calibration::{calibrate_threshold, Fpr};
use noiseprints::harness::{synth_latent, SyntheticSpec};
use noiseprints::noise::SeedRecord;
use noiseprints::protocol::{estimate_alignment, AlignmentFamily};
use noiseprints::scoring::{correlation_map, extended_score, noiseprint_score};
use noiseprints::transform::{apply_transform, TransformSpec};
use noiseprints::{derive_noise_for, LatentTensor};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Latent shape used by the demos.
pub const DEMO_SHAPE: (usize, usize, usize) = (4, 64, 64);
/// NoisePrint of the synthetic owner content.
pub const DEMO_ALPHA: f64 = 0.482;

type DemoResult<T> = Result<T, String>;

fn seed(label: &str, index: u64) -> SeedRecord {
    SeedRecord::new([0x5a; 32], "demo").derive_child(label, index)
}

fn latent(owner: &SeedRecord, structure: u64) -> DemoResult<LatentTensor> {
    let spec = SyntheticSpec::new(DEMO_ALPHA, 0.25, DEMO_SHAPE, seed("structure", structure));
    synth_latent(owner, &spec).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(r: DemoResult<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub fpr_log2: i32,
    pub tau: f64,
}

/// Threshold for each integer `fpr_log2` in `[lo, hi]` at dimension `dim`.
pub fn calibration_curve(dim: usize, lo: i32, hi: i32) -> DemoResult<Vec<CurvePoint>> {
    if lo > hi || hi >= 0 || hi - lo > 1024 {
        return Err(format!("need lo <= hi < 0 and at most 1024 points, got [{lo}, {hi}]"));
    }
    (lo..=hi)
        .map(|e| {
            calibrate_threshold(dim, Fpr::from_log2(e))
                .map(|p| CurvePoint { fpr_log2: e, tau: p.tau })
                .map_err(|err| err.to_string())
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct MapView {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    pub global_score: f64,
    pub owned_columns: usize,
}

/// Owner content whose right `replaced` fraction of columns is swapped for an
/// unrelated latent; returns the smoothed correlation map against the owner.
pub fn tamper_map(replaced: f64, sigma: f64, map_threshold: f64) -> DemoResult<MapView> {
    if !(0.0..=1.0).contains(&replaced) {
        return Err(format!("replaced fraction {replaced} outside [0, 1]"));
    }
    let owner = seed("owner", 0);
    let mut z = latent(&owner, 0)?;
    let other = latent(&seed("stranger", 0), 1)?;
    let (c, h, w) = DEMO_SHAPE;
    let owned = ((1.0 - replaced) * w as f64).round() as usize;
    for ch in 0..c {
        let src = other.plane(ch).to_vec();
        let dst = z.plane_mut(ch);
        for y in 0..h {
            dst[y * w + owned..(y + 1) * w].copy_from_slice(&src[y * w + owned..(y + 1) * w]);
        }
    }
    let eps = derive_noise_for(&owner, DEMO_SHAPE).map_err(|e| e.to_string())?;
    let map = correlation_map(&z, &eps, sigma, map_threshold).map_err(|e| e.to_string())?;
    Ok(MapView {
        height: map.height,
        width: map.width,
        global_score: noiseprint_score(&z, &eps).map_err(|e| e.to_string())?,
        values: map.values,
        mask: map.mask,
        owned_columns: owned,
    })
}

#[derive(Debug, Serialize)]
pub struct RotationView {
    pub tau: f64,
    pub angle_degrees: f64,
    /// Score of the rotated copy without alignment.
    pub raw_score: f64,
    /// Estimated forward transform, absent when estimation failed.
    pub estimated: Option<TransformSpec>,
    /// Score after applying the inverse of the estimate.
    pub aligned_score: Option<f64>,
    pub masked_fraction: Option<f64>,
    pub pass: bool,
}

/// Rotates the owner content by `angle_degrees`, then shows the plain score,
/// the estimated alignment and the score after re-alignment.
pub fn rotation_recovery(angle_degrees: f64, fpr_log2: i32) -> DemoResult<RotationView> {
    let dim = DEMO_SHAPE.0 * DEMO_SHAPE.1 * DEMO_SHAPE.2;
    let tau = calibrate_threshold(dim, Fpr::from_log2(fpr_log2))
        .map_err(|e| e.to_string())?
        .tau;
    let owner = seed("owner", 0);
    let z = latent(&owner, 0)?;
    let rotated = apply_transform(&z, &TransformSpec::rotation(angle_degrees))
        .map_err(|e| e.to_string())?;
    let eps = derive_noise_for(&owner, DEMO_SHAPE).map_err(|e| e.to_string())?;
    let raw_score = noiseprint_score(&rotated, &eps).map_err(|e| e.to_string())?;
    let (estimated, aligned) = match estimate_alignment(&z, &rotated, AlignmentFamily::Rotation, tau) {
        Ok(g) => {
            let inv = g.inverse(DEMO_SHAPE.1, DEMO_SHAPE.2);
            let s = extended_score(&rotated, &eps, &inv).map_err(|e| e.to_string())?;
            (Some(g), Some(s))
        }
        Err(_) => (None, None),
    };
    Ok(RotationView {
        tau,
        angle_degrees,
        raw_score,
        estimated,
        aligned_score: aligned.map(|s| s.0),
        masked_fraction: aligned.map(|s| s.1),
        pass: aligned.map_or(raw_score >= tau, |s| s.0 >= tau),
    })
}

#[wasm_bindgen(js_name = calibrationCurve)]
pub fn calibration_curve_js(dim: usize, lo: i32, hi: i32) -> String {
    to_json(calibration_curve(dim, lo, hi))
}

#[wasm_bindgen(js_name = tamperMap)]
pub fn tamper_map_js(replaced: f64, sigma: f64, map_threshold: f64) -> String {
    to_json(tamper_map(replaced, sigma, map_threshold))
}

#[wasm_bindgen(js_name = rotationRecovery)]
pub fn rotation_recovery_js(angle_degrees: f64, fpr_log2: i32) -> String {
    to_json(rotation_recovery(angle_degrees, fpr_log2))
}
