use num_bigint::BigUint;
use num_traits::Zero;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::noise::{NoiseSpec, SeedRecord};
use crate::tensor::LatentTensor;
use crate::zk::combine::{combine_check, combine_witness, CombineInstance, Opening};
use crate::zk::dpm::{dpm_check, dpm_generate_witness, DpmInstance};
use crate::zk::field::{hex_biguint, FieldConfig, NdMode, SignedFixed};
use crate::zk::nd::quantize;
use crate::zk::{CheckResult, Constraint, Violation};

pub const BUNDLE_FORMAT: &str = "noiseprints-zk-emulated/1";
const NOT_HIDING: &str =
    "emulated proof: carries the private seed and full witness; it proves nothing in zero knowledge";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct FieldJson {
    #[serde(with = "hex_biguint")]
    prime: BigUint,
    fixed_point_bits: u32,
    total_length: usize,
    chunk_count: usize,
    nd_mode: NdMode,
}

/// One DPM instance as stored in a bundle (the image chunk is public and
/// supplied by the verifier).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkRecord {
    pub c: usize,
    #[serde(with = "hex::serde")]
    pub com: [u8; 32],
    #[serde(with = "hex::serde")]
    pub r: [u8; 32],
    /// Magnitude of the dot product.
    #[serde(with = "hex_biguint")]
    pub dot_prod: BigUint,
    /// 1 when the dot product is negative.
    pub sign: u8,
    #[serde(with = "hex_biguint")]
    pub sq_mag: BigUint,
    pub noise: Vec<SignedFixed>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofBundle {
    pub format: String,
    pub warning: String,
    field: FieldJson,
    pub s_pub: String,
    #[serde(with = "hex::serde")]
    pub s_priv: [u8; 32],
    pub chunks: Vec<ChunkRecord>,
    #[serde(with = "hex_biguint")]
    pub mag: BigUint,
    pub ca: SignedFixed,
    #[serde(with = "hex_biguint")]
    pub t: BigUint,
    #[serde(with = "hex_biguint")]
    pub img_mag: BigUint,
}

impl ProofBundle {
    pub fn field_config(&self) -> Result<FieldConfig> {
        let mut cfg = FieldConfig::new(NoiseSpec::new(self.field.total_length, self.field.chunk_count)?);
        cfg.prime = self.field.prime.clone();
        cfg.fixed_point_bits = self.field.fixed_point_bits;
        cfg.nd_mode = self.field.nd_mode;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cosine as attested by the bundle, `CA / 2^32`.
    pub fn cosine(&self) -> f64 {
        self.ca.to_f64(self.field.fixed_point_bits)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: ProofBundle = serde_json::from_str(text)?;
        if b.format != BUNDLE_FORMAT {
            return Err(Error::Format(format!("unknown bundle format '{}'", b.format)));
        }
        Ok(b)
    }
}

/// Image entries as 32.32 fixed point, truncated toward zero.
pub fn quantize_image(image: &LatentTensor) -> Result<Vec<SignedFixed>> {
    image.data().iter().map(|&v| quantize(f64::from(v))).collect()
}

/// `isqrt(sum floor(v^2 / 2^F))`, the image norm at scale `2^(F/2)`.
pub fn image_magnitude(cfg: &FieldConfig, q: &[SignedFixed]) -> BigUint {
    let f = cfg.fixed_point_bits;
    q.iter()
        .fold(BigUint::zero(), |acc, v| cfg.add(&acc, &((&v.magnitude * &v.magnitude) >> f)))
        .sqrt()
}

fn threshold_fixed(tau: f64) -> Result<BigUint> {
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::OutOfRange(format!("tau {tau} outside [0, 1)")));
    }
    // exact: multiplying by a power of two only shifts the exponent
    Ok(BigUint::from((tau * 2f64.powi(32)).floor() as u64))
}

fn commitment_randomness(seed: &SeedRecord, c: usize, chunk: &[SignedFixed]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"noiseprints/zk-commit");
    h.update(seed.s_priv);
    h.update((c as u32).to_le_bytes());
    for v in chunk {
        h.update([u8::from(v.negative)]);
        h.update(v.magnitude.to_bytes_le());
    }
    h.finalize().into()
}

/// Builds every DPM instance and the combine instance for `image`.
/// The bundle is produced even when the cosine is below `tau`; the
/// threshold constraint then rejects it.
pub fn zk_prove_emulated(
    seed: &SeedRecord,
    image: &LatentTensor,
    tau: f64,
    cfg: &FieldConfig,
) -> Result<ProofBundle> {
    cfg.validate()?;
    if image.dim() != cfg.noise.total_length {
        return Err(Error::Shape(format!(
            "image has {} entries, the circuit expects {}",
            image.dim(),
            cfg.noise.total_length
        )));
    }
    let t = threshold_fixed(tau)?;
    let q = quantize_image(image)?;
    let img_mag = image_magnitude(cfg, &q);
    let len = cfg.noise.chunk_len();
    let witness = |c: usize| -> Result<DpmInstance> {
        let chunk = &q[c * len..(c + 1) * len];
        dpm_generate_witness(cfg, seed, c, chunk, commitment_randomness(seed, c, chunk))
    };
    #[cfg(feature = "parallel")]
    let dpms: Vec<DpmInstance> = (0..cfg.noise.chunk_count)
        .into_par_iter()
        .map(witness)
        .collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let dpms: Vec<DpmInstance> = (0..cfg.noise.chunk_count).map(witness).collect::<Result<_>>()?;

    let openings = dpms
        .iter()
        .map(|d| Opening {
            r: d.r,
            dot_prod: d.dot_prod.clone(),
            sq_mag: d.sq_mag.clone(),
        })
        .collect();
    let combine = combine_witness(cfg, dpms.iter().map(|d| d.com).collect(), openings, img_mag, t)?;
    Ok(ProofBundle {
        format: BUNDLE_FORMAT.into(),
        warning: NOT_HIDING.into(),
        field: FieldJson {
            prime: cfg.prime.clone(),
            fixed_point_bits: cfg.fixed_point_bits,
            total_length: cfg.noise.total_length,
            chunk_count: cfg.noise.chunk_count,
            nd_mode: cfg.nd_mode,
        },
        s_pub: seed.s_pub.clone(),
        s_priv: seed.s_priv,
        chunks: dpms
            .into_iter()
            .map(|d| ChunkRecord {
                c: d.chunk,
                com: d.com,
                r: d.r,
                dot_prod: d.dot_prod.magnitude,
                sign: u8::from(d.dot_prod.negative),
                sq_mag: d.sq_mag,
                noise: d.noise,
            })
            .collect(),
        mag: combine.mag,
        ca: combine.ca,
        t: combine.t,
        img_mag: combine.img_mag,
    })
}

/// Replays all circuits using the verifier's own public inputs: `image`,
/// `s_pub` and `tau`. Outer errors mean the bundle is malformed; the inner
/// result is the verdict.
pub fn zk_verify_emulated(
    bundle: &ProofBundle,
    image: &LatentTensor,
    s_pub: &str,
    tau: f64,
) -> Result<CheckResult> {
    let cfg = bundle.field_config()?;
    let public = Violation::new(Constraint::PublicInput);
    if image.dim() != cfg.noise.total_length {
        return Ok(Err(public));
    }
    let t = threshold_fixed(tau)?;
    let q = quantize_image(image)?;
    let len = cfg.noise.chunk_len();
    if bundle.chunks.len() != cfg.noise.chunk_count {
        return Ok(Err(Violation::new(Constraint::Shape)));
    }
    let check = |i: usize| -> CheckResult {
        let rec = &bundle.chunks[i];
        if rec.c != i || rec.sign > 1 {
            return Err(Violation::new(Constraint::Shape).in_chunk(i));
        }
        let inst = DpmInstance {
            chunk: i,
            s_pub: s_pub.to_string(),
            image: q[i * len..(i + 1) * len].to_vec(),
            com: rec.com,
            s_priv: bundle.s_priv,
            r: rec.r,
            noise: rec.noise.clone(),
            dot_prod: SignedFixed::new(rec.dot_prod.clone(), rec.sign == 1),
            sq_mag: rec.sq_mag.clone(),
        };
        dpm_check(&cfg, &inst)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<CheckResult> = (0..cfg.noise.chunk_count).into_par_iter().map(check).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<CheckResult> = (0..cfg.noise.chunk_count).map(check).collect();
    if let Some(v) = results.into_iter().find_map(|r| r.err()) {
        return Ok(Err(v));
    }

    let img_mag = image_magnitude(&cfg, &q);
    if img_mag != bundle.img_mag || t != bundle.t {
        return Ok(Err(public));
    }
    let combine = CombineInstance {
        commitments: bundle.chunks.iter().map(|c| c.com).collect(),
        img_mag,
        t,
        openings: bundle
            .chunks
            .iter()
            .map(|c| Opening {
                r: c.r,
                dot_prod: SignedFixed::new(c.dot_prod.clone(), c.sign == 1),
                sq_mag: c.sq_mag.clone(),
            })
            .collect(),
        mag: bundle.mag.clone(),
        ca: bundle.ca.clone(),
    };
    Ok(combine_check(&cfg, &combine))
}
