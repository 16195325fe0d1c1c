use num_bigint::{BigInt, BigUint};
use num_traits::Zero;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::noise::{chunk_digest, expand_uniforms, SeedRecord};
use crate::zk::field::{FieldConfig, SignedFixed};
use crate::zk::nd::nd_lookup;
use crate::zk::{CheckResult, Constraint, Violation};

/// Per-chunk dot-product and squared-magnitude circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DpmInstance {
    // public
    pub chunk: usize,
    pub s_pub: String,
    pub image: Vec<SignedFixed>,
    pub com: [u8; 32],
    // private
    pub s_priv: [u8; 32],
    pub r: [u8; 32],
    // witness
    pub noise: Vec<SignedFixed>,
    pub dot_prod: SignedFixed,
    pub sq_mag: BigUint,
}

fn le32(v: &BigUint) -> [u8; 32] {
    let bytes = v.to_bytes_le();
    assert!(bytes.len() <= 32, "commitment input exceeds 256 bits");
    let mut out = [0u8; 32];
    out[..bytes.len()].copy_from_slice(&bytes);
    out
}

/// `SHA-256(sign || dot magnitude || sq_mag || r)`, magnitudes as 32-byte
/// little-endian integers.
pub fn commit(dot_prod: &SignedFixed, sq_mag: &BigUint, r: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update([u8::from(dot_prod.negative)]);
    h.update(le32(&dot_prod.magnitude));
    h.update(le32(sq_mag));
    h.update(r);
    h.finalize().into()
}

/// Field accumulation of `sum e_k v_k` and `sum e_k^2`, each product
/// floor-divided by `2^F`. Positive and negative products go to separate
/// accumulators; the result's sign bit selects their difference.
fn accumulate(cfg: &FieldConfig, noise: &[SignedFixed], image: &[SignedFixed]) -> (SignedFixed, BigUint) {
    let f = cfg.fixed_point_bits;
    let mut pos = BigUint::zero();
    let mut neg = BigUint::zero();
    let mut sq = BigUint::zero();
    for (e, v) in noise.iter().zip(image) {
        let prod = (&e.magnitude * &v.magnitude) >> f;
        if e.negative != v.negative {
            neg = cfg.add(&neg, &prod);
        } else {
            pos = cfg.add(&pos, &prod);
        }
        sq = cfg.add(&sq, &((&e.magnitude * &e.magnitude) >> f));
    }
    let dot = BigInt::from(pos) - BigInt::from(neg);
    (SignedFixed::from_bigint(&dot), sq)
}

fn noise_chunk(cfg: &FieldConfig, seed: &SeedRecord, c: usize) -> Vec<SignedFixed> {
    let digest = chunk_digest(seed, c as u32);
    expand_uniforms(&digest, cfg.noise.chunk_len())
        .into_iter()
        .map(|u| nd_lookup(u, cfg.nd_mode))
        .collect()
}

/// Honest witness for chunk `c` against the quantized image chunk.
pub fn dpm_generate_witness(
    cfg: &FieldConfig,
    seed: &SeedRecord,
    c: usize,
    image_chunk: &[SignedFixed],
    r: [u8; 32],
) -> Result<DpmInstance> {
    if c >= cfg.noise.chunk_count {
        return Err(Error::OutOfRange(format!(
            "chunk {c} outside 0..{}",
            cfg.noise.chunk_count
        )));
    }
    if image_chunk.len() != cfg.noise.chunk_len() {
        return Err(Error::Shape(format!(
            "image chunk has {} entries, expected {}",
            image_chunk.len(),
            cfg.noise.chunk_len()
        )));
    }
    let noise = noise_chunk(cfg, seed, c);
    let (dot_prod, sq_mag) = accumulate(cfg, &noise, image_chunk);
    Ok(DpmInstance {
        chunk: c,
        s_pub: seed.s_pub.clone(),
        image: image_chunk.to_vec(),
        com: commit(&dot_prod, &sq_mag, &r),
        s_priv: seed.s_priv,
        r,
        noise,
        dot_prod,
        sq_mag,
    })
}

/// Replays every DPM constraint; returns the first violation.
pub fn dpm_check(cfg: &FieldConfig, inst: &DpmInstance) -> CheckResult {
    let fail = |c: Constraint| Violation::new(c).in_chunk(inst.chunk);
    let len = cfg.noise.chunk_len();
    if inst.noise.len() != len || inst.image.len() != len || inst.chunk >= cfg.noise.chunk_count {
        return Err(fail(Constraint::Shape));
    }
    let limit = BigUint::from(1u8) << 64;
    for (k, v) in inst.noise.iter().chain(&inst.image).enumerate() {
        if v.magnitude >= limit {
            return Err(fail(Constraint::Range).at(k));
        }
    }
    if !cfg.contains(&inst.dot_prod.magnitude) || !cfg.contains(&inst.sq_mag) {
        return Err(fail(Constraint::Range));
    }
    let seed = SeedRecord::new(inst.s_priv, inst.s_pub.clone());
    let expected = noise_chunk(cfg, &seed, inst.chunk);
    if let Some(k) = expected.iter().zip(&inst.noise).position(|(a, b)| a != b) {
        return Err(fail(Constraint::Lookup).at(k));
    }
    let (dot, sq) = accumulate(cfg, &inst.noise, &inst.image);
    if dot != inst.dot_prod {
        return Err(fail(Constraint::DotAccumulator));
    }
    if sq != inst.sq_mag {
        return Err(fail(Constraint::SqAccumulator));
    }
    if commit(&inst.dot_prod, &inst.sq_mag, &inst.r) != inst.com {
        return Err(fail(Constraint::Commitment));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{chunk_noise, NoiseSpec};
    use crate::zk::nd::quantize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(l: usize, n: usize) -> FieldConfig {
        FieldConfig::new(NoiseSpec::new(l, n).unwrap())
    }

    fn seed() -> SeedRecord {
        SeedRecord::new([0x42; 32], "artist")
    }

    fn random_chunk(len: usize, s: u64) -> (Vec<f64>, Vec<SignedFixed>) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let q = v.iter().map(|&x| quantize(x).unwrap()).collect();
        (v, q)
    }

    #[test]
    fn self_inner_product() {
        let cfg = cfg(56, 2);
        let honest = dpm_generate_witness(&cfg, &seed(), 1, &vec![SignedFixed::zero(); 28], [0; 32]).unwrap();
        let inst = dpm_generate_witness(&cfg, &seed(), 1, &honest.noise, [1; 32]).unwrap();
        assert!(!inst.dot_prod.negative);
        assert_eq!(inst.dot_prod.magnitude, inst.sq_mag);
        // zero image: zero dot product, same squared magnitude
        assert_eq!(honest.dot_prod, SignedFixed::zero());
        assert_eq!(honest.sq_mag, inst.sq_mag);
    }

    #[test]
    fn matches_float_inner_product_at_paper_chunk_size() {
        let cfg = cfg(266_000, 380);
        let (v, q) = random_chunk(700, 7);
        let inst = dpm_generate_witness(&cfg, &seed(), 3, &q, [9; 32]).unwrap();
        let e = chunk_noise(&seed(), &cfg.noise, 3);
        let float: f64 = e.iter().zip(&v).map(|(a, b)| a * b).sum();
        let fixed = inst.dot_prod.to_f64(32);
        assert!((fixed - float).abs() <= 700.0 * 2f64.powi(-31), "{fixed} vs {float}");
        assert_eq!(dpm_check(&cfg, &inst), Ok(()));
    }

    #[test]
    fn mutations_are_named() {
        let cfg = cfg(56, 2);
        let (_, q) = random_chunk(28, 8);
        let honest = dpm_generate_witness(&cfg, &seed(), 0, &q, [3; 32]).unwrap();
        assert_eq!(dpm_check(&cfg, &honest), Ok(()));

        let mut m = honest.clone();
        m.noise[5].magnitude += 1u8;
        let v = dpm_check(&cfg, &m).unwrap_err();
        assert_eq!((v.constraint, v.index, v.chunk), (Constraint::Lookup, Some(5), Some(0)));

        let mut m = honest.clone();
        m.r[0] ^= 1;
        assert_eq!(dpm_check(&cfg, &m).unwrap_err().constraint, Constraint::Commitment);
        assert_ne!(commit(&honest.dot_prod, &honest.sq_mag, &m.r), honest.com);

        let mut m = honest.clone();
        m.sq_mag += 1u8;
        assert_eq!(dpm_check(&cfg, &m).unwrap_err().constraint, Constraint::SqAccumulator);

        let mut m = honest.clone();
        m.s_pub = "someone else".into();
        assert_eq!(dpm_check(&cfg, &m).unwrap_err().constraint, Constraint::Lookup);

        let mut m = honest;
        m.noise.pop();
        assert_eq!(dpm_check(&cfg, &m).unwrap_err().constraint, Constraint::Shape);
    }

    #[test]
    fn commitment_is_deterministic() {
        let d = SignedFixed::new(12345u32, true);
        let s = BigUint::from(999u32);
        assert_eq!(commit(&d, &s, &[7; 32]), commit(&d, &s, &[7; 32]));
        let flipped = SignedFixed::new(12345u32, false);
        assert_ne!(commit(&d, &s, &[7; 32]), commit(&flipped, &s, &[7; 32]));
    }
}
