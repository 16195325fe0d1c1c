//! Canonical seed-to-noise derivation.
//!
//! For chunk `c` the digest `p = SHA-256(s_priv || s_pub || u32le(c))` seeds a
//! hash chain `p <- SHA-256(p)`. Every chain digest, read as a 256-bit
//! little-endian integer, yields seven 33-bit uniforms from bits `33j..33j+33`
//! (`j = 0..7`); bits 231..256 are discarded. Uniform `u` maps to
//! `Phi^{-1}((u + 0.5) / 2^33)` through Acklam's approximation. A chunk of
//! length not divisible by seven drops the unused parts of its final digest.

use std::fmt;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::normal::inverse_cdf_with_complement;
use crate::tensor::LatentTensor;

pub const SEED_MAGIC: [u8; 4] = *b"NPS1";
pub const SAMPLE_BITS: u32 = 33;
pub const PARTS_PER_DIGEST: usize = 7;
/// Default chunk length used when the total length permits it.
pub const CANONICAL_CHUNK: usize = 512;

const SAMPLE_MASK: u64 = (1u64 << SAMPLE_BITS) - 1;
const TWO_POW_33: f64 = (1u64 << SAMPLE_BITS) as f64;

pub type Digest32 = [u8; 32];

/// Private randomness plus a public ownership statement.
#[derive(Clone, PartialEq, Eq)]
pub struct SeedRecord {
    pub s_priv: [u8; 32],
    pub s_pub: String,
}

impl fmt::Debug for SeedRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SeedRecord")
            .field("s_priv", &"<redacted>")
            .field("s_pub", &self.s_pub)
            .finish()
    }
}

impl SeedRecord {
    pub fn new(s_priv: [u8; 32], s_pub: impl Into<String>) -> Self {
        Self {
            s_priv,
            s_pub: s_pub.into(),
        }
    }

    /// Parses `s_priv` from 64 hex characters.
    pub fn from_hex(s_priv_hex: &str, s_pub: impl Into<String>) -> Result<Self> {
        let bytes = hex::decode(s_priv_hex.trim())
            .map_err(|e| Error::Format(format!("s_priv hex: {e}")))?;
        let s_priv: [u8; 32] = bytes
            .try_into()
            .map_err(|v: Vec<u8>| Error::Format(format!("s_priv must be 32 bytes, got {}", v.len())))?;
        Ok(Self::new(s_priv, s_pub))
    }

    /// Deterministic child seed `SHA-256(s_priv || label || u64le(index))`.
    pub fn derive_child(&self, label: &str, index: u64) -> SeedRecord {
        let mut h = Sha256::new();
        h.update(self.s_priv);
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        SeedRecord::new(h.finalize().into(), self.s_pub.clone())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let pub_bytes = self.s_pub.as_bytes();
        let mut out = Vec::with_capacity(4 + 4 + pub_bytes.len() + 32);
        out.extend_from_slice(&SEED_MAGIC);
        out.extend_from_slice(&(pub_bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(pub_bytes);
        out.extend_from_slice(&self.s_priv);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || bytes[..4] != SEED_MAGIC {
            return Err(Error::Format("seed file: bad magic, expected NPS1".into()));
        }
        let len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let rest = &bytes[8..];
        if rest.len() != len + 32 {
            return Err(Error::Format(format!(
                "seed file: expected {} bytes after header, found {}",
                len + 32,
                rest.len()
            )));
        }
        let s_pub = std::str::from_utf8(&rest[..len])
            .map_err(|e| Error::Format(format!("seed file: s_pub is not UTF-8: {e}")))?
            .to_owned();
        Ok(Self::new(rest[len..].try_into().unwrap(), s_pub))
    }
}

pub fn write_seed(path: impl AsRef<Path>, seed: &SeedRecord) -> Result<()> {
    fs::write(path, seed.to_bytes())?;
    Ok(())
}

pub fn read_seed(path: impl AsRef<Path>) -> Result<SeedRecord> {
    SeedRecord::from_bytes(&fs::read(path)?)
}

/// Total noise length `L` split into `n` equal chunks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    pub total_length: usize,
    pub chunk_count: usize,
}

impl NoiseSpec {
    pub fn new(total_length: usize, chunk_count: usize) -> Result<Self> {
        if total_length == 0 || chunk_count == 0 || total_length % chunk_count != 0 {
            return Err(Error::Shape(format!(
                "noise length {total_length} is not divisible into {chunk_count} chunks"
            )));
        }
        Ok(Self {
            total_length,
            chunk_count,
        })
    }

    /// Chunks of [`CANONICAL_CHUNK`] entries when `L` allows it, else one chunk.
    pub fn canonical(total_length: usize) -> Self {
        let chunk_count = if total_length % CANONICAL_CHUNK == 0 {
            total_length / CANONICAL_CHUNK
        } else {
            1
        };
        Self {
            total_length,
            chunk_count,
        }
    }

    pub fn chunk_len(&self) -> usize {
        self.total_length / self.chunk_count
    }

    /// Hash-chain iterations per chunk.
    pub fn digests_per_chunk(&self) -> usize {
        self.chunk_len().div_ceil(PARTS_PER_DIGEST)
    }
}

/// `SHA-256(s_priv || UTF-8(s_pub) || u32le(c))`.
pub fn chunk_digest(seed: &SeedRecord, chunk: u32) -> Digest32 {
    let mut h = Sha256::new();
    h.update(seed.s_priv);
    h.update(seed.s_pub.as_bytes());
    h.update(chunk.to_le_bytes());
    h.finalize().into()
}

pub fn sha256(bytes: &[u8]) -> Digest32 {
    Sha256::digest(bytes).into()
}

/// Splits a digest into seven 33-bit little-endian parts.
pub fn digest_parts(digest: &Digest32) -> [u64; PARTS_PER_DIGEST] {
    let words: [u64; 4] =
        std::array::from_fn(|i| u64::from_le_bytes(digest[8 * i..8 * i + 8].try_into().unwrap()));
    std::array::from_fn(|j| {
        let offset = SAMPLE_BITS as usize * j;
        let (w, s) = (offset / 64, offset % 64);
        let mut v = words[w] >> s;
        if s + SAMPLE_BITS as usize > 64 {
            v |= words[w + 1] << (64 - s);
        }
        v & SAMPLE_MASK
    })
}

/// `count` uniforms in `[0, 2^33)` from the hash chain rooted at `p`.
pub fn expand_uniforms(p: &Digest32, count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count.next_multiple_of(PARTS_PER_DIGEST));
    let mut state = *p;
    while out.len() < count {
        state = sha256(&state);
        out.extend_from_slice(&digest_parts(&state));
    }
    out.truncate(count);
    out
}

/// `Phi^{-1}((u + 0.5) / 2^33)`; exactly odd about `u = 2^32`.
#[inline]
pub fn gaussian_from_uniform(u: u64) -> f64 {
    debug_assert!(u <= SAMPLE_MASK);
    let p = (u as f64 + 0.5) / TWO_POW_33;
    let q = ((SAMPLE_MASK - u) as f64 + 0.5) / TWO_POW_33;
    inverse_cdf_with_complement(p, q)
}

/// Gaussian values of one chunk in f64.
pub fn chunk_noise(seed: &SeedRecord, spec: &NoiseSpec, chunk: usize) -> Vec<f64> {
    let p = chunk_digest(seed, chunk as u32);
    expand_uniforms(&p, spec.chunk_len())
        .into_iter()
        .map(gaussian_from_uniform)
        .collect()
}

/// Derives `epsilon(h(s))` as a `(c, h, w)` tensor, channel-major.
pub fn derive_noise(
    seed: &SeedRecord,
    spec: &NoiseSpec,
    shape: (usize, usize, usize),
) -> Result<LatentTensor> {
    let (c, h, w) = shape;
    if c * h * w != spec.total_length {
        return Err(Error::Shape(format!(
            "shape {c}x{h}x{w} has {} entries but the noise length is {}",
            c * h * w,
            spec.total_length
        )));
    }
    let chunk = |i: usize| -> Vec<f32> {
        chunk_noise(seed, spec, i)
            .into_iter()
            .map(|v| v as f32)
            .collect()
    };
    #[cfg(feature = "parallel")]
    let data: Vec<f32> = {
        use rayon::prelude::*;
        (0..spec.chunk_count)
            .into_par_iter()
            .flat_map_iter(chunk)
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let data: Vec<f32> = (0..spec.chunk_count).flat_map(chunk).collect();
    LatentTensor::new(c, h, w, data)
}

/// Derives noise for a tensor shape using the canonical chunking.
pub fn derive_noise_for(seed: &SeedRecord, shape: (usize, usize, usize)) -> Result<LatentTensor> {
    derive_noise(seed, &NoiseSpec::canonical(shape.0 * shape.1 * shape.2), shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erf_inv;

    fn seed(byte: u8) -> SeedRecord {
        SeedRecord::new([byte; 32], "alice@example.org")
    }

    #[test]
    fn sha256_fips_vectors() {
        assert_eq!(
            hex::encode(sha256(b"abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            hex::encode(sha256(b"")),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn chunk_digest_layout() {
        let s = seed(7);
        let mut bytes = vec![7u8; 32];
        bytes.extend_from_slice(b"alice@example.org");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        assert_eq!(chunk_digest(&s, 3), sha256(&bytes));
        assert_eq!(chunk_digest(&s, 3), chunk_digest(&s, 3));
        assert_ne!(chunk_digest(&s, 0), chunk_digest(&s, 1));
    }

    #[test]
    fn digest_parts_by_hand() {
        // Bit pattern with a single set bit at each part's lowest and highest
        // positions exercises both word-straddling and in-word reads.
        let mut d = [0u8; 32];
        let set = |d: &mut [u8; 32], bit: usize| d[bit / 8] |= 1 << (bit % 8);
        for j in 0..7 {
            set(&mut d, 33 * j);
            set(&mut d, 33 * j + 32);
        }
        set(&mut d, 255); // beyond bit 231, ignored
        let parts = digest_parts(&d);
        assert_eq!(parts, [1 | (1 << 32); 7]);

        let all = digest_parts(&[0xff; 32]);
        assert_eq!(all, [SAMPLE_MASK; 7]);
    }

    #[test]
    fn expand_first_digest_matches_manual_slicing() {
        let p = sha256(b"noiseprints");
        let first = sha256(&p);
        let n = num_bigint::BigUint::from_bytes_le(&first);
        let mask = num_bigint::BigUint::from(SAMPLE_MASK);
        let expected: Vec<u64> = (0..7)
            .map(|j| {
                let part: num_bigint::BigUint = (&n >> (33 * j)) & &mask;
                part.try_into().unwrap()
            })
            .collect();
        let got = expand_uniforms(&p, 7);
        assert_eq!(got, expected);
        let more = expand_uniforms(&p, 10);
        assert_eq!(&more[..7], &got[..]);
        assert_eq!(more.len(), 10);
        assert!(more.iter().all(|&u| u < (1 << 33)));
    }

    #[test]
    fn uniform_mean_is_half() {
        let p = sha256(b"mean check");
        let us = expand_uniforms(&p, 1_000_006);
        let mean = us.iter().map(|&u| u as f64 / TWO_POW_33).sum::<f64>() / us.len() as f64;
        assert!((mean - 0.5).abs() < 0.002, "{mean}");
    }

    #[test]
    fn gaussian_midpoint_and_symmetry() {
        assert!(gaussian_from_uniform(1 << 32).abs() < 1e-9);
        for u in [0u64, 1, 12345, 1 << 20, (1 << 32) - 1, 5_000_000_000] {
            let a = gaussian_from_uniform(u);
            let b = gaussian_from_uniform(SAMPLE_MASK - u);
            assert!((a + b).abs() < 1e-9, "u={u}");
            assert!(a.is_finite() && a.abs() < 8.0);
        }
    }

    #[test]
    fn gaussian_quantile_accuracy() {
        // u with (u + 0.5) / 2^33 = 0.975 up to 2^-34
        let u = (0.975 * TWO_POW_33 - 0.5).round() as u64;
        let p = (u as f64 + 0.5) / TWO_POW_33;
        let oracle = std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0);
        let z = gaussian_from_uniform(u);
        assert!(((z - oracle) / oracle).abs() < 1.2e-9);
        assert!((z - 1.959964).abs() < 1e-5);
    }

    #[test]
    fn gaussian_monotone_on_stratified_sample() {
        let step = (1u64 << 33) / 100_003;
        let mut prev = f64::NEG_INFINITY;
        let mut u = 0;
        while u <= SAMPLE_MASK {
            let v = gaussian_from_uniform(u);
            assert!(v >= prev, "u={u}");
            prev = v;
            u += step;
        }
        // adjacency around the branch switches and the midpoint
        let p_low_u = (0.02425 * TWO_POW_33) as u64;
        for centre in [0, p_low_u, 1 << 32, SAMPLE_MASK - p_low_u, SAMPLE_MASK - 2000] {
            let lo = centre.saturating_sub(2000);
            let hi = (centre + 2000).min(SAMPLE_MASK);
            for u in lo..hi {
                assert!(gaussian_from_uniform(u) <= gaussian_from_uniform(u + 1), "u={u}");
            }
        }
    }

    #[test]
    fn derive_is_deterministic_and_gaussian() {
        let s = seed(1);
        let spec = NoiseSpec::canonical(262_144);
        let a = derive_noise(&s, &spec, (4, 256, 256)).unwrap();
        let b = derive_noise(&s, &spec, (4, 256, 256)).unwrap();
        assert_eq!(a, b);
        let x = a.to_f64();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn one_byte_change_gives_independent_noise() {
        let a = seed(3);
        let mut b = a.clone();
        b.s_priv[17] ^= 1;
        let shape = (4, 64, 64);
        let na = derive_noise_for(&a, shape).unwrap().to_f64();
        let nb = derive_noise_for(&b, shape).unwrap().to_f64();
        let dot: f64 = na.iter().zip(&nb).map(|(x, y)| x * y).sum();
        let cos = dot
            / (na.iter().map(|v| v * v).sum::<f64>().sqrt()
                * nb.iter().map(|v| v * v).sum::<f64>().sqrt());
        assert!(cos.abs() < 4.0 / (16384f64).sqrt(), "{cos}");
    }

    #[test]
    fn chunks_are_independent_of_each_other() {
        let s = seed(9);
        let spec = NoiseSpec::new(56, 2).unwrap();
        let full = derive_noise(&s, &spec, (1, 7, 8)).unwrap();
        let c1: Vec<f32> = chunk_noise(&s, &spec, 1).iter().map(|&v| v as f32).collect();
        assert_eq!(&full.data()[28..], &c1[..]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let spec = NoiseSpec::canonical(100);
        assert!(matches!(
            derive_noise(&seed(0), &spec, (1, 9, 9)),
            Err(Error::Shape(_))
        ));
        assert!(NoiseSpec::new(100, 3).is_err());
    }

    #[test]
    fn seed_file_round_trip() {
        let s = SeedRecord::new([0xab; 32], "owner: ünïcode");
        assert_eq!(SeedRecord::from_bytes(&s.to_bytes()).unwrap(), s);
        let mut bad = s.to_bytes();
        bad.pop();
        assert!(SeedRecord::from_bytes(&bad).is_err());
        assert!(SeedRecord::from_hex(&"0a".repeat(32), "").is_ok());
        assert!(SeedRecord::from_hex("0a0b", "").is_err());
    }
}
