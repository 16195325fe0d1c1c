use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{Num, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseSpec, PARTS_PER_DIGEST, SAMPLE_BITS};

/// Order of the BN254 scalar field.
pub const BN254_SCALAR_PRIME_HEX: &str =
    "30644e72e131a029b85045b68181585d2833e84879b9709143e1f593f0000001";

/// How noise entries are produced inside the circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NdMode {
    /// Quantized inverse CDF evaluated per uniform (bit-identical to a full
    /// 2^33-entry table).
    #[default]
    Exact,
    /// 2^16 + 1 quantized entries, linearly interpolated in fixed point.
    Table16,
}

#[derive(Serialize, Deserialize)]
struct FieldConfigFile {
    prime: String,
    fixed_point_bits: u32,
    #[serde(default = "default_sample_bits")]
    sample_bits: u32,
    #[serde(default = "default_parts")]
    parts_per_digest: usize,
    total_length: usize,
    chunk_count: usize,
    #[serde(default)]
    nd_mode: NdMode,
}

fn default_sample_bits() -> u32 {
    SAMPLE_BITS
}

fn default_parts() -> usize {
    PARTS_PER_DIGEST
}

/// Arithmetic parameters shared by the prover and the verifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldConfig {
    pub prime: BigUint,
    pub fixed_point_bits: u32,
    pub sample_bits: u32,
    pub parts_per_digest: usize,
    pub noise: NoiseSpec,
    pub nd_mode: NdMode,
}

impl FieldConfig {
    /// BN254 field, 32 fractional bits, canonical chunking of `total_length`.
    pub fn new(noise: NoiseSpec) -> Self {
        Self {
            prime: BigUint::from_str_radix(BN254_SCALAR_PRIME_HEX, 16).expect("valid constant"),
            fixed_point_bits: 32,
            sample_bits: SAMPLE_BITS,
            parts_per_digest: PARTS_PER_DIGEST,
            noise,
            nd_mode: NdMode::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bits = self.prime.bits();
        if bits < 128 || !self.prime.bit(0) {
            return Err(Error::OutOfRange(format!("field prime of {bits} bits is unusable")));
        }
        if self.sample_bits != SAMPLE_BITS || self.parts_per_digest != PARTS_PER_DIGEST {
            return Err(Error::OutOfRange(format!(
                "only {PARTS_PER_DIGEST} parts of {SAMPLE_BITS} bits are supported"
            )));
        }
        if (self.sample_bits as u64) * (self.parts_per_digest as u64) > bits - 2 {
            return Err(Error::OutOfRange("digest packing would wrap around the field".into()));
        }
        if self.fixed_point_bits != 32 {
            return Err(Error::OutOfRange(format!(
                "fixed_point_bits must be 32, got {}",
                self.fixed_point_bits
            )));
        }
        NoiseSpec::new(self.noise.total_length, self.noise.chunk_count)?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: FieldConfigFile =
            toml::from_str(text).map_err(|e| Error::Format(format!("field config: {e}")))?;
        let prime_hex = file.prime.trim_start_matches("0x");
        let prime = BigUint::from_str_radix(prime_hex, 16)
            .map_err(|e| Error::Format(format!("field prime: {e}")))?;
        let cfg = Self {
            prime,
            fixed_point_bits: file.fixed_point_bits,
            sample_bits: file.sample_bits,
            parts_per_digest: file.parts_per_digest,
            noise: NoiseSpec::new(file.total_length, file.chunk_count)?,
            nd_mode: file.nd_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let file = FieldConfigFile {
            prime: format!("0x{}", self.prime.to_str_radix(16)),
            fixed_point_bits: self.fixed_point_bits,
            sample_bits: self.sample_bits,
            parts_per_digest: self.parts_per_digest,
            total_length: self.noise.total_length,
            chunk_count: self.noise.chunk_count,
            nd_mode: self.nd_mode,
        };
        toml::to_string(&file).expect("plain struct serializes")
    }

    pub fn scale(&self) -> BigUint {
        BigUint::from(1u8) << self.fixed_point_bits
    }

    pub fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a + b) % &self.prime
    }

    pub fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.prime
    }

    /// Canonical representative check: `v < p`.
    pub fn contains(&self, v: &BigUint) -> bool {
        v < &self.prime
    }
}

/// A fixed-point value carried as a field magnitude and a sign bit.
/// Zero may carry either sign when it is a quantized lookup result.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignedFixed {
    pub magnitude: BigUint,
    pub negative: bool,
}

impl SignedFixed {
    pub fn zero() -> Self {
        Self {
            magnitude: BigUint::zero(),
            negative: false,
        }
    }

    pub fn new(magnitude: impl Into<BigUint>, negative: bool) -> Self {
        Self {
            magnitude: magnitude.into(),
            negative,
        }
    }

    /// Signed integer value; both zeros map to 0.
    pub fn to_bigint(&self) -> BigInt {
        let sign = if self.negative { Sign::Minus } else { Sign::Plus };
        BigInt::from_biguint(sign, self.magnitude.clone())
    }

    /// Canonical form of an integer: zero is positive.
    pub fn from_bigint(v: &BigInt) -> Self {
        Self {
            magnitude: v.magnitude().clone(),
            negative: v.sign() == Sign::Minus,
        }
    }

    /// Value divided by `2^bits`, rounded to f64.
    pub fn to_f64(&self, bits: u32) -> f64 {
        let m = biguint_to_f64(&self.magnitude) / 2f64.powi(bits as i32);
        if self.negative {
            -m
        } else {
            m
        }
    }
}

pub(crate) fn biguint_to_f64(v: &BigUint) -> f64 {
    // exact for values below 2^53, correctly scaled beyond
    let bits = v.bits();
    if bits <= 64 {
        return v.iter_u64_digits().next().unwrap_or(0) as f64;
    }
    let shift = bits - 64;
    let top = (v >> shift).iter_u64_digits().next().unwrap_or(0) as f64;
    top * 2f64.powi(shift as i32)
}

impl fmt::Display for SignedFixed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.negative { "-" } else { "" };
        write!(f, "{sign}0x{}", self.magnitude.to_str_radix(16))
    }
}

impl FromStr for SignedFixed {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (negative, rest) = match s.strip_prefix('-') {
            Some(r) => (true, r),
            None => (false, s),
        };
        let hex = rest
            .strip_prefix("0x")
            .ok_or_else(|| Error::Format(format!("fixed-point value '{s}' lacks 0x prefix")))?;
        let magnitude = BigUint::from_str_radix(hex, 16)
            .map_err(|e| Error::Format(format!("fixed-point value '{s}': {e}")))?;
        Ok(Self {
            magnitude,
            negative,
        })
    }
}

impl Serialize for SignedFixed {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SignedFixed {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helper for unsigned field elements as `0x`-prefixed hex.
pub(crate) mod hex_biguint {
    use num_bigint::BigUint;
    use num_traits::Num;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("0x{}", v.to_str_radix(16)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        let hex = s
            .strip_prefix("0x")
            .ok_or_else(|| serde::de::Error::custom(format!("'{s}' lacks 0x prefix")))?;
        BigUint::from_str_radix(hex, 16).map_err(serde::de::Error::custom)
    }
}
