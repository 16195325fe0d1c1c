use std::sync::OnceLock;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::noise::{gaussian_from_uniform, SAMPLE_BITS};
use crate::zk::field::{NdMode, SignedFixed};

const FRAC_BITS: i32 = 32;
const TABLE_BITS: u32 = 16;
const TABLE_STEP_BITS: u32 = SAMPLE_BITS - TABLE_BITS;
const MAX_UNIFORM: u64 = (1u64 << SAMPLE_BITS) - 1;

/// Truncates `|v| * 2^32` toward zero and keeps the sign bit of `v`.
pub fn quantize(v: f64) -> Result<SignedFixed> {
    let scaled = v.abs() * 2f64.powi(FRAC_BITS);
    if !scaled.is_finite() || scaled >= 2f64.powi(64) {
        return Err(Error::OutOfRange(format!("{v} does not fit a 32.32 fixed-point value")));
    }
    Ok(SignedFixed::new(scaled as u64, v.is_sign_negative()))
}

fn quantize_i128(v: f64) -> i128 {
    let m = (v.abs() * 2f64.powi(FRAC_BITS)) as i128;
    if v.is_sign_negative() {
        -m
    } else {
        m
    }
}

fn table() -> &'static [i128] {
    static TABLE: OnceLock<Vec<i128>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=(1u64 << TABLE_BITS))
            .map(|i| quantize_i128(gaussian_from_uniform((i << TABLE_STEP_BITS).min(MAX_UNIFORM))))
            .collect()
    })
}

fn table_lookup(u: u64) -> SignedFixed {
    let t = table();
    let i = (u >> TABLE_STEP_BITS) as usize;
    let lo = (i as u64) << TABLE_STEP_BITS;
    let hi = ((i as u64 + 1) << TABLE_STEP_BITS).min(MAX_UNIFORM);
    let frac = i128::from(u - lo);
    let span = i128::from(hi - lo);
    let v = t[i] + ((t[i + 1] - t[i]) * frac).div_euclid(span);
    SignedFixed::new(BigUint::from(v.unsigned_abs()), v < 0)
}

/// In-circuit Gaussian value of a 33-bit uniform at scale `2^32`.
pub fn nd_lookup(u: u64, mode: NdMode) -> SignedFixed {
    debug_assert!(u <= MAX_UNIFORM);
    match mode {
        NdMode::Exact => quantize(gaussian_from_uniform(u)).expect("inverse CDF is bounded"),
        NdMode::Table16 => table_lookup(u),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn midpoint_and_sign_flip() {
        let mid = nd_lookup(1 << 32, NdMode::Exact);
        assert_eq!(mid, SignedFixed::zero());
        let below = nd_lookup((1 << 32) - 1, NdMode::Exact);
        assert!(below.negative);
        assert_eq!(below.magnitude, BigUint::from(0u8));
        assert!(nd_lookup((1 << 32) + 5, NdMode::Exact).magnitude > BigUint::from(0u8));
        assert!(!nd_lookup((1 << 32) + 5, NdMode::Exact).negative);
        assert!(nd_lookup((1 << 32) - 6, NdMode::Exact).negative);
    }

    #[test]
    fn agrees_with_float_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100_000 {
            let u = rng.gen_range(0..=MAX_UNIFORM);
            let fixed = nd_lookup(u, NdMode::Exact).to_f64(32);
            let float = gaussian_from_uniform(u);
            assert!((fixed - float).abs() <= 2f64.powi(-32) + 2e-9, "u={u}");
        }
    }

    #[test]
    fn table_mode_is_close_in_the_bulk() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..10_000 {
            // central 98%: the interpolation error grows in the far tails
            let u = rng.gen_range((MAX_UNIFORM / 100)..(MAX_UNIFORM / 100 * 99));
            let t = nd_lookup(u, NdMode::Table16).to_f64(32);
            assert!((t - gaussian_from_uniform(u)).abs() < 1e-6, "u={u}");
        }
        assert_eq!(
            nd_lookup(5 << TABLE_STEP_BITS, NdMode::Table16),
            nd_lookup(5 << TABLE_STEP_BITS, NdMode::Exact)
        );
    }

    #[test]
    fn quantize_range() {
        assert!(quantize(4.0e9).is_ok());
        assert!(quantize(5.0e9).is_err());
        assert!(quantize(f64::NAN).is_err());
        assert_eq!(quantize(-0.5).unwrap(), SignedFixed::new(1u64 << 31, true));
    }
}
