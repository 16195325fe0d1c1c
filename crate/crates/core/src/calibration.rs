//! False-positive calibration for seed guessing.
//!
//! Under the null hypothesis the derived noise is an isotropic Gaussian
//! independent of the content, so the score is the first coordinate of a
//! uniform point on the sphere `S^{d-1}`:
//!
//! `Pr[cos >= tau] = 1/2 * I_{1 - tau^2}((d - 1) / 2, 1/2)`,
//!
//! bounded above by `exp(-(d - 1) tau^2 / 2)`. All probabilities are carried
//! as natural logarithms; `2^-128` is far below what the intermediate terms
//! survive in linear scale.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::log_reg_inc_beta_complement;

/// Bisection stops once the threshold bracket is this narrow.
const TAU_BRACKET: f64 = 1e-12;
/// Tolerated shortfall of the achieved log-rate below the target.
const LN_FPR_SLACK: f64 = 1e-8;

/// A false-positive rate `mantissa * 2^exp2`, exact for powers of two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fpr {
    pub mantissa: f64,
    pub exp2: i32,
}

impl Fpr {
    pub fn from_log2(exp2: i32) -> Self {
        Self { mantissa: 1.0, exp2 }
    }

    pub fn from_f64(value: f64) -> Self {
        Self {
            mantissa: value,
            exp2: 0,
        }
    }

    pub fn ln(&self) -> f64 {
        self.mantissa.ln() + f64::from(self.exp2) * LN_2
    }

    pub fn log2(&self) -> f64 {
        self.ln() / LN_2
    }
}

/// A threshold calibrated for dimension `d` at target rate `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationParams {
    pub dimension_d: usize,
    pub delta: Fpr,
    pub tau: f64,
    /// `ln Pr[cos >= tau]` actually achieved by `tau`.
    pub achieved_ln_fpr: f64,
}

impl CalibrationParams {
    pub fn achieved_log2_fpr(&self) -> f64 {
        self.achieved_ln_fpr / LN_2
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::OutOfRange(format!("dimension must be >= 2, got {d}")));
    }
    Ok(())
}

/// `ln Pr[cos(X, v) >= tau]` for `X ~ N(0, I_d)`; `tau` in `[-1, 1]`.
pub fn exact_cap_probability(d: usize, tau: f64) -> Result<f64> {
    check_dim(d)?;
    if !(-1.0..=1.0).contains(&tau) {
        return Err(Error::OutOfRange(format!("tau {tau} outside [-1, 1]")));
    }
    if tau < 0.0 {
        let upper = exact_cap_probability(d, -tau)?;
        return Ok((-upper.exp()).ln_1p());
    }
    let p = (d as f64 - 1.0) / 2.0;
    let y = tau * tau;
    Ok(0.5f64.ln() + log_reg_inc_beta_complement(p, 0.5, 1.0 - y, y)?)
}

/// `ln` of the exponential tail bound `exp(-(d - 1) tau^2 / 2)`.
pub fn cap_bound(d: usize, tau: f64) -> f64 {
    -((d as f64 - 1.0) / 2.0) * tau * tau
}

/// Smallest threshold (to within `1e-12`, or to f64 resolution where the
/// tail is steep) whose exact false-positive probability does not exceed
/// `delta`.
pub fn calibrate_threshold(d: usize, delta: Fpr) -> Result<CalibrationParams> {
    check_dim(d)?;
    let ln_delta = delta.ln();
    if !(ln_delta < 0.5f64.ln()) || !ln_delta.is_finite() || delta.mantissa <= 0.0 {
        return Err(Error::OutOfRange(format!(
            "target false-positive rate must lie in (0, 0.5), got 2^{:.3}",
            delta.log2()
        )));
    }
    // The bound dominates the exact tail, so its inverse brackets from above.
    let mut hi = (2.0 * -ln_delta / (d as f64 - 1.0)).sqrt().min(1.0);
    let mut lo = 0.0;
    let mut hi_ln = exact_cap_probability(d, hi)?;
    debug_assert!(hi_ln <= ln_delta);
    // Past the bracket tolerance, keep going while the achieved rate is
    // visibly below target: in low dimension the tail is steep near tau = 1.
    while hi - lo > TAU_BRACKET || hi_ln < ln_delta - LN_FPR_SLACK {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = exact_cap_probability(d, mid)?;
        if v <= ln_delta {
            hi = mid;
            hi_ln = v;
        } else {
            lo = mid;
        }
    }
    Ok(CalibrationParams {
        dimension_d: d,
        delta,
        tau: hi,
        achieved_ln_fpr: hi_ln,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_forms() {
        // d = 3: the first coordinate of a uniform point on S^2 is uniform on [-1, 1]
        for &tau in &[0.0, 0.25, 0.5, 0.9] {
            let p = exact_cap_probability(3, tau).unwrap().exp();
            assert!((p - (1.0 - tau) / 2.0).abs() < 1e-12, "tau={tau}");
        }
        // d = 2: angle uniform on the circle, Pr = arccos(tau) / pi
        for &tau in &[0.0, 0.3, 0.8] {
            let p = exact_cap_probability(2, tau).unwrap().exp();
            assert!((p - tau.acos() / std::f64::consts::PI).abs() < 1e-12);
        }
        assert!((exact_cap_probability(3, -0.5).unwrap().exp() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn bound_examples() {
        assert_eq!(cap_bound(100, 0.0), 0.0);
        assert!((cap_bound(101, 0.3).exp() - 1.11e-2).abs() < 1e-4);
    }

    #[test]
    fn table_thresholds() {
        for &(d, tau) in &[(16_384, 0.101739), (262_144, 0.025500), (1_297_920, 0.011460)] {
            let c = calibrate_threshold(d, Fpr::from_log2(-128)).unwrap();
            assert!((c.tau - tau).abs() < 5e-6, "d={d}: {}", c.tau);
        }
        // 50-digit root of the exact tail at 2^-128; the published 0.051000
        // is this value rounded to two significant figures
        let c = calibrate_threshold(65_536, Fpr::from_log2(-128)).unwrap();
        assert!((c.tau - 0.050_967_230_437_858).abs() < 1e-10, "{}", c.tau);
    }

    #[test]
    fn inversion_brackets_target() {
        // in very low dimension the deep-tail thresholds round to 1.0 in f64
        for &d in &[2usize, 3, 10, 1000, 16_384, 1_297_920] {
            let exps: &[i32] = if d < 10 { &[-2, -10] } else { &[-2, -10, -64, -128] };
            for &e in exps {
                let delta = Fpr::from_log2(e);
                let c = calibrate_threshold(d, delta).unwrap();
                let ln_delta = delta.ln();
                assert!(c.achieved_ln_fpr <= ln_delta);
                assert!(c.achieved_ln_fpr >= ln_delta - 1e-6, "d={d} e={e}");
                let below = exact_cap_probability(d, c.tau - 1e-8).unwrap();
                assert!(below > ln_delta);
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(calibrate_threshold(100, Fpr::from_f64(0.5)).is_err());
        assert!(calibrate_threshold(1, Fpr::from_log2(-10)).is_err());
        assert!(exact_cap_probability(10, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn exact_never_exceeds_bound(d in 2usize..2_000_000, tau in 0.0f64..1.0) {
            prop_assert!(exact_cap_probability(d, tau).unwrap() <= cap_bound(d, tau) + 1e-12);
        }

        #[test]
        fn decreasing_in_tau_and_d(d in 2usize..100_000, tau in 0.01f64..0.9) {
            let base = exact_cap_probability(d, tau).unwrap();
            prop_assert!(exact_cap_probability(d, tau + 0.01).unwrap() < base);
            prop_assert!(exact_cap_probability(d + 1, tau).unwrap() < base);
        }
    }
}
