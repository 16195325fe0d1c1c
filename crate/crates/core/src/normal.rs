//! Acklam's rational approximation of the standard normal quantile function.
//!
//! Relative error below 1.15e-9 over the open unit interval; no refinement step.

const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

const P_LOW: f64 = 0.02425;

/// Lower-tail branch for `0 < p < P_LOW`; returns a negative value.
#[inline]
fn lower_tail(p: f64) -> f64 {
    let q = (-2.0 * p.ln()).sqrt();
    (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
        / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
}

#[inline]
fn central(p: f64) -> f64 {
    let q = p - 0.5;
    let r = q * q;
    (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
        / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
}

/// `Phi^{-1}(p)` given `p` and its complement `1 - p`, both supplied exactly so
/// the upper tail mirrors the lower tail bit-for-bit.
#[inline]
pub fn inverse_cdf_with_complement(p: f64, one_minus_p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if one_minus_p <= 0.0 {
        f64::INFINITY
    } else if p < P_LOW {
        lower_tail(p)
    } else if one_minus_p < P_LOW {
        -lower_tail(one_minus_p)
    } else {
        central(p)
    }
}

/// `Phi^{-1}(p)`.
pub fn inverse_cdf(p: f64) -> f64 {
    inverse_cdf_with_complement(p, 1.0 - p)
}
