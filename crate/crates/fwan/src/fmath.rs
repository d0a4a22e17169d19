//! Branch-light scalar math kernels shared by the tape and the batched
//! network evaluator.
//!
//! The training loop evaluates activation functions tens of millions of
//! times per iteration, so `exp`/`expm1`/`ln1p` are polynomial
//! implementations the compiler can vectorize across batch rows, and the
//! hyperbolic activations are built on `expm1` identities that stay
//! accurate near zero. Both differentiation routes (scalar tape and
//! batched evaluator) call the same functions, which keeps their results
//! bit-comparable up to summation order.

/// Arguments beyond this are clamped before exponentiation; activations
/// feeding values this large have already diverged.
const EXP_CLAMP: f64 = 708.0;

const LOG2_E: f64 = std::f64::consts::LOG2_E;
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
/// 1.5 * 2^52: adding and subtracting rounds to the nearest integer.
const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

/// Shared argument reduction: x = n*ln2 + r with |r| <= 0.3466, returning
/// (exprm1(r) Taylor value, 2^n, n == 0).
#[inline]
fn exp_reduce(x: f64) -> (f64, f64, bool) {
    let x = x.clamp(-EXP_CLAMP, EXP_CLAMP);
    let t = x * LOG2_E + ROUND_MAGIC;
    let n = t - ROUND_MAGIC;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    // e^r - 1 as r * q(r), degree-13 Taylor; exact to ~1 ulp on the range
    let q = 1.0
        + r * (0.5
            + r * (1.0 / 6.0
                + r * (1.0 / 24.0
                    + r * (1.0 / 120.0
                        + r * (1.0 / 720.0
                            + r * (1.0 / 5040.0
                                + r * (1.0 / 40320.0
                                    + r * (1.0 / 362880.0
                                        + r * (1.0 / 3628800.0
                                            + r * (1.0 / 39916800.0
                                                + r * (1.0 / 479001600.0
                                                    + r * (1.0 / 6227020800.0))))))))))));
    let pm1 = r * q;
    // 2^n through the exponent bits; |n| <= 1022 keeps this normal
    let scale = f64::from_bits(((n as i64 + 1023) << 52) as u64);
    (pm1, scale, n == 0.0)
}

/// e^x with relative error ~1 ulp for |x| <= 708, clamped outside.
#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    let (pm1, scale, _) = exp_reduce(x);
    (pm1 + 1.0) * scale
}

/// e^x - 1, accurate for small |x| where e^x cancels against 1.
#[inline]
pub(crate) fn expm1(x: f64) -> f64 {
    let (pm1, scale, near) = exp_reduce(x);
    let far = (pm1 + 1.0) * scale - 1.0;
    if near {
        pm1
    } else {
        far
    }
}

/// ln(1 + q) for q in [0, 1], via 2*atanh(q/(2+q)); avoids rounding 1+q.
#[inline]
pub(crate) fn ln1p_unit(q: f64) -> f64 {
    let t = q / (2.0 + q); // in [0, 1/3]
    let t2 = t * t;
    let mut s = 1.0 / 35.0;
    s = 1.0 / 33.0 + t2 * s;
    s = 1.0 / 31.0 + t2 * s;
    s = 1.0 / 29.0 + t2 * s;
    s = 1.0 / 27.0 + t2 * s;
    s = 1.0 / 25.0 + t2 * s;
    s = 1.0 / 23.0 + t2 * s;
    s = 1.0 / 21.0 + t2 * s;
    s = 1.0 / 19.0 + t2 * s;
    s = 1.0 / 17.0 + t2 * s;
    s = 1.0 / 15.0 + t2 * s;
    s = 1.0 / 13.0 + t2 * s;
    s = 1.0 / 11.0 + t2 * s;
    s = 1.0 / 9.0 + t2 * s;
    s = 1.0 / 7.0 + t2 * s;
    s = 1.0 / 5.0 + t2 * s;
    s = 1.0 / 3.0 + t2 * s;
    s = 1.0 + t2 * s;
    2.0 * t * s
}

#[inline]
pub(crate) fn tanh(x: f64) -> f64 {
    // tanh(|x|) = -m / (2 + m) with m = e^{-2|x|} - 1
    let m = expm1(-2.0 * x.abs());
    let r = -m / (2.0 + m);
    if x < 0.0 {
        -r
    } else {
        r
    }
}

#[inline]
pub(crate) fn sinh(x: f64) -> f64 {
    // sinh(|x|) = m (m + 2) / (2 (m + 1)) with m = e^{|x|} - 1; no
    // cancellation, every factor is positive
    let m = expm1(x.abs());
    let r = m * (m + 2.0) / (2.0 * (m + 1.0));
    if x < 0.0 {
        -r
    } else {
        r
    }
}

#[inline]
pub(crate) fn cosh(x: f64) -> f64 {
    let e = exp(x.abs());
    0.5 * (e + 1.0 / e)
}

/// Overflow-safe softplus: max(x, 0) + ln(1 + e^-|x|).
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + ln1p_unit(exp(-x.abs()))
}

/// Logistic sigmoid, the derivative of softplus.
#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    let q = exp(-x.abs());
    if x >= 0.0 {
        1.0 / (1.0 + q)
    } else {
        q / (1.0 + q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_rel_err(ours: impl Fn(f64) -> f64, reference: impl Fn(f64) -> f64, xs: &[f64]) -> f64 {
        xs.iter()
            .map(|&x| {
                let a = ours(x);
                let b = reference(x);
                if b == 0.0 {
                    (a - b).abs()
                } else {
                    ((a - b) / b).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    }

    #[test]
    fn exp_matches_std() {
        let xs = grid(-700.0, 700.0, 40_000);
        assert!(max_rel_err(exp, f64::exp, &xs) < 5e-16);
    }

    #[test]
    fn exp_clamps_instead_of_overflowing() {
        assert!(exp(1e6).is_finite());
        assert!(exp(-1e6) > 0.0);
    }

    #[test]
    fn expm1_accurate_near_zero() {
        let xs = grid(-0.4, 0.4, 40_000);
        assert!(max_rel_err(expm1, f64::exp_m1, &xs) < 1.5e-15);
        let xs = grid(-30.0, 30.0, 40_000);
        assert!(max_rel_err(expm1, f64::exp_m1, &xs) < 4e-15);
    }

    #[test]
    fn hyperbolics_match_std() {
        let xs = grid(-20.0, 20.0, 200_001);
        assert!(max_rel_err(tanh, f64::tanh, &xs) < 2e-15);
        assert!(max_rel_err(sinh, f64::sinh, &xs) < 2e-15);
        assert!(max_rel_err(cosh, f64::cosh, &xs) < 2e-15);
        // near-zero region where naive formulas cancel
        let xs = grid(-1e-3, 1e-3, 20_000);
        assert!(max_rel_err(tanh, f64::tanh, &xs) < 2e-15);
        assert!(max_rel_err(sinh, f64::sinh, &xs) < 2e-15);
    }

    #[test]
    fn softplus_reference_values() {
        // softplus(0) = ln 2
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 5e-16);
        let xs = grid(-30.0, 30.0, 20_000);
        assert!(max_rel_err(softplus, |x| x.exp().ln_1p().max(x), &xs) < 2e-15);
        // large positive arguments reduce to x itself
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn sigmoid_is_softplus_slope() {
        for &x in &grid(-8.0, 8.0, 1000) {
            let h = 1e-6;
            let fd = (softplus(x + h) - softplus(x - h)) / (2.0 * h);
            assert!((sigmoid(x) - fd).abs() < 1e-9, "x={x}");
        }
    }
}
