//! Scalar helpers: logistic function family, standard normal CDF and its
//! inverse, and log-sum-exp.

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// Logistic function, evaluated without overflow on either side.
#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^x)`.
#[inline]
pub fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -37.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln expit(x)`.
#[inline]
pub fn log_expit(x: f64) -> f64 {
    -log1pexp(-x)
}

pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

#[inline]
pub fn ln_norm_pdf(z: f64) -> f64 {
    -0.5 * (z * z + LN_2PI)
}

/// Standard normal CDF `Φ(z)`.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Inverse of [`norm_cdf`] on the open unit interval.
///
/// Wichura's AS241 rational approximation followed by one Halley step
/// against `erfc`, carried out on whichever tail is closer so that `1 - p`
/// never loses digits.
pub fn norm_inv_cdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!(
            "normal quantile needs 0 < p < 1, got {p}"
        )));
    }
    let x = as241(p);
    // Refine on the lower tail of the mirrored problem.
    let (target, sign) = if p <= 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let xl = sign * x;
    let e = norm_cdf(xl) - target;
    let u = e * SQRT_2PI * (0.5 * xl * xl).exp();
    let refined = xl - u / (1.0 + 0.5 * xl * u);
    Ok(sign * refined)
}

fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((((2509.080_928_730_122_7 * r) + 33_430.575_583_588_13) * r
            + 67_265.770_927_008_7)
            * r
            + 45_921.953_931_549_87)
            * r
            + 13_731.693_765_509_461)
            * r
            + 1_971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r)
            + 3.387_132_872_796_366_5;
        let den = ((((((((5_226.495_278_852_546 * r) + 28_729.085_735_721_943) * r
            + 39_307.895_800_092_71)
            * r
            + 21_213.794_301_586_597)
            * r
            + 5_394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r)
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((((7.745_450_142_783_414e-4 * r) + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r)
            + 1.423_437_110_749_683_5;
        let den = ((((((((1.050_750_071_644_416_9e-9 * r) + 5.475_938_084_995_345e-4)
            * r
            + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r)
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((((2.010_334_399_292_288_1e-7 * r) + 2.711_555_568_743_487_6e-5)
            * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r)
            + 6.657_904_643_501_103;
        let den = ((((((((2.044_263_103_389_939_7e-15 * r) + 1.421_511_758_316_446e-7)
            * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 0.014_875_361_290_850_615)
            * r
            + 0.136_929_880_922_735_8)
            * r
            + 0.599_832_206_555_887_9)
            * r)
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
