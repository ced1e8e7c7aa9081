//! The bridge distribution: the symmetric random-intercept law under which a
//! logistic conditional model integrates to a logistic marginal model with
//! coefficients shrunk by the factor `phi`.
//!
//! Density, CDF and quantile function are closed form:
//!
//! ```text
//! f(b)      = sin(φπ) / (2π (cosh(φb) + cos(φπ)))
//! F(b)      = 1 - (π/2 - atan((exp(φb) + cos(φπ)) / sin(φπ))) / (πφ)
//! F^{-1}(u) = log(sin(φπu) / sin(φπ(1-u))) / φ
//! Var(b)    = π²/3 (1/φ² - 1)
//! ```
//!
//! All evaluations are arranged so that neither tail overflows or cancels.

use std::f64::consts::PI;

use rand::distributions::Open01;
use rand::Rng;

use crate::error::{Error, Result};

pub const PHI_MIN: f64 = 1e-6;
pub const PHI_MAX: f64 = 1.0 - 1e-6;

/// The attenuation parameter `phi`, validated to `[1e-6, 1 - 1e-6]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BridgeParam(f64);

impl BridgeParam {
    pub fn new(phi: f64) -> Result<Self> {
        if (PHI_MIN..=PHI_MAX).contains(&phi) {
            Ok(BridgeParam(phi))
        } else {
            Err(Error::domain(format!(
                "bridge parameter phi must lie in [{PHI_MIN}, {PHI_MAX}], got {phi}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn pdf(self, b: f64) -> f64 {
        self.ln_pdf(b).exp()
    }

    pub fn ln_pdf(self, b: f64) -> f64 {
        let phi = self.0;
        (phi * PI).sin().ln() - (2.0 * PI).ln() - ln_cosh_plus_cos(phi * b, phi)
    }

    /// `d/db ln f(b)`.
    pub fn dln_pdf(self, b: f64) -> f64 {
        let phi = self.0;
        let x = phi * b;
        let ax = x.abs();
        let c = (phi * PI).cos();
        let ratio = if ax > 20.0 {
            let e = (-ax).exp();
            x.signum() * (1.0 - e * e) / (1.0 + 2.0 * c * e + e * e)
        } else {
            x.sinh() / (x.cosh() + c)
        };
        -phi * ratio
    }

    pub fn cdf(self, b: f64) -> f64 {
        if b >= 0.0 {
            1.0 - self.upper_tail(b)
        } else {
            self.upper_tail(-b)
        }
    }

    /// `P(B > b)` for `b >= 0`, computed directly rather than as `1 - F`.
    fn upper_tail(self, b: f64) -> f64 {
        let phi = self.0;
        let (s, c) = (phi * PI).sin_cos();
        (s / ((phi * b).exp() + c)).atan() / (PI * phi)
    }

    pub fn inv_cdf(self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!(
                "bridge quantile needs 0 < u < 1, got {u}"
            )));
        }
        // 1 - u is exact for u >= 1/2, so the upper half reuses the lower.
        if u <= 0.5 {
            Ok(self.inv_cdf_split(u, 1.0 - u))
        } else {
            Ok(-self.inv_cdf_split(1.0 - u, u))
        }
    }

    /// Quantile at `u` when both `u` and `1 - u` are known to full relative
    /// precision (e.g. from `Φ(z)` and `Φ(-z)`).
    #[inline]
    pub fn inv_cdf_split(self, u: f64, u_upper: f64) -> f64 {
        let phi = self.0;
        (ln_sin(phi * PI * u) - ln_sin(phi * PI * u_upper)) / phi
    }

    /// Derivative of [`inv_cdf_split`](Self::inv_cdf_split) with respect to
    /// `phi` at fixed `u`, given the quantile `b` already evaluated there.
    #[inline]
    pub fn dinv_cdf_dphi(self, u: f64, u_upper: f64, b: f64) -> f64 {
        let phi = self.0;
        (x_cot_x(phi * PI * u) - x_cot_x(phi * PI * u_upper)) / (phi * phi) - b / phi
    }

    /// Quantile and its `phi` derivative in one pass (one `sin_cos` per tail).
    #[inline]
    pub fn inv_cdf_with_dphi(self, u: f64, u_upper: f64) -> (f64, f64) {
        let phi = self.0;
        let (ls_lo, xc_lo) = ln_sin_and_x_cot_x(phi * PI * u);
        let (ls_hi, xc_hi) = ln_sin_and_x_cot_x(phi * PI * u_upper);
        let b = (ls_lo - ls_hi) / phi;
        (b, (xc_lo - xc_hi) / (phi * phi) - b / phi)
    }

    pub fn variance(self) -> f64 {
        let phi = self.0;
        PI * PI / 3.0 * (1.0 / (phi * phi) - 1.0)
    }

    /// Inversion sampling from a stream of uniform variates.
    pub fn sample(self, uniforms: &[f64]) -> Result<Vec<f64>> {
        uniforms.iter().map(|&u| self.inv_cdf(u)).collect()
    }

    pub fn sample_rng<R: Rng + ?Sized>(self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.sample(Open01);
                self.inv_cdf(u).expect("Open01 excludes both endpoints")
            })
            .collect()
    }
}

/// `ln(cosh(x) + cos(φπ))`, using `2 sinh²(x/2) + 2 cos²(φπ/2)` near the
/// origin and the exponential asymptote far from it.
fn ln_cosh_plus_cos(x: f64, phi: f64) -> f64 {
    let ax = x.abs();
    if ax > 20.0 {
        let c = (phi * PI).cos();
        let e = (-ax).exp();
        ax - std::f64::consts::LN_2 + (2.0 * c * e + e * e).ln_1p()
    } else {
        let sh = (0.5 * x).sinh();
        let ch = (0.5 * phi * PI).cos();
        (2.0 * (sh * sh + ch * ch)).ln()
    }
}

#[inline]
fn ln_sin(x: f64) -> f64 {
    if x < 1e-8 {
        x.ln()
    } else {
        x.sin().ln()
    }
}

#[inline]
fn ln_sin_and_x_cot_x(x: f64) -> (f64, f64) {
    if x < 1e-8 {
        (x.ln(), 1.0)
    } else {
        let (s, c) = x.sin_cos();
        (s.ln(), x * c / s)
    }
}

#[inline]
fn x_cot_x(x: f64) -> f64 {
    if x < 1e-8 {
        1.0
    } else {
        let (s, c) = x.sin_cos();
        x * c / s
    }
}
