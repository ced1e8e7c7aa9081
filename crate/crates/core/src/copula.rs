//! Gaussian-copula construction of correlated bridge random intercepts.
//!
//! A latent vector `Z ~ N(0, Σ)` with unit diagonal is pushed through
//! `b_t = F_b^{-1}(Φ(Z_t))`. Each `b_t` is then bridge distributed and, since
//! the map is strictly increasing, Kendall's τ between `b_s` and `b_t` equals
//! that of `Z_s, Z_t`, namely `2 asin(ρ_st) / π`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bridge::BridgeParam;
use crate::error::{Error, Result};
use crate::special::norm_cdf;

/// How the random intercepts at different occasions are associated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "kebab-case")]
pub enum AssociationStructure {
    /// One intercept shared by every occasion of a subject.
    SingleIntercept,
    /// `corr(Z_s, Z_t) = ρ^|t-s|`.
    Ar1Rho(f64),
    /// Kendall's `τ_st = τ^|t-s|`, mapped back through `ρ = sin(πτ/2)`.
    Ar1Tau(f64),
}

/// The structure without its parameter, as chosen for a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureKind {
    Single,
    Ar1Rho,
    Ar1Tau,
}

/// Lag measure used in the AR(1) exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagMode {
    /// Index of the occasion on the study grid (the default).
    #[default]
    Occasion,
    /// Observation times in their own units.
    Time,
}

impl StructureKind {
    pub fn with_param(self, param: f64) -> AssociationStructure {
        match self {
            StructureKind::Single => AssociationStructure::SingleIntercept,
            StructureKind::Ar1Rho => AssociationStructure::Ar1Rho(param),
            StructureKind::Ar1Tau => AssociationStructure::Ar1Tau(param),
        }
    }

    pub fn has_param(self) -> bool {
        !matches!(self, StructureKind::Single)
    }

    pub fn param_name(self) -> Option<&'static str> {
        match self {
            StructureKind::Single => None,
            StructureKind::Ar1Rho => Some("rho"),
            StructureKind::Ar1Tau => Some("tau"),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StructureKind::Single => "single",
            StructureKind::Ar1Rho => "ar1-rho",
            StructureKind::Ar1Tau => "ar1-tau",
        }
    }
}

impl std::str::FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(StructureKind::Single),
            "ar1-rho" => Ok(StructureKind::Ar1Rho),
            "ar1-tau" => Ok(StructureKind::Ar1Tau),
            other => Err(Error::Config(format!(
                "unknown structure '{other}' (expected single, ar1-rho or ar1-tau)"
            ))),
        }
    }
}

impl AssociationStructure {
    pub fn kind(&self) -> StructureKind {
        match self {
            AssociationStructure::SingleIntercept => StructureKind::Single,
            AssociationStructure::Ar1Rho(_) => StructureKind::Ar1Rho,
            AssociationStructure::Ar1Tau(_) => StructureKind::Ar1Tau,
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            AssociationStructure::SingleIntercept => None,
            AssociationStructure::Ar1Rho(v) | AssociationStructure::Ar1Tau(v) => Some(v),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AssociationStructure::SingleIntercept => Ok(()),
            AssociationStructure::Ar1Rho(r) if r > -1.0 && r < 1.0 => Ok(()),
            AssociationStructure::Ar1Tau(t) if t > -1.0 && t < 1.0 => Ok(()),
            other => Err(Error::domain(format!(
                "association parameter out of (-1, 1): {other:?}"
            ))),
        }
    }

    /// Latent correlation at a given lag, and its derivative with respect to
    /// the association parameter.
    pub fn correlation_at_lag(&self, lag: f64) -> Result<(f64, f64)> {
        if lag == 0.0 {
            return Ok((1.0, 0.0));
        }
        match *self {
            AssociationStructure::SingleIntercept => Ok((1.0, 0.0)),
            AssociationStructure::Ar1Rho(rho) => signed_power(rho, lag),
            AssociationStructure::Ar1Tau(tau) => {
                let (t_pow, dt_pow) = signed_power(tau, lag)?;
                let (s, c) = (0.5 * PI * t_pow).sin_cos();
                Ok((s, 0.5 * PI * c * dt_pow))
            }
        }
    }
}

/// `(x^lag, d/dx x^lag)`, allowing negative bases only for integer lags.
fn signed_power(x: f64, lag: f64) -> Result<(f64, f64)> {
    let is_integer = lag.fract() == 0.0 && lag.abs() < 1e9;
    if is_integer {
        let k = lag as i32;
        Ok((x.powi(k), k as f64 * x.powi(k - 1)))
    } else if x >= 0.0 {
        if x == 0.0 {
            Ok((0.0, 0.0))
        } else {
            Ok((x.powf(lag), lag * x.powf(lag - 1.0)))
        }
    } else {
        Err(Error::domain(format!(
            "negative association {x} is undefined at non-integer lag {lag}"
        )))
    }
}

/// Kendall's τ of a bivariate normal pair with correlation `rho`.
pub fn tau_from_rho(rho: f64) -> Result<f64> {
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::domain(format!("need |rho| < 1, got {rho}")));
    }
    Ok(2.0 * rho.asin() / PI)
}

/// Inverse of [`tau_from_rho`].
pub fn rho_from_tau(tau: f64) -> Result<f64> {
    if !(tau > -1.0 && tau < 1.0) {
        return Err(Error::domain(format!("need |tau| < 1, got {tau}")));
    }
    Ok((0.5 * PI * tau).sin())
}

/// A validated latent correlation matrix together with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
    positions: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl CorrelationMatrix {
    /// Validates unit diagonal, symmetry, off-diagonals in (-1, 1) and
    /// positive definiteness.
    pub fn from_matrix(entries: DMatrix<f64>, positions: Vec<f64>) -> Result<Self> {
        let m = entries.nrows();
        if m == 0 || entries.ncols() != m || positions.len() != m {
            return Err(Error::structure("correlation matrix must be square and match the times"));
        }
        for i in 0..m {
            if (entries[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::structure("correlation matrix needs a unit diagonal"));
            }
            for j in 0..i {
                let v = entries[(i, j)];
                if (v - entries[(j, i)]).abs() > 1e-12 {
                    return Err(Error::structure("correlation matrix is not symmetric"));
                }
                if !(v > -1.0 && v < 1.0) {
                    return Err(Error::structure(format!("off-diagonal entry {v} outside (-1, 1)")));
                }
            }
        }
        let chol = Cholesky::new(entries.clone())
            .ok_or_else(|| Error::structure("correlation matrix is not positive definite"))?;
        Ok(CorrelationMatrix {
            entries,
            positions,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Lower-triangular `L` with `Σ = L Lᵀ`.
    pub fn cholesky_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }
}

/// Builds the latent correlation matrix of an AR(1)-type structure at the
/// given occasion positions (strictly increasing).
///
/// The single-intercept structure has no proper matrix (its limit is
/// singular) and is reported as a structure error; callers handle it through
/// the shared one-dimensional path instead.
pub fn build_correlation(structure: AssociationStructure, positions: &[f64]) -> Result<CorrelationMatrix> {
    structure.validate()?;
    if matches!(structure, AssociationStructure::SingleIntercept) {
        return Err(Error::structure(
            "single-intercept structure uses one shared effect, not a correlation matrix",
        ));
    }
    if positions.is_empty() {
        return Err(Error::structure("need at least one occasion"));
    }
    if positions.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::structure("occasion times must be strictly increasing"));
    }
    let m = positions.len();
    let mut entries = DMatrix::identity(m, m);
    for i in 0..m {
        for j in 0..i {
            let (v, _) = structure.correlation_at_lag(positions[i] - positions[j])?;
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    CorrelationMatrix::from_matrix(entries, positions.to_vec())
}

/// Draws the latent normal vector and its bridge image.
pub fn sample_latent_and_effects<R: Rng + ?Sized>(
    sigma: &CorrelationMatrix,
    phi: BridgeParam,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let m = sigma.dim();
    let eps = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let z = sigma.cholesky().l_dirty().lower_triangle() * eps;
    let b = z.iter().map(|&zt| latent_to_bridge(zt, phi)).collect();
    (z.as_slice().to_vec(), b)
}

/// One correlated vector of bridge random intercepts.
pub fn sample_effect_vector<R: Rng + ?Sized>(
    sigma: &CorrelationMatrix,
    phi: BridgeParam,
    rng: &mut R,
) -> Vec<f64> {
    sample_latent_and_effects(sigma, phi, rng).1
}

/// `F_b^{-1}(Φ(z))`, with both tails of `Φ` evaluated directly.
#[inline]
pub fn latent_to_bridge(z: f64, phi: BridgeParam) -> f64 {
    let z = z.clamp(-37.0, 37.0);
    phi.inv_cdf_split(norm_cdf(z), norm_cdf(-z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::kendall_tau;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tau_rho_examples() {
        assert_eq!(tau_from_rho(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(tau_from_rho(0.5).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        let rho = (PI * 0.749 / 2.0).sin();
        assert_abs_diff_eq!(tau_from_rho(rho).unwrap(), 0.749, epsilon = 1e-12);
        assert_eq!(rho_from_tau(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(rho_from_tau(0.5).unwrap(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(rho_from_tau(1.0 / 3.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(tau_from_rho(1.0).is_err());
        assert!(rho_from_tau(-1.0).is_err());
    }

    #[test]
    fn ar1_rho_powers() {
        let s = build_correlation(AssociationStructure::Ar1Rho(0.5), &[1.0, 2.0, 3.0]).unwrap();
        let e = s.entries();
        assert_eq!((e[(0, 1)], e[(0, 2)], e[(1, 2)]), (0.5, 0.25, 0.5));
    }

    #[test]
    fn ar1_tau_back_transform() {
        let s = build_correlation(AssociationStructure::Ar1Tau(0.5), &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(s.entries()[(0, 1)], 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn zero_rho_is_identity() {
        let s = build_correlation(AssociationStructure::Ar1Rho(0.0), &[0.0, 1.5, 4.0, 7.0]).unwrap();
        assert_eq!(s.entries(), &DMatrix::identity(4, 4));
    }

    #[test]
    fn structure_errors() {
        let single = build_correlation(AssociationStructure::SingleIntercept, &[1.0, 2.0]);
        assert!(matches!(single, Err(Error::Structure(_))));
        assert!(build_correlation(AssociationStructure::Ar1Rho(0.5), &[2.0, 1.0]).is_err());
        assert!(build_correlation(AssociationStructure::Ar1Rho(1.0), &[1.0, 2.0]).is_err());
        // Negative τ needs integer lags.
        assert!(build_correlation(AssociationStructure::Ar1Tau(-0.4), &[0.0, 0.5]).is_err());
        assert!(build_correlation(AssociationStructure::Ar1Tau(-0.4), &[0.0, 1.0, 2.0]).is_ok());
        let not_pd = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(CorrelationMatrix::from_matrix(not_pd, vec![0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn real_time_lags() {
        let s = build_correlation(AssociationStructure::Ar1Rho(0.5), &[0.0, 0.5, 2.0]).unwrap();
        assert_abs_diff_eq!(s.entries()[(0, 1)], 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.entries()[(0, 2)], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn lag_derivatives_match_finite_differences() {
        for lag in [1.0, 2.0, 3.0, 1.5] {
            for (mk, x) in [
                (AssociationStructure::Ar1Rho as fn(f64) -> AssociationStructure, 0.4),
                (AssociationStructure::Ar1Tau, 0.6),
            ] {
                let (_, d) = mk(x).correlation_at_lag(lag).unwrap();
                let h = 1e-6;
                let fd = (mk(x + h).correlation_at_lag(lag).unwrap().0
                    - mk(x - h).correlation_at_lag(lag).unwrap().0)
                    / (2.0 * h);
                assert_abs_diff_eq!(d, fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn permuted_times_permute_the_matrix() {
        // Relabelling the time axis by reflection reverses row/column order.
        let times = [0.0, 1.0, 3.0, 4.5];
        let reflected: Vec<f64> = times.iter().rev().map(|t| 10.0 - t).collect();
        let a = build_correlation(AssociationStructure::Ar1Rho(0.7), &times).unwrap();
        let b = build_correlation(AssociationStructure::Ar1Rho(0.7), &reflected).unwrap();
        let n = times.len();
        for i in 0..n {
            for j in 0..n {
                assert_abs_diff_eq!(a.entries()[(i, j)], b.entries()[(n - 1 - i, n - 1 - j)], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn sampled_effects_have_rank_invariant_tau() {
        let sigma = build_correlation(AssociationStructure::Ar1Rho(0.5), &[0.0, 1.0]).unwrap();
        let phi = BridgeParam::new(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let (mut z1, mut z2, mut b1, mut b2) = (vec![], vec![], vec![], vec![]);
        for _ in 0..n {
            let (z, b) = sample_latent_and_effects(&sigma, phi, &mut rng);
            z1.push(z[0]);
            z2.push(z[1]);
            b1.push(b[0]);
            b2.push(b[1]);
        }
        let tau_z = kendall_tau(&z1, &z2).unwrap();
        let tau_b = kendall_tau(&b1, &b2).unwrap();
        assert_eq!(tau_z, tau_b);
        // Var(tau_hat) for a normal pair is roughly 4/(9n)(1 - tau^2)-ish; 0.005 is > 4 SE.
        assert!((tau_b - 1.0 / 3.0).abs() < 0.005, "{tau_b}");
    }

    #[test]
    fn identity_sigma_gives_independent_effects() {
        let sigma = build_correlation(AssociationStructure::Ar1Rho(0.0), &[0.0, 1.0]).unwrap();
        let phi = BridgeParam::new(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_effect_vector(&sigma, phi, &mut rng)).collect();
        let a: Vec<f64> = draws.iter().map(|d| d[0]).collect();
        let b: Vec<f64> = draws.iter().map(|d| d[1]).collect();
        let tau = kendall_tau(&a, &b).unwrap();
        let se = (2.0 * (2.0 * n as f64 + 5.0) / (9.0 * n as f64 * (n as f64 - 1.0))).sqrt();
        assert!(tau.abs() < 4.0 * se, "{tau} vs {se}");
    }

    #[test]
    fn effect_marginal_variance_is_bridge_variance() {
        let sigma = build_correlation(AssociationStructure::Ar1Rho(0.6), &[0.0, 1.0, 2.0]).unwrap();
        let phi = BridgeParam::new(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let b = sample_effect_vector(&sigma, phi, &mut rng);
            sum += b[1];
            sq += b[1] * b[1];
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!((var / phi.variance() - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let sigma = build_correlation(AssociationStructure::Ar1Tau(0.3), &[0.0, 1.0, 2.0]).unwrap();
        let phi = BridgeParam::new(0.7).unwrap();
        let a = sample_effect_vector(&sigma, phi, &mut ChaCha8Rng::seed_from_u64(1));
        let b = sample_effect_vector(&sigma, phi, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn tau_rho_are_inverse(x in -0.999f64..0.999) {
            let back = rho_from_tau(tau_from_rho(x).unwrap()).unwrap();
            prop_assert!((back - x).abs() < 1e-12);
            let back = tau_from_rho(rho_from_tau(x).unwrap()).unwrap();
            prop_assert!((back - x).abs() < 1e-12);
        }

        #[test]
        fn tau_from_rho_is_odd_and_increasing(a in -0.99f64..0.99, d in 1e-4f64..0.005) {
            prop_assert_eq!(tau_from_rho(-a).unwrap(), -tau_from_rho(a).unwrap());
            prop_assert!(tau_from_rho(a + d).unwrap() > tau_from_rho(a).unwrap());
        }

        #[test]
        fn supported_structures_are_positive_definite(
            p in -0.95f64..0.95,
            gaps in proptest::collection::vec(1usize..3, 1..7),
            use_tau in any::<bool>(),
        ) {
            let mut t = vec![0.0];
            for g in gaps { t.push(t.last().unwrap() + g as f64); }
            let s = if use_tau { AssociationStructure::Ar1Tau(p) } else { AssociationStructure::Ar1Rho(p) };
            prop_assert!(build_correlation(s, &t).is_ok());
        }
    }
}
