//! Maximum likelihood under the Bahadur representation of a binary vector,
//! with AR(1) pairwise correlations and common third- and fourth-order
//! correlations. Orders five and up are zero.
//!
//! For a pattern `y` with marginals `p_t` and standardized residuals
//! `e_t = (y_t − p_t)/√(p_t(1 − p_t))` the cell probability is
//!
//! ```text
//! Π_t p_t^{y_t}(1 − p_t)^{1 − y_t} · (1 + Σ_{s<t} Γ^{|t−s|} e_s e_t + Γ₃ Σ e_s e_t e_u + Γ₄ Σ e_s e_t e_u e_v)
//! ```
//!
//! Lags are counted on the dataset's occasion grid, and a subject with
//! missing occasions contributes the same expression over its observed
//! occasions, which is what summing the full-grid cells over the missing
//! outcomes gives.

use nalgebra::DMatrix;

use crate::data::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::logistic::fit_logistic;
use crate::optim::{covariance_from_hessian, fd_gradient, fd_hessian, newton_maximize, NewtonOptions, NewtonOutcome};
use crate::special::expit;

/// Largest number of occasions per subject that is enumerated.
pub const MAX_OCCASIONS: usize = 12;
const BARRIER: f64 = 1e-6;
/// Correction factor below which an estimate counts as on the edge.
const EDGE_FACTOR: f64 = 1e-3;
const MAX_ROUNDS: usize = 50;
/// Log-likelihood gain treated as no progress; far below any inferential scale.
const GAIN_TOLERANCE: f64 = 1e-4;

/// `(y − p) / √(p(1 − p))`.
pub fn standardized_residual(y: u8, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("marginal probability {p} must lie in (0, 1)")));
    }
    Ok((f64::from(y) - p) / (p * (1.0 - p)).sqrt())
}

/// Correlations of the standardized residuals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BahadurCorrelation {
    /// Lag-one pairwise correlation; lag `k` uses `Γ^k`.
    pub gamma: f64,
    pub gamma3: f64,
    pub gamma4: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BahadurParams {
    pub beta: Vec<f64>,
    pub corr: BahadurCorrelation,
}

/// Elementary symmetric polynomials `e_1..e_4` of `v`.
fn elementary_symmetric(v: &[f64]) -> [f64; 5] {
    let mut e = [1.0, 0.0, 0.0, 0.0, 0.0];
    for &x in v {
        for k in (1..5).rev() {
            e[k] += e[k - 1] * x;
        }
    }
    e
}

/// Cell probability of `pattern` given the marginals and correlations;
/// `positions` are the occasions' places on the grid. Can be negative for
/// parameters outside the valid region.
pub fn bahadur_cell_prob(pattern: &[u8], positions: &[usize], corr: &BahadurCorrelation, marginals: &[f64]) -> f64 {
    let m = pattern.len();
    let mut base = 1.0;
    let mut e = Vec::with_capacity(m);
    for t in 0..m {
        let p = marginals[t];
        let y = f64::from(pattern[t]);
        base *= if pattern[t] == 1 { p } else { 1.0 - p };
        e.push((y - p) / (p * (1.0 - p)).sqrt());
    }
    let mut pair = 0.0;
    for t in 1..m {
        for s in 0..t {
            let lag = positions[t].abs_diff(positions[s]) as i32;
            pair += corr.gamma.powi(lag) * e[s] * e[t];
        }
    }
    let sym = elementary_symmetric(&e);
    base * (1.0 + pair + corr.gamma3 * sym[3] + corr.gamma4 * sym[4])
}

/// All `2^m` patterns in binary order, first occasion as the high bit.
pub fn all_patterns(m: usize) -> Vec<Vec<u8>> {
    (0..1usize << m)
        .map(|code| (0..m).map(|t| ((code >> (m - 1 - t)) & 1) as u8).collect())
        .collect()
}

/// Smallest cell probability over all patterns, with the offending pattern.
pub fn min_cell(positions: &[usize], corr: &BahadurCorrelation, marginals: &[f64]) -> (f64, Vec<u8>) {
    all_patterns(positions.len())
        .into_iter()
        .map(|pat| (bahadur_cell_prob(&pat, positions, corr, marginals), pat))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BahadurOptions {
    pub max_iterations: usize,
    /// Estimate `Γ₃` and `Γ₄` where the design has enough occasions.
    pub higher_order: bool,
    /// Hold all correlations at these values and estimate `β` only.
    pub fixed_correlation: Option<BahadurCorrelation>,
}

impl Default for BahadurOptions {
    fn default() -> Self {
        BahadurOptions {
            max_iterations: 100,
            higher_order: true,
            fixed_correlation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BahadurFit {
    pub covariate_names: Vec<String>,
    pub beta: Vec<f64>,
    pub corr: BahadurCorrelation,
    pub param_names: Vec<String>,
    pub covariance: Option<DMatrix<f64>>,
    pub se: Option<Vec<f64>>,
    pub loglik: f64,
    pub aic: f64,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Smallest cell probability over every subject's patterns at the estimate.
    pub min_cell: f64,
    /// Smallest ratio of a cell to its value under independence; zero on the
    /// edge of the valid region.
    pub min_factor: f64,
    pub diagnostics: Vec<String>,
}

impl BahadurFit {
    pub fn beta_se(&self) -> Option<Vec<f64>> {
        self.se.as_ref().map(|s| s[..self.beta.len()].to_vec())
    }
}

struct Evaluation {
    loglik: f64,
    barrier: f64,
    min_cell: f64,
    min_factor: f64,
}

struct Problem<'a> {
    subjects: Vec<(&'a SubjectRecord, Vec<usize>)>,
    n_beta: usize,
    fixed: Option<BahadurCorrelation>,
}

impl Problem<'_> {
    fn params(&self, theta: &[f64]) -> BahadurParams {
        let corr = match self.fixed {
            Some(c) => c,
            None => {
                let c = &theta[self.n_beta..];
                BahadurCorrelation {
                    gamma: c[0].tanh(),
                    gamma3: c.get(1).copied().unwrap_or(0.0),
                    gamma4: c.get(2).copied().unwrap_or(0.0),
                }
            }
        };
        BahadurParams {
            beta: theta[..self.n_beta].to_vec(),
            corr,
        }
    }

    /// Log-likelihood, barrier, smallest cell probability, and smallest
    /// correction factor (cell over its independence value) across every
    /// subject's patterns; `None` outside the valid region.
    fn evaluate(&self, theta: &[f64], with_barrier: bool) -> Option<Evaluation> {
        let params = self.params(theta);
        let mut out = Evaluation {
            loglik: 0.0,
            barrier: 0.0,
            min_cell: f64::INFINITY,
            min_factor: f64::INFINITY,
        };
        for (s, pos) in &self.subjects {
            let marg: Vec<f64> = s.linear_predictors(&params.beta).into_iter().map(expit).collect();
            if marg.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return None;
            }
            let y: Vec<u8> = s.outcomes().collect();
            let own = bahadur_cell_prob(&y, pos, &params.corr, &marg);
            if !(own > 0.0) {
                return None;
            }
            out.loglik += own.ln();
            if with_barrier {
                for pat in all_patterns(pos.len()) {
                    let c = bahadur_cell_prob(&pat, pos, &params.corr, &marg);
                    if !(c > 0.0) {
                        return None;
                    }
                    let base: f64 = pat
                        .iter()
                        .zip(&marg)
                        .map(|(&y, &p)| if y == 1 { p } else { 1.0 - p })
                        .product();
                    out.min_cell = out.min_cell.min(c);
                    out.min_factor = out.min_factor.min(c / base);
                    out.barrier += c.ln();
                }
            }
        }
        Some(out)
    }

    fn objective(&self, theta: &[f64]) -> Result<f64> {
        match self.evaluate(theta, true) {
            Some(e) => Ok(e.loglik + BARRIER * e.barrier),
            None => Err(Error::numeric("Bahadur parameters left the valid region")),
        }
    }

    fn loglik(&self, theta: &[f64]) -> Result<f64> {
        self.evaluate(theta, false)
            .map(|e| e.loglik)
            .ok_or_else(|| Error::numeric("Bahadur parameters left the valid region"))
    }
}

/// Retries a finite-difference evaluation with steps shrunk tenfold, up to
/// three times.
fn shrinking<T>(h0: f64, mut f: impl FnMut(f64) -> Result<T>) -> Result<T> {
    let mut h = h0;
    let mut last = f(h);
    for _ in 0..3 {
        if last.is_ok() {
            break;
        }
        h *= 0.1;
        last = f(h);
    }
    last
}

/// Newton ascent of the barrier objective over the coordinates in `block`,
/// the others held at their values in `theta`. Returns the full vector.
fn maximize_block(problem: &Problem, theta: &[f64], block: &[usize], opts: &NewtonOptions) -> Result<NewtonOutcome> {
    let embed = |sub: &[f64]| {
        let mut t = theta.to_vec();
        for (k, &i) in block.iter().enumerate() {
            t[i] = sub[k];
        }
        t
    };
    let value = |sub: &[f64]| problem.objective(&embed(sub));
    // Near the edge of the valid region a difference stencil can step
    // outside it; smaller steps keep it inside.
    let derivs = |sub: &[f64]| -> Result<(f64, Vec<f64>, DMatrix<f64>)> {
        let v = value(sub)?;
        let g = shrinking(1e-6, |h| fd_gradient(value, sub, h))?;
        let hess = shrinking(1e-4, |h| fd_hessian(value, sub, h))?;
        Ok((v, g, hess))
    };
    let start: Vec<f64> = block.iter().map(|&i| theta[i]).collect();
    let mut out = newton_maximize(value, derivs, &start, opts)?;
    out.x = embed(&out.x);
    Ok(out)
}

/// Alternates β and correlation blocks until a round gains less than `GAIN_TOLERANCE`.
fn block_ascent(problem: &Problem, mut theta: Vec<f64>, n_beta: usize, opts: &NewtonOptions) -> Result<(Vec<f64>, bool, usize)> {
    let blocks = [(0..n_beta).collect::<Vec<_>>(), (n_beta..theta.len()).collect()];
    let mut previous = problem.objective(&theta)?;
    let mut iterations = 0;
    for _ in 0..MAX_ROUNDS {
        let mut moved = false;
        for block in &blocks {
            // A block that cannot start (stencil outside the region) keeps
            // its values for this round.
            if let Ok(out) = maximize_block(problem, &theta, block, opts) {
                iterations += out.iterations.max(1);
                moved |= out.converged;
                theta = out.x;
            }
        }
        let v = problem.objective(&theta)?;
        if v - previous < GAIN_TOLERANCE {
            return Ok((theta, moved, iterations));
        }
        previous = v;
    }
    Ok((theta, false, iterations))
}

fn conditional_beta_covariance(problem: &Problem, theta: &[f64], n_beta: usize) -> Result<DMatrix<f64>> {
    let embed = |b: &[f64]| {
        let mut t = theta.to_vec();
        t[..n_beta].copy_from_slice(b);
        t
    };
    let h = shrinking(1e-4, |h| fd_hessian(|b| problem.loglik(&embed(b)), &theta[..n_beta], h))?;
    covariance_from_hessian(&h)
}

/// Bahadur maximum likelihood with AR(1) pairwise correlation.
pub fn fit_bahadur_ml(dataset: &Dataset, options: &BahadurOptions) -> Result<BahadurFit> {
    let m_max = dataset.max_occasions();
    if m_max > MAX_OCCASIONS {
        return Err(Error::domain(format!(
            "Bahadur likelihood enumerates patterns; at most {MAX_OCCASIONS} occasions per subject, got {m_max}"
        )));
    }
    let (x, y) = dataset.pooled();
    let start = fit_logistic(&x, &y, &dataset.covariate_names)?;
    let n_beta = dataset.n_covariates();
    let n_corr = match (options.fixed_correlation, m_max) {
        (Some(_), _) => 0,
        (None, 1) => {
            return Err(Error::Identifiability(
                "Bahadur correlations need at least two occasions per subject".into(),
            ))
        }
        (None, m) if options.higher_order => m.min(4) - 1,
        (None, _) => 1,
    };
    let problem = Problem {
        subjects: dataset
            .subjects
            .iter()
            .map(|s| (s, s.occasions.iter().map(|o| o.index).collect()))
            .collect(),
        n_beta,
        fixed: options.fixed_correlation,
    };
    let mut theta0 = start.beta.clone();
    theta0.extend(std::iter::repeat(0.0).take(n_corr));
    if problem.objective(&theta0).is_err() {
        return Err(Error::numeric("Bahadur starting values lie outside the valid region"));
    }

    let newton = NewtonOptions {
        max_iterations: options.max_iterations,
        value_tolerance: GAIN_TOLERANCE,
        ..NewtonOptions::default()
    };
    let all: Vec<usize> = (0..theta0.len()).collect();
    let mut diagnostics = Vec::new();
    let (mut theta, mut converged, mut iterations, message) = match maximize_block(&problem, &theta0, &all, &newton) {
        Ok(out) => (out.x, out.converged, out.iterations, out.message),
        // A joint step that leaves the region aborts the search; the
        // alternating updates below start again from the logistic fit.
        Err(e) if n_corr > 0 => (theta0.clone(), false, 0, e.to_string()),
        Err(e) => return Err(e),
    };
    if !converged && n_corr > 0 {
        // Near the edge of the valid region joint steps keep leaving it;
        // alternating β and correlation updates can still move along it.
        let (t, ok, its) = block_ascent(&problem, theta, n_beta, &newton)?;
        theta = t;
        converged = ok;
        iterations += its;
        diagnostics.push(format!("{message}; finished by alternating β and correlation updates"));
    } else if !converged {
        diagnostics.push(message);
    }
    let params = problem.params(&theta);
    let eval = problem
        .evaluate(&theta, true)
        .ok_or_else(|| Error::numeric("Bahadur estimate left the valid region"))?;
    if eval.min_factor < EDGE_FACTOR {
        diagnostics.push(format!(
            "estimate is at the edge of the valid region (smallest correction factor {:.3e})",
            eval.min_factor
        ));
    }
    let loglik = eval.loglik;

    let mut param_names = dataset.covariate_names.clone();
    param_names.extend(["gamma", "gamma3", "gamma4"].iter().take(n_corr).map(|s| s.to_string()));
    let (covariance, se) = match shrinking(1e-4, |h| fd_hessian(|t| problem.loglik(t), &theta, h)).and_then(|h| covariance_from_hessian(&h)) {
        Ok(cov_theta) => {
            let n = theta.len();
            let mut jac = vec![1.0; n];
            if n_corr > 0 {
                jac[n_beta] = 1.0 - params.corr.gamma * params.corr.gamma;
            }
            let cov = DMatrix::from_fn(n, n, |i, j| jac[i] * cov_theta[(i, j)] * jac[j]);
            let se = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
            (Some(cov), Some(se))
        }
        Err(_) => match conditional_beta_covariance(&problem, &theta, n_beta) {
            // At an edge estimate the full information can be indefinite;
            // β standard errors then treat the correlations as known.
            Ok(cov_beta) => {
                let n = theta.len();
                let cov = DMatrix::from_fn(n, n, |i, j| {
                    if i < n_beta && j < n_beta {
                        cov_beta[(i, j)]
                    } else {
                        f64::NAN
                    }
                });
                let se = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
                diagnostics.push("full observed information is not positive definite; β standard errors hold the correlations fixed".into());
                (Some(cov), Some(se))
            }
            Err(_) => {
                diagnostics.push("observed information is not positive definite; standard errors unavailable".into());
                (None, None)
            }
        },
    };
    let n_params = theta.len();
    Ok(BahadurFit {
        covariate_names: dataset.covariate_names.clone(),
        beta: params.beta,
        corr: params.corr,
        param_names,
        covariance,
        se,
        loglik,
        aic: crate::fit::aic_value(loglik, n_params),
        n_params,
        converged,
        iterations,
        min_cell: eval.min_cell,
        min_factor: eval.min_factor,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn residual_examples() {
        assert_eq!(standardized_residual(1, 0.5).unwrap(), 1.0);
        assert_eq!(standardized_residual(0, 0.5).unwrap(), -1.0);
        assert_abs_diff_eq!(standardized_residual(1, 0.8).unwrap(), 0.5, epsilon = 1e-15);
        assert!(standardized_residual(1, 1.0).is_err());
        assert!(standardized_residual(0, 0.0).is_err());
    }

    #[test]
    fn two_occasion_cells() {
        let pos = [0, 1];
        let zero = BahadurCorrelation::default();
        for pat in all_patterns(2) {
            assert_abs_diff_eq!(bahadur_cell_prob(&pat, &pos, &zero, &[0.5, 0.5]), 0.25, epsilon = 1e-15);
        }
        let c = BahadurCorrelation { gamma: 0.4, ..zero };
        assert_abs_diff_eq!(bahadur_cell_prob(&[1, 1], &pos, &c, &[0.5, 0.5]), 0.35, epsilon = 1e-15);
    }

    #[test]
    fn invalid_parameters_show_a_negative_cell() {
        // Γ = 0.5 alone keeps every cell of three fair coins positive; a
        // third-order term of 0.5 pushes one below zero.
        let pos = [0, 1, 2];
        let p = [0.5; 3];
        let pair_only = BahadurCorrelation { gamma: 0.5, gamma3: 0.0, gamma4: 0.0 };
        assert!(min_cell(&pos, &pair_only, &p).0 > 0.0);
        let with_third = BahadurCorrelation { gamma3: 0.5, ..pair_only };
        let (v, pat) = min_cell(&pos, &with_third, &p);
        assert!(v < 0.0, "{v} at {pat:?}");
    }

    #[test]
    fn lag_structure_uses_grid_positions() {
        let c = BahadurCorrelation { gamma: 0.5, ..Default::default() };
        let near = bahadur_cell_prob(&[1, 1], &[0, 1], &c, &[0.5, 0.5]);
        let far = bahadur_cell_prob(&[1, 1], &[0, 2], &c, &[0.5, 0.5]);
        assert_abs_diff_eq!(near, 0.25 * 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(far, 0.25 * 1.25, epsilon = 1e-15);
    }

    #[test]
    fn missing_occasion_equals_summed_cells() {
        let c = BahadurCorrelation { gamma: 0.3, gamma3: 0.05, gamma4: 0.02 };
        let full_pos = [0, 1, 2, 3];
        let p = [0.3, 0.45, 0.6, 0.2];
        for pat in all_patterns(3) {
            let sub = bahadur_cell_prob(&pat, &[0, 2, 3], &c, &[p[0], p[2], p[3]]);
            let summed: f64 = (0..2u8)
                .map(|y1| bahadur_cell_prob(&[pat[0], y1, pat[1], pat[2]], &full_pos, &c, &p))
                .sum();
            assert_abs_diff_eq!(sub, summed, epsilon = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn cells_sum_to_one(
            m in 1usize..=4,
            marg in proptest::collection::vec(0.02f64..0.98, 4),
            g in -0.9f64..0.9, g3 in -1.0f64..1.0, g4 in -1.0f64..1.0,
        ) {
            let c = BahadurCorrelation { gamma: g, gamma3: g3, gamma4: g4 };
            let pos: Vec<usize> = (0..m).collect();
            let total: f64 = all_patterns(m).iter().map(|pat| bahadur_cell_prob(pat, &pos, &c, &marg[..m])).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
