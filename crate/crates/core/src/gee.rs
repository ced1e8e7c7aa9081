//! Generalized estimating equations for the marginal logistic model with an
//! AR(1) working correlation on the occasion grid.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::logistic::fit_logistic;
use crate::special::expit;

const RHO_LIMIT: f64 = 0.995;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WorkingCorrelation {
    #[default]
    Ar1,
    Independence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeeOptions {
    pub working: WorkingCorrelation,
    pub max_iterations: usize,
    /// Largest absolute change in `β` that counts as converged.
    pub tolerance: f64,
}

impl Default for GeeOptions {
    fn default() -> Self {
        GeeOptions {
            working: WorkingCorrelation::Ar1,
            max_iterations: 100,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeeResult {
    pub covariate_names: Vec<String>,
    pub beta: Vec<f64>,
    /// Working lag-one correlation (zero under independence).
    pub rho: f64,
    /// Pearson scale estimate.
    pub scale: f64,
    pub cov_model: DMatrix<f64>,
    pub cov_sandwich: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Norm of the estimating function at the reported `β` and `ρ`.
    pub estimating_norm: f64,
    pub diagnostics: Vec<String>,
}

impl GeeResult {
    /// Sandwich standard errors.
    pub fn se(&self) -> Vec<f64> {
        self.cov_sandwich.diagonal().iter().map(|v| v.sqrt()).collect()
    }

    pub fn se_model(&self) -> Vec<f64> {
        self.cov_model.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

struct Pieces {
    score: DVector<f64>,
    info: DMatrix<f64>,
    meat: DMatrix<f64>,
}

fn pearson_residuals(dataset: &Dataset, beta: &[f64]) -> Vec<Vec<f64>> {
    dataset
        .subjects
        .iter()
        .map(|s| {
            s.occasions
                .iter()
                .map(|o| {
                    let mu = expit(o.covariates.iter().zip(beta).map(|(x, b)| x * b).sum());
                    (f64::from(o.outcome) - mu) / (mu * (1.0 - mu)).sqrt()
                })
                .collect()
        })
        .collect()
}

/// Pearson scale and the moment estimate of the lag-one correlation.
fn moment_estimates(dataset: &Dataset, beta: &[f64]) -> (f64, f64) {
    let p = beta.len() as f64;
    let resid = pearson_residuals(dataset, beta);
    let n_obs = dataset.n_observations() as f64;
    let scale = resid.iter().flatten().map(|r| r * r).sum::<f64>() / (n_obs - p);
    let mut products = 0.0;
    let mut pairs = 0.0;
    for (s, r) in dataset.subjects.iter().zip(&resid) {
        for t in 1..s.m() {
            if s.occasions[t].index == s.occasions[t - 1].index + 1 {
                products += r[t] * r[t - 1];
                pairs += 1.0;
            }
        }
    }
    let rho = if pairs > p { products / ((pairs - p) * scale) } else { 0.0 };
    (scale, rho)
}

fn accumulate(dataset: &Dataset, beta: &[f64], rho: f64) -> Result<Pieces> {
    let p = beta.len();
    let mut score = DVector::zeros(p);
    let mut info = DMatrix::zeros(p, p);
    let mut meat = DMatrix::zeros(p, p);
    for s in &dataset.subjects {
        let m = s.m();
        let mut d = DMatrix::zeros(m, p);
        let mut sd = DVector::zeros(m);
        let mut resid = DVector::zeros(m);
        for (t, o) in s.occasions.iter().enumerate() {
            let mu = expit(o.covariates.iter().zip(beta).map(|(x, b)| x * b).sum());
            let v = mu * (1.0 - mu);
            sd[t] = v.sqrt();
            resid[t] = f64::from(o.outcome) - mu;
            for j in 0..p {
                d[(t, j)] = v * o.covariates[j];
            }
        }
        let working = DMatrix::from_fn(m, m, |a, b| {
            let lag = s.occasions[a].index.abs_diff(s.occasions[b].index) as i32;
            sd[a] * sd[b] * rho.powi(lag)
        });
        let chol = Cholesky::new(working)
            .ok_or_else(|| Error::numeric(format!("working covariance of subject {} is singular", s.id)))?;
        let vinv_d = chol.solve(&d);
        let vinv_r = chol.solve(&resid);
        let u = d.transpose() * &vinv_r;
        score += &u;
        info += d.transpose() * vinv_d;
        meat += &u * u.transpose();
    }
    Ok(Pieces { score, info, meat })
}

/// Fits the marginal logistic model by GEE. The working correlation's
/// lag-one parameter is re-estimated from Pearson residuals after every
/// update of `β`.
pub fn fit_gee(dataset: &Dataset, options: &GeeOptions) -> Result<GeeResult> {
    let (x, y) = dataset.pooled();
    let mut beta = fit_logistic(&x, &y, &dataset.covariate_names)?.beta;
    let mut diagnostics = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut rho;
    let update_rho = |beta: &[f64], diagnostics: &mut Vec<String>| -> f64 {
        match options.working {
            WorkingCorrelation::Independence => 0.0,
            WorkingCorrelation::Ar1 => {
                let (_, r) = moment_estimates(dataset, beta);
                if r.abs() > RHO_LIMIT {
                    diagnostics.push(format!("working correlation {r:.4} truncated to ±{RHO_LIMIT}"));
                }
                r.clamp(-RHO_LIMIT, RHO_LIMIT)
            }
        }
    };
    while iterations < options.max_iterations {
        iterations += 1;
        rho = update_rho(&beta, &mut diagnostics);
        let pieces = accumulate(dataset, &beta, rho)?;
        let step = Cholesky::new(pieces.info)
            .ok_or_else(|| Error::numeric("GEE information matrix is singular"))?
            .solve(&pieces.score);
        beta.iter_mut().zip(step.iter()).for_each(|(b, s)| *b += s);
        if beta.iter().any(|b| !b.is_finite() || b.abs() > 50.0) {
            return Err(Error::Identifiability("GEE estimates diverge (separation)".into()));
        }
        if step.amax() < options.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        diagnostics.push(format!("no convergence within {} iterations", options.max_iterations));
    }
    // Solve once more at the final ρ so that the reported estimating
    // function refers to the reported pair.
    rho = update_rho(&beta, &mut diagnostics);
    for _ in 0..3 {
        let pieces = accumulate(dataset, &beta, rho)?;
        let step = Cholesky::new(pieces.info)
            .ok_or_else(|| Error::numeric("GEE information matrix is singular"))?
            .solve(&pieces.score);
        beta.iter_mut().zip(step.iter()).for_each(|(b, s)| *b += s);
    }
    let pieces = accumulate(dataset, &beta, rho)?;
    let (scale, _) = moment_estimates(dataset, &beta);
    let bread = Cholesky::new(pieces.info.clone())
        .ok_or_else(|| Error::numeric("GEE information matrix is singular"))?
        .inverse();
    let sandwich = &bread * &pieces.meat * &bread;
    Ok(GeeResult {
        covariate_names: dataset.covariate_names.clone(),
        beta,
        rho,
        scale,
        cov_model: &bread * scale,
        cov_sandwich: (&sandwich + sandwich.transpose()) * 0.5,
        converged,
        iterations,
        estimating_norm: pieces.score.norm(),
        diagnostics,
    })
}
