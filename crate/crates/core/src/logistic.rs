//! Pooled logistic regression by iteratively reweighted least squares.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::special::{expit, log1pexp};

const MAX_ITER: usize = 100;
const DIVERGENCE: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub beta: Vec<f64>,
    /// Inverse Fisher information.
    pub covariance: DMatrix<f64>,
    pub loglik: f64,
    pub iterations: usize,
}

impl LogisticFit {
    pub fn std_errors(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.sqrt()).collect()
    }
}

/// Rejects a design whose columns are linearly dependent, naming the first
/// column that lies in the span of the preceding ones.
pub fn check_full_rank(x: &[Vec<f64>], names: &[String]) -> Result<()> {
    let p = names.len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::Design("design rows do not match the column names".into()));
    }
    if x.len() < p {
        return Err(Error::Design(format!("{} rows cannot identify {p} coefficients", x.len())));
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for j in 0..p {
        let mut col: Vec<f64> = x.iter().map(|r| r[j]).collect();
        let norm0 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        for q in &basis {
            let dot: f64 = col.iter().zip(q).map(|(a, b)| a * b).sum();
            col.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= 1e-9 * norm0 {
            let earlier = names[..j].join(", ");
            let msg = if earlier.is_empty() {
                format!("column '{}' is identically zero", names[j])
            } else {
                format!("column '{}' is collinear with [{earlier}]", names[j])
            };
            return Err(Error::Design(format!("rank-deficient design: {msg}")));
        }
        basis.push(col.iter().map(|v| v / norm).collect());
    }
    Ok(())
}

/// Maximum-likelihood logistic regression of `y` on the rows of `x`.
/// Complete or quasi-complete separation is reported as an error.
pub fn fit_logistic(x: &[Vec<f64>], y: &[f64], names: &[String]) -> Result<LogisticFit> {
    if x.is_empty() {
        return Err(Error::domain("logistic regression on no rows"));
    }
    if x.len() != y.len() {
        return Err(Error::domain("design and outcome lengths differ"));
    }
    check_full_rank(x, names)?;
    let p = names.len();
    let mut beta = DVector::zeros(p);
    let mut loglik = f64::NEG_INFINITY;
    for iter in 1..=MAX_ITER {
        let mut info = DMatrix::zeros(p, p);
        let mut score = DVector::zeros(p);
        let mut ll = 0.0;
        for (row, &yi) in x.iter().zip(y) {
            let eta: f64 = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let mu = expit(eta);
            let w = mu * (1.0 - mu);
            ll += yi * eta - log1pexp(eta);
            for a in 0..p {
                score[a] += (yi - mu) * row[a];
                for b in 0..=a {
                    info[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        let chol = Cholesky::new(info.clone());
        let Some(chol) = chol else {
            return Err(separation(names, &beta));
        };
        let step = chol.solve(&score);
        let converged = (ll - loglik).abs() < 1e-12 * (1.0 + ll.abs()) || step.amax() < 1e-10;
        loglik = ll;
        if converged {
            if beta.amax() > DIVERGENCE {
                return Err(separation(names, &beta));
            }
            return Ok(LogisticFit {
                beta: beta.iter().copied().collect(),
                covariance: chol.inverse(),
                loglik,
                iterations: iter,
            });
        }
        beta += step;
        if beta.amax() > 2.0 * DIVERGENCE {
            return Err(separation(names, &beta));
        }
    }
    Err(separation(names, &beta))
}

fn separation(names: &[String], beta: &DVector<f64>) -> Error {
    let worst = beta.iamax();
    Error::Identifiability(format!(
        "logistic fit diverges (separation); coefficient '{}' reached {:.3}",
        names.get(worst).map(String::as_str).unwrap_or("?"),
        beta[worst]
    ))
}
