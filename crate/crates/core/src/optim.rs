//! Newton–Raphson maximisation with step-halving, and finite-difference
//! derivatives.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative finite-difference step `scale · (1 + |x|)`.
pub fn fd_step(scale: f64, x: f64) -> f64 {
    scale * (1.0 + x.abs())
}

/// Central-difference gradient of `f`.
pub fn fd_gradient<F>(f: F, x: &[f64], scale: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let mut xp = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = fd_step(scale, x[i]);
        xp[i] = x[i] + h;
        let fp = f(&xp)?;
        xp[i] = x[i] - h;
        let fm = f(&xp)?;
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    Ok(g)
}

/// Hessian by differencing an analytic gradient, symmetrised. `central`
/// selects central rather than forward differences.
pub fn fd_hessian_from_gradient<G>(grad: G, x: &[f64], g0: &[f64], scale: f64, central: bool) -> Result<DMatrix<f64>>
where
    G: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut h = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = fd_step(scale, x[j]);
        xp[j] = x[j] + step;
        let gp = grad(&xp)?;
        let col: Vec<f64> = if central {
            xp[j] = x[j] - step;
            let gm = grad(&xp)?;
            gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * step)).collect()
        } else {
            gp.iter().zip(g0).map(|(a, b)| (a - b) / step).collect()
        };
        xp[j] = x[j];
        for i in 0..n {
            h[(i, j)] = col[i];
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// Hessian of `f` from function values alone (central second differences).
pub fn fd_hessian<F>(f: F, x: &[f64], scale: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let f0 = f(x)?;
    let steps: Vec<f64> = x.iter().map(|&v| fd_step(scale, v)).collect();
    let mut h = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + steps[i];
        let fp = f(&xp)?;
        xp[i] = x[i] - steps[i];
        let fm = f(&xp)?;
        xp[i] = x[i];
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (steps[i] * steps[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                xp[i] = x[i] + si * steps[i];
                xp[j] = x[j] + sj * steps[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                / (4.0 * steps[i] * steps[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}

/// Ascent direction `(−H)^{-1} g`. When `−H` is not positive definite a
/// Levenberg shift `λI` is added until it is; the second value reports
/// whether that happened.
pub fn newton_direction(grad: &[f64], hessian: &DMatrix<f64>) -> Result<(Vec<f64>, bool)> {
    let g = DVector::from_column_slice(grad);
    let neg = -hessian;
    if let Some(c) = Cholesky::new(neg.clone()) {
        return Ok((c.solve(&g).iter().copied().collect(), false));
    }
    let scale = neg.diagonal().iter().map(|v| v.abs()).fold(1e-8, f64::max);
    let mut lambda = 1e-6 * scale;
    for _ in 0..60 {
        let shifted = &neg + DMatrix::identity(grad.len(), grad.len()) * lambda;
        if let Some(c) = Cholesky::new(shifted) {
            return Ok((c.solve(&g).iter().copied().collect(), true));
        }
        lambda *= 10.0;
    }
    Err(Error::numeric("could not regularise the Hessian"))
}

/// `(−H)^{-1}`, or an error when `−H` is not positive definite.
pub fn covariance_from_hessian(hessian: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let c = Cholesky::new(-hessian).ok_or_else(|| Error::numeric("Hessian is not negative definite"))?;
    let inv = c.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Covariance from `−H⁻¹` when only the trailing nuisance block may lack
/// curvature. Nuisance directions whose eigenvalue of `H` is above
/// `−rel_tol · max|λ|` are dropped and the focus block (the first `n_focus`
/// parameters) is taken from the Schur complement, so its variance still
/// carries the identified nuisance directions. Nuisance entries are NaN
/// when anything was dropped. Fails when the focus block itself has no
/// curvature. Returns the matrix and the number of dropped directions.
pub fn profiled_covariance_from_hessian(
    hessian: &DMatrix<f64>,
    n_focus: usize,
    rel_tol: f64,
) -> Result<(DMatrix<f64>, usize)> {
    let n = hessian.nrows();
    let info = (hessian + hessian.transpose()) * -0.5;
    let q = n - n_focus;
    let a = info.view((0, 0), (n_focus, n_focus)).into_owned();
    let b = info.view((0, n_focus), (n_focus, q)).into_owned();
    let c = info.view((n_focus, n_focus), (q, q)).into_owned();
    let largest = info.symmetric_eigen().eigenvalues.amax();
    let eig = c.symmetric_eigen();
    let mut c_pinv = DMatrix::zeros(q, q);
    let mut dropped = 0;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > rel_tol * largest {
            let v = eig.eigenvectors.column(k);
            c_pinv += (v * v.transpose()) / lambda;
        } else {
            dropped += 1;
        }
    }
    let schur = &a - &b * &c_pinv * b.transpose();
    let focus = Cholesky::new(schur)
        .ok_or_else(|| Error::numeric("observed information is not positive definite for β"))?
        .inverse();
    let mut cov = DMatrix::from_element(n, n, f64::NAN);
    cov.view_mut((0, 0), (n_focus, n_focus)).copy_from(&((&focus + focus.transpose()) * 0.5));
    if dropped == 0 {
        let cross = -&focus * &b * &c_pinv;
        let nuisance = &c_pinv + c_pinv.transpose() * b.transpose() * &focus * &b * &c_pinv;
        cov.view_mut((0, n_focus), (n_focus, q)).copy_from(&cross);
        cov.view_mut((n_focus, 0), (q, n_focus)).copy_from(&cross.transpose());
        cov.view_mut((n_focus, n_focus), (q, q)).copy_from(&nuisance);
    }
    Ok((cov, dropped))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Stop when `max_i |Δx_i| / (1 + |x_i|)` falls below this.
    pub step_tolerance: f64,
    /// Or when the largest gradient component falls below this.
    pub gradient_tolerance: f64,
    /// Or when two successive steps each raise the objective by less than
    /// this. Near the edge of a constrained region a maximum can be
    /// approached so slowly that neither step nor gradient criterion fires.
    pub value_tolerance: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 100,
            step_tolerance: 1e-8,
            gradient_tolerance: 1e-6,
            value_tolerance: 1e-9,
            max_halvings: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

pub fn relative_step(x: &[f64], step: &[f64]) -> f64 {
    x.iter().zip(step).map(|(a, s)| s.abs() / (1.0 + a.abs())).fold(0.0, f64::max)
}

/// Maximises `value` by Newton–Raphson. `derivs` returns value, gradient
/// and Hessian. Each accepted step does not decrease `value`; a step that
/// still fails after `max_halvings` halvings ends the search.
pub fn newton_maximize<F, D>(value: F, derivs: D, x0: &[f64], opts: &NewtonOptions) -> Result<NewtonOutcome>
where
    F: Fn(&[f64]) -> Result<f64>,
    D: Fn(&[f64]) -> Result<(f64, Vec<f64>, DMatrix<f64>)>,
{
    let mut x = x0.to_vec();
    let (mut fx, mut g, mut h) = derivs(&x)?;
    if !fx.is_finite() {
        return Err(Error::numeric("objective is not finite at the starting point"));
    }
    let mut small_gains = 0;
    for iter in 1..=opts.max_iterations {
        if g.iter().all(|v| v.abs() < opts.gradient_tolerance) {
            return Ok(NewtonOutcome {
                x,
                value: fx,
                gradient: g,
                iterations: iter - 1,
                converged: true,
                message: "gradient tolerance reached".into(),
            });
        }
        let (dir, _) = newton_direction(&g, &h)?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
            // A point whose derivatives cannot be taken (a stencil outside
            // the domain) is rejected like one that fails to improve.
            if let Ok(v) = value(&trial) {
                if v.is_finite() && v >= fx {
                    if let Ok(d) = derivs(&trial) {
                        accepted = Some((trial, d));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((trial, d)) = accepted else {
            let converged = relative_step(&x, &dir) < opts.step_tolerance.sqrt();
            return Ok(NewtonOutcome {
                x,
                value: fx,
                gradient: g,
                iterations: iter,
                converged,
                message: "line search could not increase the objective".into(),
            });
        };
        let step: Vec<f64> = dir.iter().map(|d| alpha * d).collect();
        let gain = d.0 - fx;
        x = trial;
        (fx, g, h) = d;
        small_gains = if gain < opts.value_tolerance { small_gains + 1 } else { 0 };
        if small_gains >= 2 {
            return Ok(NewtonOutcome {
                x,
                value: fx,
                gradient: g,
                iterations: iter,
                converged: true,
                message: "objective change below tolerance".into(),
            });
        }
        if relative_step(&x, &step) < opts.step_tolerance {
            return Ok(NewtonOutcome {
                x,
                value: fx,
                gradient: g,
                iterations: iter,
                converged: true,
                message: "step tolerance reached".into(),
            });
        }
    }
    Ok(NewtonOutcome {
        x,
        value: fx,
        gradient: g,
        iterations: opts.max_iterations,
        converged: false,
        message: format!("no convergence in {} iterations", opts.max_iterations),
    })
}
