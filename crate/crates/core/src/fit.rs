//! Maximum-likelihood fitting of the bridge model by staged Newton–Raphson on
//! the importance-sampled likelihood.
//!
//! Parameters are optimised on an unconstrained scale: `β` as is,
//! `φ = expit(θ_φ)` and the association parameter as `tanh(θ_a)`. Every outer
//! iteration anchors the sampler (proposals and points) at the current
//! estimate, takes one Newton step with step-halving on that fixed surface,
//! and re-anchors. The number of points grows by stages; converging within
//! a stage moves on to the next one, and only convergence in the last stage
//! ends the fit.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bridge::{PHI_MAX, PHI_MIN};
use crate::copula::{LagMode, StructureKind};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{BridgeModelSpec, CrnDraws, ImportanceOptions, McLikelihood};
use crate::logistic::fit_logistic;
use crate::optim::{
    covariance_from_hessian, fd_hessian_from_gradient, profiled_covariance_from_hessian, newton_direction,
    relative_step,
};
use crate::special::{expit, logit};

/// Starting value of `φ`.
pub const PHI_START: f64 = 0.5;
/// Starting value of the association parameter.
pub const ASSOC_START: f64 = 0.3;
const THETA_PHI_BOUND: f64 = 9.0;
const THETA_ASSOC_BOUND: f64 = 4.5;
const MAX_HALVINGS: usize = 10;
/// Fresh anchors tried per iteration before the stage is declared done.
const MAX_CONFIRMATIONS: usize = 3;
/// Relative eigenvalue below which a direction counts as flat.
const FLAT_CURVATURE: f64 = 1e-6;

/// How the covariance matrix is obtained from the observed information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceMethod {
    /// Plain inverse; no standard errors unless the Hessian is negative
    /// definite.
    #[default]
    Inverse,
    /// β covariance from the Schur complement over a generalized inverse
    /// of the φ and association block. Flat nuisance directions and
    /// parameters held at a bound are dropped (their standard errors are
    /// NaN); β gets no standard errors if it has no curvature itself.
    GeneralizedInverse,
}

/// One stage of the draw schedule: `draws` points per subject up to and
/// including outer iteration `last_iteration`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub draws: usize,
    pub last_iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawSchedule {
    stages: Vec<Stage>,
}

impl DrawSchedule {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Config("draw schedule has no stages".into()));
        }
        for w in stages.windows(2) {
            if w[1].draws < w[0].draws || w[1].last_iteration <= w[0].last_iteration {
                return Err(Error::Config(
                    "draw schedule must have nondecreasing draws and increasing iteration bounds".into(),
                ));
            }
        }
        if stages[0].draws == 0 || stages[0].last_iteration == 0 {
            return Err(Error::Config("draw schedule needs positive draws and iterations".into()));
        }
        Ok(DrawSchedule { stages })
    }

    /// 50 points for iterations 1–19, 100 for 20–39, 1000 for 40–50.
    pub fn standard() -> Self {
        DrawSchedule {
            stages: vec![
                Stage { draws: 50, last_iteration: 19 },
                Stage { draws: 100, last_iteration: 39 },
                Stage { draws: 1000, last_iteration: 50 },
            ],
        }
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn max_draws(&self) -> usize {
        self.stages.last().map(|s| s.draws).unwrap_or(0)
    }

    fn stage_for(&self, iteration: usize) -> usize {
        self.stages
            .iter()
            .position(|s| iteration <= s.last_iteration)
            .unwrap_or(self.stages.len() - 1)
    }
}

impl Default for DrawSchedule {
    fn default() -> Self {
        DrawSchedule::standard()
    }
}

/// `draws:last_iteration` pairs separated by commas, e.g. `50:19,100:39,1000:50`.
impl FromStr for DrawSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let stages = s
            .split(',')
            .map(|part| {
                let (d, it) = part
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("schedule stage '{part}' is not draws:last_iteration")))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("schedule stage '{part}' is not two integers")))
                };
                Ok(Stage {
                    draws: parse(d)?,
                    last_iteration: parse(it)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DrawSchedule::new(stages)
    }
}

impl fmt::Display for DrawSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .stages
            .iter()
            .map(|s| format!("{}:{}", s.draws, s.last_iteration))
            .collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_outer_iterations: usize,
    pub schedule: DrawSchedule,
    /// Relative step size `max |Δθ| / (1 + |θ|)` that ends a stage.
    pub step_tolerance: f64,
    /// Gradient norm (unconstrained scale) that ends a stage.
    pub gradient_tolerance: f64,
    /// Newton decrement `gᵀ(−H)⁻¹g` that ends a stage. Monte Carlo
    /// re-anchoring keeps the raw step from shrinking below its noise floor,
    /// while the decrement measures distance to the optimum in standard
    /// error units.
    pub decrement_tolerance: f64,
    pub seed: u64,
    /// Holds `φ` at this value instead of estimating it.
    pub fixed_phi: Option<f64>,
    pub lag: LagMode,
    pub importance: ImportanceOptions,
    pub covariance: CovarianceMethod,
    /// Draws for the reported log-likelihood and observed information, if
    /// more than the last stage of the schedule.
    pub covariance_draws: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_outer_iterations: 50,
            schedule: DrawSchedule::standard(),
            step_tolerance: 1e-5,
            gradient_tolerance: 1e-4,
            decrement_tolerance: 1e-4,
            seed: 0,
            fixed_phi: None,
            lag: LagMode::Occasion,
            importance: ImportanceOptions::default(),
            covariance: CovarianceMethod::Inverse,
            covariance_draws: None,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0 {
            return Err(Error::Config("max_outer_iterations must be positive".into()));
        }
        if !(self.step_tolerance > 0.0 && self.gradient_tolerance > 0.0 && self.decrement_tolerance > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if let Some(phi) = self.fixed_phi {
            crate::bridge::BridgeParam::new(phi)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub structure: StructureKind,
    pub lag: LagMode,
    pub covariate_names: Vec<String>,
    pub beta: Vec<f64>,
    pub phi: f64,
    pub phi_fixed: bool,
    /// `ρ` or `τ`; absent for a single shared intercept.
    pub assoc: Option<f64>,
    /// Free parameters on the unconstrained scale.
    pub theta: Vec<f64>,
    /// Names of the free natural-scale parameters, in covariance order.
    pub param_names: Vec<String>,
    /// Inverse observed information of the free natural-scale parameters.
    pub covariance: Option<DMatrix<f64>>,
    pub se: Option<Vec<f64>>,
    pub loglik: f64,
    pub aic: f64,
    pub n_params: usize,
    pub converged: bool,
    pub iterations: usize,
    pub final_draws: usize,
    /// Norm of the unconstrained gradient at the estimate, final draws.
    pub gradient_norm: f64,
    pub diagnostics: Vec<String>,
    pub seed: u64,
}

impl FitResult {
    pub fn beta_se(&self) -> Option<Vec<f64>> {
        self.se.as_ref().map(|s| s[..self.beta.len()].to_vec())
    }

    pub fn phi_se(&self) -> Option<f64> {
        match (&self.se, self.phi_fixed) {
            (Some(s), false) => Some(s[self.beta.len()]),
            _ => None,
        }
    }

    pub fn assoc_se(&self) -> Option<f64> {
        self.assoc?;
        self.se.as_ref().map(|s| *s.last().unwrap())
    }

    /// Subject-specific coefficients `β̂ / φ̂`.
    pub fn conditional_beta(&self) -> Vec<f64> {
        self.beta.iter().map(|b| b / self.phi).collect()
    }

    pub fn spec(&self) -> BridgeModelSpec {
        BridgeModelSpec {
            beta: self.beta.clone(),
            phi: self.phi,
            structure: self.structure.with_param(self.assoc.unwrap_or(0.0)),
            lag: self.lag,
        }
    }
}

/// `−2 loglik + 2k`.
pub fn aic_value(loglik: f64, n_params: usize) -> f64 {
    -2.0 * loglik + 2.0 * n_params as f64
}

pub fn aic(fit: &FitResult) -> f64 {
    aic_value(fit.loglik, fit.n_params)
}

/// Rejects designs in which the association parameters cannot be separated
/// from `φ`: with two occasions `φ` and an AR(1) parameter are confounded,
/// and a single occasion carries no information on either.
pub fn check_identifiability(m_max: usize, kind: StructureKind, phi_free: bool) -> Result<()> {
    let violation = |msg: String| Err(Error::Identifiability(msg));
    match m_max {
        0 => violation("no observed occasions".into()),
        1 if kind.has_param() => violation(format!(
            "the model is not identified: with one occasion per subject the {} parameter has no information",
            kind.label()
        )),
        1 if phi_free => violation(
            "the model is not identified: with one occasion per subject phi has no information; fix phi".into(),
        ),
        2 if phi_free && kind.has_param() => violation(format!(
            "the model is not identified: with at most two occasions phi and the {} parameter are confounded; fix phi or use the single-intercept structure",
            kind.label()
        )),
        _ => Ok(()),
    }
}

/// Pooled logistic `β`, then `φ = 0.5` and association `0.3`, all on the
/// unconstrained scale.
pub fn initial_values(dataset: &Dataset) -> Result<Vec<f64>> {
    let (x, y) = dataset.pooled();
    let fit = fit_logistic(&x, &y, &dataset.covariate_names)?;
    let mut theta = fit.beta;
    theta.push(logit(PHI_START));
    theta.push(ASSOC_START.atanh());
    Ok(theta)
}

/// Maps the unconstrained vector to a model and back.
#[derive(Debug, Clone, Copy)]
struct Layout {
    n_beta: usize,
    fixed_phi: Option<f64>,
    kind: StructureKind,
    lag: LagMode,
}

impl Layout {
    fn n_free(&self) -> usize {
        self.n_beta + usize::from(self.fixed_phi.is_none()) + usize::from(self.kind.has_param())
    }

    fn phi_index(&self) -> Option<usize> {
        self.fixed_phi.is_none().then_some(self.n_beta)
    }

    fn assoc_index(&self) -> Option<usize> {
        self.kind.has_param().then_some(self.n_free() - 1)
    }

    fn phi(&self, theta: &[f64]) -> f64 {
        match self.phi_index() {
            Some(i) => expit(theta[i]).clamp(PHI_MIN, PHI_MAX),
            None => self.fixed_phi.unwrap(),
        }
    }

    fn assoc(&self, theta: &[f64]) -> Option<f64> {
        self.assoc_index().map(|i| theta[i].tanh())
    }

    fn spec(&self, theta: &[f64]) -> BridgeModelSpec {
        BridgeModelSpec {
            beta: theta[..self.n_beta].to_vec(),
            phi: self.phi(theta),
            structure: self.kind.with_param(self.assoc(theta).unwrap_or(0.0)),
            lag: self.lag,
        }
    }

    fn clamp(&self, theta: &mut [f64]) {
        if let Some(i) = self.phi_index() {
            theta[i] = theta[i].clamp(-THETA_PHI_BOUND, THETA_PHI_BOUND);
        }
        if let Some(i) = self.assoc_index() {
            theta[i] = theta[i].clamp(-THETA_ASSOC_BOUND, THETA_ASSOC_BOUND);
        }
    }

    /// Free parameters sitting at their bound.
    fn at_bound(&self, theta: &[f64]) -> Vec<bool> {
        let mut out = vec![false; theta.len()];
        if let Some(i) = self.phi_index() {
            out[i] = theta[i].abs() >= THETA_PHI_BOUND;
        }
        if let Some(i) = self.assoc_index() {
            out[i] = theta[i].abs() >= THETA_ASSOC_BOUND;
        }
        out
    }

    /// `d natural / d θ` for each free parameter.
    fn jacobian(&self, theta: &[f64]) -> Vec<f64> {
        let mut j = vec![1.0; self.n_free()];
        if let Some(i) = self.phi_index() {
            let phi = self.phi(theta);
            j[i] = phi * (1.0 - phi);
        }
        if let Some(i) = self.assoc_index() {
            let a = theta[i].tanh();
            j[i] = 1.0 - a * a;
        }
        j
    }

    /// Gradient in `θ` from the gradient in `(β, φ, association)`.
    fn chain(&self, theta: &[f64], natural: &[f64]) -> Vec<f64> {
        let jac = self.jacobian(theta);
        let mut g: Vec<f64> = natural[..self.n_beta].to_vec();
        if self.fixed_phi.is_none() {
            g.push(natural[self.n_beta]);
        }
        if self.kind.has_param() {
            g.push(natural[self.n_beta + 1]);
        }
        g.iter().zip(&jac).map(|(a, b)| a * b).collect()
    }

    fn names(&self, covariates: &[String]) -> Vec<String> {
        let mut names: Vec<String> = covariates.to_vec();
        if self.fixed_phi.is_none() {
            names.push("phi".into());
        }
        if let Some(p) = self.kind.param_name() {
            names.push(p.into());
        }
        names
    }
}

fn value_and_gradient(lik: &McLikelihood<'_>, layout: &Layout, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (v, g) = lik.value_and_gradient(&layout.spec(theta))?;
    Ok((v, layout.chain(theta, &g)))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits the bridge model with the given association structure.
pub fn fit_bridge_model(dataset: &Dataset, structure: StructureKind, options: &FitOptions) -> Result<FitResult> {
    options.validate()?;
    check_identifiability(dataset.max_occasions(), structure, options.fixed_phi.is_none())?;
    let layout = Layout {
        n_beta: dataset.n_covariates(),
        fixed_phi: options.fixed_phi,
        kind: structure,
        lag: options.lag,
    };
    let start = initial_values(dataset)?;
    let mut theta: Vec<f64> = start[..layout.n_beta].to_vec();
    if layout.fixed_phi.is_none() {
        theta.push(start[layout.n_beta]);
    }
    if structure.has_param() {
        theta.push(start[layout.n_beta + 1]);
    }

    let schedule = &options.schedule;
    let final_draws = schedule.max_draws().max(options.covariance_draws.unwrap_or(0));
    let crn = CrnDraws::generate(dataset, structure, final_draws, options.seed, options.importance)?;
    let mut diagnostics = Vec::new();
    let mut stage = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut regularised = 0usize;

    let mut hessian: Option<DMatrix<f64>> = None;
    let mut previous_step: Option<Vec<f64>> = None;
    let mut anchored: Option<(McLikelihood<'_>, f64)> = None;
    while iterations < options.max_outer_iterations {
        iterations += 1;
        let forced = schedule.stage_for(iterations);
        if forced > stage {
            stage = forced;
            hessian = None;
            previous_step = None;
            anchored = None;
        }
        let draws = schedule.stages()[stage].draws;
        let (lik, v0) = match anchored.take() {
            Some(a) => a,
            None => {
                let lik = McLikelihood::anchor(dataset, &layout.spec(&theta), &crn, draws)?;
                let v = lik.value(&layout.spec(&theta))?;
                (lik, v)
            }
        };
        let (_, g0) = value_and_gradient(&lik, &layout, &theta)?;
        let h = match hessian.take() {
            Some(h) => h,
            None => fd_hessian_from_gradient(
                |t| value_and_gradient(&lik, &layout, t).map(|r| r.1),
                &theta,
                &g0,
                1e-5,
                false,
            )?,
        };
        // A bound is active when the gradient pushes through it.
        let free: Vec<usize> = layout
            .at_bound(&theta)
            .iter()
            .enumerate()
            .filter(|&(i, &b)| !(b && g0[i] * theta[i] > 0.0))
            .map(|(i, _)| i)
            .collect();
        let g_free: Vec<f64> = free.iter().map(|&i| g0[i]).collect();
        let h_free = DMatrix::from_fn(free.len(), free.len(), |a, b| h[(free[a], free[b])]);
        let (dir_free, shifted) = newton_direction(&g_free, &h_free)?;
        regularised += usize::from(shifted);
        let decrement: f64 = g_free.iter().zip(&dir_free).map(|(a, b)| a * b).sum();
        let mut dir = vec![0.0; theta.len()];
        for (k, &i) in free.iter().enumerate() {
            dir[i] = dir_free[k];
        }
        // Successive anchors can pull a weakly identified direction back and
        // forth; a half step damps the oscillation.
        if let Some(prev) = &previous_step {
            if prev.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
                dir.iter_mut().for_each(|d| *d *= 0.5);
            }
        }

        // Halve until the frozen surface improves, then confirm with a fresh
        // anchor at the trial point: far from its anchor the frozen surface
        // can overstate the likelihood where the proposal fits poorly.
        let mut alpha = 1.0;
        let mut accepted = None;
        let mut confirmations = 0;
        for _ in 0..=MAX_HALVINGS {
            let mut trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + alpha * d).collect();
            layout.clamp(&mut trial);
            let spec = layout.spec(&trial);
            if matches!(lik.value(&spec), Ok(v) if v.is_finite() && v >= v0) {
                let fresh = McLikelihood::anchor(dataset, &spec, &crn, draws)?;
                let v = fresh.value(&spec)?;
                if v.is_finite() && v >= v0 {
                    accepted = Some((trial, fresh, v));
                    break;
                }
                confirmations += 1;
                if confirmations == MAX_CONFIRMATIONS {
                    break;
                }
            }
            alpha *= 0.5;
        }
        let stage_done = match accepted {
            Some((trial, fresh, v)) => {
                let step: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
                let small = relative_step(&theta, &step) < options.step_tolerance;
                theta = trial;
                let gain = v - v0;
                anchored = Some((fresh, v));
                // A clean full Newton step leaves the curvature estimate
                // good enough for the next anchor.
                if alpha == 1.0 && !shifted {
                    hessian = Some(h);
                }
                previous_step = Some(step);
                // On a flat ridge the regularised steps creep: stop once the
                // confirmed gain is as small as the decrement tolerance.
                let creeping = gain < options.decrement_tolerance;
                small
                    || creeping
                    || norm(&g_free) < options.gradient_tolerance
                    || decrement < options.decrement_tolerance
            }
            // No halving improves the likelihood: the current point is its
            // maximum to within Monte Carlo resolution.
            None => true,
        };
        if stage_done {
            hessian = None;
            previous_step = None;
            anchored = None;
            if stage + 1 < schedule.stages().len() {
                stage += 1;
            } else {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        diagnostics.push(format!(
            "no convergence within {} outer iterations",
            options.max_outer_iterations
        ));
    }
    if regularised > 0 {
        diagnostics.push(format!(
            "Hessian regularised in {regularised} of {iterations} iterations"
        ));
    }

    let spec = layout.spec(&theta);
    let lik = McLikelihood::anchor(dataset, &spec, &crn, final_draws)?;
    let (loglik, grad) = value_and_gradient(&lik, &layout, &theta)?;
    let hessian = fd_hessian_from_gradient(
        |t| value_and_gradient(&lik, &layout, t).map(|r| r.1),
        &theta,
        &grad,
        1e-4,
        true,
    )?;
    let bound = layout.at_bound(&theta);
    if bound.iter().any(|&b| b) {
        diagnostics.push("estimate on the boundary of the parameter space".into());
    }
    let cov_theta = match options.covariance {
        CovarianceMethod::Inverse => covariance_from_hessian(&hessian).ok(),
        CovarianceMethod::GeneralizedInverse => {
            let keep: Vec<usize> = (0..theta.len()).filter(|&i| !bound[i]).collect();
            let sub = DMatrix::from_fn(keep.len(), keep.len(), |a, b| hessian[(keep[a], keep[b])]);
            match profiled_covariance_from_hessian(&sub, layout.n_beta, FLAT_CURVATURE) {
                Ok((cov_sub, dropped)) => {
                    if dropped > 0 {
                        diagnostics.push(format!(
                            "generalized inverse: {dropped} nuisance direction(s) without curvature dropped"
                        ));
                    }
                    let mut cov = DMatrix::from_element(theta.len(), theta.len(), f64::NAN);
                    for (a, &i) in keep.iter().enumerate() {
                        for (b, &j) in keep.iter().enumerate() {
                            cov[(i, j)] = cov_sub[(a, b)];
                        }
                    }
                    Some(cov)
                }
                Err(_) => None,
            }
        }
    };
    let (covariance, se) = match cov_theta {
        Some(cov_theta) => {
            let jac = layout.jacobian(&theta);
            let n = jac.len();
            let cov = DMatrix::from_fn(n, n, |i, j| jac[i] * cov_theta[(i, j)] * jac[j]);
            let se = (0..n).map(|i| cov[(i, i)].sqrt()).collect();
            (Some(cov), Some(se))
        }
        None => {
            diagnostics.push("Hessian at the estimate is not negative definite; standard errors unavailable".into());
            (None, None)
        }
    };
    let n_params = layout.n_free();
    Ok(FitResult {
        structure,
        lag: options.lag,
        covariate_names: dataset.covariate_names.clone(),
        beta: spec.beta.clone(),
        phi: spec.phi,
        phi_fixed: options.fixed_phi.is_some(),
        assoc: spec.structure.param(),
        param_names: layout.names(&dataset.covariate_names),
        theta,
        covariance,
        se,
        loglik,
        aic: aic_value(loglik, n_params),
        n_params,
        converged,
        iterations,
        final_draws,
        gradient_norm: norm(&grad),
        diagnostics,
        seed: options.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Occasion, SubjectRecord};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identifiability_rules() {
        assert!(check_identifiability(2, StructureKind::Ar1Rho, true).is_err());
        assert!(check_identifiability(2, StructureKind::Ar1Tau, true).is_err());
        assert!(check_identifiability(3, StructureKind::Ar1Tau, true).is_ok());
        assert!(check_identifiability(2, StructureKind::Single, true).is_ok());
        assert!(check_identifiability(2, StructureKind::Ar1Rho, false).is_ok());
        assert!(check_identifiability(1, StructureKind::Ar1Rho, false).is_err());
        assert!(check_identifiability(1, StructureKind::Single, false).is_ok());
        let err = check_identifiability(2, StructureKind::Ar1Rho, true).unwrap_err();
        assert!(err.to_string().contains("not identified"));
    }

    #[test]
    fn aic_arithmetic() {
        assert_abs_diff_eq!(aic_value(-2751.3, 9), 5520.6, epsilon = 1e-9);
        assert_abs_diff_eq!(aic_value(-10.0, 4) - aic_value(-10.0, 3), 2.0, epsilon = 1e-12);
        let d1 = aic_value(-100.0, 3) - aic_value(-90.0, 5);
        let d2 = aic_value(-100.0 + 7.5, 3) - aic_value(-90.0 + 7.5, 5);
        assert_abs_diff_eq!(d1, d2, epsilon = 1e-12);
    }

    #[test]
    fn schedule_parsing_and_staging() {
        let s: DrawSchedule = "50:19,100:39,1000:50".parse().unwrap();
        assert_eq!(s, DrawSchedule::standard());
        assert_eq!(s.to_string(), "50:19,100:39,1000:50");
        assert_eq!(s.stage_for(1), 0);
        assert_eq!(s.stage_for(19), 0);
        assert_eq!(s.stage_for(20), 1);
        assert_eq!(s.stage_for(45), 2);
        assert_eq!(s.stage_for(60), 2);
        assert!("100:10,50:20".parse::<DrawSchedule>().is_err());
        assert!("50:10,100:10".parse::<DrawSchedule>().is_err());
        assert!("50-10".parse::<DrawSchedule>().is_err());
    }

    #[test]
    fn layout_roundtrip_and_chain_rule() {
        let layout = Layout {
            n_beta: 2,
            fixed_phi: None,
            kind: StructureKind::Ar1Tau,
            lag: LagMode::Occasion,
        };
        let theta = vec![0.1, -0.2, 0.4, -0.7];
        let spec = layout.spec(&theta);
        assert_abs_diff_eq!(spec.phi, expit(0.4), epsilon = 1e-15);
        assert_abs_diff_eq!(spec.structure.param().unwrap(), (-0.7f64).tanh(), epsilon = 1e-15);
        let g = layout.chain(&theta, &[1.0, 1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(g[2], expit(0.4) * (1.0 - expit(0.4)), epsilon = 1e-15);
        assert_abs_diff_eq!(g[3], 1.0 - (-0.7f64).tanh().powi(2), epsilon = 1e-15);
        let fixed = Layout { fixed_phi: Some(0.6), ..layout };
        assert_eq!(fixed.n_free(), 3);
        assert_eq!(fixed.spec(&[0.0, 0.0, 0.0]).phi, 0.6);
        assert_eq!(fixed.names(&["a".into(), "b".into()]), vec!["a", "b", "tau"]);
    }

    fn occ(t: f64, y: u8) -> Occasion {
        Occasion {
            time: t,
            index: 0,
            outcome: y,
            covariates: vec![1.0],
        }
    }

    #[test]
    fn near_degenerate_intercept_reduces_to_logistic() {
        let subjects = vec![
            SubjectRecord::new("1", vec![occ(0.0, 0)]).unwrap(),
            SubjectRecord::new("2", vec![occ(0.0, 1)]).unwrap(),
        ];
        let ds = Dataset::new(vec!["intercept".into()], subjects).unwrap();
        let opts = FitOptions {
            fixed_phi: Some(0.999),
            ..FitOptions::default()
        };
        let fit = fit_bridge_model(&ds, StructureKind::Single, &opts).unwrap();
        assert!(fit.converged, "{:?}", fit.diagnostics);
        assert_abs_diff_eq!(fit.beta[0], 0.0, epsilon = 1e-2);
        assert_eq!(fit.n_params, 1);
        assert!(fit_bridge_model(&ds, StructureKind::Single, &FitOptions::default()).is_err());
    }

    #[test]
    fn two_occasions_with_free_phi_are_rejected_before_fitting() {
        let subjects = vec![
            SubjectRecord::new("1", vec![occ(0.0, 0), occ(1.0, 1)]).unwrap(),
            SubjectRecord::new("2", vec![occ(0.0, 1), occ(1.0, 1)]).unwrap(),
        ];
        let ds = Dataset::new(vec!["intercept".into()], subjects).unwrap();
        let err = fit_bridge_model(&ds, StructureKind::Ar1Rho, &FitOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Identifiability(_)));
    }
}
