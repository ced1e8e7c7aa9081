//! Conditional response model and the marginal likelihood of a subject,
//! integrated over its correlated bridge intercepts.
//!
//! Integration happens in the latent normal space: with `b_t = F_b^{-1}(Φ(z_t))`
//! the subject's contribution is
//!
//! ```text
//! L_i = ∫ Π_t p_t(z)^{y_t} (1 - p_t(z))^{1 - y_t} N(z; 0, Σ) dz,
//! p_t(z) = expit(b_t(z) + x_t'β / φ)
//! ```
//!
//! over the subject's observed occasions only (missing occasions drop rows and
//! columns of `Σ`). The production estimator is importance sampling. The
//! proposal starts from a normal approximation at the integrand's mode, is
//! refined by matching the integrand's mean and covariance on a set of pilot
//! points, then inflated. Points come from a randomly shifted Halton
//! sequence whose shifts are drawn from a per-subject stream keyed by
//! `(seed, subject id)`, so for a fixed seed the estimate is a smooth
//! deterministic function of the parameters. A composite Gauss–Legendre
//! cubature for up to four latent dimensions serves as the reference.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::BridgeParam;
use crate::copula::{build_correlation, AssociationStructure, LagMode, StructureKind};
use crate::data::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::special::{expit, ln_norm_pdf, log1pexp, logsumexp, norm_cdf, norm_inv_cdf, LN_2PI};

/// Default inflation of the Laplace covariance used as proposal.
pub const DEFAULT_INFLATION: f64 = 1.5;
/// Default number of pilot points for moment matching.
pub const DEFAULT_PILOT: usize = 1000;
const MODE_MAX_ITER: usize = 100;
const LATENT_CLAMP: f64 = 37.0;

/// Full parameter set of the bridge model on its natural scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeModelSpec {
    /// Marginal log-odds coefficients.
    pub beta: Vec<f64>,
    pub phi: f64,
    pub structure: AssociationStructure,
    #[serde(default)]
    pub lag: LagMode,
}

impl BridgeModelSpec {
    pub fn new(beta: Vec<f64>, phi: f64, structure: AssociationStructure) -> Result<Self> {
        let spec = BridgeModelSpec {
            beta,
            phi,
            structure,
            lag: LagMode::Occasion,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_lag(mut self, lag: LagMode) -> Self {
        self.lag = lag;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("beta must be finite"));
        }
        BridgeParam::new(self.phi)?;
        self.structure.validate()
    }

    pub fn bridge(&self) -> Result<BridgeParam> {
        BridgeParam::new(self.phi)
    }

    /// Conditional (subject-specific) coefficients `β / φ`.
    pub fn conditional_beta(&self) -> Vec<f64> {
        self.beta.iter().map(|b| b / self.phi).collect()
    }

    /// Length of the natural-scale gradient: `β`, `φ`, then the association
    /// parameter if the structure has one.
    pub fn n_natural(&self) -> usize {
        self.beta.len() + 1 + usize::from(self.structure.kind().has_param())
    }
}

/// `P(Y_t = 1 | b_t) = expit(b_t + x_t'β / φ)`.
pub fn conditional_prob(b_t: f64, x_t: &[f64], spec: &BridgeModelSpec) -> f64 {
    let eta: f64 = x_t.iter().zip(&spec.beta).map(|(x, b)| x * b).sum();
    expit(b_t + eta / spec.phi)
}

/// `P(Y_t = 1) = expit(x_t'β)`, the exact marginal of [`conditional_prob`]
/// under a bridge-distributed intercept.
pub fn marginal_prob(x_t: &[f64], beta: &[f64]) -> f64 {
    expit(x_t.iter().zip(beta).map(|(x, b)| x * b).sum())
}

enum Prior {
    /// One standard-normal latent shared by all occasions.
    Shared,
    Correlated {
        chol: Cholesky<f64, Dyn>,
        inverse: DMatrix<f64>,
        log_det: f64,
        /// `∂Σ/∂(association parameter)` and `tr(Σ^{-1} ∂Σ)`.
        d_sigma: DMatrix<f64>,
        trace_inv_d: f64,
    },
}

impl Prior {
    fn new(spec: &BridgeModelSpec, positions: &[f64]) -> Result<Prior> {
        if spec.structure.kind() == StructureKind::Single {
            return Ok(Prior::Shared);
        }
        let sigma = build_correlation(spec.structure, positions)?;
        let m = positions.len();
        let mut d_sigma = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..i {
                let (_, d) = spec.structure.correlation_at_lag(positions[i] - positions[j])?;
                d_sigma[(i, j)] = d;
                d_sigma[(j, i)] = d;
            }
        }
        let chol = sigma.cholesky().clone();
        let inverse = chol.inverse();
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let trace_inv_d = inverse.component_mul(&d_sigma).sum();
        Ok(Prior::Correlated {
            chol,
            inverse,
            log_det,
            d_sigma,
            trace_inv_d,
        })
    }

    fn dim(&self, m: usize) -> usize {
        match self {
            Prior::Shared => 1,
            Prior::Correlated { .. } => m,
        }
    }

    /// Maps a standard-normal vector to a prior draw.
    fn transform(&self, eps: &[f64], out: &mut [f64]) {
        match self {
            Prior::Shared => out[0] = eps[0],
            Prior::Correlated { chol, .. } => {
                let l = chol.l_dirty();
                for i in 0..out.len() {
                    out[i] = (0..=i).map(|j| l[(i, j)] * eps[j]).sum();
                }
            }
        }
    }

    fn log_density(&self, z: &[f64]) -> f64 {
        match self {
            Prior::Shared => ln_norm_pdf(z[0]),
            Prior::Correlated { inverse, log_det, .. } => {
                let d = z.len();
                let mut quad = 0.0;
                for i in 0..d {
                    let mut v = 0.0;
                    for j in 0..d {
                        v += inverse[(i, j)] * z[j];
                    }
                    quad += z[i] * v;
                }
                -0.5 * (quad + log_det + d as f64 * LN_2PI)
            }
        }
    }
}

/// One subject's integrand in the latent space, for fixed parameters.
struct SubjectModel<'a> {
    subject: &'a SubjectRecord,
    y: Vec<f64>,
    eta: Vec<f64>,
    phi: BridgeParam,
    inv_phi: f64,
    dim: usize,
    prior: Prior,
}

impl<'a> SubjectModel<'a> {
    fn new(subject: &'a SubjectRecord, spec: &BridgeModelSpec) -> Result<Self> {
        spec.validate()?;
        if subject.occasions.iter().any(|o| o.covariates.len() != spec.beta.len()) {
            return Err(Error::domain(format!(
                "subject {}: covariate length does not match beta ({})",
                subject.id,
                spec.beta.len()
            )));
        }
        let phi = spec.bridge()?;
        let prior = Prior::new(spec, &subject.positions(spec.lag))?;
        Ok(SubjectModel {
            subject,
            y: subject.outcomes().map(f64::from).collect(),
            eta: subject.linear_predictors(&spec.beta),
            phi,
            inv_phi: 1.0 / spec.phi,
            dim: prior.dim(subject.m()),
            prior,
        })
    }

    #[inline]
    fn latent_index(&self, t: usize) -> usize {
        match self.prior {
            Prior::Shared => 0,
            Prior::Correlated { .. } => t,
        }
    }

    fn bridge_effects(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .map(|&zj| {
                let zc = zj.clamp(-LATENT_CLAMP, LATENT_CLAMP);
                self.phi.inv_cdf_split(norm_cdf(zc), norm_cdf(-zc))
            })
            .collect()
    }

    /// `Σ_t log P(y_t | b)`.
    fn conditional_loglik(&self, b: &[f64]) -> f64 {
        (0..self.y.len())
            .map(|t| {
                let lin = b[self.latent_index(t)] + self.eta[t] * self.inv_phi;
                self.y[t] * lin - log1pexp(lin)
            })
            .sum()
    }

    fn log_integrand(&self, z: &[f64]) -> f64 {
        self.conditional_loglik(&self.bridge_effects(z)) + self.prior.log_density(z)
    }

    /// Value, gradient, exact Hessian and the Gauss–Newton (always negative
    /// definite) Hessian of the log-integrand in `z`.
    fn log_integrand_derivatives(&self, z: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
        let d = self.dim;
        let b = self.bridge_effects(z);
        let mut db = vec![0.0; d];
        let mut d2b = vec![0.0; d];
        for j in 0..d {
            if z[j].abs() < LATENT_CLAMP {
                let first = (ln_norm_pdf(z[j]) - self.phi.ln_pdf(b[j])).exp();
                db[j] = first;
                d2b[j] = first * (-z[j] - self.phi.dln_pdf(b[j]) * first);
            }
        }
        let mut value = self.prior.log_density(z);
        let mut grad = DVector::zeros(d);
        let mut curv_gn = vec![0.0; d];
        let mut curv_extra = vec![0.0; d];
        for t in 0..self.y.len() {
            let j = self.latent_index(t);
            let lin = b[j] + self.eta[t] * self.inv_phi;
            value += self.y[t] * lin - log1pexp(lin);
            let p = expit(lin);
            let r = self.y[t] - p;
            grad[j] += r * db[j];
            curv_gn[j] -= p * (1.0 - p) * db[j] * db[j];
            curv_extra[j] += r * d2b[j];
        }
        let prior_inv = match &self.prior {
            Prior::Shared => DMatrix::from_element(1, 1, 1.0),
            Prior::Correlated { inverse, .. } => inverse.clone(),
        };
        let zv = DVector::from_column_slice(z);
        grad -= &prior_inv * zv;
        let mut gn = -prior_inv;
        for j in 0..d {
            gn[(j, j)] += curv_gn[j];
        }
        let mut full = gn.clone();
        for j in 0..d {
            full[(j, j)] += curv_extra[j];
        }
        (value, grad, full, gn)
    }
}

/// Multivariate normal importance density for one subject's latent vector.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    log_det_l: f64,
}

impl Proposal {
    fn from_parts(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let chol_l = Cholesky::new(covariance.clone())
            .ok_or_else(|| Error::numeric("proposal covariance is not positive definite"))?
            .l();
        let log_det_l = chol_l.diagonal().iter().map(|v| v.ln()).sum();
        Ok(Proposal {
            mean,
            covariance,
            chol_l,
            log_det_l,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn scaled(&self, factor: f64) -> Result<Self> {
        Proposal::from_parts(self.mean.clone(), &self.covariance * factor)
    }

    /// Log density at `z`.
    fn log_density(&self, z: &[f64]) -> f64 {
        let d = self.dim();
        let mut white = vec![0.0; d];
        let mut sq = 0.0;
        for i in 0..d {
            let mut v = z[i] - self.mean[i];
            for j in 0..i {
                v -= self.chol_l[(i, j)] * white[j];
            }
            white[i] = v / self.chol_l[(i, i)];
            sq += white[i] * white[i];
        }
        -0.5 * (sq + d as f64 * LN_2PI) - self.log_det_l
    }

    /// Maps a standard-normal vector to a proposal draw, returning the draw
    /// and its log proposal density.
    fn transform(&self, eps: &[f64], out: &mut [f64]) -> f64 {
        let d = self.dim();
        let mut sq = 0.0;
        for i in 0..d {
            let mut v = self.mean[i];
            for j in 0..=i {
                v += self.chol_l[(i, j)] * eps[j];
            }
            out[i] = v;
            sq += eps[i] * eps[i];
        }
        -0.5 * (sq + d as f64 * LN_2PI) - self.log_det_l
    }
}

/// Settings of the importance sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceOptions {
    /// Factor applied to the proposal covariance.
    pub inflation: f64,
    /// Points used to match the proposal's moments to the integrand; zero
    /// keeps the plain mode-curvature approximation.
    pub pilot: usize,
}

impl Default for ImportanceOptions {
    fn default() -> Self {
        ImportanceOptions {
            inflation: DEFAULT_INFLATION,
            pilot: DEFAULT_PILOT,
        }
    }
}

impl ImportanceOptions {
    fn validate(&self) -> Result<()> {
        if !(self.inflation > 0.0 && self.inflation.is_finite()) {
            return Err(Error::domain("proposal inflation must be positive"));
        }
        Ok(())
    }
}

/// Normal approximation to the subject's integrand at its mode: mean at the
/// mode (damped Newton in the latent space), covariance `(−Hessian)^{-1}`.
pub fn importance_proposal(subject: &SubjectRecord, spec: &BridgeModelSpec) -> Result<Proposal> {
    let model = SubjectModel::new(subject, spec)?;
    laplace_proposal(&model)
}

fn laplace_proposal(model: &SubjectModel<'_>) -> Result<Proposal> {
    let d = model.dim;
    let mut z = vec![0.0; d];
    let (mut value, mut grad, mut full, mut gn) = model.log_integrand_derivatives(&z);
    let mut converged = false;
    for _ in 0..MODE_MAX_ITER {
        if grad.amax() < 1e-9 {
            converged = true;
            break;
        }
        let neg = Cholesky::new(-&full).or_else(|| Cholesky::new(-&gn));
        let step = match neg {
            Some(c) => c.solve(&grad),
            None => return Err(Error::numeric("mode search met a singular curvature")),
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            let tv = model.log_integrand(&trial);
            if tv >= value - 1e-12 * value.abs() {
                z = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || step.amax() * alpha < 1e-12 {
            converged = grad.amax() < 1e-6;
            break;
        }
        (value, grad, full, gn) = model.log_integrand_derivatives(&z);
    }
    if !converged {
        return Err(Error::numeric(format!(
            "mode search for subject {} did not converge in {MODE_MAX_ITER} iterations",
            model.subject.id
        )));
    }
    let curvature = if Cholesky::new(-&full).is_some() { full } else { gn };
    let precision = Cholesky::new(-curvature).ok_or_else(|| Error::numeric("degenerate proposal covariance"))?;
    Proposal::from_parts(DVector::from_vec(z), precision.inverse())
}

/// The sampler's proposal: the mode approximation, optionally refined by
/// matching the integrand's first two moments on pilot points drawn from the
/// defensive mixture around the inflated mode approximation, then inflated.
fn build_proposal(model: &SubjectModel<'_>, opts: &ImportanceOptions, streams: &SubjectStreams) -> Result<Proposal> {
    let laplace = laplace_proposal(model)?.scaled(opts.inflation)?;
    if opts.pilot == 0 {
        return Ok(laplace);
    }
    let d = model.dim;
    let (points, log_q) = mixture_points(model, &laplace, &streams.pilot, &streams.pilot_prior, opts.pilot);
    let log_w: Vec<f64> = (0..opts.pilot)
        .map(|k| model.log_integrand(&points[k * d..(k + 1) * d]) - log_q[k])
        .collect();
    let lse = logsumexp(&log_w);
    let mut mean = DVector::zeros(d);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - lse).exp()).collect();
    for (k, w) in weights.iter().enumerate() {
        for j in 0..d {
            mean[j] += w * points[k * d + j];
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (k, w) in weights.iter().enumerate() {
        let p = &points[k * d..(k + 1) * d];
        for a in 0..d {
            for b in 0..=a {
                cov[(a, b)] += w * (p[a] - mean[a]) * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    // A degenerate pilot (one dominant weight) falls back to the mode
    // approximation.
    let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    if !lse.is_finite() || ess < 2.0 * d as f64 + 2.0 {
        return Ok(laplace);
    }
    Proposal::from_parts(mean, cov * opts.inflation).or(Ok(laplace))
}

/// A Monte Carlo log-likelihood with its standard error. The error uses the
/// i.i.d. formula and so is conservative for the quasi-random points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub loglik: f64,
    pub std_error: f64,
}

fn summarise_log_weights(log_w: &[f64]) -> McEstimate {
    let k = log_w.len() as f64;
    let lse = logsumexp(log_w);
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / k;
    let var = scaled.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (k - 1.0).max(1.0);
    McEstimate {
        loglik: lse - k.ln(),
        std_error: (var / k).sqrt() / mean,
    }
}

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
    107, 109, 113, 127, 131,
];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while k > 0 {
        r += (k % base) as f64 * f;
        k /= base;
        f *= inv;
    }
    r
}

/// Standard-normal points from a randomly shifted Halton sequence: point `k`
/// has coordinates `Φ^{-1}(frac(h_j(k + 1) + shift_j))`. Prefixes of the
/// sequence are themselves well spread, so stages with more points extend
/// stages with fewer.
pub fn shifted_halton_normals(n: usize, shift: &[f64]) -> Result<Vec<f64>> {
    let d = shift.len();
    if d > PRIMES.len() {
        return Err(Error::domain(format!(
            "quasi-random points support at most {} dimensions",
            PRIMES.len()
        )));
    }
    let mut out = Vec::with_capacity(n * d);
    for k in 0..n {
        for (j, s) in shift.iter().enumerate() {
            let u = (radical_inverse(k as u64 + 1, PRIMES[j]) + s).fract();
            out.push(norm_inv_cdf(u.clamp(1e-300, 1.0 - f64::EPSILON / 2.0))?);
        }
    }
    Ok(out)
}

/// Every `DEFENSIVE_PERIOD`-th point is drawn from the prior instead of the
/// normal proposal, and all points are weighted by the mixture density. The
/// weights are then bounded by `DEFENSIVE_PERIOD` times the conditional
/// likelihood, which keeps their variance finite when the normal proposal is
/// too narrow (as happens for small `φ`, where the integrand is close to a
/// step function of the latent vector).
pub const DEFENSIVE_PERIOD: usize = 10;

fn defensive_count(n: usize) -> usize {
    n / DEFENSIVE_PERIOD
}

/// Quasi-random standard-normal streams for one subject.
#[derive(Debug, Clone)]
struct SubjectStreams {
    main: Vec<f64>,
    main_prior: Vec<f64>,
    pilot: Vec<f64>,
    pilot_prior: Vec<f64>,
}

/// Points for one subject: `draws` main points and `pilot` proposal-fitting
/// points, each split between a normal and a prior stream with their own
/// random shifts drawn from `rng`.
fn subject_points<R: Rng + ?Sized>(rng: &mut R, d: usize, draws: usize, pilot: usize) -> Result<SubjectStreams> {
    let mut stream = |n: usize| {
        let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        shifted_halton_normals(n, &shift)
    };
    let main = stream(draws - defensive_count(draws))?;
    let main_prior = stream(defensive_count(draws))?;
    let pilot_main = stream(pilot - defensive_count(pilot))?;
    let pilot_prior = stream(defensive_count(pilot))?;
    Ok(SubjectStreams {
        main,
        main_prior,
        pilot: pilot_main,
        pilot_prior,
    })
}

/// The first `n` points of the defensive mixture of `proposal` and the prior
/// in `model`, with their log mixture densities. Prefixes of the normal and
/// prior streams are used, so that larger `n` extends smaller `n`.
fn mixture_points(
    model: &SubjectModel<'_>,
    proposal: &Proposal,
    normal_eps: &[f64],
    prior_eps: &[f64],
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let d = model.dim;
    let n_prior = defensive_count(n);
    let ln_normal = ((n - n_prior) as f64 / n as f64).ln();
    let ln_prior = (n_prior as f64 / n as f64).ln();
    let mut z = vec![0.0; n * d];
    let mut log_q = Vec::with_capacity(n);
    let (mut g, mut p) = (0, 0);
    for k in 0..n {
        let out = &mut z[k * d..(k + 1) * d];
        if (k + 1) % DEFENSIVE_PERIOD == 0 {
            model.prior.transform(&prior_eps[p * d..(p + 1) * d], out);
            p += 1;
        } else {
            proposal.transform(&normal_eps[g * d..(g + 1) * d], out);
            g += 1;
        }
        let lq = if n_prior == 0 {
            proposal.log_density(out)
        } else {
            let a = ln_normal + proposal.log_density(out);
            let b = ln_prior + model.prior.log_density(out);
            let hi = a.max(b);
            hi + ((a - hi).exp() + (b - hi).exp()).ln()
        };
        log_q.push(lq);
    }
    (z, log_q)
}

/// Importance-sampled log-likelihood of one subject from `draws` points,
/// randomised by `rng`.
pub fn subject_loglik_mc<R: Rng + ?Sized>(
    subject: &SubjectRecord,
    spec: &BridgeModelSpec,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    subject_loglik_mc_estimate(subject, spec, draws, rng).map(|e| e.loglik)
}

pub fn subject_loglik_mc_estimate<R: Rng + ?Sized>(
    subject: &SubjectRecord,
    spec: &BridgeModelSpec,
    draws: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    subject_loglik_mc_with(subject, spec, draws, &ImportanceOptions::default(), rng)
}

pub fn subject_loglik_mc_with<R: Rng + ?Sized>(
    subject: &SubjectRecord,
    spec: &BridgeModelSpec,
    draws: usize,
    opts: &ImportanceOptions,
    rng: &mut R,
) -> Result<McEstimate> {
    if draws == 0 {
        return Err(Error::domain("need at least one Monte Carlo draw"));
    }
    opts.validate()?;
    let model = SubjectModel::new(subject, spec)?;
    let streams = subject_points(rng, model.dim, draws, opts.pilot)?;
    let proposal = build_proposal(&model, opts, &streams)?;
    let (z, log_q) = mixture_points(&model, &proposal, &streams.main, &streams.main_prior, draws);
    let d = model.dim;
    let log_w: Vec<f64> = (0..draws)
        .map(|k| model.log_integrand(&z[k * d..(k + 1) * d]) - log_q[k])
        .collect();
    Ok(summarise_log_weights(&log_w))
}

/// Seed of a subject's draw stream: FNV-1a of the id mixed into the global
/// seed with a SplitMix64 finaliser.
pub fn subject_stream_seed(seed: u64, subject_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in subject_id.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut x = seed ^ h.rotate_left(17);
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn subject_rng(seed: u64, subject_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(subject_stream_seed(seed, subject_id))
}

/// Sum of subject log-likelihoods, each randomised by its own `(seed, id)`
/// stream, accumulated in subject-id order.
pub fn dataset_loglik(dataset: &Dataset, spec: &BridgeModelSpec, draws: usize, seed: u64) -> Result<f64> {
    dataset_loglik_with(dataset, spec, draws, seed, &ImportanceOptions::default())
}

pub fn dataset_loglik_with(
    dataset: &Dataset,
    spec: &BridgeModelSpec,
    draws: usize,
    seed: u64,
    opts: &ImportanceOptions,
) -> Result<f64> {
    let terms: Vec<f64> = dataset
        .id_order()
        .par_iter()
        .map(|&i| {
            let subject = &dataset.subjects[i];
            subject_loglik_mc_with(subject, spec, draws, opts, &mut subject_rng(seed, &subject.id)).map(|e| e.loglik)
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// Log-likelihood of one subject by tensor cubature over the whitened latent
/// vector: composite Gauss–Legendre with `nodes` points on each of 12 panels
/// covering `[-7.5, 7.5]` per dimension. Only for `d <= 4`.
///
/// Panels keep the rule accurate although the logistic factor has complex
/// poles close to the real axis when `φ` is small.
pub fn subject_loglik_quadrature(subject: &SubjectRecord, spec: &BridgeModelSpec, nodes: usize) -> Result<f64> {
    let model = SubjectModel::new(subject, spec)?;
    let d = model.dim;
    if d > 4 {
        return Err(Error::domain(format!(
            "cubature reference supports at most 4 latent dimensions, got {d}"
        )));
    }
    const HALF_WIDTH: f64 = 7.5;
    const PANELS: usize = 12;
    let (x, w) = gauss_legendre(nodes);
    let half = HALF_WIDTH / PANELS as f64;
    let mut pts = Vec::with_capacity(nodes * PANELS);
    let mut wts = Vec::with_capacity(nodes * PANELS);
    for k in 0..PANELS {
        let centre = -HALF_WIDTH + (2 * k + 1) as f64 * half;
        for (xi, wi) in x.iter().zip(&w) {
            let p = centre + half * xi;
            pts.push(p);
            wts.push(wi * half * ln_norm_pdf(p).exp());
        }
    }
    let nodes = pts.len();
    let l = match &model.prior {
        Prior::Shared => DMatrix::from_element(1, 1, 1.0),
        Prior::Correlated { chol, .. } => chol.l(),
    };
    let mut idx = vec![0usize; d];
    let mut white = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for j in 0..d {
            white[j] = pts[idx[j]];
            weight *= wts[idx[j]];
        }
        for i in 0..d {
            z[i] = (0..=i).map(|j| l[(i, j)] * white[j]).sum();
        }
        total += weight * model.conditional_loglik(&model.bridge_effects(&z)).exp();
        let mut j = 0;
        loop {
            if j == d {
                return Ok(total.ln());
            }
            idx[j] += 1;
            if idx[j] < nodes {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

/// Quasi-random points for every subject, long enough for the largest stage
/// of a fit, plus each subject's pilot points. Stages with fewer draws use a
/// prefix of each sequence, so successive stages are nested.
#[derive(Debug, Clone)]
pub struct CrnDraws {
    streams: Vec<SubjectStreams>,
    dims: Vec<usize>,
    max_draws: usize,
    opts: ImportanceOptions,
}

impl CrnDraws {
    pub fn generate(
        dataset: &Dataset,
        kind: StructureKind,
        max_draws: usize,
        seed: u64,
        opts: ImportanceOptions,
    ) -> Result<Self> {
        opts.validate()?;
        if max_draws == 0 {
            return Err(Error::domain("need at least one Monte Carlo draw"));
        }
        let dims: Vec<usize> = dataset
            .subjects
            .iter()
            .map(|s| if kind == StructureKind::Single { 1 } else { s.m() })
            .collect();
        let streams = dataset
            .subjects
            .par_iter()
            .zip(&dims)
            .map(|(s, &d)| subject_points(&mut subject_rng(seed, &s.id), d, max_draws, opts.pilot))
            .collect::<Result<Vec<_>>>()?;
        Ok(CrnDraws {
            streams,
            dims,
            max_draws,
            opts,
        })
    }

    pub fn max_draws(&self) -> usize {
        self.max_draws
    }
}

struct AnchoredSubject {
    index: usize,
    dim: usize,
    z: Vec<f64>,
    u_lo: Vec<f64>,
    u_hi: Vec<f64>,
    log_q: Vec<f64>,
}

/// The importance-sampled log-likelihood with proposals and points frozen at
/// an anchor. As a function of the parameters it is smooth with an analytic
/// gradient, which is what the Newton iterations climb. At the anchor it
/// equals [`dataset_loglik`] with the same seed and draw count.
pub struct McLikelihood<'a> {
    dataset: &'a Dataset,
    kind: StructureKind,
    lag: LagMode,
    draws: usize,
    subjects: Vec<AnchoredSubject>,
}

impl<'a> McLikelihood<'a> {
    pub fn anchor(dataset: &'a Dataset, anchor: &BridgeModelSpec, crn: &CrnDraws, draws: usize) -> Result<Self> {
        if draws == 0 || draws > crn.max_draws {
            return Err(Error::domain(format!(
                "draw count {draws} outside 1..={}",
                crn.max_draws
            )));
        }
        if crn.streams.len() != dataset.subjects.len() {
            return Err(Error::domain("draws were generated for a different dataset"));
        }
        let subjects = dataset
            .id_order()
            .into_par_iter()
            .map(|i| {
                let model = SubjectModel::new(&dataset.subjects[i], anchor)?;
                let d = model.dim;
                if crn.dims[i] != d {
                    return Err(Error::domain("draws were generated for a different structure"));
                }
                let streams = &crn.streams[i];
                let proposal = build_proposal(&model, &crn.opts, streams)?;
                let (z, log_q) = mixture_points(&model, &proposal, &streams.main, &streams.main_prior, draws);
                let clamp = |v: &f64| v.clamp(-LATENT_CLAMP, LATENT_CLAMP);
                let u_lo = z.iter().map(|v| norm_cdf(clamp(v))).collect();
                let u_hi = z.iter().map(|v| norm_cdf(-clamp(v))).collect();
                Ok(AnchoredSubject {
                    index: i,
                    dim: d,
                    z,
                    u_lo,
                    u_hi,
                    log_q,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(McLikelihood {
            dataset,
            kind: anchor.structure.kind(),
            lag: anchor.lag,
            draws,
            subjects,
        })
    }

    pub fn draws(&self) -> usize {
        self.draws
    }

    fn check_spec(&self, spec: &BridgeModelSpec) -> Result<()> {
        if spec.structure.kind() != self.kind || spec.lag != self.lag {
            return Err(Error::domain("spec structure differs from the anchored structure"));
        }
        Ok(())
    }

    pub fn value(&self, spec: &BridgeModelSpec) -> Result<f64> {
        self.check_spec(spec)?;
        let terms: Vec<f64> = self
            .subjects
            .par_iter()
            .map(|a| self.subject_term(a, spec, false).map(|(v, _)| v))
            .collect::<Result<_>>()?;
        Ok(terms.iter().sum())
    }

    /// Value and gradient with respect to `(β, φ, association)`.
    pub fn value_and_gradient(&self, spec: &BridgeModelSpec) -> Result<(f64, Vec<f64>)> {
        self.check_spec(spec)?;
        let terms: Vec<(f64, Vec<f64>)> = self
            .subjects
            .par_iter()
            .map(|a| self.subject_term(a, spec, true))
            .collect::<Result<_>>()?;
        let mut grad = vec![0.0; spec.n_natural()];
        let mut value = 0.0;
        for (v, g) in &terms {
            value += v;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
        Ok((value, grad))
    }

    /// Per-subject contributions in subject-id order.
    pub fn subject_terms(&self, spec: &BridgeModelSpec) -> Result<Vec<f64>> {
        self.check_spec(spec)?;
        self.subjects
            .iter()
            .map(|a| self.subject_term(a, spec, false).map(|(v, _)| v))
            .collect()
    }

    fn subject_term(&self, a: &AnchoredSubject, spec: &BridgeModelSpec, want_grad: bool) -> Result<(f64, Vec<f64>)> {
        let subject = &self.dataset.subjects[a.index];
        let model = SubjectModel::new(subject, spec)?;
        let d = a.dim;
        let m = subject.m();
        let k_draws = self.draws;
        let n_beta = spec.beta.len();
        let has_assoc = self.kind.has_param();
        let inv_phi = model.inv_phi;
        let map: Vec<usize> = (0..m).map(|t| model.latent_index(t)).collect();

        let mut log_w = vec![0.0; k_draws];
        let mut resid = if want_grad { vec![0.0; k_draws * m] } else { Vec::new() };
        let mut g_phi = if want_grad { vec![0.0; k_draws] } else { Vec::new() };
        let mut g_assoc = if want_grad && has_assoc { vec![0.0; k_draws] } else { Vec::new() };
        let mut b = vec![0.0; d];
        let mut db = vec![0.0; d];
        let mut v = vec![0.0; d];

        for k in 0..k_draws {
            let zk = &a.z[k * d..(k + 1) * d];
            for j in 0..d {
                let (bj, dbj) = model.phi.inv_cdf_with_dphi(a.u_lo[k * d + j], a.u_hi[k * d + j]);
                b[j] = bj;
                db[j] = dbj;
            }
            let mut ll = 0.0;
            let mut gp = 0.0;
            for t in 0..m {
                let j = map[t];
                let scaled = model.eta[t] * inv_phi;
                let lin = b[j] + scaled;
                ll += model.y[t] * lin - log1pexp(lin);
                if want_grad {
                    let r = model.y[t] - expit(lin);
                    resid[k * m + t] = r;
                    gp += r * (db[j] - scaled * inv_phi);
                }
            }
            let log_prior = match &model.prior {
                Prior::Shared => ln_norm_pdf(zk[0]),
                Prior::Correlated {
                    inverse,
                    log_det,
                    d_sigma,
                    trace_inv_d,
                    ..
                } => {
                    let mut quad = 0.0;
                    for i in 0..d {
                        let mut acc = 0.0;
                        for j in 0..d {
                            acc += inverse[(i, j)] * zk[j];
                        }
                        v[i] = acc;
                        quad += zk[i] * acc;
                    }
                    if want_grad {
                        let mut vdv = 0.0;
                        for i in 0..d {
                            for j in 0..d {
                                vdv += v[i] * d_sigma[(i, j)] * v[j];
                            }
                        }
                        g_assoc[k] = 0.5 * (vdv - trace_inv_d);
                    }
                    -0.5 * (quad + log_det + d as f64 * LN_2PI)
                }
            };
            log_w[k] = ll + log_prior - a.log_q[k];
            if want_grad {
                g_phi[k] = gp;
            }
        }

        let lse = logsumexp(&log_w);
        if !lse.is_finite() {
            return Err(Error::numeric(format!(
                "importance weights for subject {} are all zero",
                subject.id
            )));
        }
        let value = lse - (k_draws as f64).ln();
        if !want_grad {
            return Ok((value, Vec::new()));
        }
        let mut grad = vec![0.0; spec.n_natural()];
        let mut weighted_resid = vec![0.0; m];
        let mut gphi_total = 0.0;
        let mut gassoc_total = 0.0;
        for k in 0..k_draws {
            let w = (log_w[k] - lse).exp();
            for t in 0..m {
                weighted_resid[t] += w * resid[k * m + t];
            }
            gphi_total += w * g_phi[k];
            if has_assoc {
                gassoc_total += w * g_assoc[k];
            }
        }
        for (t, occ) in subject.occasions.iter().enumerate() {
            for (g, x) in grad[..n_beta].iter_mut().zip(&occ.covariates) {
                *g += weighted_resid[t] * x * inv_phi;
            }
        }
        grad[n_beta] = gphi_total;
        if has_assoc {
            grad[n_beta + 1] = gassoc_total;
        }
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Occasion;
    use crate::quad::integrate_real_line;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn subject(id: &str, rows: &[(f64, u8, &[f64])]) -> SubjectRecord {
        let occasions = rows
            .iter()
            .enumerate()
            .map(|(i, (t, y, x))| Occasion {
                time: *t,
                index: i,
                outcome: *y,
                covariates: x.to_vec(),
            })
            .collect();
        SubjectRecord::new(id, occasions).unwrap()
    }

    fn spec(beta: Vec<f64>, phi: f64, s: AssociationStructure) -> BridgeModelSpec {
        BridgeModelSpec::new(beta, phi, s).unwrap()
    }

    fn marginal_by_quadrature(c: f64, phi: f64) -> f64 {
        let bp = BridgeParam::new(phi).unwrap();
        integrate_real_line(|b| expit(b + c / phi) * bp.pdf(b), 1e-13, 0.0).unwrap().value
    }

    #[test]
    fn conditional_prob_examples() {
        let s = spec(vec![1.0], 0.5, AssociationStructure::SingleIntercept);
        assert_eq!(conditional_prob(0.0, &[0.0], &s), 0.5);
        assert_abs_diff_eq!(conditional_prob(2.0, &[0.0], &s), 0.880_797, epsilon = 1e-6);
        assert_abs_diff_eq!(conditional_prob(0.0, &[1.0], &s), expit(2.0), epsilon = 1e-15);
        assert_eq!(s.conditional_beta(), vec![2.0]);
    }

    #[test]
    fn marginal_prob_is_quadrature_of_conditional() {
        assert_eq!(marginal_prob(&[0.0], &[3.0]), 0.5);
        assert_abs_diff_eq!(marginal_by_quadrature(1.0, 0.3), expit(1.0), epsilon = 1e-8);
        assert_abs_diff_eq!(marginal_by_quadrature(-2.0, 0.9), expit(-2.0), epsilon = 1e-8);
        assert_abs_diff_eq!(expit(1.0), 0.731_06, epsilon = 1e-5);
    }

    #[test]
    fn proposal_mode_by_symmetry() {
        // One success and one failure at the same predictor: the shared
        // intercept's posterior is symmetric about zero.
        let s = subject("a", &[(0.0, 1, &[0.0]), (1.0, 0, &[0.0])]);
        let sp = spec(vec![0.0], 0.5, AssociationStructure::SingleIntercept);
        let p = importance_proposal(&s, &sp).unwrap();
        assert_abs_diff_eq!(p.mean[0], 0.0, epsilon = 1e-9);
        // Same for the correlated structure with a balanced pattern.
        let s = subject("b", &[(0.0, 1, &[0.0]), (1.0, 0, &[0.0])]);
        let sp = spec(vec![0.0], 0.5, AssociationStructure::Ar1Rho(0.4));
        let p = importance_proposal(&s, &sp).unwrap();
        assert_abs_diff_eq!(p.mean[0], -p.mean[1], epsilon = 1e-9);
        assert!(p.mean[0] > 0.0);
    }

    #[test]
    fn proposal_mode_shrinks_toward_prior() {
        // A success at a very large conditional predictor carries almost no
        // information about b, so the mode sits just above the prior mode.
        let s = subject("a", &[(0.0, 1, &[1.0])]);
        let sp = spec(vec![3.0], 0.2, AssociationStructure::SingleIntercept);
        let p = importance_proposal(&s, &sp).unwrap();
        assert!(p.mean[0] > 0.0 && p.mean[0] < 1e-3, "{}", p.mean[0]);
        let big = importance_proposal(&subject("b", &[(0.0, 1, &[1.0])]), &spec(vec![-3.0], 0.2, AssociationStructure::SingleIntercept)).unwrap();
        assert!(big.mean[0] > p.mean[0]);
    }

    #[test]
    fn proposal_covariance_is_positive_definite() {
        let s = subject("a", &[(0.0, 1, &[1.0]), (1.0, 1, &[1.0]), (2.0, 0, &[1.0])]);
        let sp = spec(vec![-0.3], 0.4, AssociationStructure::Ar1Tau(0.7));
        let p = importance_proposal(&s, &sp).unwrap();
        assert!(Cholesky::new(p.covariance.clone()).is_some());
    }

    #[test]
    fn single_occasion_matches_closed_form() {
        let s = subject("a", &[(0.0, 1, &[1.0, 0.5])]);
        let sp = spec(vec![0.3, -0.8], 0.6, AssociationStructure::Ar1Rho(0.5));
        let exact = marginal_prob(&[1.0, 0.5], &sp.beta).ln();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = subject_loglik_mc_estimate(&s, &sp, 2000, &mut rng).unwrap();
        assert!((est.loglik - exact).abs() <= 3.0 * est.std_error + 1e-12, "{est:?} vs {exact}");
        let quad = subject_loglik_quadrature(&s, &sp, 16).unwrap();
        assert_relative_eq!(quad, exact, max_relative = 1e-8);
        assert_relative_eq!(est.loglik, quad, max_relative = 1e-3);
    }

    #[test]
    fn independent_half_marginals_give_quarter() {
        let s = subject("a", &[(0.0, 1, &[1.0]), (1.0, 0, &[1.0])]);
        let sp = spec(vec![0.0], 0.5, AssociationStructure::Ar1Rho(0.0));
        let quad = subject_loglik_quadrature(&s, &sp, 12).unwrap();
        assert_abs_diff_eq!(quad, 0.25f64.ln(), epsilon = 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let est = subject_loglik_mc_estimate(&s, &sp, 4000, &mut rng).unwrap();
        assert!((est.loglik - 0.25f64.ln()).abs() < 4.0 * est.std_error);
    }

    #[test]
    fn three_occasions_match_cubature() {
        let s = subject("a", &[(1.0, 1, &[1.0, 1.0]), (2.0, 0, &[1.0, 2.0]), (3.0, 1, &[1.0, 3.0])]);
        let sp = spec(vec![-0.4, 0.2], 0.55, AssociationStructure::Ar1Rho(0.6));
        let quad = subject_loglik_quadrature(&s, &sp, 10).unwrap();
        let quad_fine = subject_loglik_quadrature(&s, &sp, 14).unwrap();
        assert_abs_diff_eq!(quad, quad_fine, epsilon = 1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mc = subject_loglik_mc(&s, &sp, 4000, &mut rng).unwrap();
        assert_relative_eq!(mc, quad, max_relative = 1e-3);
    }

    #[test]
    fn pattern_probabilities_sum_to_one() {
        for (phi, st) in [
            (0.3, AssociationStructure::Ar1Rho(0.7)),
            (0.8, AssociationStructure::Ar1Tau(-0.4)),
            (0.5, AssociationStructure::SingleIntercept),
        ] {
            let sp = spec(vec![0.4, -1.1], phi, st);
            let mut total = 0.0;
            for y1 in 0..2u8 {
                for y2 in 0..2u8 {
                    let s = subject("p", &[(0.0, y1, &[1.0, 0.0]), (1.0, y2, &[1.0, 1.0])]);
                    total += subject_loglik_quadrature(&s, &sp, 16).unwrap().exp();
                }
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn proposal_estimate_agrees_with_prior_sampling() {
        let s = subject("a", &[(0.0, 1, &[1.0]), (1.0, 1, &[1.0])]);
        let sp = spec(vec![-0.5], 0.5, AssociationStructure::Ar1Rho(0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let is = subject_loglik_mc_estimate(&s, &sp, 5000, &mut rng).unwrap();
        // Naive estimator: average the conditional likelihood over prior draws.
        let sigma = build_correlation(sp.structure, &[0.0, 1.0]).unwrap();
        let phi = BridgeParam::new(sp.phi).unwrap();
        let n = 200_000;
        let liks: Vec<f64> = (0..n)
            .map(|_| {
                let b = crate::copula::sample_effect_vector(&sigma, phi, &mut rng);
                (0..2).map(|t| expit(b[t] + sp.beta[0] / sp.phi)).product::<f64>()
            })
            .collect();
        let (mean, var, _) = crate::stats::mean_var(&liks);
        let naive = mean.ln();
        let naive_se = (var / n as f64).sqrt() / mean;
        let joint = (is.std_error.powi(2) + naive_se.powi(2)).sqrt();
        assert!((is.loglik - naive).abs() < 4.0 * joint, "{} vs {} ({joint})", is.loglik, naive);
    }

    fn small_dataset() -> Dataset {
        let rows: Vec<SubjectRecord> = (0..6)
            .map(|i| {
                let x = (i % 2) as f64;
                subject(
                    &format!("s{i}"),
                    &[(1.0, (i % 3 == 0) as u8, &[1.0, x, 1.0]), (2.0, (i % 2) as u8, &[1.0, x, 2.0]), (3.0, 1, &[1.0, x, 3.0])],
                )
            })
            .collect();
        Dataset::new(vec!["1".into(), "x".into(), "t".into()], rows).unwrap()
    }

    #[test]
    fn dataset_loglik_is_deterministic_and_order_free() {
        let ds = small_dataset();
        let sp = spec(vec![-1.0, 1.0, -0.5], 0.7, AssociationStructure::Ar1Rho(0.3));
        let a = dataset_loglik(&ds, &sp, 200, 9).unwrap();
        assert_eq!(a.to_bits(), dataset_loglik(&ds, &sp, 200, 9).unwrap().to_bits());
        let mut rev = ds.clone();
        rev.subjects.reverse();
        assert_eq!(a.to_bits(), dataset_loglik(&rev, &sp, 200, 9).unwrap().to_bits());
        assert_ne!(a, dataset_loglik(&ds, &sp, 200, 10).unwrap());
    }

    #[test]
    fn duplicated_subject_doubles_the_value() {
        let one = subject("same", &[(1.0, 1, &[1.0]), (2.0, 0, &[1.0]), (3.0, 1, &[1.0])]);
        let sp = spec(vec![0.2], 0.6, AssociationStructure::Ar1Tau(0.5));
        let single = Dataset::new(vec!["1".into()], vec![one.clone()]).unwrap();
        let double = Dataset::new(vec!["1".into()], vec![one.clone(), one]).unwrap();
        let a = dataset_loglik(&single, &sp, 300, 4).unwrap();
        let b = dataset_loglik(&double, &sp, 300, 4).unwrap();
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn no_covariates_gives_half_per_occasion() {
        let subjects = vec![
            subject("a", &[(0.0, 1, &[]), (1.0, 0, &[])]),
            subject("b", &[(0.0, 0, &[]), (1.0, 0, &[]), (2.0, 1, &[])]),
        ];
        let ds = Dataset::new(vec![], subjects).unwrap();
        let sp = spec(vec![], 0.5, AssociationStructure::Ar1Rho(0.0));
        let v = dataset_loglik(&ds, &sp, 2000, 1).unwrap();
        // With Σ = I every pattern has probability 2^-m; the estimate is noisy,
        // so compare to the cubature and the closed form loosely.
        assert_abs_diff_eq!(v, 5.0 * 0.5f64.ln(), epsilon = 5e-3);
        let q: f64 = ds.subjects.iter().map(|s| subject_loglik_quadrature(s, &sp, 10).unwrap()).sum();
        assert_abs_diff_eq!(q, 5.0 * 0.5f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn anchored_gradient_matches_finite_differences() {
        let ds = small_dataset();
        for st in [
            AssociationStructure::Ar1Rho(0.3),
            AssociationStructure::Ar1Tau(0.4),
            AssociationStructure::SingleIntercept,
        ] {
            let sp = spec(vec![-1.0, 1.0, -0.5], 0.7, st);
            let crn = CrnDraws::generate(&ds, st.kind(), 100, 77, ImportanceOptions::default()).unwrap();
            let lik = McLikelihood::anchor(&ds, &sp, &crn, 100).unwrap();
            let (v0, g) = lik.value_and_gradient(&sp).unwrap();
            assert_abs_diff_eq!(v0, lik.value(&sp).unwrap(), epsilon = 1e-12);
            let h = 1e-6;
            for i in 0..sp.n_natural() {
                let bump = |delta: f64| {
                    let mut s = sp.clone();
                    let nb = s.beta.len();
                    if i < nb {
                        s.beta[i] += delta;
                    } else if i == nb {
                        s.phi += delta;
                    } else {
                        s.structure = s.structure.kind().with_param(s.structure.param().unwrap() + delta);
                    }
                    lik.value(&s).unwrap()
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                assert_relative_eq!(g[i], fd, max_relative = 1e-4, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn anchored_value_equals_dataset_loglik_at_anchor() {
        let ds = small_dataset();
        let sp = spec(vec![-1.0, 1.0, -0.5], 0.7, AssociationStructure::Ar1Rho(0.3));
        let crn = CrnDraws::generate(&ds, StructureKind::Ar1Rho, 300, 12, ImportanceOptions::default()).unwrap();
        let lik = McLikelihood::anchor(&ds, &sp, &crn, 300).unwrap();
        let direct = dataset_loglik(&ds, &sp, 300, 12).unwrap();
        assert_relative_eq!(lik.value(&sp).unwrap(), direct, max_relative = 1e-12);
    }

    #[test]
    fn halton_points_are_nested_and_centred() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(5, 3), 2.0 / 3.0 + 1.0 / 9.0);
        let shift = [0.3, 0.8, 0.1];
        let long = shifted_halton_normals(1000, &shift).unwrap();
        let short = shifted_halton_normals(100, &shift).unwrap();
        assert_eq!(&long[..300], &short[..]);
        for j in 0..3 {
            let col: Vec<f64> = long.iter().skip(j).step_by(3).copied().collect();
            let (mean, var, _) = crate::stats::mean_var(&col);
            assert!(mean.abs() < 0.02 && (var - 1.0).abs() < 0.05, "{mean} {var}");
        }
    }

    #[test]
    fn cubature_rejects_high_dimension() {
        let rows: Vec<(f64, u8, &[f64])> = (0..5).map(|t| (t as f64, 0u8, &[1.0][..])).collect();
        let s = subject("a", &rows);
        let sp = spec(vec![0.0], 0.5, AssociationStructure::Ar1Rho(0.2));
        assert!(subject_loglik_quadrature(&s, &sp, 10).is_err());
    }
}

