//! Simulation studies: data generation from the bridge and Bahadur models,
//! replicated estimator comparisons, and the Kendall's τ correspondence
//! curve for binary pairs.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bahadur::{all_patterns, bahadur_cell_prob, fit_bahadur_ml, BahadurCorrelation, BahadurOptions};
use crate::bridge::BridgeParam;
use crate::copula::{build_correlation, rho_from_tau, sample_effect_vector, AssociationStructure, StructureKind};
use crate::data::{Dataset, Occasion, SubjectRecord};
use crate::error::{Error, Result};
use crate::fit::{fit_bridge_model, CovarianceMethod, DrawSchedule, FitOptions};
use crate::gee::{fit_gee, GeeOptions};
use crate::likelihood::ImportanceOptions;
use crate::special::expit;
use crate::stats::BinaryPairCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrueModel {
    Bridge,
    Bahadur,
}

impl FromStr for TrueModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bridge" => Ok(TrueModel::Bridge),
            "bahadur" => Ok(TrueModel::Bahadur),
            other => Err(Error::Config(format!("unknown true model '{other}' (bridge or bahadur)"))),
        }
    }
}

impl fmt::Display for TrueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrueModel::Bridge => "bridge",
            TrueModel::Bahadur => "bahadur",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Bridge model with AR(1) latent correlation.
    BridgeMl,
    BahadurMl,
    Gee,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::BridgeMl, Estimator::BahadurMl, Estimator::Gee];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::BridgeMl => "bridge-ml",
            Estimator::BahadurMl => "bahadur-ml",
            Estimator::Gee => "gee",
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator '{s}' (bridge-ml, bahadur-ml or gee)")))
    }
}

/// A two-group design with `occasions` visits at `t = 1..m` and marginal
/// model `logit P(Y_it = 1) = β₀ + β_x x_i + β_τ t`.
///
/// The bridge truth uses AR(1) latent correlation `ρ` and needs `φ`; since
/// the latent scale is fixed by `Var(Z) = 1`, `φ` alone sets the random
/// intercept variance and defaults to 0.7. The Bahadur truth uses AR(1)
/// pairwise correlation `Γ` with higher orders zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub true_model: TrueModel,
    pub n_subjects: usize,
    pub occasions: usize,
    /// Share of subjects with `x = 1`.
    pub group_fraction: f64,
    /// `(β₀, β_x, β_τ)`.
    pub beta: Vec<f64>,
    /// Values of `ρ` (bridge) or `Γ` (Bahadur), one study cell each.
    pub assoc: Vec<f64>,
    pub phi: f64,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// Draw schedule of the bridge fits.
    pub schedule: DrawSchedule,
    pub importance: ImportanceOptions,
}

pub const DEFAULT_PHI: f64 = 0.7;
/// Pilot points per subject in simulation fits; a quarter of the default
/// keeps a 200-replication study within desk time.
pub const SIM_PILOT: usize = 250;
/// Draws for the observed information of simulation fits. At small `φ` the
/// curvature from the last stage's draws is too noisy for standard errors.
pub const SIM_COVARIANCE_DRAWS: usize = 1000;
pub const COVARIATE_NAMES: [&str; 3] = ["intercept", "group", "time"];

impl ScenarioConfig {
    /// The two-group, three-occasion design with 50 subjects per group.
    pub fn standard(true_model: TrueModel) -> Self {
        let assoc = match true_model {
            TrueModel::Bridge => vec![0.1, 0.3, 0.6],
            TrueModel::Bahadur => vec![0.1, 0.25, 0.4],
        };
        ScenarioConfig {
            name: format!("{true_model}-truth"),
            true_model,
            n_subjects: 100,
            occasions: 3,
            group_fraction: 0.5,
            beta: vec![-1.0, 1.0, -0.5],
            assoc,
            phi: DEFAULT_PHI,
            replications: 200,
            seed: 20_100_101,
            estimators: Estimator::ALL.to_vec(),
            schedule: "50:19,100:39,200:50".parse().expect("valid schedule"),
            importance: ImportanceOptions {
                pilot: SIM_PILOT,
                ..ImportanceOptions::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_subjects < 2 {
            return bad("n_subjects must be at least 2".into());
        }
        if self.occasions == 0 {
            return bad("occasions must be positive".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if !(self.group_fraction > 0.0 && self.group_fraction < 1.0) {
            return bad("group_fraction must lie in (0, 1)".into());
        }
        if self.beta.len() != 3 || self.beta.iter().any(|b| !b.is_finite()) {
            return bad("beta needs three finite values (intercept, group, time)".into());
        }
        if self.assoc.is_empty() || self.assoc.iter().any(|a| !(a.abs() < 1.0)) {
            return bad("assoc needs values in (-1, 1)".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators requested".into());
        }
        if self.true_model == TrueModel::Bahadur && self.occasions > crate::bahadur::MAX_OCCASIONS {
            return bad(format!(
                "the Bahadur generator enumerates patterns; at most {} occasions",
                crate::bahadur::MAX_OCCASIONS
            ));
        }
        BridgeParam::new(self.phi).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    fn group_of(&self, i: usize) -> f64 {
        let treated = (self.group_fraction * self.n_subjects as f64).round() as usize;
        if i < treated {
            1.0
        } else {
            0.0
        }
    }

    fn eta(&self, x: f64, t: f64) -> f64 {
        self.beta[0] + self.beta[1] * x + self.beta[2] * t
    }

    fn build(&self, outcomes: Vec<Vec<u8>>) -> Dataset {
        let subjects = outcomes
            .into_iter()
            .enumerate()
            .map(|(i, ys)| {
                let x = self.group_of(i);
                let occasions = ys
                    .into_iter()
                    .enumerate()
                    .map(|(k, y)| {
                        let t = (k + 1) as f64;
                        Occasion {
                            time: t,
                            index: k,
                            outcome: y,
                            covariates: vec![1.0, x, t],
                        }
                    })
                    .collect();
                SubjectRecord {
                    id: format!("{:05}", i + 1),
                    occasions,
                }
            })
            .collect();
        Dataset::new(COVARIATE_NAMES.iter().map(|s| s.to_string()).collect(), subjects)
            .expect("generated data are well formed")
    }
}

/// Data from the bridge model with AR(1) latent correlation `rho`.
pub fn generate_bridge_dataset(config: &ScenarioConfig, rho: f64, rep_seed: u64) -> Result<Dataset> {
    let phi = BridgeParam::new(config.phi)?;
    let positions: Vec<f64> = (0..config.occasions).map(|k| k as f64).collect();
    let sigma = if config.occasions > 1 {
        Some(build_correlation(AssociationStructure::Ar1Rho(rho), &positions)?)
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    let outcomes = (0..config.n_subjects)
        .map(|i| {
            let x = config.group_of(i);
            let b = match &sigma {
                Some(s) => sample_effect_vector(s, phi, &mut rng),
                None => phi.sample_rng(&mut rng, 1),
            };
            (0..config.occasions)
                .map(|k| {
                    let eta = config.eta(x, (k + 1) as f64);
                    rng.gen_bool(expit(b[k] + eta / config.phi)) as u8
                })
                .collect()
        })
        .collect();
    Ok(config.build(outcomes))
}

/// Cell probabilities of the Bahadur truth for a subject in group `x`, or an
/// error naming a negative cell.
pub fn bahadur_truth_cells(config: &ScenarioConfig, gamma: f64, x: f64) -> Result<Vec<(Vec<u8>, f64)>> {
    let positions: Vec<usize> = (0..config.occasions).collect();
    let marginals: Vec<f64> = (0..config.occasions)
        .map(|k| expit(config.eta(x, (k + 1) as f64)))
        .collect();
    let corr = BahadurCorrelation {
        gamma,
        gamma3: 0.0,
        gamma4: 0.0,
    };
    all_patterns(config.occasions)
        .into_iter()
        .map(|pat| {
            let p = bahadur_cell_prob(&pat, &positions, &corr, &marginals);
            if p < 0.0 {
                Err(Error::Config(format!(
                    "Bahadur scenario invalid: pattern {pat:?} in group {x} has probability {p:.6}"
                )))
            } else {
                Ok((pat, p))
            }
        })
        .collect()
}

/// Data from the Bahadur model with AR(1) pairwise correlation `gamma`.
pub fn generate_bahadur_dataset(config: &ScenarioConfig, gamma: f64, rep_seed: u64) -> Result<Dataset> {
    let mut tables = Vec::new();
    for x in [0.0, 1.0] {
        let cells = bahadur_truth_cells(config, gamma, x)?;
        let index = WeightedIndex::new(cells.iter().map(|c| c.1))
            .map_err(|e| Error::Config(format!("Bahadur cells: {e}")))?;
        tables.push((cells, index));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
    let outcomes = (0..config.n_subjects)
        .map(|i| {
            let (cells, index) = &tables[config.group_of(i) as usize];
            cells[index.sample(&mut rng)].0.clone()
        })
        .collect();
    Ok(config.build(outcomes))
}

pub fn generate_dataset(config: &ScenarioConfig, assoc: f64, rep_seed: u64) -> Result<Dataset> {
    match config.true_model {
        TrueModel::Bridge => generate_bridge_dataset(config, assoc, rep_seed),
        TrueModel::Bahadur => generate_bahadur_dataset(config, assoc, rep_seed),
    }
}

/// Estimates and standard errors of `β` from one estimator on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRecord {
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
}

/// Runs one estimator, turning non-convergence and missing standard errors
/// into failures.
pub fn run_estimator(
    estimator: Estimator,
    dataset: &Dataset,
    config: &ScenarioConfig,
    rep_seed: u64,
) -> std::result::Result<EstimateRecord, String> {
    match estimator {
        Estimator::BridgeMl => {
            let opts = FitOptions {
                schedule: config.schedule.clone(),
                seed: rep_seed,
                importance: config.importance,
                covariance: CovarianceMethod::GeneralizedInverse,
                covariance_draws: Some(SIM_COVARIANCE_DRAWS),
                ..FitOptions::default()
            };
            let fit = fit_bridge_model(dataset, StructureKind::Ar1Rho, &opts).map_err(|e| e.to_string())?;
            if !fit.converged {
                return Err(fit.diagnostics.join("; "));
            }
            let se = fit.beta_se().ok_or_else(|| fit.diagnostics.join("; "))?;
            Ok(EstimateRecord { beta: fit.beta, se })
        }
        Estimator::BahadurMl => {
            let fit = fit_bahadur_ml(dataset, &BahadurOptions::default()).map_err(|e| e.to_string())?;
            if !fit.converged {
                return Err(fit.diagnostics.join("; "));
            }
            let se = fit.beta_se().ok_or_else(|| fit.diagnostics.join("; "))?;
            Ok(EstimateRecord { beta: fit.beta, se })
        }
        Estimator::Gee => {
            let fit = fit_gee(dataset, &GeeOptions::default()).map_err(|e| e.to_string())?;
            if !fit.converged {
                return Err(fit.diagnostics.join("; "));
            }
            let se = fit.se();
            Ok(EstimateRecord { beta: fit.beta, se })
        }
    }
}

/// Summary of one (association value, estimator, coefficient) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportCell {
    pub assoc: f64,
    pub estimator: Estimator,
    pub coefficient: String,
    pub truth: f64,
    pub replications: usize,
    pub failures: usize,
    /// More than 10% of the replications failed.
    pub unreliable: bool,
    pub mean: f64,
    pub mean_mcse: f64,
    pub bias: f64,
    /// Empirical variance with divisor `n`, so that `mse = bias² + variance`.
    pub variance: f64,
    pub mse: f64,
    pub mse_mcse: f64,
    pub coverage: f64,
    pub coverage_mcse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureRecord {
    pub assoc: f64,
    pub estimator: Estimator,
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub true_model: TrueModel,
    pub seed: u64,
    pub replications: usize,
    pub cells: Vec<ReportCell>,
    pub failures: Vec<FailureRecord>,
}

impl SimulationReport {
    pub fn cell(&self, assoc: f64, estimator: Estimator, coefficient: &str) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.assoc == assoc && c.estimator == estimator && c.coefficient == coefficient)
    }
}

/// Neumaier-compensated sum.
fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Mean, divisor-`n` variance and standard error of the mean.
fn moments(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n;
    let var_n = compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / n;
    let se = if values.len() > 1 { (var_n * n / (n - 1.0) / n).sqrt() } else { 0.0 };
    (mean, var_n, se)
}

/// Aggregates per-replication results, given in replication order.
pub fn summarise(
    assoc: f64,
    estimator: Estimator,
    truth: &[f64],
    names: &[String],
    results: &[std::result::Result<EstimateRecord, String>],
) -> Vec<ReportCell> {
    let ok: Vec<&EstimateRecord> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failures = results.len() - ok.len();
    (0..truth.len())
        .map(|j| {
            let est: Vec<f64> = ok.iter().map(|r| r.beta[j]).collect();
            let sq: Vec<f64> = est.iter().map(|e| (e - truth[j]).powi(2)).collect();
            let hits: Vec<f64> = ok
                .iter()
                .map(|r| f64::from(u8::from((r.beta[j] - truth[j]).abs() <= 1.96 * r.se[j])))
                .collect();
            let (mean, variance, mean_mcse) = moments(&est);
            let (mse, _, mse_mcse) = moments(&sq);
            let (coverage, _, _) = moments(&hits);
            let n = ok.len() as f64;
            ReportCell {
                assoc,
                estimator,
                coefficient: names[j].clone(),
                truth: truth[j],
                replications: ok.len(),
                failures,
                unreliable: failures as f64 > 0.1 * results.len() as f64,
                mean,
                mean_mcse,
                bias: mean - truth[j],
                variance,
                mse,
                mse_mcse,
                coverage,
                coverage_mcse: (coverage * (1.0 - coverage) / n).sqrt(),
            }
        })
        .collect()
}

/// Runs every replication of every association value and estimator.
/// Replication `r` uses seed `seed + r` for both data and fitting.
pub fn run_study(config: &ScenarioConfig) -> Result<SimulationReport> {
    run_study_with_progress(config, |_, _| {})
}

/// As [`run_study`], calling `progress(assoc, replication)` as replications
/// finish (in no particular order).
pub fn run_study_with_progress<P>(config: &ScenarioConfig, progress: P) -> Result<SimulationReport>
where
    P: Fn(f64, usize) + Sync,
{
    config.validate()?;
    if config.true_model == TrueModel::Bahadur {
        for &g in &config.assoc {
            for x in [0.0, 1.0] {
                bahadur_truth_cells(config, g, x)?;
            }
        }
    }
    let names: Vec<String> = COVARIATE_NAMES.iter().map(|s| s.to_string()).collect();
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for &assoc in &config.assoc {
        let per_rep: Vec<Vec<std::result::Result<EstimateRecord, String>>> = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let rep_seed = config.seed.wrapping_add(r as u64);
                let out = match generate_dataset(config, assoc, rep_seed) {
                    Ok(ds) => config
                        .estimators
                        .iter()
                        .map(|&e| run_estimator(e, &ds, config, rep_seed))
                        .collect(),
                    Err(e) => config.estimators.iter().map(|_| Err(e.to_string())).collect(),
                };
                progress(assoc, r);
                out
            })
            .collect();
        for (k, &est) in config.estimators.iter().enumerate() {
            let results: Vec<_> = per_rep.iter().map(|r| r[k].clone()).collect();
            for (r, res) in results.iter().enumerate() {
                if let Err(message) = res {
                    failures.push(FailureRecord {
                        assoc,
                        estimator: est,
                        replication: r,
                        message: message.clone(),
                    });
                }
            }
            cells.extend(summarise(assoc, est, &config.beta, &names, &results));
        }
    }
    Ok(SimulationReport {
        scenario: config.name.clone(),
        true_model: config.true_model,
        seed: config.seed,
        replications: config.replications,
        cells,
        failures,
    })
}

/// One point of the correspondence curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauPoint {
    pub phi: f64,
    /// Kendall's τ between the two random intercepts.
    pub tau_b: f64,
    /// Kendall's τ_a of the binary pair.
    pub tau_y: f64,
    /// Tie-corrected τ_b of the binary pair.
    pub tau_y_b: f64,
    /// Goodman–Kruskal γ of the binary pair.
    pub gamma_y: f64,
}

/// Default grid `τ_B ∈ {−0.9, −0.8, …, 0.9}`.
pub fn default_tau_grid() -> Vec<f64> {
    (-9..=9).map(|k| k as f64 / 10.0).collect()
}

pub const CURVE_PHIS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Kendall's τ of `(Y_1, Y_2)` against that of `(b_1, b_2)` for the
/// two-occasion model `P(Y_t = 1 | b_t) = expit(b_t + (3 − 2t)/φ)`, by Monte
/// Carlo with `n_pairs` subjects per grid point.
pub fn tau_correspondence_curve(phi: f64, tau_grid: &[f64], n_pairs: usize, seed: u64) -> Result<Vec<TauPoint>> {
    let bridge = BridgeParam::new(phi)?;
    if n_pairs < 2 {
        return Err(Error::domain("need at least two pairs"));
    }
    tau_grid
        .par_iter()
        .enumerate()
        .map(|(k, &tau_b)| {
            let rho = rho_from_tau(tau_b)?;
            let sigma = build_correlation(AssociationStructure::Ar1Rho(rho), &[0.0, 1.0])?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut counts = BinaryPairCounts::default();
            for _ in 0..n_pairs {
                let b = sample_effect_vector(&sigma, bridge, &mut rng);
                let y1 = rng.gen_bool(expit(b[0] + 1.0 / phi)) as u8;
                let y2 = rng.gen_bool(expit(b[1] - 1.0 / phi)) as u8;
                counts.add(y1, y2);
            }
            Ok(TauPoint {
                phi,
                tau_b,
                tau_y: counts.tau_a(),
                tau_y_b: counts.tau_b(),
                gamma_y: counts.gamma(),
            })
        })
        .collect()
}

/// The curve for every `φ` in [`CURVE_PHIS`].
pub fn tau_correspondence_curves(tau_grid: &[f64], n_pairs: usize, seed: u64) -> Result<Vec<TauPoint>> {
    let mut out = Vec::new();
    for (i, &phi) in CURVE_PHIS.iter().enumerate() {
        out.extend(tau_correspondence_curve(phi, tau_grid, n_pairs, seed.wrapping_add(1000 * i as u64))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn estimator_and_model_names_roundtrip() {
        for e in Estimator::ALL {
            assert_eq!(e.label().parse::<Estimator>().unwrap(), e);
        }
        assert_eq!("bahadur".parse::<TrueModel>().unwrap(), TrueModel::Bahadur);
        assert!("probit".parse::<TrueModel>().is_err());
    }

    #[test]
    fn bridge_data_reproduce_the_marginal_model() {
        let mut cfg = ScenarioConfig::standard(TrueModel::Bridge);
        cfg.n_subjects = 100_000;
        let ds = generate_bridge_dataset(&cfg, 0.3, 5).unwrap();
        for (x, t) in [(0.0, 1usize), (1.0, 1), (0.0, 3), (1.0, 2)] {
            let ys: Vec<f64> = ds
                .subjects
                .iter()
                .filter(|s| s.occasions[0].covariates[1] == x)
                .map(|s| f64::from(s.occasions[t - 1].outcome))
                .collect();
            let (mean, var, se) = crate::stats::mean_var(&ys);
            let _ = var;
            let truth = expit(-1.0 + x - 0.5 * t as f64);
            assert!((mean - truth).abs() < 4.0 * se, "x={x} t={t}: {mean} vs {truth}");
        }
        assert_abs_diff_eq!(expit(-1.5), 0.182_426, epsilon = 1e-6);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ScenarioConfig::standard(TrueModel::Bridge);
        assert_eq!(generate_bridge_dataset(&cfg, 0.1, 9).unwrap(), generate_bridge_dataset(&cfg, 0.1, 9).unwrap());
        let cfg = ScenarioConfig::standard(TrueModel::Bahadur);
        assert_eq!(generate_bahadur_dataset(&cfg, 0.25, 9).unwrap(), generate_bahadur_dataset(&cfg, 0.25, 9).unwrap());
    }

    #[test]
    fn bahadur_truth_is_valid_up_to_the_largest_gamma() {
        let cfg = ScenarioConfig::standard(TrueModel::Bahadur);
        for x in [0.0, 1.0] {
            let cells = bahadur_truth_cells(&cfg, 0.4, x).unwrap();
            assert_abs_diff_eq!(cells.iter().map(|c| c.1).sum::<f64>(), 1.0, epsilon = 1e-12);
        }
        assert!(bahadur_truth_cells(&cfg, 0.95, 0.0).is_err());
    }

    #[test]
    fn report_arithmetic() {
        let names: Vec<String> = vec!["a".into()];
        let results: Vec<std::result::Result<EstimateRecord, String>> = vec![
            Ok(EstimateRecord { beta: vec![1.2], se: vec![0.1] }),
            Ok(EstimateRecord { beta: vec![0.7], se: vec![0.1] }),
            Err("boom".into()),
            Ok(EstimateRecord { beta: vec![1.05], se: vec![0.1] }),
        ];
        let c = &summarise(0.1, Estimator::Gee, &[1.0], &names, &results)[0];
        assert_eq!(c.replications, 3);
        assert_eq!(c.failures, 1);
        assert!(c.unreliable);
        assert_abs_diff_eq!(c.mse, c.bias * c.bias + c.variance, epsilon = 1e-12);
        // Only 1.05 lies within 1.96 standard errors of the truth.
        assert_abs_diff_eq!(c.coverage, 1.0 / 3.0, epsilon = 1e-15);
        let single = &summarise(0.1, Estimator::Gee, &[1.0], &names, &results[..1])[0];
        assert_abs_diff_eq!(single.mse, 0.04, epsilon = 1e-12);
    }

    #[test]
    fn tau_curve_passes_through_zero() {
        let pts = tau_correspondence_curve(0.5, &[0.0, 0.5], 50_000, 1).unwrap();
        // τ_a of independent pairs has standard error below 0.005 here.
        assert!(pts[0].tau_y.abs() < 0.01, "{:?}", pts[0]);
        assert!(pts[1].tau_y > pts[0].tau_y);
    }
}
