//! Every estimator on one dataset, side by side.

use serde::Serialize;

use crate::bahadur::{fit_bahadur_ml, BahadurOptions};
use crate::copula::StructureKind;
use crate::data::Dataset;
use crate::error::Result;
use crate::fit::{fit_bridge_model, FitOptions, FitResult};
use crate::gee::{fit_gee, GeeOptions};

/// A named association or scale parameter with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtraParam {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
}

/// One estimator's marginal coefficients, or the reason it has none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub converged: bool,
    pub beta: Vec<f64>,
    pub se: Option<Vec<f64>>,
    pub extra: Vec<ExtraParam>,
    pub loglik: Option<f64>,
    pub aic: Option<f64>,
    pub diagnostics: Vec<String>,
    pub error: Option<String>,
}

impl EstimatorSummary {
    fn failed(label: String, message: String) -> Self {
        EstimatorSummary {
            label,
            converged: false,
            beta: Vec::new(),
            se: None,
            extra: Vec::new(),
            loglik: None,
            aic: None,
            diagnostics: Vec::new(),
            error: Some(message),
        }
    }

    /// Converged with a standard error for every coefficient.
    pub fn usable(&self) -> bool {
        self.converged && self.error.is_none() && self.se.as_ref().is_some_and(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// One coefficient's largest disagreement over all pairs of estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairwiseDifference {
    pub coefficient: String,
    pub first: String,
    pub second: String,
    pub difference: f64,
    /// `sqrt(se₁² + se₂²)`.
    pub joint_se: f64,
}

impl PairwiseDifference {
    pub fn ratio(&self) -> f64 {
        self.difference.abs() / self.joint_se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub covariate_names: Vec<String>,
    pub estimators: Vec<EstimatorSummary>,
}

impl Comparison {
    /// The pair with the largest `|Δβ| / joint SE` for each coefficient,
    /// over estimators that produced standard errors.
    pub fn worst_differences(&self) -> Vec<PairwiseDifference> {
        let usable: Vec<&EstimatorSummary> = self.estimators.iter().filter(|e| e.usable()).collect();
        let mut out = Vec::new();
        for (j, name) in self.covariate_names.iter().enumerate() {
            let mut worst: Option<PairwiseDifference> = None;
            for (a, ea) in usable.iter().enumerate() {
                for eb in &usable[a + 1..] {
                    let (sa, sb) = (ea.se.as_ref().unwrap()[j], eb.se.as_ref().unwrap()[j]);
                    let d = PairwiseDifference {
                        coefficient: name.clone(),
                        first: ea.label.clone(),
                        second: eb.label.clone(),
                        difference: ea.beta[j] - eb.beta[j],
                        joint_se: (sa * sa + sb * sb).sqrt(),
                    };
                    if worst.as_ref().map_or(true, |w| d.ratio() > w.ratio()) {
                        worst = Some(d);
                    }
                }
            }
            out.extend(worst);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareOptions {
    pub structures: Vec<StructureKind>,
    pub bridge: FitOptions,
    pub bahadur: BahadurOptions,
    pub gee: GeeOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            structures: vec![StructureKind::Single, StructureKind::Ar1Rho, StructureKind::Ar1Tau],
            bridge: FitOptions::default(),
            bahadur: BahadurOptions::default(),
            gee: GeeOptions::default(),
        }
    }
}

pub fn bridge_summary(fit: &FitResult) -> EstimatorSummary {
    let mut extra = Vec::new();
    extra.push(ExtraParam {
        name: "phi".into(),
        estimate: fit.phi,
        se: fit.phi_se(),
    });
    if let (Some(a), Some(name)) = (fit.assoc, fit.structure.param_name()) {
        extra.push(ExtraParam {
            name: name.into(),
            estimate: a,
            se: fit.assoc_se(),
        });
    }
    EstimatorSummary {
        label: format!("bridge-{}", fit.structure.label()),
        converged: fit.converged,
        beta: fit.beta.clone(),
        se: fit.beta_se(),
        extra,
        loglik: Some(fit.loglik),
        aic: Some(fit.aic),
        diagnostics: fit.diagnostics.clone(),
        error: None,
    }
}

/// Fits the bridge model under each requested structure, the Bahadur model
/// and GEE. A failing estimator is recorded with its error instead of
/// aborting the comparison.
pub fn compare_estimators(dataset: &Dataset, options: &CompareOptions) -> Result<Comparison> {
    let mut estimators = Vec::new();
    for &kind in &options.structures {
        let label = format!("bridge-{}", kind.label());
        estimators.push(match fit_bridge_model(dataset, kind, &options.bridge) {
            Ok(fit) => bridge_summary(&fit),
            Err(e) => EstimatorSummary::failed(label, e.to_string()),
        });
    }
    estimators.push(match fit_bahadur_ml(dataset, &options.bahadur) {
        Ok(fit) => {
            let se = fit.se.as_ref();
            let p = fit.beta.len();
            let values = [fit.corr.gamma, fit.corr.gamma3, fit.corr.gamma4];
            let extra = fit.param_names[p..]
                .iter()
                .zip(values)
                .enumerate()
                .map(|(k, (name, v))| ExtraParam {
                    name: name.clone(),
                    estimate: v,
                    se: se.map(|s| s[p + k]).filter(|v| v.is_finite()),
                })
                .collect();
            EstimatorSummary {
                label: "bahadur-ml".into(),
                converged: fit.converged,
                beta: fit.beta.clone(),
                se: fit.beta_se(),
                extra,
                loglik: Some(fit.loglik),
                aic: Some(fit.aic),
                diagnostics: fit.diagnostics.clone(),
                error: None,
            }
        }
        Err(e) => EstimatorSummary::failed("bahadur-ml".into(), e.to_string()),
    });
    estimators.push(match fit_gee(dataset, &options.gee) {
        Ok(fit) => EstimatorSummary {
            label: "gee".into(),
            converged: fit.converged,
            se: Some(fit.se()),
            beta: fit.beta.clone(),
            extra: vec![ExtraParam {
                name: "working_rho".into(),
                estimate: fit.rho,
                se: None,
            }],
            loglik: None,
            aic: None,
            diagnostics: fit.diagnostics.clone(),
            error: None,
        },
        Err(e) => EstimatorSummary::failed("gee".into(), e.to_string()),
    });
    Ok(Comparison {
        covariate_names: dataset.covariate_names.clone(),
        estimators,
    })
}
