//! A synthetic cohort shaped like a pediatric HIV follow-up study: seven
//! visits from birth, infection status, and three birth adjusters, with
//! outcomes drawn from the bridge model and visits missing at random.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::bridge::BridgeParam;
use crate::copula::{build_correlation, sample_effect_vector, AssociationStructure};
use crate::error::{Error, Result};
use crate::io::{CellValue, DesignSpec, LongRow, LongSubject, LongTable};
use crate::special::expit;

/// Design columns of the cohort model, in coefficient order.
pub const COHORT_COLUMNS: [&str; 7] = ["intercept", "time", "hiv", "smoke", "gest_age", "low_wt", "time:hiv"];

#[derive(Debug, Clone, PartialEq)]
pub struct CohortConfig {
    pub n_subjects: usize,
    pub n_infected: usize,
    /// Visits at `t = 0, 1, …, occasions − 1`.
    pub occasions: usize,
    /// Marginal coefficients in [`COHORT_COLUMNS`] order.
    pub beta: [f64; 7],
    pub phi: f64,
    /// Lag-one Kendall's τ of the random intercepts.
    pub tau: f64,
    /// Logit of the visit probability: intercept, slope in `t`, shift for
    /// infected children.
    pub visit_logit: [f64; 3],
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_subjects: 401,
            n_infected: 74,
            occasions: 7,
            beta: [1.827, -0.641, -0.075, -0.182, -0.045, 0.086, 0.234],
            phi: 0.731,
            tau: 0.749,
            visit_logit: [1.0, -0.15, 0.4],
            seed: 2009,
        }
    }
}

/// The model terms matching [`COHORT_COLUMNS`].
pub fn cohort_design_spec() -> DesignSpec {
    DesignSpec {
        intercept: true,
        terms: ["time", "hiv", "smoke", "gest_age", "low_wt", "time:hiv"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        standardize: false,
    }
}

/// Draws the cohort. Every child keeps at least the birth visit; whether a
/// later visit is observed depends only on time and infection status.
pub fn synthetic_cohort(config: &CohortConfig) -> Result<LongTable> {
    if config.n_infected > config.n_subjects || config.occasions < 2 {
        return Err(Error::Config("cohort needs n_infected <= n_subjects and two or more occasions".into()));
    }
    let phi = BridgeParam::new(config.phi)?;
    let positions: Vec<f64> = (0..config.occasions).map(|t| t as f64).collect();
    let sigma = build_correlation(AssociationStructure::Ar1Tau(config.tau), &positions)?;
    let age: Normal<f64> = Normal::new(38.5, 2.0).expect("valid normal");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let [b0, bt, bh, bs, ba, bw, bth] = config.beta;
    let [v0, vt, vh] = config.visit_logit;
    let mut subjects = Vec::with_capacity(config.n_subjects);
    let mut dropped = 0;
    for i in 0..config.n_subjects {
        let hiv = if i < config.n_infected { 1.0 } else { 0.0 };
        let smoke = f64::from(rng.gen_bool(0.35) as u8);
        let gest_age: f64 = rng.sample(age).round().clamp(28.0, 43.0);
        let low_wt = f64::from(rng.gen_bool(0.12) as u8);
        let b = sample_effect_vector(&sigma, phi, &mut rng);
        let mut rows = Vec::new();
        for (t, b_t) in b.iter().enumerate() {
            let time = t as f64;
            let eta = b0 + bt * time + bh * hiv + bs * smoke + ba * gest_age + bw * low_wt + bth * time * hiv;
            let y = rng.gen_bool(expit(b_t + eta / config.phi)) as u8;
            let seen = rng.gen_bool(expit(v0 + vt * time + vh * hiv));
            if t == 0 || seen {
                rows.push(LongRow {
                    line: 0,
                    time,
                    outcome: y,
                    values: [hiv, smoke, gest_age, low_wt].into_iter().map(CellValue::Number).collect(),
                });
            } else {
                dropped += 1;
            }
        }
        subjects.push(LongSubject {
            id: (i + 1).to_string(),
            rows,
        });
    }
    Ok(LongTable {
        subject_column: "subject".into(),
        time_column: "time".into(),
        outcome_column: "outcome".into(),
        columns: ["hiv", "smoke", "gest_age", "low_wt"].iter().map(|s| s.to_string()).collect(),
        factors: Vec::new(),
        subjects,
        dropped_rows: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::build_design;

    #[test]
    fn cohort_shape() {
        let t = synthetic_cohort(&CohortConfig::default()).unwrap();
        assert_eq!(t.subjects.len(), 401);
        let infected = t.subjects.iter().filter(|s| s.rows[0].values[0] == CellValue::Number(1.0)).count();
        assert_eq!(infected, 74);
        assert!(t.dropped_rows > 0);
        assert!(t.subjects.iter().all(|s| s.rows[0].time == 0.0));
        let d = build_design(&t, &cohort_design_spec()).unwrap();
        assert_eq!(d.columns, COHORT_COLUMNS);
        assert_eq!(d.dataset.max_occasions(), 7);
    }
}
