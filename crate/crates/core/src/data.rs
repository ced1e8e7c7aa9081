//! Longitudinal binary data: subjects, their observed occasions, and the
//! dataset-wide occasion grid.

use serde::{Deserialize, Serialize};

use crate::copula::LagMode;
use crate::error::{Error, Result};

/// One observed occasion of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occasion {
    pub time: f64,
    /// Index of `time` on the dataset's grid of distinct times.
    pub index: usize,
    pub outcome: u8,
    pub covariates: Vec<f64>,
}

/// A subject's observed occasions, sorted by time. Missing occasions are
/// simply absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub occasions: Vec<Occasion>,
}

impl SubjectRecord {
    pub fn new(id: impl Into<String>, occasions: Vec<Occasion>) -> Result<Self> {
        let rec = SubjectRecord {
            id: id.into(),
            occasions,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.occasions.is_empty() {
            return Err(Error::domain(format!("subject {} has no observed occasions", self.id)));
        }
        if self.occasions.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::domain(format!(
                "subject {}: times must be strictly increasing",
                self.id
            )));
        }
        let j = self.occasions[0].covariates.len();
        for occ in &self.occasions {
            if occ.outcome > 1 {
                return Err(Error::domain(format!("subject {}: outcome must be 0 or 1", self.id)));
            }
            if occ.covariates.len() != j || occ.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!(
                    "subject {}: covariate rows must be finite and of equal length",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.occasions.len()
    }

    pub fn outcomes(&self) -> impl Iterator<Item = u8> + '_ {
        self.occasions.iter().map(|o| o.outcome)
    }

    /// Occasion positions used for AR(1) lags.
    pub fn positions(&self, lag: LagMode) -> Vec<f64> {
        self.occasions
            .iter()
            .map(|o| match lag {
                LagMode::Occasion => o.index as f64,
                LagMode::Time => o.time,
            })
            .collect()
    }

    /// Linear predictors `x_t' β`.
    pub fn linear_predictors(&self, beta: &[f64]) -> Vec<f64> {
        self.occasions
            .iter()
            .map(|o| o.covariates.iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect()
    }
}

/// A set of subjects sharing one covariate layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub covariate_names: Vec<String>,
    pub subjects: Vec<SubjectRecord>,
}

impl Dataset {
    /// Builds a dataset, assigning every occasion its index on the grid of
    /// distinct observation times.
    pub fn new(covariate_names: Vec<String>, mut subjects: Vec<SubjectRecord>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::domain("dataset has no subjects"));
        }
        let j = covariate_names.len();
        let mut grid: Vec<f64> = Vec::new();
        for s in &subjects {
            s.validate()?;
            if s.occasions[0].covariates.len() != j {
                return Err(Error::domain(format!(
                    "subject {} has {} covariates, expected {j}",
                    s.id,
                    s.occasions[0].covariates.len()
                )));
            }
            grid.extend(s.occasions.iter().map(|o| o.time));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        for s in &mut subjects {
            for o in &mut s.occasions {
                o.index = grid.partition_point(|&t| t < o.time);
            }
        }
        Ok(Dataset {
            covariate_names,
            subjects,
        })
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn max_occasions(&self) -> usize {
        self.subjects.iter().map(SubjectRecord::m).max().unwrap_or(0)
    }

    pub fn n_observations(&self) -> usize {
        self.subjects.iter().map(SubjectRecord::m).sum()
    }

    /// Distinct observation times across all subjects.
    pub fn grid(&self) -> Vec<f64> {
        let mut g: Vec<f64> = self
            .subjects
            .iter()
            .flat_map(|s| s.occasions.iter().map(|o| o.time))
            .collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// Subject indices in subject-id order (ties keep input order).
    pub fn id_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.subjects.len()).collect();
        idx.sort_by(|&a, &b| self.subjects[a].id.cmp(&self.subjects[b].id));
        idx
    }

    /// Stacked design rows and outcomes over all observed occasions.
    pub fn pooled(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut x = Vec::with_capacity(self.n_observations());
        let mut y = Vec::with_capacity(self.n_observations());
        for s in &self.subjects {
            for o in &s.occasions {
                x.push(o.covariates.clone());
                y.push(o.outcome as f64);
            }
        }
        (x, y)
    }
}
