//! Marginally logistic mixed models for longitudinal binary data with
//! correlated bridge-distributed random intercepts.

pub mod bahadur;
pub mod bridge;
pub mod cohort;
pub mod cli;
pub mod compare;
pub mod copula;
pub mod data;
pub mod error;
pub mod fit;
pub mod gee;
pub mod io;
pub mod likelihood;
pub mod logistic;
pub mod optim;
pub mod quad;
pub mod sim;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
