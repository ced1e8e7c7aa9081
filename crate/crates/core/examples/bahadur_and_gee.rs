//! The two comparison estimators on data from a Bahadur model: full
//! likelihood with AR(1) pairwise correlation, and GEE with an AR(1)
//! working correlation and sandwich standard errors.
//!
//! `cargo run --release --example bahadur_and_gee`

use bridge_glmm::bahadur::{fit_bahadur_ml, BahadurOptions};
use bridge_glmm::gee::{fit_gee, GeeOptions};
use bridge_glmm::sim::{generate_dataset, ScenarioConfig, TrueModel};

fn main() -> bridge_glmm::Result<()> {
    let mut config = ScenarioConfig::standard(TrueModel::Bahadur);
    config.n_subjects = 400;
    let dataset = generate_dataset(&config, 0.3, 2)?;
    println!("truth: beta = {:?}, gamma = 0.3", config.beta);

    let pairwise = fit_bahadur_ml(&dataset, &BahadurOptions { higher_order: false, ..Default::default() })?;
    let gee = fit_gee(&dataset, &GeeOptions::default())?;
    let pairwise_se = pairwise.beta_se().unwrap_or_else(|| vec![f64::NAN; pairwise.beta.len()]);
    let gee_se = gee.se();
    println!("\n{:10} {:>18} {:>18}", "", "bahadur", "gee");
    for (j, name) in dataset.covariate_names.iter().enumerate() {
        println!(
            "{name:10} {:8.4} ({:.4}) {:8.4} ({:.4})",
            pairwise.beta[j], pairwise_se[j], gee.beta[j], gee_se[j]
        );
    }
    println!("\nbahadur gamma {:.4}, loglik {:.3}, converged {}", pairwise.corr.gamma, pairwise.loglik, pairwise.converged);
    println!("gee working rho {:.4}, scale {:.4}, converged {}", gee.rho, gee.scale, gee.converged);
    for d in pairwise.diagnostics.iter().chain(&gee.diagnostics) {
        println!("note: {d}");
    }
    Ok(())
}
