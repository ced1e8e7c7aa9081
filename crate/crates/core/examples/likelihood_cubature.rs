//! One three-visit subject: the importance-sampled log-likelihood at
//! increasing draw counts against tensor cubature.
//!
//! `cargo run --release --example likelihood_cubature`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bridge_glmm::copula::AssociationStructure;
use bridge_glmm::data::{Occasion, SubjectRecord};
use bridge_glmm::likelihood::{subject_loglik_mc_estimate, subject_loglik_quadrature, BridgeModelSpec};

fn main() -> bridge_glmm::Result<()> {
    let occasions = [(0.0, 1), (1.0, 1), (2.0, 0)]
        .iter()
        .enumerate()
        .map(|(index, &(time, outcome))| Occasion {
            time,
            index,
            outcome,
            covariates: vec![1.0, time],
        })
        .collect();
    let subject = SubjectRecord::new("a", occasions)?;
    let spec = BridgeModelSpec::new(vec![0.4, -0.6], 0.6, AssociationStructure::Ar1Rho(0.7))?;
    let exact = subject_loglik_quadrature(&subject, &spec, 12)?;
    println!("cubature log-likelihood {exact:.10}");
    println!("draws  estimate        relative error  reported s.e.");
    for draws in [100, 400, 1600, 6400] {
        let mut rng = ChaCha8Rng::seed_from_u64(draws as u64);
        let est = subject_loglik_mc_estimate(&subject, &spec, draws, &mut rng)?;
        println!(
            "{draws:5}  {:.10}  {:14.2e}  {:.2e}",
            est.loglik,
            (est.loglik - exact).abs() / exact.abs(),
            est.std_error
        );
    }
    Ok(())
}
