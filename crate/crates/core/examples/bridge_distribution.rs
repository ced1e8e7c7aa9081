//! The bridge density for a few values of φ: quantiles, variance, and the
//! marginalization identity that makes a logistic conditional model
//! logistic again after integrating the intercept out.
//!
//! `cargo run --release --example bridge_distribution`

use bridge_glmm::bridge::BridgeParam;
use bridge_glmm::quad::integrate_real_line;
use bridge_glmm::special::expit;

fn main() -> bridge_glmm::Result<()> {
    println!("  phi  variance     q05     q25     q75     q95   max |marginal − expit|");
    for phi in [0.2, 0.5, 0.8, 0.95] {
        let bridge = BridgeParam::new(phi)?;
        let q: Vec<f64> = [0.05, 0.25, 0.75, 0.95]
            .iter()
            .map(|&u| bridge.inv_cdf(u))
            .collect::<Result<_, _>>()?;
        let mut worst: f64 = 0.0;
        for eta in [-2.0, -0.5, 0.0, 1.0, 2.5] {
            let marginal = integrate_real_line(|b| expit(b + eta / phi) * bridge.pdf(b), 1e-12, 1e-12)?.value;
            worst = worst.max((marginal - expit(eta)).abs());
        }
        println!(
            "{phi:5.2}  {:8.4} {:7.3} {:7.3} {:7.3} {:7.3}   {worst:.1e}",
            bridge.variance(),
            q[0],
            q[1],
            q[2],
            q[3]
        );
    }
    Ok(())
}
