//! Kendall's τ between two binary outcomes against Kendall's τ between
//! their bridge intercepts, for several φ.
//!
//! `cargo run --release --example tau_curve`

use bridge_glmm::sim::{tau_correspondence_curve, CURVE_PHIS};

fn main() -> bridge_glmm::Result<()> {
    let grid: Vec<f64> = (0..=9).map(|k| k as f64 / 10.0).collect();
    print!("tau_B ");
    for phi in CURVE_PHIS {
        print!("  phi={phi:<4}");
    }
    println!("   (tau_a of the outcomes)");
    let curves: Vec<_> = CURVE_PHIS
        .iter()
        .map(|&phi| tau_correspondence_curve(phi, &grid, 50_000, 1))
        .collect::<Result<_, _>>()?;
    for (k, tau_b) in grid.iter().enumerate() {
        print!("{tau_b:5.1} ");
        for curve in &curves {
            print!("  {:8.4}", curve[k].tau_y);
        }
        println!();
    }
    Ok(())
}
