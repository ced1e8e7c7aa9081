//! Fits every estimator to a synthetic 401-child cohort with seven visits
//! and prints the side-by-side table.
//!
//! `cargo run --release --example compare_cohort`

use std::time::Instant;

use bridge_glmm::cohort::{cohort_design_spec, synthetic_cohort, CohortConfig};
use bridge_glmm::compare::{compare_estimators, CompareOptions};
use bridge_glmm::io::build_design;

fn main() -> bridge_glmm::Result<()> {
    let table = synthetic_cohort(&CohortConfig::default())?;
    let design = build_design(&table, &cohort_design_spec())?;
    println!(
        "{} children, {} observed visits, {} visits missing",
        design.dataset.subjects.len(),
        design.dataset.n_observations(),
        table.dropped_rows
    );
    let start = Instant::now();
    let comparison = compare_estimators(&design.dataset, &CompareOptions::default())?;
    for e in &comparison.estimators {
        let beta: Vec<String> = e.beta.iter().map(|b| format!("{b:7.3}")).collect();
        println!("{:16} converged={} {}", e.label, e.converged, beta.join(" "));
        if let Some(se) = &e.se {
            let se: Vec<String> = se.iter().map(|s| format!("{s:7.3}")).collect();
            println!("{:16}              {}", "", se.join(" "));
        }
        for p in &e.extra {
            println!("{:16}   {} = {:.3} ({})", "", p.name, p.estimate, p.se.map_or("-".into(), |s| format!("{s:.3}")));
        }
        if let Some(msg) = &e.error {
            println!("{:16}   error: {msg}", "");
        }
    }
    for d in comparison.worst_differences() {
        println!(
            "{:10} largest gap {} vs {}: {:.3} = {:.2} joint SE",
            d.coefficient,
            d.first,
            d.second,
            d.difference,
            d.ratio()
        );
    }
    println!("elapsed {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
