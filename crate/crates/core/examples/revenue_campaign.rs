//! Reward campaign: optimize net value under a 1% sales floor, then report
//! revenue, sales and e%iS lifts against the default baselines.
//!
//! ```text
//! cargo run --release --example revenue_campaign
//! ```

use std::path::Path;

use uplift_policy::pipeline::{self, RunConfig};

fn main() -> uplift_policy::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/revenue.toml");
    let cfg = RunConfig::load(&path)?;
    pipeline::cmd_simulate(&cfg)?;
    let fit = pipeline::cmd_fit(&cfg)?;
    println!("{} over {}", fit.estimator, fit.base_learner);

    let opt = pipeline::cmd_optimize(&cfg, None)?;
    println!(
        "{:?} over {} buckets: targeting {:.1}%, sales under policy {:.3} vs treat-all {:.3}",
        opt.report.solver,
        opt.report.n_buckets.unwrap_or(0),
        100.0 * opt.report.targeting_proportion,
        opt.floor_outcome_under_policy.unwrap_or(f64::NAN),
        opt.floor_outcome_under_reference.unwrap_or(f64::NAN),
    );

    pipeline::cmd_evaluate(&cfg, &[])?;
    print!("{}", pipeline::cmd_report(&cfg)?);
    Ok(())
}
