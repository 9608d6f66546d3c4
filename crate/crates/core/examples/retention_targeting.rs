//! Churn campaign: the message hurts low-retention customers and leaves
//! customers above 0.6 unaffected. Compare the uplift policy with the
//! "retention score < 0.391" rule using the synthetic oracle.
//!
//! ```text
//! cargo run --release --example retention_targeting
//! ```

use std::path::Path;

use uplift_policy::pipeline::{self, RunConfig};
use uplift_policy::uplift;

fn main() -> uplift_policy::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/retention.toml");
    let cfg = RunConfig::load(&path)?;
    pipeline::cmd_simulate(&cfg)?;

    let ds = pipeline::load_dataset(&cfg)?;
    let score = ds.feature_column("x1")?;
    println!("difference in means by retention score decile:");
    for b in uplift::bucket_true_uplift(&ds, &score, 10, 1)? {
        println!("  [{:.2}, {:.2}]  {:+.4}", b.score_min, b.score_max, b.value);
    }

    pipeline::cmd_fit(&cfg)?;
    pipeline::cmd_optimize(&cfg, None)?;
    pipeline::cmd_evaluate(&cfg, &[])?;
    print!("\n{}", pipeline::cmd_report(&cfg)?);
    println!("artifacts in {}", cfg.out_dir.display());
    Ok(())
}
