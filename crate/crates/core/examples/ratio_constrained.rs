//! Maximize uplift subject to a sales floor, at bucket granularity.
//!
//! ```text
//! cargo run --release --example ratio_constrained
//! ```

use uplift_policy::policy::{self, BucketSet, RatioOptions};

fn main() -> uplift_policy::Result<()> {
    // (size, mean τ̂, [sales under control, sales under treatment])
    let buckets = BucketSet::from_aggregates(
        "sales",
        &[
            (10, 4.0, [Some(102.0), Some(100.0)]),
            (10, -1.0, [Some(95.0), Some(100.0)]),
        ],
    );
    for eps in [0.01, 0.5] {
        let sol = policy::optimize_ratio_constrained(&buckets, eps, 1, &RatioOptions::default())?;
        println!(
            "epsilon {eps}: bucket arms {:?}, objective {}, slack {:.2}",
            sol.bucket_arms, sol.objective, sol.slack
        );
    }

    // 60 buckets force the knapsack path; compare with its own upper bound
    let aggs: Vec<(usize, f64, [Option<f64>; 2])> = (0..60)
        .map(|b| {
            let u = (b as f64 * 0.37).sin();
            (50, u, [Some(100.0 + 3.0 * u), Some(100.0 - 2.0 * u)])
        })
        .collect();
    let big = BucketSet::from_aggregates("sales", &aggs);
    let sol = policy::optimize_ratio_constrained(&big, 0.01, 1, &RatioOptions::default())?;
    let q = sol.quantization.expect("dp path");
    println!(
        "{:?}: objective {:.4}, LP bound {:.4}, {} of {} buckets treated, slack {:.3}",
        sol.solver,
        sol.objective,
        q.objective_upper_bound,
        sol.bucket_arms.iter().filter(|&&a| a == 1).count(),
        big.len(),
        sol.slack
    );
    Ok(())
}
