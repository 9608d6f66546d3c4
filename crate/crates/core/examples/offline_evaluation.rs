//! IPS and SNIPS on logged data, lift over baselines, and a check of IPS
//! against the synthetic oracle over repeated logging draws.
//!
//! ```text
//! cargo run --release --example offline_evaluation
//! ```

use uplift_policy::ope::{self, Direction};
use uplift_policy::policy::Policy;
use uplift_policy::synth::{self, Response, SynthConfig};

fn main() -> uplift_policy::Result<()> {
    let cfg = SynthConfig::new(
        10_000,
        1,
        vec![
            Response::Linear {
                intercept: 1.0,
                coefficients: vec![1.0],
            },
            Response::Linear {
                intercept: 1.6,
                coefficients: vec![-0.5],
            },
        ],
        1.0,
        4,
    );
    let (ds, gt) = synth::generate(&cfg)?;
    let score = ds.feature_column("x1")?;
    let proposed = ope::threshold_policy(&ds, &score, 0.4, Direction::Below, 1)?;
    let baselines = vec![
        ("Targeting everyone".to_string(), Policy::constant(ds.ids(), 1, 2)),
        ("Targeting no one".to_string(), Policy::constant(ds.ids(), 0, 2)),
        ("x1 > 0.4".to_string(), ope::threshold_policy(&ds, &score, 0.4, Direction::Above, 1)?),
    ];
    let report = ope::lift_report(&ds, &proposed, &baselines, &["outcome".to_string()], None)?;
    let mut csv = Vec::new();
    report.write_lift_csv(&mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv));

    let truth = synth::true_policy_value(&gt, &ds, &proposed, "outcome")?;
    let draws = 200;
    let mut total = 0.0;
    for r in 0..draws {
        let replay = synth::replay_logging(&cfg, &ds, 1000 + r)?;
        total += ope::ips(&replay, &proposed, "outcome")?;
    }
    println!(
        "true value {truth:.4}, single-draw IPS {:.4}, mean IPS over {draws} draws {:.4}",
        ope::ips(&ds, &proposed, "outcome")?,
        total / draws as f64
    );
    Ok(())
}
