//! Generate a randomized experiment with a known CATE and write it as CSV.
//!
//! ```text
//! cargo run --example simulate_experiment
//! ```

use uplift_policy::dataset;
use uplift_policy::synth::{self, Response, SynthConfig};

fn main() -> uplift_policy::Result<()> {
    let cfg = SynthConfig::new(
        1000,
        2,
        vec![
            Response::Linear {
                intercept: 1.0,
                coefficients: vec![0.5],
            },
            // treated: +1 for x1 >= 0.5
            Response::Sum {
                terms: vec![
                    Response::Linear {
                        intercept: 1.0,
                        coefficients: vec![0.5],
                    },
                    Response::Piecewise {
                        feature: 0,
                        thresholds: vec![0.5],
                        levels: vec![0.0, 1.0],
                    },
                ],
            },
        ],
        0.2,
        42,
    );
    let (ds, gt) = synth::generate(&cfg)?;
    println!("{} customers, arm counts {:?}", ds.len(), ds.arm_counts());

    for x in [[0.2, 0.5], [0.8, 0.5]] {
        println!("true CATE at {x:?}: {}", synth::true_cate(&gt, 1, &x)?);
    }

    let report = dataset::validate(&ds);
    println!("validation issues: {}", report.issues.len());

    let mut out = Vec::new();
    dataset::to_writer(&ds, &mut out)?;
    let text = String::from_utf8(out).expect("utf-8");
    for line in text.lines().take(4) {
        println!("{line}");
    }

    // same config and seed, same bytes
    let (again, _) = synth::generate(&cfg)?;
    assert_eq!(again, ds);
    Ok(())
}
