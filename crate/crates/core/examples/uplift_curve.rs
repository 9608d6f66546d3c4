//! Cumulative uplift curve and AUC: a fitted model, the true CATE and a
//! random ranking on the same eval set, plus a permutation null band.
//!
//! ```text
//! cargo run --release --example uplift_curve
//! ```

use uplift_policy::dataset;
use uplift_policy::synth::{self, Response, SynthConfig};
use uplift_policy::uplift::{self, TreeParams};

fn main() -> uplift_policy::Result<()> {
    let cfg = SynthConfig::new(
        4000,
        2,
        vec![
            Response::Constant { value: 0.5 },
            Response::Piecewise {
                feature: 0,
                thresholds: vec![0.5],
                levels: vec![0.0, 1.5],
            },
        ],
        1.0,
        9,
    );
    let (ds, gt) = synth::generate(&cfg)?;
    let (train, eval) = dataset::split(&ds, 0.5, 9)?;

    let model = uplift::fit_t_learner(&train, &TreeParams::default())?;
    let rankings = [
        ("t-learner", uplift::predict_cate(&model, &eval)?),
        ("true cate", synth::true_estimates(&gt, &eval)?),
        ("random", uplift::random_estimates(eval.ids(), 1, 9)),
    ];
    for (name, est) in &rankings {
        let curve = uplift::cumulative_uplift_curve(&eval, est, 1)?;
        let at = |f: f64| curve.points[((f * eval.len() as f64) as usize).max(1) - 1].value;
        println!(
            "{name:<10} AUC {:.4}   curve at 10% {:.4}, 50% {:.4}, 100% {:.4}",
            uplift::uplift_auc(&curve),
            at(0.1),
            at(0.5),
            at(1.0)
        );
    }

    let null = uplift::permutation_null(&eval, 1, 200, 1)?;
    println!("random-ranking AUC: {:.4} ± {:.4}", null.mean, null.sd);

    // treated-vs-control difference in means by score decile
    let score = eval.feature_column("x1")?;
    for b in uplift::bucket_true_uplift(&eval, &score, 10, 1)? {
        println!(
            "x1 in [{:.2}, {:.2}]  uplift {:+.3}{}",
            b.score_min,
            b.score_max,
            b.value,
            if b.undefined { " (undefined)" } else { "" }
        );
    }

    let mut csv = Vec::new();
    uplift::cumulative_uplift_curve(&eval, &rankings[0].1, 1)?.write_csv(&mut csv)?;
    println!("{}", String::from_utf8_lossy(&csv).lines().take(3).collect::<Vec<_>>().join("\n"));
    Ok(())
}
