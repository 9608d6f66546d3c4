//! Fit S, T and X learners on the same experiment and compare them against
//! the known CATE.
//!
//! ```text
//! cargo run --release --example fit_learners
//! ```

use uplift_policy::dataset;
use uplift_policy::synth::{self, Response, SynthConfig};
use uplift_policy::uplift::{self, LearnerKind, TreeParams};

fn main() -> uplift_policy::Result<()> {
    let control = Response::Linear {
        intercept: 0.0,
        coefficients: vec![1.0, 1.0],
    };
    let treated = Response::Sum {
        terms: vec![
            control.clone(),
            Response::Linear {
                intercept: -0.5,
                coefficients: vec![2.0],
            },
        ],
    };
    let cfg = SynthConfig::new(6000, 3, vec![control, treated], 0.5, 1);
    let (ds, gt) = synth::generate(&cfg)?;
    let (train, test) = dataset::split(&ds, 0.3, 1)?;
    let truth = synth::true_estimates(&gt, &test)?;

    let params = TreeParams::new(6, 40);
    for kind in [LearnerKind::S, LearnerKind::T, LearnerKind::X] {
        let model = uplift::fit(kind, &train, &params)?;
        let est = uplift::predict_cate(&model, &test)?;
        let mae = est
            .rows()
            .iter()
            .zip(truth.rows())
            .map(|(a, b)| (a[0] - b[0]).abs())
            .sum::<f64>()
            / test.len() as f64;
        let auc = uplift::uplift_auc(&uplift::cumulative_uplift_curve(&test, &est, 1)?);
        println!("{:<10} MAE {mae:.4}  AUC {auc:.4}", kind.name());
    }

    // a bagged forest as base learner
    let bagged = TreeParams {
        n_trees: 25,
        ..params
    };
    let model = uplift::fit(LearnerKind::T, &train, &bagged)?;
    let est = uplift::predict_cate(&model, &test)?;
    let auc = uplift::uplift_auc(&uplift::cumulative_uplift_curve(&test, &est, 1)?);
    println!("t-learner over {} : AUC {auc:.4}", model.base_learner());

    // models serialize to versioned JSON
    let json = model.to_json()?;
    let back = uplift::CateModel::from_json(&json)?;
    assert_eq!(uplift::predict_cate(&back, &test)?, est);
    println!("model json: {} bytes", json.len());
    Ok(())
}
