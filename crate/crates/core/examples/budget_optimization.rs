//! Budget-capped assignment across two treatment arms, checked against the
//! exhaustive oracle on a small instance.
//!
//! ```text
//! cargo run --example budget_optimization
//! ```

use uplift_policy::dataset::{CustomerRecord, ExperimentDataset, TreatmentSet};
use uplift_policy::policy::{self, ConstraintSpec};
use uplift_policy::uplift::UpliftEstimates;

fn main() -> uplift_policy::Result<()> {
    // τ̂ for (coupon, call) per customer
    let tau = [
        [0.9, 1.2],
        [0.4, -0.1],
        [-0.3, 0.8],
        [1.1, 1.0],
        [0.2, 0.3],
        [-0.5, -0.2],
        [0.7, 0.1],
        [0.05, 0.9],
    ];
    let ids: Vec<String> = (0..tau.len()).map(|i| format!("cust{i}")).collect();
    let est = UpliftEstimates::new(ids.clone(), tau.iter().map(|r| r.to_vec()).collect())?;
    let weights = vec![1.0; tau.len()];

    let free = policy::optimize_positive(&est, &weights)?;
    println!("unconstrained: {:?}, objective {:.2}", free.assignment(), policy::policy_objective(&free, &est)?);

    let caps = [2, 1];
    let capped = policy::optimize_budget(&est, &weights, &caps)?;
    println!(
        "caps {caps:?}: {:?}, objective {:.2}, arm counts {:?}",
        capped.assignment(),
        policy::policy_objective(&capped, &est)?,
        capped.arm_counts()
    );

    // the exhaustive oracle needs a dataset only for alignment
    let treatments = TreatmentSet::uniform(vec!["none".into(), "coupon".into(), "call".into()])?;
    let records = ids
        .iter()
        .map(|id| CustomerRecord {
            id: id.clone(),
            x: vec![0.0],
            t: 0,
            y: 0.0,
            aux: vec![],
        })
        .collect();
    let ds = ExperimentDataset::new(treatments, vec!["x".into()], vec![], records)?;
    let oracle = policy::brute_force_policy(&est, &ds, &weights, &ConstraintSpec::Budget { caps: caps.to_vec() })?;
    println!(
        "oracle:        {:?}, objective {:.2}",
        oracle.assignment(),
        policy::policy_objective(&oracle, &est)?
    );

    // single treatment arm: the greedy solution is exact
    let one_arm = UpliftEstimates::binary(ids, &tau.iter().map(|r| r[0]).collect::<Vec<_>>())?;
    for cap in 0..=4 {
        let p = policy::optimize_budget(&one_arm, &weights, &[cap])?;
        println!("cap {cap}: treat {:?}", p.assignment());
    }
    Ok(())
}
