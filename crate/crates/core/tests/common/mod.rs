#![allow(dead_code)]

use uplift_policy::dataset::{CustomerRecord, ExperimentDataset, TreatmentSet};
use uplift_policy::policy::{BucketSet, ConstraintSpec, Policy};
use uplift_policy::uplift::{equal_group_sizes, UpliftEstimates};

pub fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i:04}")).collect()
}

pub fn labels(n_arms: usize) -> Vec<String> {
    std::iter::once("control".to_string())
        .chain((1..n_arms).map(|k| format!("t{k}")))
        .collect()
}

/// One covariate per record (its index), outcomes `y`, optional aux columns.
pub fn dataset(
    propensities: Vec<f64>,
    t: &[usize],
    y: &[f64],
    aux: &[(&str, Vec<f64>)],
) -> ExperimentDataset {
    let n_arms = propensities.len();
    let treatments = TreatmentSet::new(labels(n_arms), propensities).unwrap();
    let records = ids(t.len())
        .into_iter()
        .enumerate()
        .map(|(i, id)| CustomerRecord {
            id,
            x: vec![i as f64],
            t: t[i],
            y: y[i],
            aux: aux.iter().map(|(_, v)| v[i]).collect(),
        })
        .collect();
    ExperimentDataset::new(
        treatments,
        vec!["x1".into()],
        aux.iter().map(|(n, _)| n.to_string()).collect(),
        records,
    )
    .unwrap()
}

/// Objective recomputed from scratch: `Σ w_i τ̂_{a_i}(x_i)`.
pub fn objective(p: &Policy, est: &UpliftEstimates, weights: &[f64]) -> f64 {
    p.assignment()
        .iter()
        .enumerate()
        .map(|(i, &a)| if a == 0 { 0.0 } else { weights[i] * est.rows()[i][a - 1] })
        .sum()
}

/// Bucket totals `Σ_b size_b · aux_b(arm_b)` computed from the raw aggregates,
/// with flagged buckets contributing their reference-arm value (0 if missing).
fn bucket_aux_total(buckets: &BucketSet, arms: &[usize], reference_arm: usize) -> f64 {
    buckets
        .buckets
        .iter()
        .zip(arms)
        .map(|(b, &a)| {
            let flagged = b.aux_means.iter().any(Option::is_none);
            let arm = if flagged { reference_arm } else { a };
            b.members.len() as f64 * b.aux_means[arm].unwrap_or(0.0)
        })
        .sum()
}

/// Independent check that a bucket-level solution meets the floor and that
/// the expanded policy gives every member its bucket's arm.
pub fn bucket_solution_ok(
    buckets: &BucketSet,
    arms: &[usize],
    policy: &Policy,
    epsilon: f64,
    reference_arm: usize,
) -> Result<(), String> {
    for (b, (bucket, &a)) in buckets.buckets.iter().zip(arms).enumerate() {
        if bucket.aux_means.iter().any(Option::is_none) && a != reference_arm {
            return Err(format!("flagged bucket {b} not pinned to the reference arm"));
        }
        for &m in &bucket.members {
            if policy.assignment()[m] != a {
                return Err(format!("member {m} of bucket {b} has arm {}", policy.assignment()[m]));
            }
        }
    }
    let got = bucket_aux_total(buckets, arms, reference_arm);
    let floor = (1.0 - epsilon) * bucket_aux_total(buckets, &vec![reference_arm; arms.len()], reference_arm);
    if got < floor - 1e-9 * floor.abs().max(1.0) {
        return Err(format!("aux total {got} below floor {floor}"));
    }
    Ok(())
}

/// Re-derives the uplift buckets of a binary dataset from first principles
/// (rank by τ̂ descending, ties by id, near-equal sizes) and checks the policy
/// against the ratio floor on the logged per-arm bucket means.
pub fn ratio_policy_ok(
    ds: &ExperimentDataset,
    est: &UpliftEstimates,
    policy: &Policy,
    n_groups: usize,
    aux: &str,
    epsilon: f64,
    reference_arm: usize,
) -> Result<(), String> {
    let col = ds.aux_names().iter().position(|a| a == aux).ok_or("aux missing")?;
    let ids = ds.ids();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by(|&a, &b| {
        est.rows()[b][0]
            .total_cmp(&est.rows()[a][0])
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    let (mut got, mut reference) = (0.0, 0.0);
    let mut start = 0;
    for size in equal_group_sizes(ds.len(), n_groups) {
        let members = &order[start..start + size];
        start += size;
        let arm = policy.assignment()[members[0]];
        if members.iter().any(|&m| policy.assignment()[m] != arm) {
            return Err("bucket members disagree on arm".into());
        }
        let mean = |a: usize| {
            let v: Vec<f64> = members
                .iter()
                .filter(|&&m| ds.records()[m].t == a)
                .map(|&m| ds.records()[m].aux[col])
                .collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        let (m0, m1) = (mean(0), mean(1));
        if (m0.is_none() || m1.is_none()) && arm != reference_arm {
            return Err("flagged bucket moved off the reference arm".into());
        }
        let means = [m0, m1];
        got += size as f64 * means[arm].unwrap_or(0.0);
        reference += size as f64 * means[reference_arm].unwrap_or(0.0);
    }
    let floor = (1.0 - epsilon) * reference;
    if got < floor - 1e-9 * floor.abs().max(1.0) {
        return Err(format!("aux total {got} below floor {floor}"));
    }
    Ok(())
}

/// Constraint check for budget and unconstrained specs.
pub fn simple_constraint_ok(p: &Policy, est: &UpliftEstimates, weights: &[f64], spec: &ConstraintSpec) -> Result<(), String> {
    match spec {
        ConstraintSpec::None => {
            for (i, &a) in p.assignment().iter().enumerate() {
                if a != 0 && weights[i] * est.rows()[i][a - 1] <= 0.0 {
                    return Err(format!("customer {i} treated without positive gain"));
                }
            }
            Ok(())
        }
        ConstraintSpec::Budget { caps } => {
            for (k, &cap) in caps.iter().enumerate() {
                let used = p.assignment().iter().filter(|&&a| a == k + 1).count();
                if used > cap {
                    return Err(format!("arm {} uses {used} > cap {cap}", k + 1));
                }
            }
            Ok(())
        }
        ConstraintSpec::RatioFloor { .. } => Err("use ratio_policy_ok".into()),
    }
}
