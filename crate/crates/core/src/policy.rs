//! Stage two: turning uplift estimates into a treatment assignment.
//!
//! Objective: maximize `Σ_i w_i τ̂_{a_i}(x_i)` (control contributes 0) over
//! one-arm-per-customer assignments, optionally subject to per-arm budget caps
//! or to a floor on an auxiliary outcome (e.g. sales may not fall more than
//! `ε` below the all-reference-arm level). The floor version is solved on
//! equal-size buckets of customers ranked by predicted uplift.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::ExperimentDataset;
use crate::error::{Error, Result};
use crate::uplift::{equal_group_sizes, rank_descending, UpliftEstimates};

/// Largest search space the brute-force oracle will walk.
pub const BRUTE_FORCE_LIMIT: u64 = 1 << 20;

/// Dense encoding of the one-hot assignment matrix: one arm index per customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    ids: Vec<String>,
    assignment: Vec<usize>,
    weights: Vec<f64>,
    n_arms: usize,
}

impl Policy {
    pub fn new(ids: Vec<String>, assignment: Vec<usize>, n_arms: usize) -> Result<Self> {
        if ids.len() != assignment.len() {
            return Err(Error::Argument(format!(
                "{} ids but {} assignments",
                ids.len(),
                assignment.len()
            )));
        }
        if n_arms < 2 {
            return Err(Error::Argument("a policy needs at least two arms".into()));
        }
        if let Some(bad) = assignment.iter().find(|&&a| a >= n_arms) {
            return Err(Error::Argument(format!("arm {bad} outside 0..{n_arms}")));
        }
        let weights = vec![1.0; ids.len()];
        Ok(Self {
            ids,
            assignment,
            weights,
            n_arms,
        })
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.ids.len() {
            return Err(Error::Argument("weights are not aligned to the policy".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    /// Everyone gets `arm`.
    pub fn constant(ids: Vec<String>, arm: usize, n_arms: usize) -> Self {
        let n = ids.len();
        assert!(arm < n_arms, "arm {arm} outside 0..{n_arms}");
        Self {
            ids,
            assignment: vec![arm; n],
            weights: vec![1.0; n],
            n_arms,
        }
    }

    /// The logged assignment of `ds`.
    pub fn logged(ds: &ExperimentDataset) -> Self {
        Self {
            ids: ds.ids(),
            assignment: ds.records().iter().map(|r| r.t).collect(),
            weights: vec![1.0; ds.len()],
            n_arms: ds.n_arms(),
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn arm_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_arms];
        for &a in &self.assignment {
            c[a] += 1;
        }
        c
    }

    /// Share of customers assigned a non-control arm.
    pub fn targeting_proportion(&self) -> f64 {
        if self.assignment.is_empty() {
            return 0.0;
        }
        self.assignment.iter().filter(|&&a| a != 0).count() as f64 / self.assignment.len() as f64
    }

    pub fn check_aligned(&self, ds: &ExperimentDataset) -> Result<()> {
        if self.n_arms != ds.n_arms() {
            return Err(Error::Argument(format!(
                "policy has {} arms, dataset has {}",
                self.n_arms,
                ds.n_arms()
            )));
        }
        let ds_ids = ds.ids();
        if self.ids == ds_ids {
            return Ok(());
        }
        let mine: HashSet<&String> = self.ids.iter().collect();
        let theirs: HashSet<&String> = ds_ids.iter().collect();
        let sample = |v: Vec<&String>| {
            let head: Vec<&str> = v.iter().take(5).map(|s| s.as_str()).collect();
            let more = v.len().saturating_sub(5);
            if more > 0 {
                format!("{} (+{more} more)", head.join(", "))
            } else {
                head.join(", ")
            }
        };
        let missing: Vec<&String> = ds_ids.iter().filter(|i| !mine.contains(i)).collect();
        let extra: Vec<&String> = self.ids.iter().filter(|i| !theirs.contains(i)).collect();
        let mut parts = Vec::new();
        if !extra.is_empty() {
            parts.push(format!("ids not in the dataset: {}", sample(extra)));
        }
        if !missing.is_empty() {
            parts.push(format!("dataset ids without an assignment: {}", sample(missing)));
        }
        if parts.is_empty() {
            let (p, r) = self
                .ids
                .iter()
                .zip(&ds_ids)
                .find(|(p, r)| p != r)
                .expect("ids differ");
            parts.push(format!("order differs: policy id `{p}` where the dataset has `{r}`"));
        }
        Err(Error::Argument(format!(
            "policy covers {} customers, dataset has {}; {}",
            self.ids.len(),
            ds.len(),
            parts.join("; ")
        )))
    }

    /// CSV with columns `id,arm`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["id", "arm"])?;
        for (id, a) in self.ids.iter().zip(&self.assignment) {
            w.write_record([id.as_str(), &a.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<policy csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, n_arms: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.into()))
        };
        let (id_col, arm_col) = (col("id")?, col("arm")?);
        let mut ids = Vec::new();
        let mut assignment = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            ids.push(row.get(id_col).unwrap_or("").to_string());
            let raw = row.get(arm_col).unwrap_or("");
            assignment.push(raw.trim().parse::<usize>().map_err(|_| Error::Parse {
                row: i + 1,
                column: "arm".into(),
                message: format!("`{raw}` is not an arm index"),
            })?);
        }
        Self::new(ids, assignment, n_arms).map_err(|e| Error::domain(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.write_csv(File::create(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn load(path: impl AsRef<Path>, n_arms: usize) -> Result<Self> {
        let path = path.as_ref();
        Self::read_csv(File::open(path).map_err(|e| Error::io(path, e))?, n_arms)
    }
}

/// Constraint families supported by the optimizers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSpec {
    None,
    /// `caps[k-1]` bounds the number of customers given arm `k`; control is uncapped.
    Budget { caps: Vec<usize> },
    /// The auxiliary outcome under the policy may not fall more than
    /// `epsilon` (relative) below its value when everyone gets `reference_arm`.
    RatioFloor {
        aux: String,
        epsilon: f64,
        reference_arm: usize,
    },
}

impl ConstraintSpec {
    pub fn validate(&self, n_arms: usize) -> Result<()> {
        match self {
            ConstraintSpec::None => Ok(()),
            ConstraintSpec::Budget { caps } if caps.len() != n_arms - 1 => Err(Error::Config(
                format!("{} budget caps for {} treatment arms", caps.len(), n_arms - 1),
            )),
            ConstraintSpec::Budget { .. } => Ok(()),
            ConstraintSpec::RatioFloor {
                epsilon,
                reference_arm,
                ..
            } => {
                if !(0.0..1.0).contains(epsilon) {
                    return Err(Error::Config(format!("epsilon must lie in [0, 1), got {epsilon}")));
                }
                if *reference_arm >= n_arms {
                    return Err(Error::Config(format!("reference arm {reference_arm} out of range")));
                }
                Ok(())
            }
        }
    }
}

fn check_weights(est: &UpliftEstimates, weights: &[f64]) -> Result<()> {
    if weights.len() != est.len() {
        return Err(Error::Argument(format!(
            "{} weights for {} customers",
            weights.len(),
            est.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Argument("weights must be finite".into()));
    }
    Ok(())
}

/// `w_i τ̂_{arm}(x_i)`, zero for control.
fn gain(est: &UpliftEstimates, weights: &[f64], i: usize, arm: usize) -> f64 {
    if arm == 0 {
        0.0
    } else {
        weights[i] * est.rows()[i][arm - 1]
    }
}

/// `Σ_i w_i τ̂_{a_i}(x_i)` with control contributing 0.
pub fn policy_objective(p: &Policy, est: &UpliftEstimates) -> Result<f64> {
    if p.ids() != est.ids() {
        return Err(Error::Argument("policy and estimates are not aligned".into()));
    }
    if p.n_arms() != est.k() + 1 && !est.is_empty() {
        return Err(Error::Argument("policy and estimates disagree on arm count".into()));
    }
    Ok((0..p.len()).map(|i| gain(est, p.weights(), i, p.assignment()[i])).sum())
}

/// Per customer, the arm with the largest `w_i τ̂_k` if it is strictly
/// positive, control otherwise. Ties between arms go to the lower index.
pub fn optimize_positive(est: &UpliftEstimates, weights: &[f64]) -> Result<Policy> {
    check_weights(est, weights)?;
    let assignment = (0..est.len())
        .map(|i| {
            let mut best = (0, 0.0);
            for arm in 1..=est.k() {
                let g = gain(est, weights, i, arm);
                if g > best.1 {
                    best = (arm, g);
                }
            }
            best.0
        })
        .collect();
    Policy::new(est.ids().to_vec(), assignment, est.k() + 1)?.with_weights(weights.to_vec())
}

/// Budget-capped assignment.
///
/// Candidate `(customer, arm)` pairs with positive gain are taken in order of
/// descending gain (ties by id, then arm) while the customer is unassigned and
/// the arm has capacity left. With one treatment arm this is the exact optimum:
/// the top `caps[0]` positive gains.
pub fn optimize_budget(est: &UpliftEstimates, weights: &[f64], caps: &[usize]) -> Result<Policy> {
    check_weights(est, weights)?;
    let k = est.k();
    if caps.len() != k {
        return Err(Error::Argument(format!("{} caps for {k} treatment arms", caps.len())));
    }
    let mut pairs: Vec<(usize, usize, f64)> = (0..est.len())
        .flat_map(|i| (1..=k).map(move |a| (i, a)))
        .map(|(i, a)| (i, a, gain(est, weights, i, a)))
        .filter(|p| p.2 > 0.0)
        .collect();
    let ids = est.ids();
    pairs.sort_by(|x, y| {
        y.2.total_cmp(&x.2)
            .then_with(|| ids[x.0].cmp(&ids[y.0]))
            .then(x.1.cmp(&y.1))
    });
    let mut left = caps.to_vec();
    let mut assignment = vec![0; est.len()];
    for (i, a, _) in pairs {
        if assignment[i] == 0 && left[a - 1] > 0 {
            assignment[i] = a;
            left[a - 1] -= 1;
        }
    }
    Policy::new(ids.to_vec(), assignment, k + 1)?.with_weights(weights.to_vec())
}

/// A group of customers treated as a single decision unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    /// Indices into [`BucketSet::ids`].
    pub members: Vec<usize>,
    pub mean_uplift: f64,
    /// Per-arm mean of the constrained outcome over members logged in that
    /// arm; `None` when no member was logged in the arm.
    pub aux_means: Vec<Option<f64>>,
    pub arm_counts: Vec<usize>,
}

impl Bucket {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Some arm has no logged members.
    pub fn is_flagged(&self) -> bool {
        self.aux_means.iter().any(Option::is_none)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSet {
    pub ids: Vec<String>,
    pub aux: String,
    pub buckets: Vec<Bucket>,
}

impl BucketSet {
    /// Builds a set directly from per-bucket aggregates; members get
    /// synthetic ids `b<bucket>-<j>`.
    pub fn from_aggregates(aux: &str, aggregates: &[(usize, f64, [Option<f64>; 2])]) -> Self {
        let mut ids = Vec::new();
        let buckets = aggregates
            .iter()
            .enumerate()
            .map(|(b, &(size, mean_uplift, means))| {
                let start = ids.len();
                ids.extend((0..size).map(|j| format!("b{b:04}-{j:06}")));
                Bucket {
                    members: (start..start + size).collect(),
                    mean_uplift,
                    aux_means: means.to_vec(),
                    arm_counts: means.iter().map(|m| if m.is_some() { size } else { 0 }).collect(),
                }
            })
            .collect();
        Self {
            ids,
            aux: aux.to_string(),
            buckets,
        }
    }

    pub fn len(&self) -> usize {
        self.buckets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buckets.is_empty()
    }

    /// Every member of bucket `b` receives `arms[b]`.
    pub fn expand(&self, arms: &[usize]) -> Result<Policy> {
        let mut assignment = vec![0; self.ids.len()];
        for (b, arm) in self.buckets.iter().zip(arms) {
            for &m in &b.members {
                assignment[m] = *arm;
            }
        }
        Policy::new(self.ids.clone(), assignment, 2)
    }

    /// Aux contribution of bucket `b` under `arm`. Flagged buckets always
    /// contribute their reference-arm aggregate (or nothing if that is missing).
    fn contribution(&self, b: usize, arm: usize, reference_arm: usize) -> f64 {
        let bucket = &self.buckets[b];
        let arm = if bucket.is_flagged() { reference_arm } else { arm };
        bucket.aux_means[arm].map_or(0.0, |m| bucket.size() as f64 * m)
    }

    fn value(&self, b: usize, arm: usize) -> f64 {
        if arm == 1 {
            self.buckets[b].size() as f64 * self.buckets[b].mean_uplift
        } else {
            0.0
        }
    }

    /// `Σ_b size_b · meanτ̂_b · [arm_b = 1]`.
    pub fn objective(&self, arms: &[usize]) -> f64 {
        (0..self.len()).map(|b| self.value(b, arms[b])).sum()
    }

    /// Aux total under `arms` minus `(1 - ε)` times the all-reference total.
    pub fn floor_slack(&self, arms: &[usize], epsilon: f64, reference_arm: usize) -> f64 {
        let (lhs, rhs) = self.floor_sides(arms, reference_arm);
        lhs - (1.0 - epsilon) * rhs
    }

    fn floor_sides(&self, arms: &[usize], reference_arm: usize) -> (f64, f64) {
        let lhs = (0..self.len())
            .map(|b| self.contribution(b, arms[b], reference_arm))
            .sum();
        let rhs = (0..self.len())
            .map(|b| self.contribution(b, reference_arm, reference_arm))
            .sum();
        (lhs, rhs)
    }
}

/// Groups customers into `n_groups` near-equal buckets by descending `τ̂`
/// (ties by id) and aggregates the logged `aux` outcome per arm.
pub fn bucketize(
    est: &UpliftEstimates,
    ds: &ExperimentDataset,
    n_groups: usize,
    aux: &str,
) -> Result<BucketSet> {
    est.check_aligned(ds)?;
    if ds.n_arms() != 2 {
        return Err(Error::Unsupported("bucketing needs a binary treatment".into()));
    }
    if n_groups == 0 || n_groups > ds.len() {
        return Err(Error::Argument(format!(
            "n_groups must lie in 1..={}, got {n_groups}",
            ds.len()
        )));
    }
    let values = ds.outcome_column(aux)?;
    let tau = est.arm(1)?;
    let order = rank_descending(&tau, est.ids());
    let mut start = 0;
    let buckets = equal_group_sizes(ds.len(), n_groups)
        .into_iter()
        .map(|size| {
            let mut members = order[start..start + size].to_vec();
            start += size;
            members.sort_unstable();
            let mean_uplift = members.iter().map(|&i| tau[i]).sum::<f64>() / size as f64;
            let mut sums = [0.0; 2];
            let mut counts = [0usize; 2];
            for &i in &members {
                let t = ds.records()[i].t;
                sums[t] += values[i];
                counts[t] += 1;
            }
            Bucket {
                members,
                mean_uplift,
                aux_means: (0..2)
                    .map(|a| (counts[a] > 0).then(|| sums[a] / counts[a] as f64))
                    .collect(),
                arm_counts: counts.to_vec(),
            }
        })
        .collect();
    Ok(BucketSet {
        ids: ds.ids(),
        aux: aux.to_string(),
        buckets,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    Argmax,
    Greedy,
    Enumeration,
    DynamicProgram,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioOptions {
    /// Knapsack weight unit as a fraction of the total aux swing.
    pub resolution: f64,
    /// Free buckets up to this count are solved by enumeration.
    pub enumeration_limit: usize,
}

impl Default for RatioOptions {
    fn default() -> Self {
        Self {
            resolution: 1e-3,
            enumeration_limit: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantization {
    pub resolution: f64,
    /// Aux units per knapsack cell.
    pub unit: f64,
    /// LP-relaxation bound on the bucket objective; the exact optimum lies
    /// between the reported objective and this value.
    pub objective_upper_bound: f64,
}

/// Summary written next to an optimized policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub constraint: ConstraintSpec,
    pub solver: SolverPath,
    pub objective: f64,
    pub targeting_proportion: f64,
    /// Budget: remaining capacity per treatment arm. Ratio floor: aux surplus
    /// over the floor. Empty when unconstrained.
    pub constraint_slack: Vec<f64>,
    pub quantization: Option<Quantization>,
    pub n_buckets: Option<usize>,
    pub flagged_buckets: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSolution {
    pub policy: Policy,
    pub bucket_arms: Vec<usize>,
    pub objective: f64,
    pub slack: f64,
    pub solver: SolverPath,
    pub quantization: Option<Quantization>,
}

/// Bucket-level assignment maximizing `Σ size·meanτ̂·x_b` subject to
/// `Σ size·aux(x_b) ≥ (1 - ε) Σ size·aux(reference)`.
///
/// Flagged buckets (an arm without logged members) are pinned to the
/// reference arm. The remaining buckets are solved by enumeration up to
/// `opts.enumeration_limit`, otherwise by a 0/1 knapsack dynamic program.
pub fn optimize_ratio_constrained(
    buckets: &BucketSet,
    epsilon: f64,
    reference_arm: usize,
    opts: &RatioOptions,
) -> Result<RatioSolution> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Argument(format!("epsilon must lie in [0, 1), got {epsilon}")));
    }
    if reference_arm > 1 {
        return Err(Error::Argument("reference arm must be 0 or 1".into()));
    }
    if buckets.buckets.iter().any(|b| b.aux_means.len() != 2) {
        return Err(Error::Unsupported("ratio floor needs a binary treatment".into()));
    }
    let reference = vec![reference_arm; buckets.len()];
    if buckets.floor_slack(&reference, epsilon, reference_arm) < 0.0 {
        return Err(Error::Infeasible(
            "the reference arm alone violates the floor (negative aux total)".into(),
        ));
    }
    let free: Vec<usize> = (0..buckets.len())
        .filter(|&b| !buckets.buckets[b].is_flagged())
        .collect();

    let (arms, solver, quantization) = if free.len() <= opts.enumeration_limit {
        (
            enumerate_buckets(buckets, &free, epsilon, reference_arm),
            SolverPath::Enumeration,
            None,
        )
    } else {
        let (arms, q) = knapsack_buckets(buckets, &free, epsilon, reference_arm, opts.resolution)?;
        (arms, SolverPath::DynamicProgram, Some(q))
    };
    let slack = buckets.floor_slack(&arms, epsilon, reference_arm);
    debug_assert!(slack >= 0.0);
    Ok(RatioSolution {
        policy: buckets.expand(&arms)?,
        objective: buckets.objective(&arms),
        bucket_arms: arms,
        slack,
        solver,
        quantization,
    })
}

fn enumerate_buckets(buckets: &BucketSet, free: &[usize], epsilon: f64, reference_arm: usize) -> Vec<usize> {
    let mut arms = vec![reference_arm; buckets.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let f = free.len();
    // Bucket free[0] is the most significant bit, so masks run in
    // lexicographic order of the assignment and the first maximum is kept.
    for mask in 0u64..(1u64 << f) {
        for (j, &b) in free.iter().enumerate() {
            arms[b] = ((mask >> (f - 1 - j)) & 1) as usize;
        }
        if buckets.floor_slack(&arms, epsilon, reference_arm) < 0.0 {
            continue;
        }
        let obj = buckets.objective(&arms);
        if best.as_ref().is_none_or(|(v, _)| obj > *v) {
            best = Some((obj, arms.clone()));
        }
    }
    best.map(|(_, a)| a).unwrap_or_else(|| vec![reference_arm; buckets.len()])
}

/// 0/1 knapsack over the free buckets.
///
/// Starting from the aux-maximizing arm per bucket, switching bucket `b` costs
/// `|Δaux_b|` of the available surplus and gains `Δvalue_b`. Cells index the
/// surplus used in units of `resolution · Σ cost`; each cell keeps the best
/// partial solution with its exact cost, and a transition is admitted only if
/// the exact cost fits, so returned solutions are always feasible.
fn knapsack_buckets(
    buckets: &BucketSet,
    free: &[usize],
    epsilon: f64,
    reference_arm: usize,
    resolution: f64,
) -> Result<(Vec<usize>, Quantization)> {
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(Error::Argument(format!("resolution must lie in (0, 1), got {resolution}")));
    }
    let mut arms = vec![reference_arm; buckets.len()];
    struct Item {
        bucket: usize,
        alt: usize,
        cost: f64,
        value: f64,
    }
    let mut items = Vec::new();
    for &b in free {
        let a0 = buckets.contribution(b, 0, reference_arm);
        let a1 = buckets.contribution(b, 1, reference_arm);
        let start = if a1 >= a0 { 1 } else { 0 };
        arms[b] = start;
        let alt = 1 - start;
        let value = buckets.value(b, alt) - buckets.value(b, start);
        if value > 0.0 {
            items.push(Item {
                bucket: b,
                alt,
                cost: (a1 - a0).abs(),
                value,
            });
        }
    }
    let capacity = buckets.floor_slack(&arms, epsilon, reference_arm);
    if capacity < 0.0 {
        return Err(Error::Infeasible("no bucket assignment meets the floor".into()));
    }

    // Fractional relaxation bound.
    let base_obj = buckets.objective(&arms);
    let mut by_ratio: Vec<&Item> = items.iter().collect();
    by_ratio.sort_by(|x, y| (y.value * x.cost).total_cmp(&(x.value * y.cost)));
    let mut room = capacity;
    let mut bound = base_obj;
    for it in &by_ratio {
        if it.cost <= room {
            room -= it.cost;
            bound += it.value;
        } else {
            bound += it.value * room / it.cost;
            break;
        }
    }

    let total_cost: f64 = items.iter().map(|i| i.cost).sum();
    let unit = resolution * total_cost;
    if total_cost <= capacity {
        for it in &items {
            arms[it.bucket] = it.alt;
        }
        return Ok((
            arms,
            Quantization {
                resolution,
                unit,
                objective_upper_bound: bound,
            },
        ));
    }

    let cells = (capacity / unit).floor() as usize + 1;
    let cell_of = |w: f64| ((w / unit).floor() as usize).min(cells - 1);
    // (value, exact cost) per cell; parents[j][c] = (previous cell, took item j).
    let mut table: Vec<Option<(f64, f64)>> = vec![None; cells];
    table[0] = Some((0.0, 0.0));
    let mut parents: Vec<Vec<(usize, bool)>> = Vec::with_capacity(items.len());
    for it in &items {
        let mut next = table.clone();
        let mut parent: Vec<(usize, bool)> = (0..cells).map(|c| (c, false)).collect();
        for c in 0..cells {
            let Some((v, w)) = table[c] else { continue };
            let w2 = w + it.cost;
            if w2 > capacity {
                continue;
            }
            let c2 = cell_of(w2);
            let cand = (v + it.value, w2);
            let better = match next[c2] {
                None => true,
                Some((bv, bw)) => cand.0 > bv || (cand.0 == bv && cand.1 < bw),
            };
            if better {
                next[c2] = Some(cand);
                parent[c2] = (c, true);
            }
        }
        table = next;
        parents.push(parent);
    }
    let mut best_cell = 0;
    for c in 1..cells {
        if let (Some((v, w)), Some((bv, bw))) = (table[c], table[best_cell]) {
            if v > bv || (v == bv && w < bw) {
                best_cell = c;
            }
        } else if table[best_cell].is_none() && table[c].is_some() {
            best_cell = c;
        }
    }
    let mut c = best_cell;
    for (j, it) in items.iter().enumerate().rev() {
        let (prev, took) = parents[j][c];
        if took {
            arms[it.bucket] = it.alt;
        }
        c = prev;
    }
    Ok((
        arms,
        Quantization {
            resolution,
            unit,
            objective_upper_bound: bound,
        },
    ))
}

/// Exhaustive search over all `(K+1)^N` assignments.
///
/// Budget caps count customers per arm. The ratio floor is evaluated at
/// customer level with the matched-record estimator: the mean `aux` over
/// customers whose logged arm equals their assigned arm must reach `(1 - ε)`
/// times the same mean under the constant reference-arm policy. Ties go to
/// the lexicographically smallest assignment.
pub fn brute_force_policy(
    est: &UpliftEstimates,
    ds: &ExperimentDataset,
    weights: &[f64],
    spec: &ConstraintSpec,
) -> Result<Policy> {
    est.check_aligned(ds)?;
    check_weights(est, weights)?;
    let n_arms = ds.n_arms();
    spec.validate(n_arms)?;
    let n = est.len();
    let space = (n_arms as u64).checked_pow(n as u32).filter(|&s| s <= BRUTE_FORCE_LIMIT);
    let Some(space) = space else {
        return Err(Error::Capacity(format!(
            "{n_arms}^{n} assignments exceed the brute-force limit of {BRUTE_FORCE_LIMIT}"
        )));
    };

    let ratio = match spec {
        ConstraintSpec::RatioFloor {
            aux,
            epsilon,
            reference_arm,
        } => {
            let values = ds.outcome_column(aux)?;
            let logged: Vec<usize> = ds.records().iter().map(|r| r.t).collect();
            let reference = matched_mean(&values, &logged, &vec![*reference_arm; n]);
            Some((values, logged, *epsilon, reference))
        }
        _ => None,
    };

    let mut assignment = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    for code in 0..space {
        let mut c = code;
        for slot in assignment.iter_mut().rev() {
            *slot = (c % n_arms as u64) as usize;
            c /= n_arms as u64;
        }
        let feasible = match spec {
            ConstraintSpec::None => true,
            ConstraintSpec::Budget { caps } => (1..n_arms)
                .all(|a| assignment.iter().filter(|&&x| x == a).count() <= caps[a - 1]),
            ConstraintSpec::RatioFloor { .. } => {
                let (values, logged, epsilon, reference) = ratio.as_ref().expect("set above");
                match (matched_mean(values, logged, &assignment), reference) {
                    (Some(m), Some(r)) => m >= (1.0 - epsilon) * r,
                    _ => false,
                }
            }
        };
        if !feasible {
            continue;
        }
        let obj: f64 = (0..n).map(|i| gain(est, weights, i, assignment[i])).sum();
        if best.as_ref().is_none_or(|(v, _)| obj > *v) {
            best = Some((obj, assignment.clone()));
        }
    }
    let (_, arms) = best.ok_or_else(|| Error::Infeasible("no assignment satisfies the constraint".into()))?;
    Policy::new(est.ids().to_vec(), arms, n_arms)?.with_weights(weights.to_vec())
}

fn matched_mean(values: &[f64], logged: &[usize], assigned: &[usize]) -> Option<f64> {
    let (mut s, mut n) = (0.0, 0usize);
    for i in 0..values.len() {
        if logged[i] == assigned[i] {
            s += values[i];
            n += 1;
        }
    }
    (n > 0).then(|| s / n as f64)
}

/// Exhaustive search over bucket assignments, bucket 0 varying slowest.
/// Independent oracle for [`optimize_ratio_constrained`].
pub fn brute_force_buckets(
    buckets: &BucketSet,
    epsilon: f64,
    reference_arm: usize,
) -> Result<Vec<usize>> {
    if buckets.len() > 20 {
        return Err(Error::Capacity(format!("{} buckets exceed 20", buckets.len())));
    }
    fn walk(
        buckets: &BucketSet,
        b: usize,
        arms: &mut Vec<usize>,
        epsilon: f64,
        reference_arm: usize,
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if b == buckets.len() {
            if buckets.floor_slack(arms, epsilon, reference_arm) >= 0.0 {
                let obj = buckets.objective(arms);
                if best.as_ref().is_none_or(|(v, _)| obj > *v) {
                    *best = Some((obj, arms.clone()));
                }
            }
            return;
        }
        let choices: &[usize] = if buckets.buckets[b].is_flagged() {
            &[reference_arm][..]
        } else {
            &[0, 1]
        };
        for &a in choices {
            arms.push(a);
            walk(buckets, b + 1, arms, epsilon, reference_arm, best);
            arms.pop();
        }
    }
    let mut best = None;
    walk(buckets, 0, &mut Vec::new(), epsilon, reference_arm, &mut best);
    best.map(|(_, a)| a)
        .ok_or_else(|| Error::Infeasible("no bucket assignment meets the floor".into()))
}

/// Result of [`optimize`]: the policy plus its report.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimized {
    pub policy: Policy,
    pub report: OptimizerReport,
}

/// Runs the optimizer matching `spec`. `n_groups` is used by the ratio floor.
pub fn optimize(
    est: &UpliftEstimates,
    ds: &ExperimentDataset,
    weights: &[f64],
    spec: &ConstraintSpec,
    n_groups: usize,
    opts: &RatioOptions,
) -> Result<Optimized> {
    est.check_aligned(ds)?;
    spec.validate(ds.n_arms())?;
    let mut report = OptimizerReport {
        constraint: spec.clone(),
        solver: SolverPath::Argmax,
        objective: 0.0,
        targeting_proportion: 0.0,
        constraint_slack: Vec::new(),
        quantization: None,
        n_buckets: None,
        flagged_buckets: None,
    };
    let policy = match spec {
        ConstraintSpec::None => optimize_positive(est, weights)?,
        ConstraintSpec::Budget { caps } => {
            let p = optimize_budget(est, weights, caps)?;
            let counts = p.arm_counts();
            report.solver = SolverPath::Greedy;
            report.constraint_slack = caps
                .iter()
                .enumerate()
                .map(|(k, &c)| c as f64 - counts[k + 1] as f64)
                .collect();
            p
        }
        ConstraintSpec::RatioFloor {
            aux,
            epsilon,
            reference_arm,
        } => {
            let buckets = bucketize(est, ds, n_groups, aux)?;
            let sol = optimize_ratio_constrained(&buckets, *epsilon, *reference_arm, opts)?;
            report.solver = sol.solver;
            report.constraint_slack = vec![sol.slack];
            report.quantization = sol.quantization;
            report.n_buckets = Some(buckets.len());
            report.flagged_buckets = Some(buckets.buckets.iter().filter(|b| b.is_flagged()).count());
            sol.policy.with_weights(weights.to_vec())?
        }
    };
    report.objective = policy_objective(&policy, est)?;
    report.targeting_proportion = policy.targeting_proportion();
    Ok(Optimized { policy, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CustomerRecord, TreatmentSet};

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("c{i:02}")).collect()
    }

    fn binary(values: &[f64]) -> UpliftEstimates {
        UpliftEstimates::binary(ids(values.len()), values).unwrap()
    }

    fn ds_for(n: usize, n_arms: usize) -> ExperimentDataset {
        let labels = (0..n_arms).map(|a| format!("arm{a}")).collect();
        let records = (0..n)
            .map(|i| CustomerRecord {
                id: format!("c{i:02}"),
                x: vec![0.0],
                t: i % n_arms,
                y: 0.0,
                aux: vec![],
            })
            .collect();
        ExperimentDataset::new(TreatmentSet::uniform(labels).unwrap(), vec!["x".into()], vec![], records)
            .unwrap()
    }

    #[test]
    fn objective_cases() {
        let est = binary(&[5.0, 3.0, -1.0]);
        let none = Policy::constant(ids(3), 0, 2);
        assert_eq!(policy_objective(&none, &est).unwrap(), 0.0);
        let all = Policy::constant(ids(3), 1, 2);
        assert_eq!(policy_objective(&all, &est).unwrap(), 7.0);
        let weighted = all.clone().with_weights(vec![2.0, 1.0, 1.0]).unwrap();
        assert_eq!(policy_objective(&weighted, &est).unwrap(), 12.0);
        let other = Policy::constant(vec!["x".into(), "y".into(), "z".into()], 1, 2);
        assert!(policy_objective(&other, &est).is_err());
    }

    #[test]
    fn positive_rule_is_strict() {
        let p = optimize_positive(&binary(&[2.0, -3.0, 0.0]), &[1.0; 3]).unwrap();
        assert_eq!(p.assignment(), &[1, 0, 0]);
        assert!((p.targeting_proportion() - 1.0 / 3.0).abs() < 1e-15);
        let p = optimize_positive(&binary(&[-1.0, -2.0]), &[1.0; 2]).unwrap();
        assert_eq!(p.targeting_proportion(), 0.0);
    }

    #[test]
    fn positive_rule_picks_best_arm() {
        let est = UpliftEstimates::new(ids(2), vec![vec![1.0, 4.0], vec![-1.0, -2.0]]).unwrap();
        let p = optimize_positive(&est, &[1.0; 2]).unwrap();
        assert_eq!(p.assignment(), &[2, 0]);
    }

    #[test]
    fn budget_cases() {
        let est = binary(&[5.0, 3.0, -1.0, 2.0]);
        let p = optimize_budget(&est, &[1.0; 4], &[2]).unwrap();
        assert_eq!(p.assignment(), &[1, 1, 0, 0]);
        let oracle = brute_force_policy(&est, &ds_for(4, 2), &[1.0; 4], &ConstraintSpec::Budget { caps: vec![2] })
            .unwrap();
        assert_eq!(oracle.assignment(), p.assignment());
        let zero = optimize_budget(&est, &[1.0; 4], &[0]).unwrap();
        assert_eq!(zero.targeting_proportion(), 0.0);
        let slack = optimize_budget(&est, &[1.0; 4], &[10]).unwrap();
        assert_eq!(slack, optimize_positive(&est, &[1.0; 4]).unwrap());
    }

    #[test]
    fn brute_force_unconstrained_matches_argmax() {
        let est = UpliftEstimates::new(
            ids(4),
            vec![vec![1.0, 4.0], vec![-1.0, -2.0], vec![0.5, 0.2], vec![0.0, -0.1]],
        )
        .unwrap();
        let bf = brute_force_policy(&est, &ds_for(4, 3), &[1.0; 4], &ConstraintSpec::None).unwrap();
        assert_eq!(bf, optimize_positive(&est, &[1.0; 4]).unwrap());
    }

    #[test]
    fn brute_force_capacity() {
        let est = binary(&[1.0; 21]);
        assert!(matches!(
            brute_force_policy(&est, &ds_for(21, 2), &[1.0; 21], &ConstraintSpec::None),
            Err(Error::Capacity(_))
        ));
    }

    fn two_buckets() -> BucketSet {
        BucketSet::from_aggregates(
            "sales",
            &[
                (10, 4.0, [Some(102.0), Some(100.0)]),
                (10, -1.0, [Some(95.0), Some(100.0)]),
            ],
        )
    }

    #[test]
    fn worked_ratio_instance_treats_both() {
        let buckets = two_buckets();
        let sol = optimize_ratio_constrained(&buckets, 0.01, 1, &RatioOptions::default()).unwrap();
        assert_eq!(sol.bucket_arms, vec![1, 1]);
        assert_eq!(sol.objective, 30.0);
        assert_eq!(brute_force_buckets(&buckets, 0.01, 1).unwrap(), vec![1, 1]);
        // Treating only the first bucket would score higher but break the floor.
        assert!(buckets.floor_slack(&[1, 0], 0.01, 1) < 0.0);
        assert_eq!(buckets.objective(&[1, 0]), 40.0);
        assert_eq!(sol.solver, SolverPath::Enumeration);
        assert!(sol.policy.assignment().iter().all(|&a| a == 1));
    }

    #[test]
    fn loose_floor_matches_bucket_positive_rule() {
        let buckets = two_buckets();
        let sol = optimize_ratio_constrained(&buckets, 0.5, 1, &RatioOptions::default()).unwrap();
        assert_eq!(sol.bucket_arms, vec![1, 0]);
    }

    #[test]
    fn negative_buckets_stay_in_control_when_floor_allows() {
        let buckets = BucketSet::from_aggregates(
            "sales",
            &[
                (5, -2.0, [Some(100.0), Some(100.0)]),
                (5, -1.0, [Some(99.5), Some(100.0)]),
            ],
        );
        let sol = optimize_ratio_constrained(&buckets, 0.01, 1, &RatioOptions::default()).unwrap();
        assert_eq!(sol.bucket_arms, vec![0, 0]);
        // A tighter floor forces the cheaper negative bucket back to the reference arm.
        let sol = optimize_ratio_constrained(&buckets, 0.001, 1, &RatioOptions::default()).unwrap();
        assert_eq!(sol.bucket_arms, vec![0, 1]);
    }

    #[test]
    fn flagged_bucket_takes_reference_arm() {
        let buckets = BucketSet::from_aggregates(
            "sales",
            &[(4, -5.0, [None, Some(100.0)]), (4, 1.0, [Some(100.0), Some(100.0)])],
        );
        let sol = optimize_ratio_constrained(&buckets, 0.01, 1, &RatioOptions::default()).unwrap();
        assert_eq!(sol.bucket_arms, vec![1, 1]);
    }

    #[test]
    fn dp_path_agrees_on_small_instance() {
        let buckets = two_buckets();
        let opts = RatioOptions {
            enumeration_limit: 0,
            ..RatioOptions::default()
        };
        let sol = optimize_ratio_constrained(&buckets, 0.01, 1, &opts).unwrap();
        assert_eq!(sol.solver, SolverPath::DynamicProgram);
        assert_eq!(sol.bucket_arms, vec![1, 1]);
        let q = sol.quantization.unwrap();
        assert!(q.objective_upper_bound >= sol.objective);
    }

    #[test]
    fn negative_aux_totals_are_infeasible() {
        let buckets = BucketSet::from_aggregates("sales", &[(2, 1.0, [Some(-5.0), Some(-4.0)])]);
        assert!(matches!(
            optimize_ratio_constrained(&buckets, 0.1, 1, &RatioOptions::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn bucketize_groups_by_uplift() {
        let mut ds = ds_for(4, 2);
        let records: Vec<CustomerRecord> = ds
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| CustomerRecord {
                aux: vec![100.0 + i as f64],
                ..r.clone()
            })
            .collect();
        ds = ExperimentDataset::new(ds.treatments().clone(), vec!["x".into()], vec!["sales".into()], records)
            .unwrap();
        let est = binary(&[4.0, 3.0, 2.0, 1.0]);
        let set = bucketize(&est, &ds, 2, "sales").unwrap();
        assert_eq!(set.buckets[0].members, vec![0, 1]);
        assert_eq!(set.buckets[0].mean_uplift, 3.5);
        assert_eq!(set.buckets[1].mean_uplift, 1.5);
        // c00 logged arm 0, c01 arm 1.
        assert_eq!(set.buckets[0].aux_means, vec![Some(100.0), Some(101.0)]);

        let whole = bucketize(&est, &ds, 1, "sales").unwrap();
        assert_eq!(whole.buckets[0].aux_means, vec![Some(101.0), Some(102.0)]);

        let single = bucketize(&est, &ds, 4, "sales").unwrap();
        assert!(single.buckets.iter().all(|b| b.size() == 1 && b.is_flagged()));
        assert!(bucketize(&est, &ds, 5, "sales").is_err());
    }

    #[test]
    fn policy_csv_round_trip() {
        let p = Policy::new(ids(3), vec![0, 2, 1], 3).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "id,arm\nc00,0\nc01,2\nc02,1\n");
        assert_eq!(Policy::read_csv(buf.as_slice(), 3).unwrap(), p);
        assert!(Policy::read_csv(buf.as_slice(), 2).is_err());
    }

    #[test]
    fn constraint_spec_validation() {
        assert!(ConstraintSpec::Budget { caps: vec![1, 2] }.validate(2).is_err());
        assert!(ConstraintSpec::RatioFloor {
            aux: "s".into(),
            epsilon: 1.0,
            reference_arm: 1
        }
        .validate(2)
        .is_err());
    }
}
