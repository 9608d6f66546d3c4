//! Stage one: CATE estimation and ranking diagnostics.
//!
//! Learners live in [`learners`], the tree base learner in [`tree`]. This
//! module holds the estimate matrix, the cumulative uplift curve with its AUC,
//! and the per-bucket difference-in-means diagnostic.

pub mod learners;
pub mod tree;

use std::cmp::Ordering;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ExperimentDataset;
use crate::error::{Error, Result};

pub use learners::{
    fit, fit_s_learner, fit_t_learner, fit_x_learner, predict_cate, CateModel, LearnerKind,
};
pub use tree::{fit_tree, Forest, RegressionTree, TreeParams};

/// `N × K` matrix of `τ̂_k(x_i)`, rows aligned to customer ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftEstimates {
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl UpliftEstimates {
    pub fn new(ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Argument(format!("{} ids but {} rows", ids.len(), rows.len())));
        }
        if let Some(first) = rows.first() {
            if first.is_empty() || rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::Argument("estimate rows must share a nonzero width".into()));
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Argument("uplift estimates must be finite".into()));
        }
        Ok(Self { ids, rows })
    }

    /// Single non-control arm.
    pub fn binary(ids: Vec<String>, values: &[f64]) -> Result<Self> {
        Self::new(ids, values.iter().map(|&v| vec![v]).collect())
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of non-control arms `K` (0 for an empty matrix).
    pub fn k(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// `τ̂_arm` for every customer, `arm` in `1..=K`.
    pub fn arm(&self, arm: usize) -> Result<Vec<f64>> {
        if arm == 0 || arm > self.k() {
            return Err(Error::Argument(format!("arm {arm} outside 1..={}", self.k())));
        }
        Ok(self.rows.iter().map(|r| r[arm - 1]).collect())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            ids: self.ids.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|v| v * factor).collect())
                .collect(),
        }
    }

    pub fn check_aligned(&self, ds: &ExperimentDataset) -> Result<()> {
        if self.ids.len() != ds.len() || self.ids.iter().zip(ds.records()).any(|(a, r)| *a != r.id) {
            return Err(Error::Argument("uplift estimates are not aligned to the dataset ids".into()));
        }
        Ok(())
    }
}

/// Estimates drawn i.i.d. uniform on `[0, 1)`; ranking by them is a seeded
/// random ranking.
pub fn random_estimates(ids: Vec<String>, k: usize, seed: u64) -> UpliftEstimates {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = ids.iter().map(|_| (0..k).map(|_| rng.random::<f64>()).collect()).collect();
    UpliftEstimates { ids, rows }
}

/// Record indices ordered by `scores` descending, ties by ascending id.
pub fn rank_descending(scores: &[f64], ids: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| ids[a].cmp(&ids[b])));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub rank: usize,
    pub fraction: f64,
    pub value: f64,
    /// The prefix lacked treated or control records; `value` is then 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftCurve {
    pub arm: usize,
    pub points: Vec<CurvePoint>,
    /// Record indices in ranked order.
    pub order: Vec<usize>,
}

impl UpliftCurve {
    pub fn last(&self) -> Option<&CurvePoint> {
        self.points.last()
    }

    /// CSV with columns `rank,fraction,value,undefined_flag`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["rank", "fraction", "value", "undefined_flag"])?;
        for p in &self.points {
            w.write_record([
                p.rank.to_string(),
                p.fraction.to_string(),
                p.value.to_string(),
                (p.undefined as u8).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<curve csv>", e))?;
        Ok(())
    }
}

/// Cumulative uplift of arm `arm` against control.
///
/// Customers are ranked by `τ̂_arm` (descending, ties by id). The point at
/// rank `r` treats the top-`r` prefix: it is the mean outcome of prefix records
/// logged in `arm` minus the mean of prefix records logged in control, scaled
/// by `r / N`. Records logged in other arms are ranked but do not enter either
/// mean.
pub fn cumulative_uplift_curve(
    eval: &ExperimentDataset,
    est: &UpliftEstimates,
    arm: usize,
) -> Result<UpliftCurve> {
    est.check_aligned(eval)?;
    let scores = est.arm(arm)?;
    let counts = eval.arm_counts();
    if counts[0] == 0 || counts[arm] == 0 {
        return Err(Error::Argument(format!(
            "uplift curve needs records in control and arm {arm}"
        )));
    }
    let order = rank_descending(&scores, est.ids());
    let n = eval.len() as f64;
    let (mut sum_t, mut n_t, mut sum_c, mut n_c) = (0.0, 0usize, 0.0, 0usize);
    let mut points = Vec::with_capacity(order.len());
    for (pos, &i) in order.iter().enumerate() {
        let rec = &eval.records()[i];
        if rec.t == arm {
            sum_t += rec.y;
            n_t += 1;
        } else if rec.t == 0 {
            sum_c += rec.y;
            n_c += 1;
        }
        let r = pos + 1;
        let fraction = r as f64 / n;
        let (value, undefined) = if n_t == 0 || n_c == 0 {
            (0.0, true)
        } else {
            ((sum_t / n_t as f64 - sum_c / n_c as f64) * fraction, false)
        };
        points.push(CurvePoint {
            rank: r,
            fraction,
            value,
            undefined,
        });
    }
    Ok(UpliftCurve { arm, points, order })
}

/// Trapezoidal area under `(r/N, value_r)` with an implicit origin.
pub fn uplift_auc(curve: &UpliftCurve) -> f64 {
    let mut area = 0.0;
    let (mut px, mut py) = (0.0, 0.0);
    for p in &curve.points {
        area += (p.fraction - px) * (p.value + py) / 2.0;
        px = p.fraction;
        py = p.value;
    }
    area
}

/// Mean and standard deviation of the AUC under random rankings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullBand {
    pub mean: f64,
    pub sd: f64,
    pub permutations: usize,
}

/// AUC distribution of `permutations` seeded random rankings of `eval`.
pub fn permutation_null(
    eval: &ExperimentDataset,
    arm: usize,
    permutations: usize,
    seed: u64,
) -> Result<NullBand> {
    if permutations < 2 {
        return Err(Error::Argument("need at least two permutations".into()));
    }
    let k = eval.n_arms() - 1;
    let aucs = (0..permutations)
        .map(|p| {
            let est = random_estimates(eval.ids(), k, seed.wrapping_add(p as u64));
            cumulative_uplift_curve(eval, &est, arm).map(|c| uplift_auc(&c))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
    let var = aucs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (aucs.len() - 1) as f64;
    Ok(NullBand {
        mean,
        sd: var.sqrt(),
        permutations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketUplift {
    pub bucket: usize,
    pub score_min: f64,
    pub score_max: f64,
    pub size: usize,
    pub n_treated: usize,
    pub n_control: usize,
    /// Treated mean minus control mean; 0 when `undefined`.
    pub value: f64,
    pub undefined: bool,
}

/// Sizes of `groups` near-equal consecutive groups over `n` items; the
/// remainder goes one-per-group from the first group.
pub fn equal_group_sizes(n: usize, groups: usize) -> Vec<usize> {
    let (base, rem) = (n / groups, n % groups);
    (0..groups).map(|g| base + usize::from(g < rem)).collect()
}

/// Difference-in-means uplift of `arm` vs. control inside equal-size buckets
/// of customers sorted by `score` ascending (ties by id).
pub fn bucket_true_uplift(
    ds: &ExperimentDataset,
    score: &[f64],
    n_buckets: usize,
    arm: usize,
) -> Result<Vec<BucketUplift>> {
    if score.len() != ds.len() {
        return Err(Error::Argument("score vector is not aligned to the dataset".into()));
    }
    if n_buckets == 0 || n_buckets > ds.len() {
        return Err(Error::Argument(format!(
            "n_buckets must lie in 1..={}, got {n_buckets}",
            ds.len()
        )));
    }
    if arm == 0 || arm >= ds.n_arms() {
        return Err(Error::Argument(format!("arm {arm} is not a treatment arm")));
    }
    let counts = ds.arm_counts();
    if counts[0] == 0 || counts[arm] == 0 {
        return Err(Error::Argument(format!("need records in control and arm {arm}")));
    }
    let ids = ds.ids();
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.sort_by(|&a, &b| match score[a].total_cmp(&score[b]) {
        Ordering::Equal => ids[a].cmp(&ids[b]),
        o => o,
    });

    let mut out = Vec::with_capacity(n_buckets);
    let mut start = 0;
    for (b, size) in equal_group_sizes(ds.len(), n_buckets).into_iter().enumerate() {
        let members = &order[start..start + size];
        start += size;
        let (mut st, mut nt, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
        for &i in members {
            let r = &ds.records()[i];
            if r.t == arm {
                st += r.y;
                nt += 1;
            } else if r.t == 0 {
                sc += r.y;
                nc += 1;
            }
        }
        let undefined = nt == 0 || nc == 0;
        out.push(BucketUplift {
            bucket: b,
            score_min: score[members[0]],
            score_max: score[members[size - 1]],
            size,
            n_treated: nt,
            n_control: nc,
            value: if undefined { 0.0 } else { st / nt as f64 - sc / nc as f64 },
            undefined,
        });
    }
    Ok(out)
}
