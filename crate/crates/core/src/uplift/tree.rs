//! Deterministic CART-style regression tree and a fixed-seed bagged ensemble.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf_size: usize,
    /// Trees in the bagged ensemble; `1` fits a single tree on all rows.
    pub n_trees: usize,
    /// Bootstrap seed, unused when `n_trees == 1`.
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 6,
            min_leaf_size: 20,
            n_trees: 1,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn new(max_depth: usize, min_leaf_size: usize) -> Self {
        Self {
            max_depth,
            min_leaf_size,
            ..Self::default()
        }
    }

    fn min_leaf(&self) -> usize {
        self.min_leaf_size.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
enum Node {
    Leaf {
        value: f64,
        size: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary tree of axis-aligned splits; rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    n_features: usize,
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Training rows per leaf, in node order.
    pub fn leaf_sizes(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { size, .. } => Some(*size),
                _ => None,
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn check_inputs(features: &[Vec<f64>], targets: &[f64]) -> Result<usize> {
    if features.is_empty() {
        return Err(Error::Argument("cannot fit a tree on zero rows".into()));
    }
    if features.len() != targets.len() {
        return Err(Error::Argument(format!(
            "{} feature rows but {} targets",
            features.len(),
            targets.len()
        )));
    }
    let d = features[0].len();
    if features.iter().any(|r| r.len() != d) {
        return Err(Error::Argument("ragged feature matrix".into()));
    }
    if features.iter().flatten().chain(targets).any(|v| v.is_nan()) {
        return Err(Error::Argument("NaN in tree inputs".into()));
    }
    Ok(d)
}

/// Greedy variance-reduction tree.
///
/// Rows are first put in a canonical order (lexicographic on features, then
/// target), so the fitted tree does not depend on input row order. Among
/// equal-gain splits the lowest feature index wins, then the lowest threshold.
pub fn fit_tree(features: &[Vec<f64>], targets: &[f64], params: &TreeParams) -> Result<RegressionTree> {
    let d = check_inputs(features, targets)?;
    let min_leaf = params.min_leaf();
    if features.len() < min_leaf {
        return Err(Error::Argument(format!(
            "{} rows is fewer than min_leaf_size {}",
            features.len(),
            min_leaf
        )));
    }

    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| {
        features[a]
            .iter()
            .zip(&features[b])
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(targets[a].total_cmp(&targets[b]))
    });
    let xs: Vec<&[f64]> = order.iter().map(|&i| features[i].as_slice()).collect();
    let ys: Vec<f64> = order.iter().map(|&i| targets[i]).collect();

    // Per-feature row lists sorted by value; ties keep canonical order.
    let sorted: Vec<Vec<usize>> = (0..d)
        .map(|f| {
            let mut idx: Vec<usize> = (0..ys.len()).collect();
            idx.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]));
            idx
        })
        .collect();
    let rows: Vec<usize> = (0..ys.len()).collect();

    let mut builder = Builder {
        xs: &xs,
        ys: &ys,
        min_leaf,
        max_depth: params.max_depth,
        nodes: Vec::new(),
        side: vec![false; ys.len()],
    };
    builder.build(rows, sorted, 0);
    Ok(RegressionTree {
        n_features: d,
        nodes: builder.nodes,
    })
}

struct Builder<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [f64],
    min_leaf: usize,
    max_depth: usize,
    nodes: Vec<Node>,
    side: Vec<bool>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn build(&mut self, rows: Vec<usize>, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let sum: f64 = rows.iter().map(|&i| self.ys[i]).sum();
        let mean = sum / n as f64;
        self.nodes.push(Node::Leaf { value: mean, size: n });

        let first = self.ys[rows[0]];
        if depth >= self.max_depth
            || n < 2 * self.min_leaf
            || rows.iter().all(|&i| self.ys[i] == first)
        {
            return id;
        }
        let sse: f64 = rows.iter().map(|&i| (self.ys[i] - mean).powi(2)).sum();
        let Some(best) = self.best_split(&sorted, sum) else {
            return id;
        };
        if !(best.gain > 1e-12 * sse) {
            return id;
        }

        for &i in &rows {
            self.side[i] = self.xs[i][best.feature] <= best.threshold;
        }
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.side[i]);
        let (left_sorted, right_sorted): (Vec<Vec<usize>>, Vec<Vec<usize>>) = sorted
            .into_iter()
            .map(|list| list.into_iter().partition::<Vec<usize>, _>(|&i| self.side[i]))
            .unzip();

        let left = self.build(left_rows, left_sorted, depth + 1);
        let right = self.build(right_rows, right_sorted, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, sorted: &[Vec<usize>], total: f64) -> Option<Candidate> {
        let n = sorted[0].len();
        let base = total * total / n as f64;
        let mut best: Option<Candidate> = None;
        for (f, list) in sorted.iter().enumerate() {
            let mut left_sum = 0.0;
            for pos in 1..n {
                left_sum += self.ys[list[pos - 1]];
                let (lo, hi) = (self.xs[list[pos - 1]][f], self.xs[list[pos]][f]);
                if pos < self.min_leaf || n - pos < self.min_leaf || lo == hi {
                    continue;
                }
                let (nl, nr) = (pos as f64, (n - pos) as f64);
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl + right_sum * right_sum / nr - base;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Average of one or more regression trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<RegressionTree>,
}

impl Forest {
    pub fn fit(features: &[Vec<f64>], targets: &[f64], params: &TreeParams) -> Result<Self> {
        if params.n_trees <= 1 {
            return Ok(Self {
                trees: vec![fit_tree(features, targets, params)?],
            });
        }
        check_inputs(features, targets)?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let n = features.len();
        let trees = (0..params.n_trees)
            .map(|_| {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let xb: Vec<Vec<f64>> = idx.iter().map(|&i| features[i].clone()).collect();
                let yb: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
                fit_tree(&xb, &yb, params)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { trees })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        if let [tree] = self.trees.as_slice() {
            return tree.predict(x);
        }
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn n_features(&self) -> usize {
        self.trees[0].n_features()
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }
}
