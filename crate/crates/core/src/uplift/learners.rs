//! S-, T- and X-learner CATE estimators over the tree base learner.

use serde::{Deserialize, Serialize};

use super::tree::{Forest, TreeParams};
use super::UpliftEstimates;
use crate::dataset::{ExperimentDataset, TreatmentSet};
use crate::error::{Error, Result};

/// Version tag written into serialized models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LearnerKind {
    #[serde(rename = "s-learner")]
    S,
    #[serde(rename = "t-learner")]
    T,
    #[serde(rename = "x-learner")]
    X,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::S => "s-learner",
            LearnerKind::T => "t-learner",
            LearnerKind::X => "x-learner",
        }
    }
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s" | "s-learner" => Ok(LearnerKind::S),
            "t" | "t-learner" => Ok(LearnerKind::T),
            "x" | "x-learner" => Ok(LearnerKind::X),
            other => Err(Error::Config(format!("unknown estimator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "recipe", rename_all = "snake_case")]
enum Fitted {
    /// One model on covariates plus `K` treatment indicator columns.
    Single { model: Forest },
    /// One outcome model per arm, control first.
    PerArm { arms: Vec<Forest> },
    /// Second-stage effect models; the final estimate is
    /// `weight * control_side + (1 - weight) * treated_side`.
    Imputed {
        control_side: Forest,
        treated_side: Forest,
        weight: f64,
    },
}

/// Fitted stage-one estimator producing `τ̂_k(x)` for every non-control arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CateModel {
    format_version: u32,
    kind: LearnerKind,
    /// Base learner actually used, recorded in reports.
    base_learner: String,
    treatments: TreatmentSet,
    feature_names: Vec<String>,
    params: TreeParams,
    fitted: Fitted,
}

impl CateModel {
    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn treatments(&self) -> &TreatmentSet {
        &self.treatments
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn base_learner(&self) -> &str {
        &self.base_learner
    }

    /// Number of non-control arms `K`.
    pub fn n_effects(&self) -> usize {
        self.treatments.n_arms() - 1
    }

    /// `τ̂_arm(x)` for `arm` in `1..=K`.
    pub fn effect(&self, arm: usize, x: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Single { model } => {
                let k = self.n_effects();
                let mut row = Vec::with_capacity(x.len() + k);
                row.extend_from_slice(x);
                row.extend(std::iter::repeat_n(0.0, k));
                let base = model.predict(&row);
                row[x.len() + arm - 1] = 1.0;
                model.predict(&row) - base
            }
            Fitted::PerArm { arms } => arms[arm].predict(x) - arms[0].predict(x),
            Fitted::Imputed {
                control_side,
                treated_side,
                weight,
            } => weight * control_side.predict(x) + (1.0 - weight) * treated_side.predict(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Unsupported(format!(
                "model format version {} (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        Ok(model)
    }
}

fn base_learner_name(params: &TreeParams) -> String {
    if params.n_trees > 1 {
        format!(
            "bagged regression trees (n_trees={}, max_depth={}, min_leaf_size={})",
            params.n_trees, params.max_depth, params.min_leaf_size
        )
    } else {
        format!(
            "regression tree (max_depth={}, min_leaf_size={})",
            params.max_depth, params.min_leaf_size
        )
    }
}

fn rows_by_arm(ds: &ExperimentDataset) -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut out = vec![(Vec::new(), Vec::new()); ds.n_arms()];
    for r in ds.records() {
        out[r.t].0.push(r.x.clone());
        out[r.t].1.push(r.y);
    }
    out
}

fn model(kind: LearnerKind, ds: &ExperimentDataset, params: &TreeParams, fitted: Fitted) -> CateModel {
    CateModel {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        base_learner: base_learner_name(params),
        treatments: ds.treatments().clone(),
        feature_names: ds.feature_names().to_vec(),
        params: *params,
        fitted,
    }
}

fn fit_error(arm: usize, ds: &ExperimentDataset, what: &str) -> Error {
    Error::Fit(format!("arm {arm} (`{}`) {what}", ds.treatments().labels()[arm]))
}

/// One model on covariates plus treatment indicators;
/// `τ̂_k(x) = f(x, arm k) - f(x, control)`.
pub fn fit_s_learner(train: &ExperimentDataset, params: &TreeParams) -> Result<CateModel> {
    for (arm, n) in train.arm_counts().into_iter().enumerate() {
        if n == 0 {
            return Err(fit_error(arm, train, "has no records"));
        }
    }
    let k = train.n_arms() - 1;
    let xs: Vec<Vec<f64>> = train
        .records()
        .iter()
        .map(|r| {
            let mut row = r.x.clone();
            row.extend((1..=k).map(|a| if r.t == a { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    let ys: Vec<f64> = train.records().iter().map(|r| r.y).collect();
    let forest = Forest::fit(&xs, &ys, params)?;
    Ok(model(LearnerKind::S, train, params, Fitted::Single { model: forest }))
}

/// One model per arm; `τ̂_k(x) = f_k(x) - f_0(x)`.
pub fn fit_t_learner(train: &ExperimentDataset, params: &TreeParams) -> Result<CateModel> {
    let arms = fit_arm_models(train, params)?;
    Ok(model(LearnerKind::T, train, params, Fitted::PerArm { arms }))
}

fn fit_arm_models(train: &ExperimentDataset, params: &TreeParams) -> Result<Vec<Forest>> {
    let min = params.min_leaf_size.max(1);
    rows_by_arm(train)
        .into_iter()
        .enumerate()
        .map(|(arm, (xs, ys))| {
            if xs.len() < min {
                return Err(fit_error(
                    arm,
                    train,
                    &format!("has {} records, fewer than min_leaf_size {min}", xs.len()),
                ));
            }
            Forest::fit(&xs, &ys, params)
        })
        .collect()
}

/// Binary-treatment X-learner.
///
/// Stage one fits per-arm outcome models `μ_0`, `μ_1`. Imputed effects are
/// `Y - μ_0(x)` on treated rows and `μ_1(x) - Y` on control rows; a second-stage
/// model is fitted to each. The two effect models are blended with the known
/// treated-arm logging propensity `e`: `τ̂ = e · τ̂_control + (1 - e) · τ̂_treated`.
pub fn fit_x_learner(train: &ExperimentDataset, params: &TreeParams) -> Result<CateModel> {
    if train.n_arms() != 2 {
        return Err(Error::Unsupported(format!(
            "x-learner needs exactly 2 arms, dataset has {}",
            train.n_arms()
        )));
    }
    let stage_one = fit_arm_models(train, params)?;
    let by_arm = rows_by_arm(train);
    let (x0, y0) = &by_arm[0];
    let (x1, y1) = &by_arm[1];
    let d_control: Vec<f64> = x0.iter().zip(y0).map(|(x, y)| stage_one[1].predict(x) - y).collect();
    let d_treated: Vec<f64> = x1.iter().zip(y1).map(|(x, y)| y - stage_one[0].predict(x)).collect();
    let control_side = Forest::fit(x0, &d_control, params)?;
    let treated_side = Forest::fit(x1, &d_treated, params)?;
    Ok(model(
        LearnerKind::X,
        train,
        params,
        Fitted::Imputed {
            control_side,
            treated_side,
            weight: train.treatments().propensity(1),
        },
    ))
}

pub fn fit(kind: LearnerKind, train: &ExperimentDataset, params: &TreeParams) -> Result<CateModel> {
    match kind {
        LearnerKind::S => fit_s_learner(train, params),
        LearnerKind::T => fit_t_learner(train, params),
        LearnerKind::X => fit_x_learner(train, params),
    }
}

/// `τ̂_k(x_i)` for every record of `ds`, aligned to record order.
pub fn predict_cate(model: &CateModel, ds: &ExperimentDataset) -> Result<UpliftEstimates> {
    if ds.n_features() != model.feature_names.len() {
        return Err(Error::Argument(format!(
            "dataset has {} covariates, model was fitted on {}",
            ds.n_features(),
            model.feature_names.len()
        )));
    }
    if ds.feature_names() != model.feature_names.as_slice() {
        return Err(Error::Argument(format!(
            "covariates {:?} do not match model covariates {:?}",
            ds.feature_names(),
            model.feature_names
        )));
    }
    if ds.n_arms() != model.treatments.n_arms() {
        return Err(Error::Argument(format!(
            "dataset has {} arms, model has {}",
            ds.n_arms(),
            model.treatments.n_arms()
        )));
    }
    let k = model.n_effects();
    let rows = ds
        .records()
        .iter()
        .map(|r| (1..=k).map(|a| model.effect(a, &r.x)).collect())
        .collect();
    UpliftEstimates::new(ds.ids(), rows)
}
