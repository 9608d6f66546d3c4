//! Config-driven runs: simulate → fit → optimize → evaluate → report.
//!
//! A single TOML file describes the data source, estimator, constraint,
//! evaluation outcomes and baselines. Each stage reads the previous stage's
//! artifacts from the output directory, so stages can be rerun independently.
//! Artifacts are CSV or JSON with LF line endings; identical config and seed
//! reproduce them byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{self, ExperimentDataset, Schema};
use crate::error::{Error, Result};
use crate::ope::{self, Direction, EfficiencySpec, PolicyEvalReport};
use crate::policy::{self, ConstraintSpec, OptimizerReport, Policy, RatioOptions};
use crate::synth::{self, GroundTruth, SynthConfig};
use crate::uplift::{self, CateModel, LearnerKind, NullBand, TreeParams};

pub const DATASET_FILE: &str = "dataset.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MODEL_FILE: &str = "model.json";
pub const CURVE_FILE: &str = "uplift_curve.csv";
pub const FIT_REPORT_FILE: &str = "fit_report.json";
pub const POLICY_FILE: &str = "policy.csv";
pub const OPTIMIZE_REPORT_FILE: &str = "optimize_report.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const LIFT_TABLE_FILE: &str = "lift_table.csv";
pub const POLICY_VALUES_FILE: &str = "policy_values.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub optimize: OptimizeConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Either a CSV file (with its schema) or a synthetic experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<Schema>,
    /// Synthetic source; its `seed` is replaced by the run seed.
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    /// Ground-truth manifest; defaults to `<out_dir>/manifest.json` when present.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub eval_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { eval_fraction: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub kind: LearnerKind,
    pub max_depth: usize,
    pub min_leaf_size: usize,
    pub n_trees: usize,
    /// Covariate subset, e.g. a single score; all covariates when absent.
    pub features: Option<Vec<String>>,
    /// Random rankings used for the AUC null band.
    pub null_permutations: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let p = TreeParams::default();
        Self {
            kind: LearnerKind::T,
            max_depth: p.max_depth,
            min_leaf_size: p.min_leaf_size,
            n_trees: p.n_trees,
            features: None,
            null_permutations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub constraint: ConstraintSpec,
    /// Bucket count for the ratio floor.
    pub groups: usize,
    pub resolution: f64,
    pub enumeration_limit: usize,
    /// Column (auxiliary outcome or covariate) holding customer weights.
    pub weights: Option<String>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let r = RatioOptions::default();
        Self {
            constraint: ConstraintSpec::None,
            groups: 100,
            resolution: r.resolution,
            enumeration_limit: r.enumeration_limit,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineConfig {
    Constant {
        name: String,
        arm: usize,
    },
    Threshold {
        name: String,
        feature: String,
        threshold: f64,
        direction: Direction,
        #[serde(default = "one")]
        arm: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub outcomes: Vec<String>,
    pub efficiency: Option<EfficiencySpec>,
    /// Defaults to "Targeting no one" plus one constant policy per treatment arm.
    pub baselines: Vec<BaselineConfig>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            outcomes: vec![dataset::PRIMARY_OUTCOME.to_string()],
            efficiency: None,
            baselines: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(p) = self.data.path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.data.manifest.as_mut() {
            fix(p);
        }
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.estimator.max_depth,
            min_leaf_size: self.estimator.min_leaf_size,
            n_trees: self.estimator.n_trees,
            seed: self.seed,
        }
    }

    fn synth_config(&self) -> Option<SynthConfig> {
        self.data.synth.clone().map(|mut s| {
            s.seed = self.seed;
            s
        })
    }

    fn out(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    fn manifest_path(&self) -> PathBuf {
        self.data.manifest.clone().unwrap_or_else(|| self.out(MANIFEST_FILE))
    }

    fn validate(&self) -> Result<()> {
        match (&self.data.path, &self.data.synth) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set either data.path or data.synth, not both".into()))
            }
            (None, None) => return Err(Error::Config("no data source configured".into())),
            (Some(p), None) if !p.exists() => {
                return Err(Error::Config(format!("data file {} does not exist", p.display())))
            }
            (Some(_), None) if self.data.schema.is_none() => {
                return Err(Error::Config("data.schema is required for a CSV source".into()))
            }
            _ => {}
        }
        if let Some(s) = &self.data.synth {
            s.validate()?;
        }
        if !(self.split.eval_fraction > 0.0 && self.split.eval_fraction < 1.0) {
            return Err(Error::Config("split.eval_fraction must lie in (0, 1)".into()));
        }
        if self.estimator.max_depth == 0 && self.estimator.min_leaf_size == 0 {
            return Err(Error::Config("estimator needs max_depth or min_leaf_size".into()));
        }
        Ok(())
    }
}

/// Written by `simulate`; lets later stages evaluate the synthetic oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub synth: SynthConfig,
    pub ground_truth: GroundTruth,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))
}

fn write_csv_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Writes the synthetic dataset and its ground-truth manifest.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let synth_cfg = cfg
        .synth_config()
        .ok_or_else(|| Error::Config("simulate needs a data.synth section".into()))?;
    let (ds, gt) = synth::generate(&synth_cfg)?;
    ensure_out_dir(cfg)?;
    dataset::write_experiment(&ds, cfg.out(DATASET_FILE))?;
    let manifest = Manifest {
        synth: synth_cfg,
        ground_truth: gt,
    };
    write_json(&cfg.out(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

/// The configured dataset: the CSV source, or the simulated `dataset.csv`.
pub fn load_dataset(cfg: &RunConfig) -> Result<ExperimentDataset> {
    cfg.validate()?;
    match (&cfg.data.path, cfg.synth_config()) {
        (Some(path), _) => {
            let schema = cfg.data.schema.as_ref().expect("validated");
            dataset::load_experiment(path, schema)
        }
        (None, Some(s)) => {
            let path = cfg.out(DATASET_FILE);
            if !path.exists() {
                return Err(Error::Config(format!(
                    "{} not found; run `simulate` first",
                    path.display()
                )));
            }
            let treatments = s.treatment_set()?;
            let schema = Schema {
                labels: treatments.labels().to_vec(),
                propensities: Some(treatments.propensities().to_vec()),
                ..Schema::default()
            };
            dataset::load_experiment(path, &schema)
        }
        (None, None) => unreachable!("validated"),
    }
}

/// Held-out customers used for fitting diagnostics, optimization and evaluation,
/// restricted to the configured covariates.
pub fn load_split(cfg: &RunConfig) -> Result<(ExperimentDataset, ExperimentDataset)> {
    let ds = load_dataset(cfg)?;
    let report = dataset::validate(&ds);
    if let Some(issue) = report.errors().next() {
        return Err(Error::domain(issue.message.clone()));
    }
    let (train, eval) = dataset::split(&ds, cfg.split.eval_fraction, cfg.seed)?;
    match &cfg.estimator.features {
        Some(f) => Ok((train.select_features(f)?, eval.select_features(f)?)),
        None => Ok((train, eval)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmDiagnostics {
    pub arm: usize,
    pub label: String,
    pub auc: f64,
    pub random_ranking_auc: f64,
    pub null_band: NullBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub estimator: String,
    pub base_learner: String,
    pub substitution_note: String,
    pub covariate_set: String,
    pub covariates: Vec<String>,
    pub n_train: usize,
    pub n_eval: usize,
    pub arms: Vec<ArmDiagnostics>,
}

/// Fits the configured estimator on the training split and scores its
/// uplift ranking on the eval split.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitReport> {
    let (train, eval) = load_split(cfg)?;
    let model = uplift::fit(cfg.estimator.kind, &train, &cfg.tree_params())?;
    let est = uplift::predict_cate(&model, &eval)?;
    ensure_out_dir(cfg)?;
    write_text(&cfg.out(MODEL_FILE), &(model.to_json()? + "\n"))?;

    let mut arms = Vec::new();
    for arm in 1..eval.n_arms() {
        let curve = uplift::cumulative_uplift_curve(&eval, &est, arm)?;
        let file = if arm == 1 {
            CURVE_FILE.to_string()
        } else {
            format!("uplift_curve_arm{arm}.csv")
        };
        write_csv_with(&cfg.out(&file), |b| curve.write_csv(b))?;
        let random = uplift::random_estimates(eval.ids(), eval.n_arms() - 1, cfg.seed);
        let random_curve = uplift::cumulative_uplift_curve(&eval, &random, arm)?;
        arms.push(ArmDiagnostics {
            arm,
            label: eval.treatments().labels()[arm].clone(),
            auc: uplift::uplift_auc(&curve),
            random_ranking_auc: uplift::uplift_auc(&random_curve),
            null_band: uplift::permutation_null(
                &eval,
                arm,
                cfg.estimator.null_permutations,
                cfg.seed.wrapping_add(1),
            )?,
        });
    }
    let report = FitReport {
        estimator: model.kind().name().to_string(),
        base_learner: model.base_learner().to_string(),
        substitution_note: "meta-learner over in-crate regression trees; forest-based DR, causal forest and DML estimators are not provided".into(),
        covariate_set: match &cfg.estimator.features {
            Some(f) => format!("selected covariates ({})", f.join(", ")),
            None => "all covariates".into(),
        },
        covariates: eval.feature_names().to_vec(),
        n_train: train.len(),
        n_eval: eval.len(),
        arms,
    };
    write_json(&cfg.out(FIT_REPORT_FILE), &report)?;
    Ok(report)
}

fn load_model(cfg: &RunConfig, model_path: Option<&Path>) -> Result<CateModel> {
    let path = model_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.out(MODEL_FILE));
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("model {}: {e}", path.display())))?;
    CateModel::from_json(&text)
}

fn weights(cfg: &RunConfig, eval: &ExperimentDataset) -> Result<Vec<f64>> {
    match &cfg.optimize.weights {
        None => Ok(vec![1.0; eval.len()]),
        Some(name) => eval
            .outcome_column(name)
            .or_else(|_| eval.feature_column(name))
            .map_err(|_| Error::Config(format!("weight column `{name}` not found"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeArtifact {
    #[serde(flatten)]
    pub report: OptimizerReport,
    /// Matched-record mean of the floor outcome under the policy and under
    /// the constant reference-arm policy (ratio floor only).
    pub floor_outcome_under_policy: Option<f64>,
    pub floor_outcome_under_reference: Option<f64>,
}

/// Optimizes the assignment of the eval customers from the fitted model.
pub fn cmd_optimize(cfg: &RunConfig, model_path: Option<&Path>) -> Result<OptimizeArtifact> {
    let (_, eval) = load_split(cfg)?;
    let model = load_model(cfg, model_path)?;
    let est = uplift::predict_cate(&model, &eval)?;
    let w = weights(cfg, &eval)?;
    let opts = RatioOptions {
        resolution: cfg.optimize.resolution,
        enumeration_limit: cfg.optimize.enumeration_limit,
    };
    let optimized = policy::optimize(
        &est,
        &eval,
        &w,
        &cfg.optimize.constraint,
        cfg.optimize.groups.min(eval.len()),
        &opts,
    )?;
    let (under_policy, under_reference) = match &cfg.optimize.constraint {
        ConstraintSpec::RatioFloor {
            aux, reference_arm, ..
        } => (
            ope::expected_sales_under_policy(&eval, &optimized.policy, aux)?,
            ope::expected_sales_under_policy(
                &eval,
                &Policy::constant(eval.ids(), *reference_arm, eval.n_arms()),
                aux,
            )?,
        ),
        _ => (None, None),
    };
    ensure_out_dir(cfg)?;
    optimized.policy.save(cfg.out(POLICY_FILE))?;
    let artifact = OptimizeArtifact {
        report: optimized.report,
        floor_outcome_under_policy: under_policy,
        floor_outcome_under_reference: under_reference,
    };
    write_json(&cfg.out(OPTIMIZE_REPORT_FILE), &artifact)?;
    Ok(artifact)
}

fn baselines(cfg: &RunConfig, eval: &ExperimentDataset, full_eval: &ExperimentDataset) -> Result<Vec<(String, Policy)>> {
    if cfg.evaluate.baselines.is_empty() {
        let mut out = vec![(
            "Targeting no one".to_string(),
            Policy::constant(eval.ids(), 0, eval.n_arms()),
        )];
        for arm in 1..eval.n_arms() {
            let name = if eval.n_arms() == 2 {
                "Targeting everyone".to_string()
            } else {
                format!("Only {}", eval.treatments().labels()[arm])
            };
            out.push((name, Policy::constant(eval.ids(), arm, eval.n_arms())));
        }
        return Ok(out);
    }
    cfg.evaluate
        .baselines
        .iter()
        .map(|b| match b {
            BaselineConfig::Constant { name, arm } => {
                if *arm >= eval.n_arms() {
                    return Err(Error::Config(format!("baseline `{name}`: arm {arm} out of range")));
                }
                Ok((name.clone(), Policy::constant(eval.ids(), *arm, eval.n_arms())))
            }
            BaselineConfig::Threshold {
                name,
                feature,
                threshold,
                direction,
                arm,
            } => {
                let score = full_eval
                    .feature_column(feature)
                    .map_err(|_| Error::Config(format!("baseline `{name}`: unknown feature `{feature}`")))?;
                Ok((
                    name.clone(),
                    ope::threshold_policy(eval, &score, *threshold, *direction, *arm)?,
                ))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueValue {
    pub policy: String,
    pub outcome: String,
    pub true_value: f64,
    pub ips: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    #[serde(flatten)]
    pub report: PolicyEvalReport,
    /// Oracle policy values beside the IPS estimates, for synthetic data.
    pub ground_truth: Option<Vec<TrueValue>>,
}

/// Evaluates the proposed policy (default `<out>/policy.csv`) and any extra
/// policy files against the configured baselines on the eval split.
pub fn cmd_evaluate(cfg: &RunConfig, policy_files: &[PathBuf]) -> Result<EvaluationArtifact> {
    let (_, eval) = load_split(cfg)?;
    let full_eval = {
        let ds = load_dataset(cfg)?;
        dataset::split(&ds, cfg.split.eval_fraction, cfg.seed)?.1
    };
    let default_policy = [cfg.out(POLICY_FILE)];
    let files: &[PathBuf] = if policy_files.is_empty() {
        &default_policy
    } else {
        policy_files
    };
    let load = |path: &Path| -> Result<Policy> {
        let p = Policy::load(path, eval.n_arms())
            .map_err(|e| Error::Config(format!("policy {}: {e}", path.display())))?;
        p.check_aligned(&eval).map_err(|e| {
            let msg = match e {
                Error::Argument(m) => m,
                other => other.to_string(),
            };
            Error::domain(format!("policy {} is not aligned to the eval split: {msg}", path.display()))
        })?;
        Ok(p)
    };
    let proposed = load(&files[0])?;
    let mut base = baselines(cfg, &eval, &full_eval)?;
    for path in &files[1..] {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        base.push((name, load(path)?));
    }
    let report = ope::lift_report(
        &eval,
        &proposed,
        &base,
        &cfg.evaluate.outcomes,
        cfg.evaluate.efficiency.as_ref(),
    )?;

    let manifest_path = cfg.manifest_path();
    let ground_truth = if manifest_path.exists() && cfg.data.synth.is_some() || cfg.data.manifest.is_some() {
        let manifest: Manifest = read_json(&manifest_path)?;
        let mut rows = Vec::new();
        for (name, p) in std::iter::once(("proposed".to_string(), &proposed)).chain(base.iter().map(|(n, p)| (n.clone(), p))) {
            for outcome in &cfg.evaluate.outcomes {
                rows.push(TrueValue {
                    policy: name.clone(),
                    outcome: outcome.clone(),
                    true_value: synth::true_policy_value(&manifest.ground_truth, &full_eval, p, outcome)?,
                    ips: ope::ips(&eval, p, outcome)?,
                });
            }
        }
        Some(rows)
    } else {
        None
    };

    ensure_out_dir(cfg)?;
    write_csv_with(&cfg.out(LIFT_TABLE_FILE), |b| report.write_lift_csv(b))?;
    write_csv_with(&cfg.out(POLICY_VALUES_FILE), |b| report.write_values_csv(b))?;
    let artifact = EvaluationArtifact {
        report,
        ground_truth,
    };
    write_json(&cfg.out(EVALUATION_FILE), &artifact)?;
    Ok(artifact)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |x| format!("{:.3}%", 100.0 * x))
}

/// Renders the fit, optimizer and evaluation artifacts as plain-text tables.
pub fn cmd_report(cfg: &RunConfig) -> Result<String> {
    let mut out = String::new();
    let fit: Option<FitReport> = cfg.out(FIT_REPORT_FILE).exists().then(|| read_json(&cfg.out(FIT_REPORT_FILE))).transpose()?;
    let opt: Option<OptimizeArtifact> = cfg
        .out(OPTIMIZE_REPORT_FILE)
        .exists()
        .then(|| read_json(&cfg.out(OPTIMIZE_REPORT_FILE)))
        .transpose()?;
    let eval: EvaluationArtifact = read_json(&cfg.out(EVALUATION_FILE))
        .map_err(|e| Error::Config(format!("{}: {e}; run `evaluate` first", EVALUATION_FILE)))?;

    if let Some(fit) = fit {
        out.push_str(&format!(
            "Estimator: {} over {} [{}]\n",
            fit.estimator, fit.base_learner, fit.covariate_set
        ));
        for a in &fit.arms {
            out.push_str(&format!(
                "  arm {} ({}): AUC {:.6}, random ranking {:.6}, null {:.6} ± {:.6}\n",
                a.arm, a.label, a.auc, a.random_ranking_auc, a.null_band.mean, a.null_band.sd
            ));
        }
    }
    if let Some(opt) = opt {
        out.push_str(&format!(
            "Optimizer: {:?}, objective {:.6}, targeting proportion {:.4}\n",
            opt.report.solver, opt.report.objective, opt.report.targeting_proportion
        ));
    }
    out.push_str("\nRelative lift of the proposed policy over baseline policies\n");
    let outcomes: Vec<&str> = eval.report.proposed.outcomes.iter().map(|o| o.outcome.as_str()).collect();
    let mut header = format!("{:<32}{:>12}", "Baseline", "Targeting");
    for o in &outcomes {
        header.push_str(&format!("{:>16}{:>16}", format!("{o} IPS"), format!("{o} SNIPS")));
    }
    if eval.report.proposed.e_pct_is.is_some() {
        header.push_str(&format!("{:>14}", "e%iS"));
    }
    out.push_str(&header);
    out.push('\n');
    for (cmp, base) in eval.report.comparisons.iter().zip(&eval.report.baselines) {
        let mut line = format!("{:<32}{:>12.4}", cmp.baseline, base.targeting_proportion);
        for l in &cmp.lifts {
            line.push_str(&format!("{:>16}{:>16}", pct(l.ips.value), pct(l.snips.value)));
        }
        if let Some(e) = cmp.e_pct_is {
            line.push_str(&format!("{:>14}", pct(e.value)));
        }
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(&format!(
        "{:<32}{:>12.4}\n",
        "(proposed)", eval.report.proposed.targeting_proportion
    ));
    if let Some(gt) = &eval.ground_truth {
        out.push_str("\nGround truth (synthetic oracle)\n");
        for row in gt {
            out.push_str(&format!(
                "  {:<30} {:<12} true {:>12.6}  ips {:>12.6}\n",
                row.policy, row.outcome, row.true_value, row.ips
            ));
        }
    }
    ensure_out_dir(cfg)?;
    write_text(&cfg.out(SUMMARY_FILE), &out)?;
    Ok(out)
}

/// Every stage in order; `simulate` runs only for synthetic sources.
pub fn cmd_run(cfg: &RunConfig) -> Result<String> {
    if cfg.data.synth.is_some() {
        cmd_simulate(cfg)?;
    }
    cmd_fit(cfg)?;
    cmd_optimize(cfg, None)?;
    cmd_evaluate(cfg, &[])?;
    cmd_report(cfg)
}
