//! Synthetic randomized experiments with known structural response functions.
//!
//! Every generated dataset comes with a [`GroundTruth`] that evaluates the
//! noiseless conditional means `E[Y(t_k) | X = x]`, which gives exact CATE and
//! policy-value oracles for the estimators and optimizers in this crate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{CustomerRecord, ExperimentDataset, TreatmentSet, PRIMARY_OUTCOME};
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::uplift::UpliftEstimates;

/// Structural mean function of the covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Response {
    Constant {
        value: f64,
    },
    /// `intercept + Σ coefficients[j] * x[j]`; missing coefficients are zero.
    Linear {
        intercept: f64,
        #[serde(default)]
        coefficients: Vec<f64>,
    },
    /// Step function of one covariate: `levels[m]` where `m` counts the
    /// thresholds that are `<= x[feature]`.
    Piecewise {
        feature: usize,
        thresholds: Vec<f64>,
        levels: Vec<f64>,
    },
    /// `1 / (1 + exp(-(intercept + Σ coefficients[j] * x[j])))`.
    Logistic {
        intercept: f64,
        #[serde(default)]
        coefficients: Vec<f64>,
    },
    Sum {
        terms: Vec<Response>,
    },
}

impl Response {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let dot = |c: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        match self {
            Response::Constant { value } => *value,
            Response::Linear {
                intercept,
                coefficients,
            } => intercept + dot(coefficients),
            Response::Piecewise {
                feature,
                thresholds,
                levels,
            } => {
                let v = x[*feature];
                levels[thresholds.iter().take_while(|t| **t <= v).count()]
            }
            Response::Logistic {
                intercept,
                coefficients,
            } => 1.0 / (1.0 + (-(intercept + dot(coefficients))).exp()),
            Response::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    fn check(&self, d: usize) -> Result<()> {
        match self {
            Response::Constant { value } if !value.is_finite() => {
                Err(Error::Config("non-finite constant response".into()))
            }
            Response::Linear { coefficients, .. } | Response::Logistic { coefficients, .. }
                if coefficients.len() > d =>
            {
                Err(Error::Config(format!(
                    "{} coefficients for {d} covariates",
                    coefficients.len()
                )))
            }
            Response::Piecewise {
                feature,
                thresholds,
                levels,
            } => {
                if *feature >= d {
                    return Err(Error::Config(format!("piecewise feature {feature} >= d={d}")));
                }
                if levels.len() != thresholds.len() + 1 {
                    return Err(Error::Config(
                        "piecewise response needs one more level than thresholds".into(),
                    ));
                }
                if thresholds.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("piecewise thresholds must increase".into()));
                }
                Ok(())
            }
            Response::Sum { terms } => terms.iter().try_for_each(|t| t.check(d)),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    /// Gaussian noise around the mean.
    #[default]
    Real,
    /// Bernoulli draw with the mean clipped to `[0, 1]`.
    Binary,
}

/// Per-arm response functions for one outcome; `arms[0]` is control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    #[serde(default)]
    pub kind: OutcomeKind,
    pub arms: Vec<Response>,
}

impl OutcomeSpec {
    pub fn real(arms: Vec<Response>) -> Self {
        Self {
            kind: OutcomeKind::Real,
            arms,
        }
    }

    pub fn binary(arms: Vec<Response>) -> Self {
        Self {
            kind: OutcomeKind::Binary,
            arms,
        }
    }

    fn mean(&self, arm: usize, x: &[f64]) -> f64 {
        let m = self.arms[arm].eval(x);
        match self.kind {
            OutcomeKind::Real => m,
            OutcomeKind::Binary => m.clamp(0.0, 1.0),
        }
    }

    fn draw(&self, arm: usize, x: &[f64], noise_sd: f64, rng: &mut ChaCha8Rng) -> f64 {
        let m = self.mean(arm, x);
        match self.kind {
            OutcomeKind::Real if noise_sd > 0.0 => {
                m + Normal::new(0.0, noise_sd).expect("noise_sd checked").sample(rng)
            }
            OutcomeKind::Real => m,
            OutcomeKind::Binary => {
                if rng.random::<f64>() < m {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxSpec {
    pub name: String,
    #[serde(flatten)]
    pub outcome: OutcomeSpec,
    /// Falls back to the config-wide `noise_sd`.
    #[serde(default)]
    pub noise_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub d: usize,
    /// Non-control arm count `K`.
    pub k: usize,
    /// Arm labels, control first; defaults to `control, t1, ..., tK`.
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    /// Logging propensities; uniform when absent.
    #[serde(default)]
    pub propensities: Option<Vec<f64>>,
    pub outcome: OutcomeSpec,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub aux: Vec<AuxSpec>,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    /// Real-valued outcome, uniform propensities, no auxiliary outcomes.
    pub fn new(n: usize, d: usize, arms: Vec<Response>, noise_sd: f64, seed: u64) -> Self {
        Self {
            n,
            d,
            k: arms.len().saturating_sub(1),
            labels: None,
            propensities: None,
            outcome: OutcomeSpec::real(arms),
            noise_sd,
            aux: Vec::new(),
            seed,
        }
    }

    pub fn treatment_set(&self) -> Result<TreatmentSet> {
        let labels = self.labels.clone().unwrap_or_else(|| {
            std::iter::once("control".to_string())
                .chain((1..=self.k).map(|k| format!("t{k}")))
                .collect()
        });
        let set = match &self.propensities {
            Some(p) => TreatmentSet::new(labels, p.clone()),
            None => TreatmentSet::uniform(labels),
        };
        set.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("noise_sd must be finite and >= 0".into()));
        }
        let treatments = self.treatment_set()?;
        if treatments.n_arms() != self.k + 1 {
            return Err(Error::Config(format!(
                "{} labels for k={} treatments",
                treatments.n_arms(),
                self.k
            )));
        }
        let check = |name: &str, spec: &OutcomeSpec| -> Result<()> {
            if spec.arms.len() != self.k + 1 {
                return Err(Error::Config(format!(
                    "`{name}` has {} arm responses, expected {}",
                    spec.arms.len(),
                    self.k + 1
                )));
            }
            spec.arms.iter().try_for_each(|r| r.check(self.d))
        };
        check(PRIMARY_OUTCOME, &self.outcome)?;
        for a in &self.aux {
            check(&a.name, &a.outcome)?;
            if let Some(sd) = a.noise_sd {
                if !(sd >= 0.0 && sd.is_finite()) {
                    return Err(Error::Config(format!("`{}` noise_sd must be >= 0", a.name)));
                }
            }
        }
        Ok(())
    }
}

/// Noiseless conditional means of every generated outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    outcome: OutcomeSpec,
    aux: Vec<AuxSpec>,
}

impl GroundTruth {
    pub fn from_config(cfg: &SynthConfig) -> Self {
        Self {
            outcome: cfg.outcome.clone(),
            aux: cfg.aux.clone(),
        }
    }

    pub fn n_arms(&self) -> usize {
        self.outcome.arms.len()
    }

    /// `E[Y(t_arm) | X = x]` for the primary outcome.
    pub fn mean_outcome(&self, arm: usize, x: &[f64]) -> f64 {
        self.outcome.mean(arm, x)
    }

    pub fn mean_aux(&self, name: &str, arm: usize, x: &[f64]) -> Result<f64> {
        let spec = self
            .aux
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Argument(format!("unknown outcome `{name}`")))?;
        Ok(spec.outcome.mean(arm, x))
    }

    /// Mean of the primary outcome (`"outcome"`) or of a named auxiliary outcome.
    pub fn mean(&self, outcome: &str, arm: usize, x: &[f64]) -> Result<f64> {
        if outcome == PRIMARY_OUTCOME {
            Ok(self.mean_outcome(arm, x))
        } else {
            self.mean_aux(outcome, arm, x)
        }
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<(ExperimentDataset, GroundTruth)> {
    cfg.validate()?;
    let treatments = cfg.treatment_set()?;
    let gt = GroundTruth::from_config(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let width = cfg.n.to_string().len();
    let mut records = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let x: Vec<f64> = (0..cfg.d).map(|_| rng.random::<f64>()).collect();
        let (t, y, aux) = draw_logged(cfg, &treatments, &x, &mut rng);
        records.push(CustomerRecord {
            id: format!("c{i:0width$}"),
            x,
            t,
            y,
            aux,
        });
    }
    let ds = ExperimentDataset::new(
        treatments,
        (1..=cfg.d).map(|j| format!("x{j}")).collect(),
        cfg.aux.iter().map(|a| a.name.clone()).collect(),
        records,
    )?;
    Ok((ds, gt))
}

/// Re-runs the logging policy on the customers of `ds`: covariates and ids are
/// kept, treatments and outcomes are redrawn from a fresh seeded stream.
pub fn replay_logging(cfg: &SynthConfig, ds: &ExperimentDataset, seed: u64) -> Result<ExperimentDataset> {
    cfg.validate()?;
    if ds.n_features() != cfg.d {
        return Err(Error::Argument(format!(
            "dataset has {} covariates, config declares {}",
            ds.n_features(),
            cfg.d
        )));
    }
    let treatments = cfg.treatment_set()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = ds
        .records()
        .iter()
        .map(|r| {
            let (t, y, aux) = draw_logged(cfg, &treatments, &r.x, &mut rng);
            CustomerRecord {
                id: r.id.clone(),
                x: r.x.clone(),
                t,
                y,
                aux,
            }
        })
        .collect();
    ExperimentDataset::new(
        treatments,
        ds.feature_names().to_vec(),
        cfg.aux.iter().map(|a| a.name.clone()).collect(),
        records,
    )
}

fn draw_logged(
    cfg: &SynthConfig,
    treatments: &TreatmentSet,
    x: &[f64],
    rng: &mut ChaCha8Rng,
) -> (usize, f64, Vec<f64>) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut t = treatments.n_arms() - 1;
    for (k, p) in treatments.propensities().iter().enumerate() {
        acc += p;
        if u < acc {
            t = k;
            break;
        }
    }
    let y = cfg.outcome.draw(t, x, cfg.noise_sd, rng);
    let aux = cfg
        .aux
        .iter()
        .map(|a| a.outcome.draw(t, x, a.noise_sd.unwrap_or(cfg.noise_sd), rng))
        .collect();
    (t, y, aux)
}

/// `E[Y(t_arm) | x] - E[Y(t_0) | x]`.
pub fn true_cate(gt: &GroundTruth, arm: usize, x: &[f64]) -> Result<f64> {
    if arm == 0 {
        return Err(Error::Argument("control arm has no CATE".into()));
    }
    if arm >= gt.n_arms() {
        return Err(Error::Argument(format!("arm {arm} out of range")));
    }
    Ok(gt.mean_outcome(arm, x) - gt.mean_outcome(0, x))
}

/// True CATE of every record for every non-control arm.
pub fn true_estimates(gt: &GroundTruth, ds: &ExperimentDataset) -> Result<UpliftEstimates> {
    let rows = ds
        .records()
        .iter()
        .map(|r| (1..gt.n_arms()).map(|k| true_cate(gt, k, &r.x)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    UpliftEstimates::new(ds.ids(), rows)
}

/// Exact expected per-customer outcome under `policy`:
/// `(1/N) Σ_i E[Z(assigned arm) | x_i]`.
pub fn true_policy_value(
    gt: &GroundTruth,
    ds: &ExperimentDataset,
    policy: &Policy,
    outcome: &str,
) -> Result<f64> {
    policy.check_aligned(ds)?;
    if ds.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    let mut total = 0.0;
    for (r, &arm) in ds.records().iter().zip(policy.assignment()) {
        total += gt.mean(outcome, arm, &r.x)?;
    }
    Ok(total / ds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_cfg(n: usize, noise: f64, seed: u64) -> SynthConfig {
        SynthConfig::new(
            n,
            1,
            vec![
                Response::Constant { value: 0.0 },
                Response::Piecewise {
                    feature: 0,
                    thresholds: vec![0.5],
                    levels: vec![2.0, 0.0],
                },
            ],
            noise,
            seed,
        )
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = step_cfg(1000, 0.3, 3);
        let (a, _) = generate(&cfg).unwrap();
        let (b, _) = generate(&cfg).unwrap();
        let mut wa = Vec::new();
        let mut wb = Vec::new();
        crate::dataset::to_writer(&a, &mut wa).unwrap();
        crate::dataset::to_writer(&b, &mut wb).unwrap();
        assert_eq!(wa, wb);
    }

    #[test]
    fn noiseless_linear_is_exact() {
        let cfg = SynthConfig::new(
            200,
            2,
            vec![
                Response::Linear {
                    intercept: 1.0,
                    coefficients: vec![2.0, -1.0],
                },
                Response::Linear {
                    intercept: 0.5,
                    coefficients: vec![0.0, 3.0],
                },
            ],
            0.0,
            11,
        );
        let (ds, gt) = generate(&cfg).unwrap();
        for r in ds.records() {
            assert_eq!(r.y, gt.mean_outcome(r.t, &r.x));
            assert!(r.x.iter().all(|v| (0.0..1.0).contains(v)));
        }
    }

    #[test]
    fn arm_counts_follow_propensities() {
        // Binomial(10000, 0.5): sigma = 50.
        let (ds, _) = generate(&step_cfg(10_000, 0.0, 5)).unwrap();
        let n0 = ds.arm_counts()[0] as f64;
        assert!((n0 - 5000.0).abs() <= 150.0, "n0 = {n0}");
    }

    #[test]
    fn true_cate_cases() {
        let same = GroundTruth::from_config(&SynthConfig::new(
            1,
            1,
            vec![
                Response::Linear {
                    intercept: 0.0,
                    coefficients: vec![1.0],
                },
                Response::Linear {
                    intercept: 0.0,
                    coefficients: vec![1.0],
                },
            ],
            0.0,
            0,
        ));
        assert_eq!(true_cate(&same, 1, &[0.37]).unwrap(), 0.0);

        let shifted = GroundTruth::from_config(&SynthConfig::new(
            1,
            1,
            vec![
                Response::Linear {
                    intercept: 0.0,
                    coefficients: vec![1.0],
                },
                Response::Linear {
                    intercept: 1.0,
                    coefficients: vec![1.0],
                },
            ],
            0.0,
            0,
        ));
        for x in [0.0, 0.25, 0.9] {
            assert!((true_cate(&shifted, 1, &[x]).unwrap() - 1.0).abs() < 1e-15);
        }

        let step = GroundTruth::from_config(&step_cfg(1, 0.0, 0));
        assert_eq!(true_cate(&step, 1, &[0.3]).unwrap(), 2.0);
        assert_eq!(true_cate(&step, 1, &[0.7]).unwrap(), 0.0);
        assert!(matches!(true_cate(&step, 0, &[0.3]), Err(Error::Argument(_))));
    }

    #[test]
    fn binary_means_are_clipped() {
        let spec = OutcomeSpec::binary(vec![Response::Constant { value: 1.7 }]);
        assert_eq!(spec.mean(0, &[0.1]), 1.0);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(generate(&step_cfg(0, 0.0, 0)), Err(Error::Config(_))));
        assert!(generate(&step_cfg(10, -1.0, 0)).is_err());
        let mut cfg = step_cfg(10, 0.0, 0);
        cfg.outcome.arms.pop();
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn replay_keeps_covariates() {
        let cfg = step_cfg(500, 0.1, 1);
        let (ds, _) = generate(&cfg).unwrap();
        let replay = replay_logging(&cfg, &ds, 99).unwrap();
        assert_eq!(ds.ids(), replay.ids());
        assert!(ds.records().iter().zip(replay.records()).all(|(a, b)| a.x == b.x));
        assert_ne!(ds.arm_counts(), vec![0, 0]);
        assert_ne!(
            ds.records().iter().map(|r| r.t).collect::<Vec<_>>(),
            replay.records().iter().map(|r| r.t).collect::<Vec<_>>()
        );
    }

    #[test]
    fn policy_value_cases() {
        let cfg = SynthConfig::new(
            2,
            1,
            vec![
                Response::Constant { value: 0.0 },
                Response::Linear {
                    intercept: 3.0,
                    coefficients: vec![0.0],
                },
            ],
            0.0,
            0,
        );
        let (mut ds, gt) = generate(&cfg).unwrap();
        // Pin arm-1 means to {3, 5} through the covariate.
        let cfg5 = Response::Linear {
            intercept: 3.0,
            coefficients: vec![2.0],
        };
        let gt5 = GroundTruth {
            outcome: OutcomeSpec::real(vec![Response::Constant { value: 0.0 }, cfg5]),
            aux: vec![],
        };
        let recs: Vec<CustomerRecord> = ds
            .records()
            .iter()
            .zip([0.0, 1.0])
            .map(|(r, x)| CustomerRecord {
                x: vec![x],
                ..r.clone()
            })
            .collect();
        ds = ExperimentDataset::new(ds.treatments().clone(), ds.feature_names().to_vec(), vec![], recs)
            .unwrap();
        let treat = Policy::constant(ds.ids(), 1, 2);
        assert_eq!(true_policy_value(&gt5, &ds, &treat, "outcome").unwrap(), 4.0);
        let control = Policy::constant(ds.ids(), 0, 2);
        assert_eq!(true_policy_value(&gt, &ds, &control, "outcome").unwrap(), 0.0);
        let short = Policy::constant(vec!["c0".into()], 0, 2);
        assert!(true_policy_value(&gt, &ds, &short, "outcome").is_err());
    }
}
