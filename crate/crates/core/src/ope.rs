//! Offline policy evaluation against logged randomized data.
//!
//! A customer "matches" a policy when the arm the policy assigns equals the arm
//! the logging policy actually drew. IPS reweights matched outcomes by the
//! inverse logging propensity and averages over all customers; SNIPS divides
//! by the sum of the same weights instead. Undefined quantities (no matches,
//! zero denominators) are `None`, never a sentinel number.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::ExperimentDataset;
use crate::error::{Error, Result};
use crate::policy::Policy;

struct Matched {
    weighted_sum: f64,
    weight_total: f64,
    plain_sum: f64,
    count: usize,
}

fn matched(ds: &ExperimentDataset, p: &Policy, outcome: &str) -> Result<Matched> {
    p.check_aligned(ds)?;
    let z = ds.outcome_column(outcome)?;
    let props = ds.treatments().propensities();
    let mut m = Matched {
        weighted_sum: 0.0,
        weight_total: 0.0,
        plain_sum: 0.0,
        count: 0,
    };
    for ((r, &arm), z) in ds.records().iter().zip(p.assignment()).zip(z) {
        if arm == r.t {
            let w = 1.0 / props[r.t];
            m.weighted_sum += z * w;
            m.weight_total += w;
            m.plain_sum += z;
            m.count += 1;
        }
    }
    Ok(m)
}

/// `(1/N) Σ_i Z_i · 1{π(i) = T_i} / p_{T_i}`.
pub fn ips(ds: &ExperimentDataset, p: &Policy, outcome: &str) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Argument("IPS of an empty dataset".into()));
    }
    Ok(matched(ds, p, outcome)?.weighted_sum / ds.len() as f64)
}

/// `Σ_matched Z_i / p_{T_i}  /  Σ_matched 1 / p_{T_i}`; `None` without matches.
pub fn snips(ds: &ExperimentDataset, p: &Policy, outcome: &str) -> Result<Option<f64>> {
    let m = matched(ds, p, outcome)?;
    Ok((m.count > 0).then(|| m.weighted_sum / m.weight_total))
}

pub fn match_count(ds: &ExperimentDataset, p: &Policy) -> Result<usize> {
    p.check_aligned(ds)?;
    Ok(ds
        .records()
        .iter()
        .zip(p.assignment())
        .filter(|(r, &a)| r.t == a)
        .count())
}

/// Plain mean of `outcome` over matched customers; `None` without matches.
///
/// Applied to the constant reference-arm policy this is the reference level
/// used by the sales floor.
pub fn expected_sales_under_policy(
    ds: &ExperimentDataset,
    p: &Policy,
    outcome: &str,
) -> Result<Option<f64>> {
    let m = matched(ds, p, outcome)?;
    Ok((m.count > 0).then(|| m.plain_sum / m.count as f64))
}

/// Reward expense per unit of incremental sales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRatio {
    pub value: Option<f64>,
    /// Matched sales fell below the baseline.
    pub negative_denominator: bool,
}

/// `mean(rewards) / (mean(sales) - baseline_sales)` over matched customers.
///
/// `baseline_sales` is the counterfactual no-campaign level and has to come
/// from the caller.
pub fn e_pct_is(
    ds: &ExperimentDataset,
    p: &Policy,
    sales: &str,
    rewards: &str,
    baseline_sales: f64,
) -> Result<EfficiencyRatio> {
    let s = expected_sales_under_policy(ds, p, sales)?;
    let r = expected_sales_under_policy(ds, p, rewards)?;
    let (Some(s), Some(r)) = (s, r) else {
        return Ok(EfficiencyRatio {
            value: None,
            negative_denominator: false,
        });
    };
    let denom = s - baseline_sales;
    Ok(EfficiencyRatio {
        value: (denom != 0.0).then(|| r / denom),
        negative_denominator: denom < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Below,
    Above,
}

/// Gives `arm` to customers with `score < threshold` (below) or
/// `score > threshold` (above), control to everyone else.
pub fn threshold_policy(
    ds: &ExperimentDataset,
    score: &[f64],
    threshold: f64,
    direction: Direction,
    arm: usize,
) -> Result<Policy> {
    if score.len() != ds.len() {
        return Err(Error::Argument("score vector is not aligned to the dataset".into()));
    }
    let assignment = score
        .iter()
        .map(|&s| {
            let hit = match direction {
                Direction::Below => s < threshold,
                Direction::Above => s > threshold,
            };
            if hit {
                arm
            } else {
                0
            }
        })
        .collect();
    Policy::new(ds.ids(), assignment, ds.n_arms())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEstimate {
    pub outcome: String,
    pub ips: f64,
    pub snips: Option<f64>,
    pub match_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub name: String,
    pub targeting_proportion: f64,
    pub outcomes: Vec<OutcomeEstimate>,
    pub e_pct_is: Option<EfficiencyRatio>,
}

/// Relative change `(proposed - baseline) / |baseline|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lift {
    pub value: Option<f64>,
    /// Baseline was exactly 0, so `value` is the absolute difference.
    pub absolute: bool,
}

impl Lift {
    pub fn between(proposed: Option<f64>, baseline: Option<f64>) -> Self {
        match (proposed, baseline) {
            (Some(p), Some(b)) if b == 0.0 => Lift {
                value: Some(p - b),
                absolute: true,
            },
            (Some(p), Some(b)) => Lift {
                value: Some((p - b) / b.abs()),
                absolute: false,
            },
            _ => Lift {
                value: None,
                absolute: false,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricLift {
    pub outcome: String,
    pub ips: Lift,
    pub snips: Lift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub baseline: String,
    pub lifts: Vec<MetricLift>,
    pub e_pct_is: Option<Lift>,
}

/// Sales/rewards columns and counterfactual baseline for the efficiency ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySpec {
    pub sales: String,
    pub rewards: String,
    pub baseline_sales: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvalReport {
    pub proposed: PolicySummary,
    pub baselines: Vec<PolicySummary>,
    pub comparisons: Vec<BaselineComparison>,
}

pub fn summarize(
    ds: &ExperimentDataset,
    name: &str,
    p: &Policy,
    outcomes: &[String],
    efficiency: Option<&EfficiencySpec>,
) -> Result<PolicySummary> {
    let outcomes = outcomes
        .iter()
        .map(|o| {
            Ok(OutcomeEstimate {
                outcome: o.clone(),
                ips: ips(ds, p, o)?,
                snips: snips(ds, p, o)?,
                match_count: match_count(ds, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let e_pct_is = efficiency
        .map(|e| e_pct_is(ds, p, &e.sales, &e.rewards, e.baseline_sales))
        .transpose()?;
    Ok(PolicySummary {
        name: name.to_string(),
        targeting_proportion: p.targeting_proportion(),
        outcomes,
        e_pct_is,
    })
}

/// IPS/SNIPS estimates of `proposed` and each baseline, with the relative lift
/// of `proposed` over every baseline per outcome (and per e%iS when configured).
pub fn lift_report(
    ds: &ExperimentDataset,
    proposed: &Policy,
    baselines: &[(String, Policy)],
    outcomes: &[String],
    efficiency: Option<&EfficiencySpec>,
) -> Result<PolicyEvalReport> {
    let prop = summarize(ds, "proposed", proposed, outcomes, efficiency)?;
    let mut summaries = Vec::new();
    let mut comparisons = Vec::new();
    for (name, p) in baselines {
        let base = summarize(ds, name, p, outcomes, efficiency)?;
        let lifts = prop
            .outcomes
            .iter()
            .zip(&base.outcomes)
            .map(|(a, b)| MetricLift {
                outcome: a.outcome.clone(),
                ips: Lift::between(Some(a.ips), Some(b.ips)),
                snips: Lift::between(a.snips, b.snips),
            })
            .collect();
        let e_lift = match (&prop.e_pct_is, &base.e_pct_is) {
            (Some(a), Some(b)) => Some(Lift::between(a.value, b.value)),
            _ => None,
        };
        comparisons.push(BaselineComparison {
            baseline: name.clone(),
            lifts,
            e_pct_is: e_lift,
        });
        summaries.push(base);
    }
    Ok(PolicyEvalReport {
        proposed: prop,
        baselines: summaries,
        comparisons,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

impl PolicyEvalReport {
    /// Lift table: one row per baseline, IPS/SNIPS lift columns per outcome,
    /// then the e%iS lift. Absolute-difference cells are listed in `notes`.
    pub fn write_lift_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec!["baseline".to_string(), "targeting_proportion".into()];
        for o in &self.proposed.outcomes {
            header.push(format!("{}_ips_lift", o.outcome));
            header.push(format!("{}_snips_lift", o.outcome));
        }
        let with_eff = self.proposed.e_pct_is.is_some();
        if with_eff {
            header.push("e_pct_is_lift".into());
        }
        header.push("notes".into());
        w.write_record(&header)?;
        for (cmp, base) in self.comparisons.iter().zip(&self.baselines) {
            let mut row = vec![cmp.baseline.clone(), base.targeting_proportion.to_string()];
            let mut notes = Vec::new();
            for l in &cmp.lifts {
                row.push(cell(l.ips.value));
                row.push(cell(l.snips.value));
                if l.ips.absolute {
                    notes.push(format!("{}_ips:absolute", l.outcome));
                }
                if l.snips.absolute {
                    notes.push(format!("{}_snips:absolute", l.outcome));
                }
            }
            if with_eff {
                let l = cmp.e_pct_is.unwrap_or(Lift {
                    value: None,
                    absolute: false,
                });
                row.push(cell(l.value));
                if l.absolute {
                    notes.push("e_pct_is:absolute".into());
                }
            }
            row.push(notes.join(";"));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<lift csv>", e))?;
        Ok(())
    }

    /// One row per policy: targeting proportion and IPS/SNIPS per outcome.
    pub fn write_values_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let mut header = vec!["policy".to_string(), "targeting_proportion".into()];
        for o in &self.proposed.outcomes {
            header.push(format!("{}_ips", o.outcome));
            header.push(format!("{}_snips", o.outcome));
            header.push(format!("{}_matches", o.outcome));
        }
        if self.proposed.e_pct_is.is_some() {
            header.push("e_pct_is".into());
        }
        w.write_record(&header)?;
        for s in std::iter::once(&self.proposed).chain(&self.baselines) {
            let mut row = vec![s.name.clone(), s.targeting_proportion.to_string()];
            for o in &s.outcomes {
                row.push(o.ips.to_string());
                row.push(cell(o.snips));
                row.push(o.match_count.to_string());
            }
            if let Some(e) = &s.e_pct_is {
                row.push(cell(e.value));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<values csv>", e))?;
        Ok(())
    }
}
