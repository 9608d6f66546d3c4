//! Experiment-log data model: treatments, customer records, CSV ingestion,
//! validation and stratified train/eval splitting.
//!
//! CSV layout: `id`, `treatment` and `outcome` columns are required (names can
//! be remapped through [`Schema`]); columns prefixed `aux:` carry auxiliary
//! outcomes such as sales or rewards; every other column is a covariate.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name under which the primary outcome `y` is addressed by evaluators.
pub const PRIMARY_OUTCOME: &str = "outcome";

const PROPENSITY_TOL: f64 = 1e-9;

/// Ordered treatment arms; index 0 is the control arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSet {
    labels: Vec<String>,
    propensities: Vec<f64>,
}

impl TreatmentSet {
    pub fn new(labels: Vec<String>, propensities: Vec<f64>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::domain("a treatment set needs a control and at least one treatment"));
        }
        if propensities.len() != labels.len() {
            return Err(Error::domain(format!(
                "{} labels but {} propensities",
                labels.len(),
                propensities.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::domain(format!("duplicate treatment label `{label}`")));
            }
        }
        if propensities.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::domain("every propensity must be strictly positive"));
        }
        let total: f64 = propensities.iter().sum();
        if (total - 1.0).abs() > PROPENSITY_TOL {
            return Err(Error::domain(format!("propensities sum to {total}, expected 1")));
        }
        Ok(Self {
            labels,
            propensities,
        })
    }

    /// Uniform logging policy, `1/(K+1)` per arm.
    pub fn uniform(labels: Vec<String>) -> Result<Self> {
        let p = 1.0 / labels.len() as f64;
        let propensities = vec![p; labels.len()];
        Self::new(labels, propensities)
    }

    /// Number of arms including control (`K + 1`).
    pub fn n_arms(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn propensities(&self) -> &[f64] {
        &self.propensities
    }

    pub fn propensity(&self, arm: usize) -> f64 {
        self.propensities[arm]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerRecord {
    pub id: String,
    pub x: Vec<f64>,
    /// Logged treatment index.
    pub t: usize,
    pub y: f64,
    /// Auxiliary outcomes, aligned with [`ExperimentDataset::aux_names`].
    pub aux: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentDataset {
    treatments: TreatmentSet,
    feature_names: Vec<String>,
    aux_names: Vec<String>,
    records: Vec<CustomerRecord>,
}

impl ExperimentDataset {
    /// Builds a dataset, checking record shapes against the declared columns.
    ///
    /// Duplicate ids are accepted here and surfaced by [`validate`].
    pub fn new(
        treatments: TreatmentSet,
        feature_names: Vec<String>,
        aux_names: Vec<String>,
        records: Vec<CustomerRecord>,
    ) -> Result<Self> {
        if aux_names.iter().any(|a| a == PRIMARY_OUTCOME) {
            return Err(Error::domain(format!(
                "auxiliary outcome may not be named `{PRIMARY_OUTCOME}`"
            )));
        }
        for (i, r) in records.iter().enumerate() {
            let row = Some(i + 1);
            if r.x.len() != feature_names.len() {
                return Err(Error::Domain {
                    row,
                    message: format!(
                        "record `{}` has {} covariates, expected {}",
                        r.id,
                        r.x.len(),
                        feature_names.len()
                    ),
                });
            }
            if r.t >= treatments.n_arms() {
                return Err(Error::Domain {
                    row,
                    message: format!("record `{}` has treatment index {}", r.id, r.t),
                });
            }
            if r.aux.len() != aux_names.len() {
                return Err(Error::Domain {
                    row,
                    message: format!("record `{}` has {} auxiliary values", r.id, r.aux.len()),
                });
            }
        }
        Ok(Self {
            treatments,
            feature_names,
            aux_names,
            records,
        })
    }

    pub fn treatments(&self) -> &TreatmentSet {
        &self.treatments
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn aux_names(&self) -> &[String] {
        &self.aux_names
    }

    pub fn records(&self) -> &[CustomerRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Covariate dimension `d`.
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_arms(&self) -> usize {
        self.treatments.n_arms()
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    pub fn arm_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_arms()];
        for r in &self.records {
            counts[r.t] += 1;
        }
        counts
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// Values of one covariate column.
    pub fn feature_column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .feature_index(name)
            .ok_or_else(|| Error::Argument(format!("unknown feature `{name}`")))?;
        Ok(self.records.iter().map(|r| r.x[j]).collect())
    }

    /// Values of the primary outcome (`"outcome"`) or a named auxiliary outcome.
    pub fn outcome_column(&self, name: &str) -> Result<Vec<f64>> {
        if name == PRIMARY_OUTCOME {
            return Ok(self.records.iter().map(|r| r.y).collect());
        }
        let j = self
            .aux_names
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| Error::Argument(format!("unknown outcome `{name}`")))?;
        Ok(self.records.iter().map(|r| r.aux[j]).collect())
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            treatments: self.treatments.clone(),
            feature_names: self.feature_names.clone(),
            aux_names: self.aux_names.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    /// Restricts covariates to `names` (in that order), e.g. scores only vs. full features.
    pub fn select_features(&self, names: &[String]) -> Result<Self> {
        let cols = names
            .iter()
            .map(|n| {
                self.feature_index(n)
                    .ok_or_else(|| Error::Argument(format!("unknown feature `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let records = self
            .records
            .iter()
            .map(|r| CustomerRecord {
                x: cols.iter().map(|&j| r.x[j]).collect(),
                ..r.clone()
            })
            .collect();
        Ok(Self {
            treatments: self.treatments.clone(),
            feature_names: names.to_vec(),
            aux_names: self.aux_names.clone(),
            records,
        })
    }

    /// Replaces the logging propensities (labels must match).
    pub fn with_treatments(mut self, treatments: TreatmentSet) -> Result<Self> {
        if treatments.labels() != self.treatments.labels() {
            return Err(Error::domain("treatment labels differ"));
        }
        self.treatments = treatments;
        Ok(self)
    }
}

/// Column-role mapping used by [`load_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub id: String,
    pub treatment: String,
    pub outcome: String,
    pub aux_prefix: String,
    /// Explicit covariate columns; `None` means every remaining column.
    pub features: Option<Vec<String>>,
    /// Treatment labels in order, control first.
    pub labels: Vec<String>,
    /// Logging propensities; uniform when absent.
    pub propensities: Option<Vec<f64>>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            treatment: "treatment".into(),
            outcome: "outcome".into(),
            aux_prefix: "aux:".into(),
            features: None,
            labels: Vec::new(),
            propensities: None,
        }
    }
}

impl Schema {
    pub fn with_labels<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        Self {
            labels: labels.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    /// Schema that reproduces `ds` when reading the output of [`write_experiment`].
    pub fn for_dataset(ds: &ExperimentDataset) -> Self {
        Self {
            features: Some(ds.feature_names.clone()),
            labels: ds.treatments.labels.clone(),
            propensities: Some(ds.treatments.propensities.clone()),
            ..Self::default()
        }
    }

    pub fn treatment_set(&self) -> Result<TreatmentSet> {
        match &self.propensities {
            Some(p) => TreatmentSet::new(self.labels.clone(), p.clone()),
            None => TreatmentSet::uniform(self.labels.clone()),
        }
    }
}

pub fn load_experiment(path: impl AsRef<Path>, schema: &Schema) -> Result<ExperimentDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_experiment(file, schema)
}

pub fn read_experiment<R: Read>(reader: R, schema: &Schema) -> Result<ExperimentDataset> {
    let treatments = schema.treatment_set()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let id_col = column(&schema.id)?;
    let t_col = column(&schema.treatment)?;
    let y_col = column(&schema.outcome)?;

    let mut aux_names = Vec::new();
    let mut aux_cols = Vec::new();
    for (j, h) in headers.iter().enumerate() {
        if let Some(name) = h.strip_prefix(schema.aux_prefix.as_str()) {
            if !schema.aux_prefix.is_empty() {
                aux_names.push(name.to_string());
                aux_cols.push(j);
            }
        }
    }
    let (feature_names, feature_cols): (Vec<String>, Vec<usize>) = match &schema.features {
        Some(names) => {
            let cols = names.iter().map(|n| column(n)).collect::<Result<Vec<_>>>()?;
            (names.clone(), cols)
        }
        None => headers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != id_col && *j != t_col && *j != y_col && !aux_cols.contains(j))
            .map(|(j, h)| (h.to_string(), j))
            .unzip(),
    };

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row?;
        let cell = |j: usize| row.get(j).unwrap_or("");
        let number = |j: usize| -> Result<f64> {
            let raw = cell(j).trim();
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row: row_no,
                column: headers[j].to_string(),
                message: format!("`{raw}` is not a number"),
            })
        };
        let label = cell(t_col);
        let t = treatments.index_of(label).ok_or_else(|| Error::Domain {
            row: Some(row_no),
            message: format!("unknown treatment label `{label}`"),
        })?;
        let x = feature_cols
            .iter()
            .map(|&j| {
                let v = number(j)?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse {
                        row: row_no,
                        column: headers[j].to_string(),
                        message: "covariates must be finite".into(),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        records.push(CustomerRecord {
            id: cell(id_col).to_string(),
            x,
            t,
            y: number(y_col)?,
            aux: aux_cols.iter().map(|&j| number(j)).collect::<Result<_>>()?,
        });
    }
    ExperimentDataset::new(treatments, feature_names, aux_names, records)
}

pub fn write_experiment(ds: &ExperimentDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    to_writer(ds, file)
}

/// Writes `ds` as CSV: `id,treatment,outcome,<features...>,aux:<name>...`.
pub fn to_writer<W: Write>(ds: &ExperimentDataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["id".to_string(), "treatment".into(), "outcome".into()];
    header.extend(ds.feature_names.iter().cloned());
    header.extend(ds.aux_names.iter().map(|a| format!("aux:{a}")));
    w.write_record(&header)?;
    for r in &ds.records {
        let mut row = vec![
            r.id.clone(),
            ds.treatments.labels[r.t].clone(),
            r.y.to_string(),
        ];
        row.extend(r.x.iter().map(f64::to_string));
        row.extend(r.aux.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.issues.iter().any(|i| i.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    fn push(&mut self, severity: Severity, message: String) {
        self.issues.push(Issue { severity, message });
    }
}

pub fn validate(ds: &ExperimentDataset) -> ValidationReport {
    let mut report = ValidationReport::default();

    let mut seen: HashMap<&str, usize> = HashMap::new();
    for r in &ds.records {
        *seen.entry(r.id.as_str()).or_default() += 1;
    }
    let mut dups: Vec<_> = seen.into_iter().filter(|(_, n)| *n > 1).collect();
    dups.sort();
    for (id, n) in dups {
        report.push(Severity::Error, format!("duplicate id `{id}` ({n} records)"));
    }

    for (arm, n) in ds.arm_counts().into_iter().enumerate() {
        if n == 0 {
            report.push(
                Severity::Warning,
                format!("arm {arm} empty (`{}`)", ds.treatments.labels[arm]),
            );
        }
    }

    if !ds.records.is_empty() {
        for (j, name) in ds.feature_names.iter().enumerate() {
            let first = ds.records[0].x[j];
            if ds.records.iter().all(|r| r.x[j] == first) {
                report.push(Severity::Warning, format!("covariate `{name}` is constant"));
            }
        }
    }

    let nan_rows = ds.records.iter().filter(|r| r.y.is_nan()).count();
    if nan_rows > 0 {
        report.push(Severity::Error, format!("{nan_rows} records with NaN outcome"));
    }
    for (j, name) in ds.aux_names.iter().enumerate() {
        let n = ds.records.iter().filter(|r| r.aux[j].is_nan()).count();
        if n > 0 {
            report.push(Severity::Error, format!("{n} records with NaN `{name}`"));
        }
    }
    report
}

/// Stratified split into `(train, eval)`.
///
/// Each arm contributes `round(eval_fraction * n_arm)` records to the eval set,
/// chosen by a seeded shuffle. Both halves keep the original record order.
pub fn split(
    ds: &ExperimentDataset,
    eval_fraction: f64,
    seed: u64,
) -> Result<(ExperimentDataset, ExperimentDataset)> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "eval_fraction must lie in (0, 1), got {eval_fraction}"
        )));
    }
    if ds.is_empty() {
        return Err(Error::Argument("cannot split an empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_eval = vec![false; ds.len()];
    for arm in 0..ds.n_arms() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.records[i].t == arm).collect();
        let n_eval = (eval_fraction * members.len() as f64).round() as usize;
        members.shuffle(&mut rng);
        for &i in &members[..n_eval] {
            in_eval[i] = true;
        }
    }
    let (eval_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| in_eval[i]);
    Ok((ds.subset(&train_idx), ds.subset(&eval_idx)))
}
