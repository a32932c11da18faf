//! Dataset container, CSV I/O, and positivity diagnostics.
//!
//! A mediation dataset is a rectangular table of `n` observations holding an
//! outcome `Y` (continuous or binary), a binary exposure `E`, a mediator `M`
//! coded `0..K-1` for a known finite support size `K`, and `p` real-valued
//! covariate columns `X`. All estimators in the crate consume this container,
//! so its constructor enforces the structural invariants once.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether the outcome column is continuous or binary (0/1).
///
/// Ratio effect scales (risk ratio, odds ratio) are only defined for binary
/// outcomes; everything else treats the two identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Continuous,
    Binary,
}

/// Observations for one mediation analysis.
#[derive(Debug, Clone)]
pub struct MediationDataset {
    y: Vec<f64>,
    e: Vec<u8>,
    m: Vec<usize>,
    x: Array2<f64>,
    outcome_kind: OutcomeKind,
    support_size: usize,
    x_names: Vec<String>,
}

impl MediationDataset {
    /// Build a dataset, validating every structural invariant:
    /// equal column lengths, finite values, `E` in {0,1}, `M` in `0..K`,
    /// `K >= 2`, and a 0/1 outcome when `outcome_kind` is binary.
    pub fn new(
        y: Vec<f64>,
        e: Vec<u8>,
        m: Vec<usize>,
        x: Array2<f64>,
        outcome_kind: OutcomeKind,
        support_size: usize,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if e.len() != n || m.len() != n || x.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "column lengths disagree: y={}, e={}, m={}, x rows={}",
                n,
                e.len(),
                m.len(),
                x.nrows()
            )));
        }
        if support_size < 2 {
            return Err(Error::InvalidInput(format!(
                "mediator support size must be at least 2, got {support_size}"
            )));
        }
        for (i, &yi) in y.iter().enumerate() {
            if !yi.is_finite() {
                return Err(Error::InvalidInput(format!("y[{i}] is not finite")));
            }
            if outcome_kind == OutcomeKind::Binary && yi != 0.0 && yi != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "outcome declared binary but y[{i}] = {yi}"
                )));
            }
        }
        for (i, &ei) in e.iter().enumerate() {
            if ei > 1 {
                return Err(Error::InvalidInput(format!(
                    "exposure must be 0 or 1, got e[{i}] = {ei}"
                )));
            }
        }
        for (i, &mi) in m.iter().enumerate() {
            if mi >= support_size {
                return Err(Error::InvalidInput(format!(
                    "mediator value m[{i}] = {mi} outside support 0..{support_size}"
                )));
            }
        }
        for ((i, j), &v) in x.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("x[{i}, {j}] is not finite")));
            }
        }
        let x_names = (0..x.ncols()).map(|j| format!("x{j}")).collect();
        Ok(Self {
            y,
            e,
            m,
            x,
            outcome_kind,
            support_size,
            x_names,
        })
    }

    /// Attach covariate column names (for reports and CSV output).
    pub fn with_x_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.x.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} covariate names for {} columns",
                names.len(),
                self.x.ncols()
            )));
        }
        self.x_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Mediator support size `K`.
    pub fn support_size(&self) -> usize {
        self.support_size
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome_kind
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn exposure(&self) -> &[u8] {
        &self.e
    }

    pub fn mediator(&self) -> &[usize] {
        &self.m
    }

    pub fn covariates(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn x_row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.x.row(i)
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    /// Number of exposed rows.
    pub fn n_exposed(&self) -> usize {
        self.e.iter().filter(|&&ei| ei == 1).count()
    }

    /// Error unless both exposure arms are non-empty; estimators that
    /// contrast arms call this before doing any arithmetic.
    pub fn require_both_arms(&self) -> Result<()> {
        let n1 = self.n_exposed();
        if n1 == 0 {
            return Err(Error::DegenerateInput("no exposed rows".into()));
        }
        if n1 == self.n() {
            return Err(Error::DegenerateInput("no unexposed rows".into()));
        }
        Ok(())
    }

    /// Rows re-ordered / repeated according to `idx` (bootstrap resampling).
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        let mut y = Vec::with_capacity(idx.len());
        let mut e = Vec::with_capacity(idx.len());
        let mut m = Vec::with_capacity(idx.len());
        let mut x = Array2::zeros((idx.len(), self.p()));
        for (r, &i) in idx.iter().enumerate() {
            if i >= self.n() {
                return Err(Error::InvalidInput(format!(
                    "row index {i} out of range for {} rows",
                    self.n()
                )));
            }
            y.push(self.y[i]);
            e.push(self.e[i]);
            m.push(self.m[i]);
            x.row_mut(r).assign(&self.x.row(i));
        }
        let mut out = Self::new(y, e, m, x, self.outcome_kind, self.support_size)?;
        out.x_names = self.x_names.clone();
        Ok(out)
    }

    /// Permutation of row indices sorted lexicographically by
    /// `(y, e, m, x-row)`; identical row multisets yield identical orderings
    /// regardless of input order.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n()).collect();
        idx.sort_by(|&a, &b| {
            self.y[a]
                .total_cmp(&self.y[b])
                .then(self.e[a].cmp(&self.e[b]))
                .then(self.m[a].cmp(&self.m[b]))
                .then_with(|| {
                    for j in 0..self.p() {
                        let c = self.x[(a, j)].total_cmp(&self.x[(b, j)]);
                        if c != std::cmp::Ordering::Equal {
                            return c;
                        }
                    }
                    std::cmp::Ordering::Equal
                })
        });
        idx
    }
}

/// Column mapping for CSV input/output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Outcome column name.
    pub y: String,
    /// Exposure column name (values must parse as 0/1).
    pub e: String,
    /// Mediator column name (non-negative integers).
    pub m: String,
    /// Covariate column names, in the order the design will see them.
    pub x: Vec<String>,
    /// Outcome kind; when `None` it is inferred (binary iff every value is
    /// 0 or 1).
    #[serde(default)]
    pub outcome_kind: Option<OutcomeKind>,
    /// Mediator support size; when `None` it is `max(m) + 1`, at least 2.
    #[serde(default)]
    pub support_size: Option<usize>,
}

/// Read a dataset from a CSV file with a header row.
///
/// Errors cite the row (1-based, excluding the header) and column of the
/// first offending value.
pub fn load_csv<P: AsRef<Path>>(path: P, schema: &CsvSchema) -> Result<MediationDataset> {
    let mut reader = csv::Reader::from_path(path.as_ref())
        .map_err(|err| Error::Schema(format!("cannot open {}: {err}", path.as_ref().display())))?;
    let headers = reader
        .headers()
        .map_err(|err| Error::Schema(format!("cannot read header: {err}")))?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in header")))
    };
    let yc = col(&schema.y)?;
    let ec = col(&schema.e)?;
    let mc = col(&schema.m)?;
    let xcs: Vec<usize> = schema
        .x
        .iter()
        .map(|name| col(name))
        .collect::<Result<_>>()?;

    let mut y = Vec::new();
    let mut e = Vec::new();
    let mut m = Vec::new();
    let mut xflat = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1;
        let record = record.map_err(|err| Error::Schema(format!("row {row}: {err}")))?;
        let field = |c: usize, name: &str| -> Result<&str> {
            record
                .get(c)
                .ok_or_else(|| Error::Schema(format!("row {row}: missing column '{name}'")))
        };
        let parse_f64 = |c: usize, name: &str| -> Result<f64> {
            let raw = field(c, name)?;
            raw.trim().parse::<f64>().map_err(|_| {
                Error::Schema(format!("row {row}, column '{name}': '{raw}' is not a number"))
            })
        };
        y.push(parse_f64(yc, &schema.y)?);
        let e_raw = field(ec, &schema.e)?.trim();
        match e_raw {
            "0" => e.push(0),
            "1" => e.push(1),
            _ => {
                return Err(Error::Schema(format!(
                    "row {row}, column '{}': exposure must be 0 or 1, got '{e_raw}'",
                    schema.e
                )))
            }
        }
        let m_raw = field(mc, &schema.m)?.trim();
        let m_val = m_raw.parse::<usize>().map_err(|_| {
            Error::Schema(format!(
                "row {row}, column '{}': mediator must be a non-negative integer, got '{m_raw}'",
                schema.m
            ))
        })?;
        m.push(m_val);
        for (&c, name) in xcs.iter().zip(&schema.x) {
            xflat.push(parse_f64(c, name)?);
        }
    }
    if y.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }

    let n = y.len();
    let p = xcs.len();
    let x = Array2::from_shape_vec((n, p), xflat)
        .expect("row-major covariate buffer matches (n, p)");
    let outcome_kind = schema.outcome_kind.unwrap_or_else(|| {
        if y.iter().all(|&v| v == 0.0 || v == 1.0) {
            OutcomeKind::Binary
        } else {
            OutcomeKind::Continuous
        }
    });
    let support_size = match schema.support_size {
        Some(k) => k,
        None => m.iter().copied().max().unwrap_or(0).max(1) + 1,
    };
    MediationDataset::new(y, e, m, x, outcome_kind, support_size)?.with_x_names(schema.x.clone())
}

/// Write a dataset to CSV with the column names from `schema`.
pub fn write_csv<P: AsRef<Path>>(
    path: P,
    data: &MediationDataset,
    schema: &CsvSchema,
) -> Result<()> {
    if schema.x.len() != data.p() {
        return Err(Error::InvalidInput(format!(
            "schema has {} covariate names, dataset has {} columns",
            schema.x.len(),
            data.p()
        )));
    }
    let mut writer = csv::Writer::from_path(path.as_ref())
        .map_err(|err| Error::Schema(format!("cannot create {}: {err}", path.as_ref().display())))?;
    let mut header = vec![schema.y.clone(), schema.e.clone(), schema.m.clone()];
    header.extend(schema.x.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|err| Error::Schema(err.to_string()))?;
    for i in 0..data.n() {
        let mut record = vec![
            format_float(data.y()[i]),
            data.exposure()[i].to_string(),
            data.mediator()[i].to_string(),
        ];
        for j in 0..data.p() {
            record.push(format_float(data.covariates()[(i, j)]));
        }
        writer
            .write_record(&record)
            .map_err(|err| Error::Schema(err.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Shortest decimal representation that round-trips through `f64` parsing.
fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

/// Cell occupancy of the empirical `(e, m)` table.
#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    /// `counts[e][m]` = number of rows with that exposure and mediator value.
    pub counts: Vec<Vec<usize>>,
    /// `(e, m)` cells with zero observations.
    pub empty_cells: Vec<(u8, usize)>,
    /// Human-readable warnings (one per empty cell plus arm-level issues).
    pub warnings: Vec<String>,
}

/// Tabulate `(e, m)` cell counts and flag empty cells.
///
/// Empty cells mean the nonparametric target is not identified on the
/// empirical support; estimators will rely on model extrapolation there.
pub fn empirical_positivity_report(data: &MediationDataset) -> PositivityReport {
    let k = data.support_size();
    let mut counts = vec![vec![0usize; k]; 2];
    for i in 0..data.n() {
        counts[data.exposure()[i] as usize][data.mediator()[i]] += 1;
    }
    let mut empty_cells = Vec::new();
    let mut warnings = Vec::new();
    for e in 0..2u8 {
        let arm: usize = counts[e as usize].iter().sum();
        if arm == 0 {
            warnings.push(format!("exposure arm e={e} has no observations"));
        }
        for m in 0..k {
            if counts[e as usize][m] == 0 {
                empty_cells.push((e, m));
                warnings.push(format!("cell (e={e}, m={m}) has no observations"));
            }
        }
    }
    PositivityReport {
        counts,
        empty_cells,
        warnings,
    }
}

/// Point estimate plus inference and provenance, serialized into reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    /// What is being estimated (for example "nde" or "theta0").
    pub estimand: String,
    /// Effect scale ("difference", "risk_ratio", "odds_ratio").
    pub scale: String,
    /// Estimator label (for example "triply" or "dag2").
    pub estimator: String,
    pub point: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_high: Option<f64>,
    /// How the uncertainty was computed ("sandwich", "bootstrap", "none").
    pub inference: String,
    /// Numeric diagnostics keyed by name (weight floor events, minimum
    /// fitted probabilities, bootstrap failure counts, ...).
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimateReport {
    pub fn point_only(estimand: &str, scale: &str, estimator: &str, point: f64) -> Self {
        Self {
            estimand: estimand.into(),
            scale: scale.into(),
            estimator: estimator.into(),
            point,
            se: None,
            ci_level: None,
            ci_low: None,
            ci_high: None,
            inference: "none".into(),
            diagnostics: BTreeMap::new(),
        }
    }
}
