//! Long-format panel data: loading, validation, cell means and overlap
//! diagnostics.
//!
//! Rows are stored column-wise and sorted by `(period, unit)`, so every
//! per-period query touches one contiguous block.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{fit_logit, predict_probability, DesignMatrix, LogitOptions};

/// How the treatment column is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentScheme {
    /// Group indicator constant within unit, one post period (the last).
    BinarySinglePost,
    /// Per-period treatment indicator `D_t`; paths start untreated.
    MultiPeriodPaths,
    /// One (or a few) treated units against a pool of donor units.
    DonorPool,
}

impl fmt::Display for TreatmentScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreatmentScheme::BinarySinglePost => "binary_single_post",
            TreatmentScheme::MultiPeriodPaths => "multi_period_paths",
            TreatmentScheme::DonorPool => "donor_pool",
        })
    }
}

/// Column mapping for CSV ingestion, usually read from a small JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaConfig {
    pub unit: String,
    pub period: String,
    pub outcome: String,
    pub treatment: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Inferred from the data when absent (donor pools must be explicit).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<TreatmentScheme>,
    /// Binary designs only: asserts which period is the post period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub post_period: Option<i64>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            unit: "unit".into(),
            period: "period".into(),
            outcome: "outcome".into(),
            treatment: "treatment".into(),
            covariates: Vec::new(),
            scheme: None,
            post_period: None,
        }
    }
}

impl SchemaConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("schema: {e}")))
    }

    /// The schema [`PanelDataset::write_csv`] emits for `ds`.
    pub fn for_dataset(ds: &PanelDataset) -> Self {
        SchemaConfig {
            covariates: ds.covariate_names.clone(),
            scheme: Some(ds.scheme),
            ..SchemaConfig::default()
        }
    }
}

/// One owned observation, as supplied to [`PanelDataset::from_observations`].
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub unit_id: String,
    pub period: i64,
    pub outcome: f64,
    pub treated: i64,
    pub covariates: Vec<f64>,
}

/// Borrowed view of a stored row.
#[derive(Debug, Clone, Copy)]
pub struct ObservationRef<'a> {
    pub unit_id: &'a str,
    pub unit_index: usize,
    pub period: i64,
    pub outcome: f64,
    pub treated: i64,
    pub covariates: &'a [f64],
}

/// Raw column data for [`PanelDataset::from_columns`].
#[derive(Debug, Clone, Default)]
pub struct PanelColumns {
    pub unit_ids: Vec<String>,
    pub unit: Vec<u32>,
    pub period: Vec<i64>,
    pub outcome: Vec<f64>,
    pub treated: Vec<i64>,
    /// Row-major, one block of covariates per row.
    pub covariates: Vec<f64>,
}

impl PanelColumns {
    pub fn with_capacity(rows: usize, n_covariates: usize) -> Self {
        PanelColumns {
            unit_ids: Vec::new(),
            unit: Vec::with_capacity(rows),
            period: Vec::with_capacity(rows),
            outcome: Vec::with_capacity(rows),
            treated: Vec::with_capacity(rows),
            covariates: Vec::with_capacity(rows * n_covariates),
        }
    }

    pub fn push(&mut self, unit: u32, period: i64, outcome: f64, treated: i64, covariates: &[f64]) {
        self.unit.push(unit);
        self.period.push(period);
        self.outcome.push(outcome);
        self.treated.push(treated);
        self.covariates.extend_from_slice(covariates);
    }
}

/// Validated long-format panel. Immutable after construction.
#[derive(Debug, Clone)]
pub struct PanelDataset {
    unit_ids: Vec<String>,
    unit: Vec<u32>,
    period: Vec<i64>,
    outcome: Vec<f64>,
    treated: Vec<i64>,
    covariates: Vec<f64>,
    covariate_names: Vec<String>,
    periods: Vec<i64>,
    /// `period_offsets[k]..period_offsets[k + 1]` are the rows of `periods[k]`.
    period_offsets: Vec<usize>,
    scheme: TreatmentScheme,
    first_treatment_period: Option<i64>,
}

impl PanelDataset {
    /// Validates and stores `rows`. `scheme = None` infers binary vs
    /// multi-period from whether treatment varies within a unit.
    pub fn from_observations(
        rows: Vec<Observation>,
        covariate_names: Vec<String>,
        scheme: Option<TreatmentScheme>,
    ) -> Result<Self> {
        Self::build(rows, covariate_names, scheme, None)
    }

    fn build(
        rows: Vec<Observation>,
        covariate_names: Vec<String>,
        scheme: Option<TreatmentScheme>,
        post_period: Option<i64>,
    ) -> Result<Self> {
        let k = covariate_names.len();
        let mut cols = PanelColumns::with_capacity(rows.len(), k);
        let mut unit_index: HashMap<String, u32> = HashMap::new();
        for (i, row) in rows.into_iter().enumerate() {
            if row.covariates.len() != k {
                return Err(Error::InvalidPanel(format!(
                    "row {i}: {} covariates, expected {k}",
                    row.covariates.len()
                )));
            }
            let next = cols.unit_ids.len() as u32;
            let u = match unit_index.get(&row.unit_id) {
                Some(&u) => u,
                None => {
                    unit_index.insert(row.unit_id.clone(), next);
                    cols.unit_ids.push(row.unit_id);
                    next
                }
            };
            cols.unit.push(u);
            cols.period.push(row.period);
            cols.outcome.push(row.outcome);
            cols.treated.push(row.treated);
            cols.covariates.extend_from_slice(&row.covariates);
        }
        Self::from_columns(cols, covariate_names, scheme, post_period)
    }

    /// Validates and stores column data. `unit[i]` indexes `unit_ids`.
    pub fn from_columns(
        cols: PanelColumns,
        covariate_names: Vec<String>,
        scheme: Option<TreatmentScheme>,
        post_period: Option<i64>,
    ) -> Result<Self> {
        let n = cols.outcome.len();
        let k = covariate_names.len();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if cols.unit.len() != n || cols.period.len() != n || cols.treated.len() != n || cols.covariates.len() != n * k {
            return Err(Error::DimensionMismatch("panel columns differ in length".into()));
        }
        let n_units = cols.unit_ids.len();
        if let Some(i) = cols.unit.iter().position(|&u| u as usize >= n_units) {
            return Err(Error::InvalidPanel(format!("row {i}: unit index out of range")));
        }
        if let Some(i) = cols.outcome.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonNumericOutcome {
                row: i,
                column: "outcome".into(),
                value: cols.outcome[i].to_string(),
            });
        }
        if let Some(j) = cols.covariates.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonNumericOutcome {
                row: j / k,
                column: covariate_names[j % k].clone(),
                value: cols.covariates[j].to_string(),
            });
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by_key(|&i| (cols.period[i], cols.unit[i], i));
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            if cols.period[a] == cols.period[b] && cols.unit[a] == cols.unit[b] {
                return Err(Error::DuplicateUnitPeriod {
                    row: b,
                    unit: cols.unit_ids[cols.unit[b] as usize].clone(),
                    period: cols.period[b],
                });
            }
        }

        // Treatment consistency.
        let mut unit_codes: Vec<Option<i64>> = vec![None; n_units];
        let mut varies = false;
        for i in 0..n {
            let u = cols.unit[i] as usize;
            match unit_codes[u] {
                None => unit_codes[u] = Some(cols.treated[i]),
                Some(c) if c != cols.treated[i] => varies = true,
                _ => {}
            }
        }
        let scheme = scheme.unwrap_or(if varies {
            TreatmentScheme::MultiPeriodPaths
        } else {
            TreatmentScheme::BinarySinglePost
        });
        if let Some(i) = cols.treated.iter().position(|&d| d != 0 && d != 1) {
            return Err(Error::InvalidPanel(format!(
                "row {i}: treatment must be 0 or 1 under {scheme}, got {}",
                cols.treated[i]
            )));
        }
        if varies && scheme != TreatmentScheme::MultiPeriodPaths {
            return Err(Error::InvalidPanel(format!(
                "treatment varies within a unit, which {scheme} does not allow"
            )));
        }

        let mut periods: Vec<i64> = order.iter().map(|&i| cols.period[i]).collect();
        periods.dedup();
        let last = *periods.last().expect("nonempty");
        let first_treatment_period = match scheme {
            TreatmentScheme::BinarySinglePost | TreatmentScheme::DonorPool => {
                if periods.len() < 2 {
                    return Err(Error::InvalidPanel(
                        "need at least one pre-period and the post period".into(),
                    ));
                }
                if let Some(p) = post_period {
                    if p != last {
                        return Err(Error::InvalidPanel(format!(
                            "post period {p} must be the last period ({last})"
                        )));
                    }
                }
                Some(last)
            }
            TreatmentScheme::MultiPeriodPaths => {
                let first = (0..n).filter(|&i| cols.treated[i] == 1).map(|i| cols.period[i]).min();
                if first == Some(periods[0]) {
                    return Err(Error::InvalidPanel(format!(
                        "units are treated in the first observed period {}; paths must start untreated",
                        periods[0]
                    )));
                }
                first
            }
        };

        let mut ds = PanelDataset {
            unit_ids: cols.unit_ids,
            unit: order.iter().map(|&i| cols.unit[i]).collect(),
            period: order.iter().map(|&i| cols.period[i]).collect(),
            outcome: order.iter().map(|&i| cols.outcome[i]).collect(),
            treated: order.iter().map(|&i| cols.treated[i]).collect(),
            covariates: Vec::with_capacity(n * k),
            covariate_names,
            periods,
            period_offsets: Vec::new(),
            scheme,
            first_treatment_period,
        };
        for &i in &order {
            ds.covariates.extend_from_slice(&cols.covariates[i * k..(i + 1) * k]);
        }
        ds.index_periods();
        Ok(ds)
    }

    fn index_periods(&mut self) {
        let mut offsets = Vec::with_capacity(self.periods.len() + 1);
        offsets.push(0);
        let mut k = 0;
        for (i, &p) in self.period.iter().enumerate() {
            while self.periods[k] != p {
                k += 1;
                offsets.push(i);
            }
        }
        while offsets.len() < self.periods.len() + 1 {
            offsets.push(self.period.len());
        }
        self.period_offsets = offsets;
    }

    /// Reads a CSV with a header row, using `schema` for the column mapping.
    pub fn load_csv(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(file, schema)
    }

    pub fn read_csv<R: Read>(reader: R, schema: &SchemaConfig) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let unit_c = col(&schema.unit)?;
        let period_c = col(&schema.period)?;
        let outcome_c = col(&schema.outcome)?;
        let treat_c = col(&schema.treatment)?;
        let cov_c = schema
            .covariates
            .iter()
            .map(|c| col(c))
            .collect::<Result<Vec<_>>>()?;

        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("row {i}: {e}")))?;
            let field = |c: usize, name: &str| -> Result<&str> {
                let v = rec.get(c).unwrap_or("");
                if v.is_empty() {
                    Err(Error::MissingValue {
                        row: i,
                        column: name.to_string(),
                    })
                } else {
                    Ok(v)
                }
            };
            let num = |c: usize, name: &str| -> Result<f64> {
                let v = field(c, name)?;
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::NonNumericOutcome {
                        row: i,
                        column: name.to_string(),
                        value: v.to_string(),
                    })
            };
            let integer = |c: usize, name: &str| -> Result<i64> {
                let v = field(c, name)?;
                v.parse::<i64>().or_else(|_| {
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.fract() == 0.0 && x.abs() < 9.0e15)
                        .map(|x| x as i64)
                        .ok_or_else(|| Error::NonNumericOutcome {
                            row: i,
                            column: name.to_string(),
                            value: v.to_string(),
                        })
                })
            };
            rows.push(Observation {
                unit_id: field(unit_c, &schema.unit)?.to_string(),
                period: integer(period_c, &schema.period)?,
                outcome: num(outcome_c, &schema.outcome)?,
                treated: integer(treat_c, &schema.treatment)?,
                covariates: cov_c
                    .iter()
                    .zip(&schema.covariates)
                    .map(|(&c, name)| num(c, name))
                    .collect::<Result<_>>()?,
            });
        }
        Self::build(
            rows,
            schema.covariates.clone(),
            schema.scheme,
            schema.post_period,
        )
    }

    /// Writes the standard schema (`unit,period,outcome,treatment,<covariates>`).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["unit", "period", "outcome", "treatment"];
        header.extend(self.covariate_names.iter().map(String::as_str));
        w.write_record(&header)
            .map_err(|e| Error::Parse(e.to_string()))?;
        for r in self.rows() {
            let mut rec = vec![
                r.unit_id.to_string(),
                r.period.to_string(),
                format_f64(r.outcome),
                r.treated.to_string(),
            ];
            rec.extend(r.covariates.iter().map(|&v| format_f64(v)));
            w.write_record(&rec).map_err(|e| Error::Parse(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    pub fn n_units(&self) -> usize {
        self.unit_ids.len()
    }

    pub fn unit_ids(&self) -> &[String] {
        &self.unit_ids
    }

    pub fn periods(&self) -> &[i64] {
        &self.periods
    }

    pub fn scheme(&self) -> TreatmentScheme {
        self.scheme
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// First period in which any unit is treated (the post period for
    /// binary and donor designs).
    pub fn first_treatment_period(&self) -> Option<i64> {
        self.first_treatment_period
    }

    /// Post period of a binary or donor design.
    pub fn post_period(&self) -> Result<i64> {
        match self.scheme {
            TreatmentScheme::MultiPeriodPaths => Err(Error::InvalidArgument(
                "multi-period datasets have no single post period".into(),
            )),
            _ => Ok(self.first_treatment_period.expect("binary design has a post period")),
        }
    }

    /// Periods strictly before the first treatment period.
    pub fn pre_periods(&self) -> Vec<i64> {
        match self.first_treatment_period {
            Some(f) => self.periods.iter().copied().filter(|&p| p < f).collect(),
            None => self.periods.clone(),
        }
    }

    /// Periods at or after the first treatment period.
    pub fn treatment_periods(&self) -> Vec<i64> {
        match self.first_treatment_period {
            Some(f) => self.periods.iter().copied().filter(|&p| p >= f).collect(),
            None => Vec::new(),
        }
    }

    /// Latest pre-treatment period ("period 0").
    pub fn baseline_period(&self) -> Result<i64> {
        self.pre_periods()
            .last()
            .copied()
            .ok_or_else(|| Error::InvalidPanel("no pre-treatment period".into()))
    }

    pub fn rows(&self) -> impl Iterator<Item = ObservationRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn row(&self, i: usize) -> ObservationRef<'_> {
        let k = self.n_covariates();
        let u = self.unit[i] as usize;
        ObservationRef {
            unit_id: &self.unit_ids[u],
            unit_index: u,
            period: self.period[i],
            outcome: self.outcome[i],
            treated: self.treated[i],
            covariates: &self.covariates[i * k..(i + 1) * k],
        }
    }

    pub fn to_observations(&self) -> Vec<Observation> {
        self.rows()
            .map(|r| Observation {
                unit_id: r.unit_id.to_string(),
                period: r.period,
                outcome: r.outcome,
                treated: r.treated,
                covariates: r.covariates.to_vec(),
            })
            .collect()
    }

    /// Row indices belonging to `period` (empty if the period is absent).
    pub fn period_rows(&self, period: i64) -> std::ops::Range<usize> {
        match self.periods.binary_search(&period) {
            Ok(k) => self.period_offsets[k]..self.period_offsets[k + 1],
            Err(_) => 0..0,
        }
    }

    pub fn has_period(&self, period: i64) -> bool {
        self.periods.binary_search(&period).is_ok()
    }

    pub(crate) fn unit_of_row(&self, i: usize) -> usize {
        self.unit[i] as usize
    }

    pub(crate) fn outcome_of_row(&self, i: usize) -> f64 {
        self.outcome[i]
    }

    pub(crate) fn treated_of_row(&self, i: usize) -> i64 {
        self.treated[i]
    }

    pub(crate) fn covariates_of_row(&self, i: usize) -> &[f64] {
        let k = self.n_covariates();
        &self.covariates[i * k..(i + 1) * k]
    }

    /// Treatment code of each unit, for designs where it is constant within
    /// unit. `None` for multi-period paths.
    pub fn unit_treatment(&self) -> Option<Vec<i64>> {
        if self.scheme == TreatmentScheme::MultiPeriodPaths {
            return None;
        }
        let mut codes = vec![0; self.n_units()];
        for i in 0..self.len() {
            codes[self.unit[i] as usize] = self.treated[i];
        }
        Some(codes)
    }

    /// True when every unit is observed in every period.
    pub fn is_balanced(&self) -> bool {
        self.periods_balanced(&self.periods)
    }

    /// True when every unit is observed exactly once in each of `periods`.
    pub fn periods_balanced(&self, periods: &[i64]) -> bool {
        periods
            .iter()
            .all(|&p| self.has_period(p) && self.period_rows(p).len() == self.n_units())
    }

    /// Sum and count of outcomes in a cell.
    pub fn cell_sum(&self, period: i64, group: &GroupFilter) -> (f64, usize) {
        let mut sum = 0.0;
        let mut count = 0;
        for i in self.period_rows(period) {
            if group.matches(self, i) {
                sum += self.outcome[i];
                count += 1;
            }
        }
        (sum, count)
    }

    /// Arithmetic mean of outcomes in the `(period, group)` cell.
    pub fn cell_mean(&self, period: i64, group: &GroupFilter) -> Result<f64> {
        let (sum, count) = self.cell_sum(period, group);
        if count == 0 {
            return Err(Error::EmptyCell {
                period,
                group: group.to_string(),
            });
        }
        Ok(sum / count as f64)
    }

    /// Builds a resampled dataset from a list of source units (repeats
    /// allowed). Each draw becomes a fresh unit `"<id>#<k>"`.
    pub fn resample_units(&self, draws: &[usize]) -> PanelDataset {
        let k = self.n_covariates();
        let mut unit_rows: Vec<Vec<usize>> = vec![Vec::new(); self.n_units()];
        for i in 0..self.len() {
            unit_rows[self.unit[i] as usize].push(i);
        }
        let mut picked: Vec<(usize, u32)> = Vec::new();
        for (new_u, &u) in draws.iter().enumerate() {
            for &i in &unit_rows[u] {
                picked.push((i, new_u as u32));
            }
        }
        self.assemble(
            picked,
            draws
                .iter()
                .enumerate()
                .map(|(k, &u)| format!("{}#{k}", self.unit_ids[u]))
                .collect(),
            k,
        )
    }

    /// Builds a dataset from individually drawn rows; each draw becomes its
    /// own unit. Only meaningful for pure cross-sections.
    pub fn resample_rows(&self, draws: &[usize]) -> PanelDataset {
        let k = self.n_covariates();
        let picked = draws
            .iter()
            .enumerate()
            .map(|(n, &i)| (i, n as u32))
            .collect();
        let ids = draws
            .iter()
            .enumerate()
            .map(|(n, &i)| format!("{}#{n}", self.unit_ids[self.unit[i] as usize]))
            .collect();
        self.assemble(picked, ids, k)
    }

    fn assemble(&self, mut picked: Vec<(usize, u32)>, unit_ids: Vec<String>, k: usize) -> PanelDataset {
        picked.sort_by_key(|&(i, u)| (self.period[i], u));
        let n = picked.len();
        let mut ds = PanelDataset {
            unit_ids,
            unit: Vec::with_capacity(n),
            period: Vec::with_capacity(n),
            outcome: Vec::with_capacity(n),
            treated: Vec::with_capacity(n),
            covariates: Vec::with_capacity(n * k),
            covariate_names: self.covariate_names.clone(),
            periods: Vec::new(),
            period_offsets: Vec::new(),
            scheme: self.scheme,
            first_treatment_period: self.first_treatment_period,
        };
        for (i, u) in picked {
            ds.unit.push(u);
            ds.period.push(self.period[i]);
            ds.outcome.push(self.outcome[i]);
            ds.treated.push(self.treated[i]);
            ds.covariates
                .extend_from_slice(&self.covariates[i * k..(i + 1) * k]);
        }
        ds.periods = ds.period.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        ds.index_periods();
        ds
    }

    /// Keeps only rows whose period is in `periods`. Treatment metadata is
    /// preserved.
    pub fn restrict_periods(&self, periods: &[i64]) -> Result<PanelDataset> {
        let keep: BTreeSet<i64> = periods.iter().copied().collect();
        let picked: Vec<(usize, u32)> = (0..self.len())
            .filter(|&i| keep.contains(&self.period[i]))
            .map(|i| (i, self.unit[i]))
            .collect();
        if picked.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(self.assemble(picked, self.unit_ids.clone(), self.n_covariates()))
    }
}

fn format_f64(v: f64) -> String {
    // Shortest representation that round-trips exactly.
    format!("{v:?}")
}

/// A covariate restriction on a cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateCondition {
    Level { column: usize, value: f64 },
    /// Half-open `[lo, hi)`; the last bin of a binning is closed.
    Range { column: usize, lo: f64, hi: f64, closed: bool },
}

impl CovariateCondition {
    fn matches(&self, x: &[f64]) -> bool {
        match *self {
            CovariateCondition::Level { column, value } => x[column] == value,
            CovariateCondition::Range { column, lo, hi, closed } => {
                x[column] >= lo && (x[column] < hi || (closed && x[column] <= hi))
            }
        }
    }
}

/// Selects the rows of a cell: a treatment code, a unit mask, a covariate
/// condition, or any combination.
#[derive(Debug, Clone, Default)]
pub struct GroupFilter {
    treatment: Option<i64>,
    units: Option<(Arc<Vec<bool>>, Arc<str>)>,
    covariate: Option<CovariateCondition>,
}

impl GroupFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn treated() -> Self {
        Self::code(1)
    }

    pub fn control() -> Self {
        Self::code(0)
    }

    /// Rows whose treatment column equals `code`.
    pub fn code(code: i64) -> Self {
        GroupFilter {
            treatment: Some(code),
            ..Self::default()
        }
    }

    /// Rows of units flagged in `mask` (indexed by unit index).
    pub fn units(mask: Arc<Vec<bool>>, label: impl Into<Arc<str>>) -> Self {
        GroupFilter {
            units: Some((mask, label.into())),
            ..Self::default()
        }
    }

    pub fn with_covariate(mut self, condition: CovariateCondition) -> Self {
        self.covariate = Some(condition);
        self
    }

    pub fn covariate(&self) -> Option<&CovariateCondition> {
        self.covariate.as_ref()
    }

    pub fn matches(&self, ds: &PanelDataset, row: usize) -> bool {
        if let Some(c) = self.treatment {
            if ds.treated[row] != c {
                return false;
            }
        }
        if let Some((mask, _)) = &self.units {
            if !mask.get(ds.unit[row] as usize).copied().unwrap_or(false) {
                return false;
            }
        }
        if let Some(cond) = &self.covariate {
            if !cond.matches(ds.covariates_of_row(row)) {
                return false;
            }
        }
        true
    }
}

impl fmt::Display for GroupFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(c) = self.treatment {
            parts.push(format!("D={c}"));
        }
        if let Some((_, label)) = &self.units {
            parts.push(label.to_string());
        }
        match &self.covariate {
            Some(CovariateCondition::Level { column, value }) => {
                parts.push(format!("X[{column}]={value}"))
            }
            Some(CovariateCondition::Range { column, lo, hi, .. }) => {
                parts.push(format!("X[{column}] in [{lo},{hi})"))
            }
            None => {}
        }
        if parts.is_empty() {
            f.write_str("all")
        } else {
            f.write_str(&parts.join(", "))
        }
    }
}

/// The two groups whose outcome means are differenced.
#[derive(Debug, Clone)]
pub struct Contrast {
    pub treated: GroupFilter,
    pub control: GroupFilter,
}

impl Contrast {
    /// `D = 1` versus `D = 0`.
    pub fn binary() -> Self {
        Contrast {
            treated: GroupFilter::treated(),
            control: GroupFilter::control(),
        }
    }

    pub fn with_covariate(&self, condition: CovariateCondition) -> Self {
        Contrast {
            treated: self.treated.clone().with_covariate(condition.clone()),
            control: self.control.clone().with_covariate(condition),
        }
    }

    /// Difference of cell means at `period`.
    pub fn difference(&self, ds: &PanelDataset, period: i64) -> Result<f64> {
        Ok(ds.cell_mean(period, &self.treated)? - ds.cell_mean(period, &self.control)?)
    }
}

// ---------------------------------------------------------------------------
// Information sets

/// What the elements of an information set index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoKind {
    PrePeriods,
    DiscreteCovariate,
    DataSource,
}

/// Element label: a period index, an integer level, or free text (bins).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InfoLabel {
    Int(i64),
    Text(String),
}

impl fmt::Display for InfoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfoLabel::Int(v) => write!(f, "{v}"),
            InfoLabel::Text(s) => f.write_str(s),
        }
    }
}

/// Which rows an element refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementSelector {
    /// Outcomes observed in a pre-treatment period.
    Period(i64),
    /// Baseline-period outcomes restricted by a covariate condition.
    Baseline { period: i64, condition: CovariateCondition },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfoElement {
    pub label: InfoLabel,
    pub weight: f64,
    pub n_obs: usize,
    pub selector: ElementSelector,
}

/// A finite, labeled set of baseline information elements.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationSet {
    elements: Vec<InfoElement>,
    kind: InfoKind,
}

impl InformationSet {
    /// Validates distinct labels, nonempty elements and weights summing to one.
    pub fn new(kind: InfoKind, elements: Vec<InfoElement>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidInformationSet("no elements".into()));
        }
        let labels: BTreeSet<&InfoLabel> = elements.iter().map(|e| &e.label).collect();
        if labels.len() != elements.len() {
            return Err(Error::InvalidInformationSet("duplicate labels".into()));
        }
        if elements.iter().any(|e| !(e.weight >= 0.0) || !e.weight.is_finite()) {
            return Err(Error::InvalidInformationSet("negative weight".into()));
        }
        let total: f64 = elements.iter().map(|e| e.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInformationSet(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(InformationSet { elements, kind })
    }

    /// Pre-treatment periods, weighted by their observation counts.
    pub fn pre_periods(ds: &PanelDataset, periods: &[i64]) -> Result<Self> {
        let first = ds.first_treatment_period();
        let mut counts = Vec::with_capacity(periods.len());
        for &p in periods {
            if !ds.has_period(p) {
                return Err(Error::InvalidInformationSet(format!(
                    "period {p} not in dataset"
                )));
            }
            if let Some(f) = first {
                if p >= f {
                    return Err(Error::InvalidInformationSet(format!(
                        "period {p} is not before the first treatment period {f}"
                    )));
                }
            }
            counts.push((InfoLabel::Int(p), ElementSelector::Period(p), ds.period_rows(p).len()));
        }
        Self::from_counts(InfoKind::PrePeriods, counts)
    }

    /// Integer levels of a baseline covariate. `levels = None` takes every
    /// level observed in the baseline period.
    pub fn discrete_covariate(ds: &PanelDataset, column: &str, levels: Option<&[i64]>) -> Result<Self> {
        Self::levels_of(ds, column, levels, InfoKind::DiscreteCovariate)
    }

    /// Same cells as [`Self::discrete_covariate`], labeled as data sources.
    pub fn data_sources(ds: &PanelDataset, column: &str, sources: Option<&[i64]>) -> Result<Self> {
        Self::levels_of(ds, column, sources, InfoKind::DataSource)
    }

    fn levels_of(ds: &PanelDataset, column: &str, levels: Option<&[i64]>, kind: InfoKind) -> Result<Self> {
        let c = ds.covariate_index(column)?;
        let baseline = ds.baseline_period()?;
        let rows = ds.period_rows(baseline);
        let mut observed: BTreeMap<i64, usize> = BTreeMap::new();
        for i in rows {
            let v = ds.covariates_of_row(i)[c];
            if v.fract() != 0.0 {
                return Err(Error::InvalidInformationSet(format!(
                    "covariate `{column}` has non-integer value {v}; bin it instead"
                )));
            }
            *observed.entry(v as i64).or_default() += 1;
        }
        let chosen: Vec<i64> = match levels {
            Some(l) => l.to_vec(),
            None => observed.keys().copied().collect(),
        };
        let counts = chosen
            .into_iter()
            .map(|l| {
                (
                    InfoLabel::Int(l),
                    ElementSelector::Baseline {
                        period: baseline,
                        condition: CovariateCondition::Level { column: c, value: l as f64 },
                    },
                    observed.get(&l).copied().unwrap_or(0),
                )
            })
            .collect();
        Self::from_counts(kind, counts)
    }

    /// Bins a continuous baseline covariate at the given ascending edges.
    pub fn binned_covariate(ds: &PanelDataset, column: &str, edges: &[f64]) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInformationSet(
                "bin edges must be strictly increasing, at least two".into(),
            ));
        }
        let c = ds.covariate_index(column)?;
        let baseline = ds.baseline_period()?;
        let nbins = edges.len() - 1;
        let mut counts = Vec::with_capacity(nbins);
        for b in 0..nbins {
            let cond = CovariateCondition::Range {
                column: c,
                lo: edges[b],
                hi: edges[b + 1],
                closed: b + 1 == nbins,
            };
            let n = ds
                .period_rows(baseline)
                .filter(|&i| cond.matches(ds.covariates_of_row(i)))
                .count();
            let close = if b + 1 == nbins { "]" } else { ")" };
            counts.push((
                InfoLabel::Text(format!("[{},{}{close}", edges[b], edges[b + 1])),
                ElementSelector::Baseline { period: baseline, condition: cond },
                n,
            ));
        }
        Self::from_counts(InfoKind::DiscreteCovariate, counts)
    }

    fn from_counts(kind: InfoKind, counts: Vec<(InfoLabel, ElementSelector, usize)>) -> Result<Self> {
        let total: usize = counts.iter().map(|c| c.2).sum();
        if total == 0 {
            return Err(Error::InvalidInformationSet("elements have no observations".into()));
        }
        let elements = counts
            .into_iter()
            .map(|(label, selector, n)| InfoElement {
                label,
                weight: n as f64 / total as f64,
                n_obs: n,
                selector,
            })
            .collect::<Vec<_>>();
        // Renormalize against rounding so the sum check is exact enough.
        let s: f64 = elements.iter().map(|e| e.weight).sum();
        let elements = elements
            .into_iter()
            .map(|mut e| {
                e.weight /= s;
                e
            })
            .collect();
        Self::new(kind, elements)
    }

    pub fn elements(&self) -> &[InfoElement] {
        &self.elements
    }

    pub fn kind(&self) -> InfoKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Period labels, for pre-period sets.
    pub fn periods(&self) -> Vec<i64> {
        self.elements
            .iter()
            .filter_map(|e| match e.selector {
                ElementSelector::Period(p) => Some(p),
                _ => None,
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Overlap diagnostics

#[derive(Debug, Clone, Serialize)]
pub struct StratumCount {
    pub key: Vec<f64>,
    pub treated: usize,
    pub control: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapReport {
    pub period: i64,
    pub epsilon: f64,
    /// Counts per joint level of the discrete covariates (one stratum when
    /// there are none).
    pub strata: Vec<StratumCount>,
    /// Extremes of a logit propensity fitted on all covariates, when any
    /// covariate is continuous.
    pub propensity_range: Option<(f64, f64)>,
    pub violations: Vec<String>,
}

impl OverlapReport {
    pub fn flagged(&self) -> bool {
        !self.violations.is_empty()
    }
}

/// A covariate counts as discrete when it is integer-valued with at most
/// this many levels.
pub const MAX_DISCRETE_LEVELS: usize = 20;

/// Treated/control support at `period`. Never fails; problems are reported.
pub fn overlap_check(ds: &PanelDataset, period: i64, epsilon: f64) -> OverlapReport {
    let rows: Vec<usize> = ds.period_rows(period).collect();
    let k = ds.n_covariates();
    let mut violations = Vec::new();
    if rows.is_empty() {
        violations.push(format!("period {period} has no observations"));
    }
    let discrete: Vec<usize> = (0..k)
        .filter(|&c| {
            let mut levels = BTreeSet::new();
            rows.iter().all(|&i| {
                let v = ds.covariates_of_row(i)[c];
                levels.insert(v.to_bits());
                v.fract() == 0.0 && levels.len() <= MAX_DISCRETE_LEVELS
            })
        })
        .collect();

    let mut strata: BTreeMap<Vec<i64>, (usize, usize)> = BTreeMap::new();
    for &i in &rows {
        let x = ds.covariates_of_row(i);
        let key: Vec<i64> = discrete.iter().map(|&c| x[c] as i64).collect();
        let e = strata.entry(key).or_default();
        if ds.treated_of_row(i) == 1 {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    let strata: Vec<StratumCount> = strata
        .into_iter()
        .map(|(key, (t, c))| StratumCount {
            key: key.into_iter().map(|v| v as f64).collect(),
            treated: t,
            control: c,
        })
        .collect();
    for s in &strata {
        if s.treated == 0 || s.control == 0 {
            violations.push(format!(
                "stratum {:?}: {} treated, {} control",
                s.key, s.treated, s.control
            ));
        }
    }

    let mut propensity_range = None;
    if discrete.len() < k && !rows.is_empty() {
        let mut values = Vec::with_capacity(rows.len() * (k + 1));
        let mut y = Vec::with_capacity(rows.len());
        for &i in &rows {
            values.push(1.0);
            values.extend_from_slice(ds.covariates_of_row(i));
            y.push(ds.treated_of_row(i) as f64);
        }
        let mut labels = vec!["(intercept)".to_string()];
        labels.extend(ds.covariate_names().iter().cloned());
        let fitted = DesignMatrix::new(rows.len(), k + 1, values, labels).and_then(|x| {
            let fit = fit_logit(&x, &y, &LogitOptions::default())?;
            predict_probability(&fit, &x, 0.0)
        });
        match fitted {
            Ok(p) => {
                let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if lo < epsilon || hi > 1.0 - epsilon {
                    violations.push(format!(
                        "fitted propensities span [{lo:.3e}, {hi:.6}], outside [{epsilon}, {}]",
                        1.0 - epsilon
                    ));
                }
                propensity_range = Some((lo, hi));
            }
            Err(e) => violations.push(format!("propensity fit failed: {e}")),
        }
    }

    OverlapReport {
        period,
        epsilon,
        strata,
        propensity_range,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(unit: &str, period: i64, y: f64, d: i64) -> Observation {
        Observation {
            unit_id: unit.into(),
            period,
            outcome: y,
            treated: d,
            covariates: vec![],
        }
    }

    #[test]
    fn minimal_csv_loads() {
        let csv = "unit,period,outcome,treatment\na,0,1.0,1\na,1,2.0,1\nb,0,0.5,0\nb,1,0.7,0\n";
        let ds = PanelDataset::read_csv(csv.as_bytes(), &SchemaConfig::default()).unwrap();
        assert_eq!(ds.periods(), &[0, 1]);
        assert_eq!(ds.scheme(), TreatmentScheme::BinarySinglePost);
        assert_eq!(ds.post_period().unwrap(), 1);
        assert_eq!(ds.baseline_period().unwrap(), 0);
        assert_eq!(ds.len(), 4);
    }

    #[test]
    fn duplicate_unit_period_rejected() {
        let csv = "unit,period,outcome,treatment\na,0,1,1\na,0,2,1\nb,0,0,0\n";
        let err = PanelDataset::read_csv(csv.as_bytes(), &SchemaConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateUnitPeriod { row: 1, .. }), "{err}");
    }

    #[test]
    fn missing_column_named() {
        let csv = "id,period,outcome,treatment\na,0,1,1\n";
        let err = PanelDataset::read_csv(csv.as_bytes(), &SchemaConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "unit"));
    }

    #[test]
    fn non_numeric_outcome_names_row() {
        let csv = "unit,period,outcome,treatment\na,0,abc,1\n";
        let err = PanelDataset::read_csv(csv.as_bytes(), &SchemaConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonNumericOutcome { row: 0, ref column, .. } if column == "outcome"));
    }

    #[test]
    fn missing_covariate_is_an_error() {
        let csv = "unit,period,outcome,treatment,x\na,0,1,1,\n";
        let schema = SchemaConfig {
            covariates: vec!["x".into()],
            ..SchemaConfig::default()
        };
        let err = PanelDataset::read_csv(csv.as_bytes(), &schema).unwrap_err();
        assert!(matches!(err, Error::MissingValue { ref column, .. } if column == "x"));
    }

    #[test]
    fn empty_dataset() {
        let csv = "unit,period,outcome,treatment\n";
        let err = PanelDataset::read_csv(csv.as_bytes(), &SchemaConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }

    #[test]
    fn cell_mean_two_points() {
        let ds = PanelDataset::from_observations(
            vec![obs("a", 0, 2.0, 1), obs("b", 0, 4.0, 1), obs("c", 0, 0.0, 0), obs("a", 1, 0.0, 1),
                 obs("b", 1, 0.0, 1), obs("c", 1, 0.0, 0)],
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(ds.cell_mean(0, &GroupFilter::treated()).unwrap(), 3.0);
    }

    #[test]
    fn empty_treated_cell() {
        let ds = PanelDataset::from_observations(
            vec![obs("a", 0, 2.0, 0), obs("a", 1, 0.0, 0)],
            vec![],
            None,
        )
        .unwrap();
        let err = ds.cell_mean(0, &GroupFilter::treated()).unwrap_err();
        assert!(matches!(err, Error::EmptyCell { period: 0, .. }));
    }

    #[test]
    fn multi_period_inferred_and_first_treatment() {
        let ds = PanelDataset::from_observations(
            vec![obs("a", 0, 0.0, 0), obs("a", 1, 0.0, 0), obs("a", 2, 0.0, 1),
                 obs("b", 0, 0.0, 0), obs("b", 1, 0.0, 0), obs("b", 2, 0.0, 0)],
            vec![],
            None,
        )
        .unwrap();
        assert_eq!(ds.scheme(), TreatmentScheme::MultiPeriodPaths);
        assert_eq!(ds.first_treatment_period(), Some(2));
        assert_eq!(ds.pre_periods(), vec![0, 1]);
    }

    #[test]
    fn treated_in_first_period_rejected() {
        let err = PanelDataset::from_observations(
            vec![obs("a", 0, 0.0, 1), obs("a", 1, 0.0, 0)],
            vec![],
            Some(TreatmentScheme::MultiPeriodPaths),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidPanel(_)));
    }

    #[test]
    fn binary_scheme_rejects_varying_treatment() {
        let err = PanelDataset::from_observations(
            vec![obs("a", 0, 0.0, 0), obs("a", 1, 0.0, 1)],
            vec![],
            Some(TreatmentScheme::BinarySinglePost),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidPanel(_)));
    }

    #[test]
    fn pre_period_info_set_rejects_post_period() {
        let ds = PanelDataset::from_observations(
            vec![obs("a", 0, 1.0, 1), obs("a", 1, 2.0, 1), obs("b", 0, 0.5, 0), obs("b", 1, 0.7, 0)],
            vec![],
            None,
        )
        .unwrap();
        assert!(InformationSet::pre_periods(&ds, &[1]).is_err());
        let info = InformationSet::pre_periods(&ds, &[0]).unwrap();
        assert_eq!(info.elements()[0].weight, 1.0);
    }

    #[test]
    fn overlap_flags_stratum_without_controls() {
        let mut rows = Vec::new();
        for (u, d, x) in [("a", 1, 0.0), ("b", 0, 0.0), ("c", 1, 1.0), ("d", 1, 1.0)] {
            for p in 0..2 {
                rows.push(Observation {
                    unit_id: u.into(),
                    period: p,
                    outcome: 0.0,
                    treated: d,
                    covariates: vec![x],
                });
            }
        }
        let ds = PanelDataset::from_observations(rows, vec!["x".into()], None).unwrap();
        let rep = overlap_check(&ds, 1, 0.01);
        assert!(rep.flagged());
        assert_eq!(rep.strata.len(), 2);
        assert_eq!(rep.strata[1].control, 0);
    }

    #[test]
    fn overlap_clean_when_both_groups_everywhere() {
        let mut rows = Vec::new();
        for (u, d, x) in [("a", 1, 0.0), ("b", 0, 0.0), ("c", 1, 1.0), ("d", 0, 1.0)] {
            rows.push(Observation {
                unit_id: u.into(),
                period: 1,
                outcome: 0.0,
                treated: d,
                covariates: vec![x],
            });
            rows.push(Observation {
                unit_id: u.into(),
                period: 0,
                outcome: 0.0,
                treated: d,
                covariates: vec![x],
            });
        }
        let ds = PanelDataset::from_observations(rows, vec!["x".into()], None).unwrap();
        assert!(!overlap_check(&ds, 1, 0.01).flagged());
    }

    #[test]
    fn binned_information_set_weights() {
        let mut rows = Vec::new();
        for (i, x) in [0.1, 0.2, 0.6, 0.9].iter().enumerate() {
            for p in 0..2 {
                rows.push(Observation {
                    unit_id: i.to_string(),
                    period: p,
                    outcome: 0.0,
                    treated: (i % 2) as i64,
                    covariates: vec![*x],
                });
            }
        }
        let ds = PanelDataset::from_observations(rows, vec!["x".into()], None).unwrap();
        let info = InformationSet::binned_covariate(&ds, "x", &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(info.len(), 2);
        assert_eq!(info.elements()[0].n_obs, 2);
        assert!((info.elements()[1].weight - 0.5).abs() < 1e-15);
    }
}
