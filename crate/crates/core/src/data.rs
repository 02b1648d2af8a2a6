//! Replicate datasets, CSV ingestion and reduction to sufficient statistics.
//!
//! An individual is summarised by its replicate count `n` and the number of
//! positive replicates `s`. Replicates are exchangeable, so the order and the
//! identity of the replicate columns carry no information.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub id: String,
    pub n: u32,
    pub s: u32,
    /// Known latent state, when a gold standard is available.
    pub status: Option<bool>,
}

impl IndividualRecord {
    pub fn new(id: impl Into<String>, n: u32, s: u32, status: Option<bool>) -> Result<Self> {
        let id = id.into();
        if n == 0 {
            return Err(Error::Validation(format!("individual {id}: n must be at least 1")));
        }
        if s > n {
            return Err(Error::Validation(format!("individual {id}: s = {s} exceeds n = {n}")));
        }
        Ok(Self { id, n, s, status })
    }
}

/// Ordered collection of individuals. Every per-individual output in the
/// crate is aligned with this order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplicateDataset {
    records: Vec<IndividualRecord>,
}

impl ReplicateDataset {
    pub fn new(records: Vec<IndividualRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Validation("dataset has no individuals".into()));
        }
        let mut seen = HashSet::with_capacity(records.len());
        for (row, r) in records.iter().enumerate() {
            if r.n == 0 || r.s > r.n {
                return Err(Error::Validation(format!(
                    "row {}: invalid counts n = {}, s = {} for {}",
                    row + 1,
                    r.n,
                    r.s,
                    r.id
                )));
            }
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("row {}: duplicate id {}", row + 1, r.id)));
            }
        }
        Ok(Self { records })
    }

    /// Builds a dataset from `(n, s)` pairs with generated ids `i1, i2, ...`.
    pub fn from_counts(counts: &[(u32, u32)]) -> Result<Self> {
        let records = counts
            .iter()
            .enumerate()
            .map(|(i, &(n, s))| IndividualRecord::new(format!("i{}", i + 1), n, s, None))
            .collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }

    /// Like [`from_counts`](Self::from_counts) with a known status per individual.
    pub fn from_labelled_counts(counts: &[(u32, u32, bool)]) -> Result<Self> {
        let records = counts
            .iter()
            .enumerate()
            .map(|(i, &(n, s, t))| IndividualRecord::new(format!("i{}", i + 1), n, s, Some(t)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }

    pub fn records(&self) -> &[IndividualRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ns(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.n).collect()
    }

    /// The status vector, or an error listing every individual without one.
    pub fn truth(&self) -> Result<Vec<bool>> {
        let missing: Vec<&str> = self
            .records
            .iter()
            .filter(|r| r.status.is_none())
            .map(|r| r.id.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Validation(format!(
                "status missing for: {}",
                missing.join(", ")
            )));
        }
        Ok(self.records.iter().map(|r| r.status.unwrap_or(false)).collect())
    }

    /// Keeps the individuals at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Argument(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }

    /// Writes the `id,n,s,status` sufficient-statistics CSV.
    pub fn write_sufficient_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["id", "n", "s", "status"])?;
        for r in &self.records {
            let status = match r.status {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            w.write_record([r.id.as_str(), &r.n.to_string(), &r.s.to_string(), status])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Individual-by-replicate matrix of binary cells, `None` marking a missing
/// replicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawReplicateTable {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub cells: Vec<Vec<Option<bool>>>,
    pub status: Vec<Option<bool>>,
}

impl RawReplicateTable {
    pub fn new(
        ids: Vec<String>,
        columns: Vec<String>,
        cells: Vec<Vec<Option<bool>>>,
        status: Vec<Option<bool>>,
    ) -> Result<Self> {
        if ids.len() != cells.len() || ids.len() != status.len() {
            return Err(Error::Validation(format!(
                "table has {} ids, {} rows and {} status entries",
                ids.len(),
                cells.len(),
                status.len()
            )));
        }
        if let Some(row) = cells.iter().position(|r| r.len() != columns.len()) {
            return Err(Error::Validation(format!(
                "row {} has {} cells, expected {}",
                row + 1,
                cells[row].len(),
                columns.len()
            )));
        }
        Ok(Self { ids, columns, cells, status })
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// Keeps only the replicate columns at `columns`.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.columns.len()) {
            return Err(Error::Argument(format!("column {bad} out of range")));
        }
        Ok(Self {
            ids: self.ids.clone(),
            columns: columns.iter().map(|&c| self.columns[c].clone()).collect(),
            cells: self
                .cells
                .iter()
                .map(|row| columns.iter().map(|&c| row[c]).collect())
                .collect(),
            status: self.status.clone(),
        })
    }

    /// Writes `id,<columns...>,status` with empty cells for missing values.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(self.columns.iter().cloned());
        header.push("status".into());
        w.write_record(&header)?;
        let cell = |c: Option<bool>| match c {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        for ((id, row), status) in self.ids.iter().zip(&self.cells).zip(&self.status) {
            let mut line = vec![id.as_str()];
            line.extend(row.iter().map(|&c| cell(c)));
            line.push(cell(*status));
            w.write_record(&line)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Collapses each row to `(n, s)`: `n` observed cells, `s` of them equal to 1.
pub fn reduce_to_sufficient(raw: &RawReplicateTable) -> Result<ReplicateDataset> {
    let records = raw
        .cells
        .iter()
        .zip(&raw.ids)
        .zip(&raw.status)
        .enumerate()
        .map(|(row, ((cells, id), status))| {
            let n = cells.iter().filter(|c| c.is_some()).count() as u32;
            let s = cells.iter().filter(|c| **c == Some(true)).count() as u32;
            if n == 0 {
                return Err(Error::Validation(format!(
                    "row {} ({id}) has no observed replicate",
                    row + 1
                )));
            }
            IndividualRecord::new(id.clone(), n, s, *status)
        })
        .collect::<Result<Vec<_>>>()?;
    ReplicateDataset::new(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CsvFormat {
    /// `id,n,s[,status]`
    Sufficient,
    /// `id,x1,...,xJ[,status]`, empty or `NA` cells missing.
    Wide,
}

pub fn load_csv(path: impl AsRef<Path>, format: CsvFormat) -> Result<ReplicateDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, format)
}

pub fn read_csv<R: Read>(reader: R, format: CsvFormat) -> Result<ReplicateDataset> {
    match format {
        CsvFormat::Sufficient => read_sufficient(reader),
        CsvFormat::Wide => reduce_to_sufficient(&read_wide(reader)?),
    }
}

fn parse_status(field: &str, row: usize) -> Result<Option<bool>> {
    match field.trim() {
        "" | "NA" => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(Error::Parse { row, message: format!("status must be 0 or 1, got {other:?}") }),
    }
}

fn read_sufficient<R: Read>(reader: R) -> Result<ReplicateDataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let expected = ["id", "n", "s"];
    if headers.len() < 3
        || headers[..3] != expected
        || (headers.len() > 3 && (headers.len() != 4 || headers[3] != "status"))
    {
        return Err(Error::Parse {
            row: 0,
            message: format!("expected header id,n,s[,status], got {}", headers.join(",")),
        });
    }

    let mut records = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let count = |i: usize, name: &str| -> Result<u32> {
            field(i).parse::<u32>().map_err(|_| Error::Parse {
                row,
                message: format!("{name} must be a non-negative integer, got {:?}", field(i)),
            })
        };
        let n = count(1, "n")?;
        let s = count(2, "s")?;
        if s > n {
            return Err(Error::Validation(format!("row {row}: s = {s} exceeds n = {n}")));
        }
        if n == 0 {
            return Err(Error::Validation(format!("row {row}: n must be at least 1")));
        }
        let status = parse_status(field(3), row)?;
        records.push(IndividualRecord { id: field(0).to_string(), n, s, status });
    }
    ReplicateDataset::new(records)
}

/// Parses a wide CSV without reducing it.
pub fn read_wide<R: Read>(reader: R) -> Result<RawReplicateTable> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.first().map(String::as_str) != Some("id") {
        return Err(Error::Parse { row: 0, message: "wide format must start with an id column".into() });
    }
    let status_col = headers.iter().position(|h| h == "status");
    let replicate_cols: Vec<usize> = (1..headers.len()).filter(|&c| Some(c) != status_col).collect();

    let mut ids = Vec::new();
    let mut cells = Vec::new();
    let mut status = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec?;
        ids.push(rec.get(0).unwrap_or("").trim().to_string());
        let mut line = Vec::with_capacity(replicate_cols.len());
        for &c in &replicate_cols {
            let cell = match rec.get(c).unwrap_or("").trim() {
                "" | "NA" => None,
                "0" => Some(false),
                "1" => Some(true),
                other => {
                    return Err(Error::Parse {
                        row,
                        message: format!("column {} must be 0, 1 or empty, got {other:?}", headers[c]),
                    })
                }
            };
            line.push(cell);
        }
        cells.push(line);
        status.push(match status_col {
            Some(c) => parse_status(rec.get(c).unwrap_or(""), row)?,
            None => None,
        });
    }
    let columns = replicate_cols.iter().map(|&c| headers[c].clone()).collect();
    RawReplicateTable::new(ids, columns, cells, status)
}

/// Fixed parameters of the replicate model, with `0 < p, q < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: f64,
    pub p: f64,
    pub q: f64,
}

impl ModelParams {
    pub fn new(theta: f64, p: f64, q: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Domain(format!("prevalence {theta} not in (0, 1)")));
        }
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::Domain(format!("false-positivity rate {p} not in (0, 1/2)")));
        }
        if !(q > 0.0 && q < 0.5) {
            return Err(Error::Domain(format!("false-negativity rate {q} not in (0, 1/2)")));
        }
        Ok(Self { theta, p, q })
    }
}

/// Unconstrained `(theta, p, q)` point estimates in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimates {
    pub theta: f64,
    pub p: f64,
    pub q: f64,
}

impl PointEstimates {
    /// Validates the estimates as model parameters.
    pub fn to_params(&self) -> Result<ModelParams> {
        ModelParams::new(self.theta, self.p, self.q)
    }
}

/// Shared estimator: prevalence and error rates from per-individual weights
/// `y_i` in `[0, 1]` standing for `P(T_i = 1)`.
pub(crate) fn weighted_rates(data: &ReplicateDataset, y: &[f64]) -> Result<PointEstimates> {
    debug_assert_eq!(data.len(), y.len());
    let (mut sum_y, mut fp_num, mut fp_den, mut fn_num, mut fn_den) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (r, &yi) in data.records().iter().zip(y) {
        let (n, s) = (f64::from(r.n), f64::from(r.s));
        sum_y += yi;
        fp_num += s * (1.0 - yi);
        fp_den += n * (1.0 - yi);
        fn_num += (n - s) * yi;
        fn_den += n * yi;
    }
    if fp_den <= 0.0 {
        return Err(Error::UndefinedRate {
            rate: "false-positivity rate",
            reason: "no weight on the negative class".into(),
        });
    }
    if fn_den <= 0.0 {
        return Err(Error::UndefinedRate {
            rate: "false-negativity rate",
            reason: "no weight on the positive class".into(),
        });
    }
    Ok(PointEstimates {
        theta: sum_y / data.len() as f64,
        p: fp_num / fp_den,
        q: fn_num / fn_den,
    })
}

/// Prevalence and error rates computed from the known latent states.
pub fn latent_oracle_estimates(data: &ReplicateDataset) -> Result<PointEstimates> {
    let truth = data.truth()?;
    let y: Vec<f64> = truth.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    weighted_rates(data, &y)
}
