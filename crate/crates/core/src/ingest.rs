//! CSV ingestion of return panels and group assignments.
//!
//! Matrix file: a header row of series ids, then one row per period
//! (`T` rows x `N` columns). Groups file: `series_id,group_tag` per line, with
//! an optional header line.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::panel::{group_structure, DataPanel, GroupStructure};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Treat values as price levels and convert to log returns.
    pub log_returns: bool,
}

const MISSING: [&str; 5] = ["", "na", "nan", "null", "."];

/// Series ids and the `T x N` value matrix.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<(Vec<String>, Matrix<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let ids: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if ids.is_empty() || ids.iter().all(String::is_empty) {
        return Err(Error::Input("matrix file has no series ids".into()));
    }
    if let Some(pos) = ids.iter().position(String::is_empty) {
        return Err(Error::Input(format!("empty series id in column {}", pos + 1)));
    }
    let n = ids.len();
    let mut values = Vec::new();
    let mut t = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let period = row + 1;
        if rec.len() != n {
            return Err(Error::Input(format!(
                "period {period} has {} values, expected {n}",
                rec.len()
            )));
        }
        for (col, field) in rec.iter().enumerate() {
            if MISSING.contains(&field.to_ascii_lowercase().as_str()) {
                return Err(Error::Input(format!(
                    "missing value for series '{}' at period {period}",
                    ids[col]
                )));
            }
            let v: f64 = field.parse().map_err(|_| {
                Error::Input(format!(
                    "unparseable value '{field}' for series '{}' at period {period}",
                    ids[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Input(format!(
                    "non-finite value for series '{}' at period {period}",
                    ids[col]
                )));
            }
            values.push(v);
        }
        t += 1;
    }
    Ok((ids, Matrix::from_vec(t, n, values)?))
}

/// `(series_id, group_tag)` pairs in file order.
pub fn read_groups_csv<R: Read>(reader: R) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() != 2 || rec[0].is_empty() || rec[1].is_empty() {
            return Err(Error::Input(format!(
                "groups file line {} must be 'series_id,group_tag'",
                line + 1
            )));
        }
        if line == 0 && is_header(&rec[0], &rec[1]) {
            continue;
        }
        out.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(out)
}

fn is_header(a: &str, b: &str) -> bool {
    let a = a.to_ascii_lowercase();
    let b = b.to_ascii_lowercase();
    matches!(a.as_str(), "series_id" | "series" | "id") && matches!(b.as_str(), "group_tag" | "group" | "tag")
}

/// `ln(p_t / p_{t-1})` along each column of a `T x N` price matrix.
pub fn log_returns(prices: &Matrix<f64>) -> Result<Matrix<f64>> {
    let (t, n) = (prices.rows(), prices.cols());
    if t < 2 {
        return Err(Error::Input("log returns need at least two periods".into()));
    }
    if let Some(pos) = prices.as_slice().iter().position(|&p| !(p > 0.0)) {
        return Err(Error::Input(format!(
            "price at period {}, column {} is not positive",
            pos / n + 1,
            pos % n + 1
        )));
    }
    Ok(Matrix::from_fn(t - 1, n, |s, i| {
        (prices[(s + 1, i)] / prices[(s, i)]).ln()
    }))
}

/// Builds a validated panel whose variables are ordered group by group
/// (groups numbered by first appearance in the matrix column order).
pub fn assemble(
    ids: Vec<String>,
    data: Matrix<f64>,
    assignments: &[(String, String)],
    options: IngestOptions,
) -> Result<(DataPanel<f64>, GroupStructure)> {
    let mut tag_of: HashMap<&str, &str> = HashMap::with_capacity(assignments.len());
    for (id, tag) in assignments {
        if tag_of.insert(id.as_str(), tag.as_str()).is_some() {
            return Err(Error::Mapping(format!("series '{id}' appears twice in the groups file")));
        }
    }
    let mut seen = std::collections::HashSet::with_capacity(ids.len());
    for id in &ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Input(format!("duplicate series id '{id}'")));
        }
    }
    for (id, _) in assignments {
        if !seen.contains(id.as_str()) {
            return Err(Error::Mapping(format!("series '{id}' is in the groups file but not in the matrix")));
        }
    }
    let mut tags = Vec::with_capacity(ids.len());
    for id in &ids {
        match tag_of.get(id.as_str()) {
            Some(t) => tags.push(*t),
            None => {
                return Err(Error::Mapping(format!("series '{id}' has no group assignment")));
            }
        }
    }

    let data = if options.log_returns {
        log_returns(&data)?
    } else {
        data
    };
    let (groups, order) = group_structure(&tags)?;
    let panel = DataPanel::new(data.transpose(), ids)?.reorder(&order)?;
    Ok((panel, groups))
}

pub fn ingest_readers<R1: Read, R2: Read>(
    matrix: R1,
    groups: R2,
    options: IngestOptions,
) -> Result<(DataPanel<f64>, GroupStructure)> {
    let (ids, data) = read_matrix_csv(matrix)?;
    let assignments = read_groups_csv(groups)?;
    assemble(ids, data, &assignments, options)
}

pub fn ingest_panel(
    matrix_path: impl AsRef<Path>,
    groups_path: impl AsRef<Path>,
    options: IngestOptions,
) -> Result<(DataPanel<f64>, GroupStructure)> {
    ingest_readers(
        File::open(matrix_path.as_ref())?,
        File::open(groups_path.as_ref())?,
        options,
    )
}
