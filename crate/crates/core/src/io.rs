//! CSV tables, group files, lagged features and row ranges.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};

use crate::design::GroupSpec;
use crate::error::{Error, Result};

/// Numeric table read from a CSV file with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    /// Column-major values.
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn from_reader<R: std::io::Read>(reader: R, ignore: &[String]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let all: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let keep: Vec<usize> = (0..all.len()).filter(|&k| !ignore.contains(&all[k])).collect();
        for name in ignore {
            if !all.contains(name) {
                return Err(Error::data(format!("ignored column '{name}' not in the header")));
            }
        }
        let headers: Vec<String> = keep.iter().map(|&k| all[k].clone()).collect();
        for (k, h) in headers.iter().enumerate() {
            if headers[..k].contains(h) {
                return Err(Error::data(format!("duplicate column '{h}'")));
            }
        }
        let mut columns = vec![Vec::new(); headers.len()];
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            for (dst, &k) in keep.iter().enumerate() {
                let cell = rec.get(k).unwrap_or("");
                let v: f64 = cell.parse().map_err(|_| {
                    Error::data(format!("row {}: column '{}': not a number: '{cell}'", row + 1, all[k]))
                })?;
                if !v.is_finite() {
                    return Err(Error::data(format!("row {}: column '{}': non-finite value", row + 1, all[k])));
                }
                columns[dst].push(v);
            }
        }
        Ok(Self { headers, columns })
    }

    pub fn from_path(path: &Path, ignore: &[String]) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
        Self::from_reader(file, ignore)
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| Error::data(format!("no column named '{name}'")))
    }

    /// Appends `lag` shifted copies of each requested column as
    /// `<col>_lag1 .. <col>_lagk` and drops the first `max k` rows.
    pub fn with_lags(&self, lags: &[Lag]) -> Result<Self> {
        let drop = lags.iter().map(|l| l.k).max().unwrap_or(0);
        if drop >= self.rows() && drop > 0 {
            return Err(Error::data(format!("lag {drop} leaves no rows out of {}", self.rows())));
        }
        let mut out = Table {
            headers: self.headers.clone(),
            columns: self.columns.iter().map(|c| c[drop..].to_vec()).collect(),
        };
        for lag in lags {
            let src = self.column(&lag.column)?;
            for s in 1..=lag.k {
                let name = format!("{}_lag{s}", lag.column);
                if out.headers.contains(&name) {
                    return Err(Error::data(format!("duplicate column '{name}'")));
                }
                out.headers.push(name);
                out.columns.push((drop..src.len()).map(|i| src[i - s]).collect());
            }
        }
        Ok(out)
    }
}

/// `column:k` lag request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lag {
    pub column: String,
    pub k: usize,
}

impl FromStr for Lag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (column, k) = s.rsplit_once(':').ok_or_else(|| format!("expected column:k, got '{s}'"))?;
        let k: usize = k.parse().map_err(|_| format!("bad lag count in '{s}'"))?;
        if column.is_empty() || k == 0 {
            return Err(format!("expected column:k with k >= 1, got '{s}'"));
        }
        Ok(Self {
            column: column.to_string(),
            k,
        })
    }
}

impl fmt::Display for Lag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.column, self.k)
    }
}

/// Half-open row range `start:end`, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowRange {
    pub start: usize,
    pub end: usize,
}

impl RowRange {
    pub fn check(&self, rows: usize) -> Result<()> {
        if self.start >= self.end || self.end > rows {
            return Err(Error::data(format!("row range {self} out of bounds for {rows} rows")));
        }
        Ok(())
    }

    pub fn indices(&self) -> Vec<usize> {
        (self.start..self.end).collect()
    }
}

impl FromStr for RowRange {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected start:end, got '{s}'"))?;
        let start = a.parse().map_err(|_| format!("bad range start in '{s}'"))?;
        let end = b.parse().map_err(|_| format!("bad range end in '{s}'"))?;
        Ok(Self { start, end })
    }
}

impl fmt::Display for RowRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

/// Named covariate groups in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMap {
    pub groups: Vec<(String, Vec<String>)>,
}

impl GroupMap {
    /// `{"group": ["col", ...], ...}`; key order is preserved.
    pub fn from_json(text: &str) -> Result<Self> {
        let map: Map<String, Value> = serde_json::from_str(text)?;
        let mut groups = Vec::with_capacity(map.len());
        let mut seen: Vec<&str> = Vec::new();
        for (name, cols) in &map {
            let cols: Vec<String> = serde_json::from_value(cols.clone())
                .map_err(|_| Error::data(format!("group '{name}' must list column names")))?;
            if cols.is_empty() {
                return Err(Error::data(format!("group '{name}' is empty")));
            }
            groups.push((name.clone(), cols));
        }
        for (_, cols) in &groups {
            for c in cols {
                if seen.contains(&c.as_str()) {
                    return Err(Error::data(format!("column '{c}' appears in more than one group")));
                }
                seen.push(c);
            }
        }
        Ok(Self { groups })
    }

    /// One group per column.
    pub fn singletons(columns: &[String]) -> Self {
        Self {
            groups: columns.iter().map(|c| (c.clone(), vec![c.clone()])).collect(),
        }
    }

    pub fn columns(&self) -> Vec<&str> {
        self.groups.iter().flat_map(|(_, c)| c.iter().map(String::as_str)).collect()
    }

    pub fn spec(&self) -> GroupSpec {
        GroupSpec::new(self.groups.iter().map(|(_, c)| c.len()).collect()).expect("groups are nonempty")
    }

    /// Every table column except the response must be grouped, and every
    /// grouped column must exist.
    pub fn check_covers(&self, table: &Table, response: &str) -> Result<()> {
        let grouped = self.columns();
        for c in &grouped {
            if *c == response {
                return Err(Error::data(format!("response '{response}' cannot be a covariate")));
            }
            table.column(c)?;
        }
        let missing: Vec<&str> = table
            .headers
            .iter()
            .map(String::as_str)
            .filter(|h| *h != response && !grouped.contains(h))
            .collect();
        if !missing.is_empty() {
            return Err(Error::data(format!(
                "columns not assigned to any group: {} (group them or pass --ignore)",
                missing.join(", ")
            )));
        }
        Ok(())
    }
}

/// Covariate matrix (grouped column order) and response for `rows`.
pub fn extract(table: &Table, groups: &GroupMap, response: &str, rows: &[usize]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let cols: Vec<&[f64]> = groups.columns().iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let y = table.column(response)?;
    let x = DMatrix::from_fn(rows.len(), cols.len(), |i, k| cols[k][rows[i]]);
    let y = DVector::from_fn(rows.len(), |i, _| y[rows[i]]);
    Ok((x, y))
}

/// Parses `a,b,c` into numbers.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("not a number: '{t}'")))
        .collect()
}
