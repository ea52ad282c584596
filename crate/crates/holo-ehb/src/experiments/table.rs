use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Complex64, EhbError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnData {
    Real(Vec<f64>),
    /// Written to CSV as `<name>_re`, `<name>_im`.
    Complex(Vec<Complex64>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Real(v) => v.len(),
            ColumnData::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub kind: String,
    /// SHA-256 of the canonical JSON of the spec.
    pub spec_hash: String,
    pub seeds: Vec<u64>,
    pub runtime_s: f64,
    pub workers: usize,
    /// Number of (point, seed) evaluations that failed.
    pub failures: usize,
    pub notes: Vec<String>,
    /// The spec itself, enough to re-run the table.
    pub spec: Option<serde_json::Value>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub metadata: TableMetadata,
}

/// Shortest round-trip decimal, so equal tables give equal bytes.
fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:?}")
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "NaN" | "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

impl ResultTable {
    pub fn new(metadata: TableMetadata) -> Self {
        Self {
            columns: Vec::new(),
            metadata,
        }
    }

    pub fn push_real(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        self.push(Column {
            name: name.into(),
            data: ColumnData::Real(values),
        })
    }

    pub fn push(&mut self, column: Column) -> Result<()> {
        if let Some(first) = self.columns.first() {
            if first.data.len() != column.data.len() {
                return Err(EhbError::Schema(format!(
                    "column {} has {} rows, table has {}",
                    column.name,
                    column.data.len(),
                    first.data.len()
                )));
            }
        }
        if self.columns.iter().any(|c| c.name == column.name) {
            return Err(EhbError::Schema(format!("duplicate column {}", column.name)));
        }
        self.columns.push(column);
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.name == name).and_then(|c| match &c.data {
            ColumnData::Real(v) => Some(v.as_slice()),
            ColumnData::Complex(_) => None,
        })
    }

    /// Complex columns split into real and imaginary parts.
    fn flat(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        for c in &self.columns {
            match &c.data {
                ColumnData::Real(v) => out.push((c.name.clone(), v.clone())),
                ColumnData::Complex(v) => {
                    out.push((format!("{}_re", c.name), v.iter().map(|z| z.re).collect()));
                    out.push((format!("{}_im", c.name), v.iter().map(|z| z.im).collect()));
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let flat = self.flat();
        let mut s = flat.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(",");
        s.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = flat.iter().map(|(_, v)| fmt_f64(v[r])).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Reads a CSV written by `to_csv`; every column comes back real.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| EhbError::Schema("empty CSV".into()))?;
        let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut data = vec![Vec::new(); names.len()];
        for (r, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != names.len() {
                return Err(EhbError::Schema(format!(
                    "row {} has {} cells, header has {}",
                    r + 1,
                    cells.len(),
                    names.len()
                )));
            }
            for (k, cell) in cells.iter().enumerate() {
                let v = parse_f64(cell)
                    .ok_or_else(|| EhbError::Schema(format!("row {} column {}: not a number: {cell}", r + 1, names[k])))?;
                data[k].push(v);
            }
        }
        let mut t = ResultTable::default();
        for (name, values) in names.into_iter().zip(data) {
            t.push_real(&name, values)?;
        }
        Ok(t)
    }

    pub fn sidecar_path(csv: &Path) -> PathBuf {
        csv.with_extension("json")
    }

    /// Writes the CSV and its metadata sidecar next to it.
    pub fn write(&self, csv: &Path) -> Result<()> {
        if let Some(dir) = csv.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(csv, self.to_csv())?;
        std::fs::write(Self::sidecar_path(csv), serde_json::to_string_pretty(&self.metadata)?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Absolute tolerance per column with a default for the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub default: f64,
    #[serde(default)]
    pub per_column: BTreeMap<String, f64>,
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Self {
            default: tol,
            per_column: BTreeMap::new(),
        }
    }

    pub fn for_column(&self, name: &str) -> f64 {
        self.per_column.get(name).copied().unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnDeviation {
    pub name: String,
    pub max_abs_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub columns: Vec<ColumnDeviation>,
    pub pass: bool,
}

impl CompareReport {
    pub fn failing(&self) -> Vec<&str> {
        self.columns.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }
}

impl std::fmt::Display for CompareReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.columns {
            writeln!(
                f,
                "{} {}: max deviation {:.3e} (tol {:.1e})",
                if c.pass { "ok  " } else { "FAIL" },
                c.name,
                c.max_abs_deviation,
                c.tolerance
            )?;
        }
        write!(f, "{}", if self.pass { "PASS" } else { "FAIL" })
    }
}

/// Max |a − b| per column. NaN matches NaN; NaN against a number is an
/// infinite deviation.
pub fn compare(baseline: &ResultTable, candidate: &ResultTable, tolerances: &Tolerances) -> Result<CompareReport> {
    let a = baseline.flat();
    let b = candidate.flat();
    let names_a: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let names_b: Vec<&str> = b.iter().map(|(n, _)| n.as_str()).collect();
    if names_a != names_b {
        return Err(EhbError::Schema(format!("columns differ: {names_a:?} vs {names_b:?}")));
    }
    if baseline.rows() != candidate.rows() {
        return Err(EhbError::Schema(format!(
            "row counts differ: {} vs {}",
            baseline.rows(),
            candidate.rows()
        )));
    }
    let columns: Vec<ColumnDeviation> = a
        .iter()
        .zip(&b)
        .map(|((name, va), (_, vb))| {
            let dev = va
                .iter()
                .zip(vb)
                .map(|(x, y)| match (x.is_nan(), y.is_nan()) {
                    (true, true) => 0.0,
                    (false, false) if x == y => 0.0,
                    (false, false) => (x - y).abs(),
                    _ => f64::INFINITY,
                })
                .fold(0.0, f64::max);
            let tol = tolerances.for_column(name);
            ColumnDeviation {
                name: name.clone(),
                max_abs_deviation: dev,
                tolerance: tol,
                pass: dev <= tol,
            }
        })
        .collect();
    let pass = columns.iter().all(|c| c.pass);
    Ok(CompareReport { columns, pass })
}
