//! Dataset files, output tables and atomic file writes.
//!
//! Dataset files are comma-separated text with the header
//! `temperature,rate` and one observation per line. Values are written with
//! the shortest representation that parses back to the same `f64`, so a
//! written dataset reloads bit-for-bit.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub const DATASET_HEADER: &str = "temperature,rate";
/// Version of the JSON table layout.
pub const SCHEMA_VERSION: u32 = 1;
/// Marker for undefined cells.
pub const NA: &str = "NA";

/// Parses dataset text; line numbers in errors are 1-based.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((hl, header)) = lines.next() else {
        return Err(Error::Data { line: 1, msg: "empty file".into() });
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["temperature", "rate"] {
        return Err(Error::Data { line: hl + 1, msg: format!("expected header `{DATASET_HEADER}`, found `{}`", header.trim()) });
    }
    let mut ts = Vec::new();
    let mut rs = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Data { line: line_no, msg: format!("expected 2 fields, found {}", fields.len()) });
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| Error::Data { line: line_no, msg: format!("{what} `{s}` is not a number") })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Data { line: line_no, msg: format!("{what} `{s}` is not finite") })
            }
        };
        let t = parse(fields[0], "temperature")?;
        let r = parse(fields[1], "rate")?;
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Data { line: line_no, msg: format!("rate {r} outside [0, 1]") });
        }
        ts.push(t);
        rs.push(r);
    }
    if ts.is_empty() {
        return Err(Error::Data { line: hl + 1, msg: "no observations after the header".into() });
    }
    if ts.len() < 3 {
        return Err(Error::DegenerateDataset(format!("need at least 3 observations, got {}", ts.len())));
    }
    Dataset::new(ts, rs)
}

/// Reads and validates a dataset file, logging any zero rates.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let data = parse_dataset(&text)?;
    let zeros = data.zero_report();
    if zeros.count > 0 {
        log::info!("{} zero rates at temperatures {:?}", zeros.count, zeros.temperatures);
    }
    Ok(data)
}

pub fn format_dataset(data: &Dataset) -> String {
    let mut s = String::with_capacity(16 * data.len() + 20);
    s.push_str(DATASET_HEADER);
    s.push('\n');
    for (t, r) in data.iter() {
        let _ = writeln!(s, "{t},{r}");
    }
    s
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    atomic_write(path, format_dataset(data).as_bytes())
}

/// Writes through a temporary file in the same directory and renames it
/// into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Config(format!("`{}` is not a file path", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// One table cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    /// Estimate with its standard error, rendered `value (se)`.
    WithSe(f64, f64),
    Na,
}

impl Cell {
    pub fn num(v: f64) -> Self {
        if v.is_finite() {
            Cell::Num(v)
        } else {
            Cell::Na
        }
    }

    pub fn opt(v: Option<f64>) -> Self {
        v.map_or(Cell::Na, Cell::num)
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::WithSe(v, se) if v.is_finite() && se.is_finite() => json!({ "value": v, "se": se }),
            _ => json!(NA),
        }
    }

    fn text(&self, digits: usize) -> String {
        match self {
            Cell::Num(v) => fmt_num(*v, digits),
            Cell::Text(s) => s.clone(),
            Cell::WithSe(v, se) if v.is_finite() && se.is_finite() => format!("{} ({})", fmt_num(*v, digits), fmt_num(*se, digits)),
            _ => NA.to_string(),
        }
    }
}

fn fmt_num(v: f64, digits: usize) -> String {
    let a = v.abs();
    if v != 0.0 && !(1e-3..1e6).contains(&a) {
        format!("{v:.digits$e}")
    } else {
        format!("{v:.digits$}")
    }
}

/// A named table rendered both as JSON and as aligned text.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Free-form notes carried into both renderings.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let mut obj = serde_json::Map::new();
                for (c, v) in self.columns.iter().zip(r) {
                    obj.insert(c.clone(), v.json());
                }
                Value::Object(obj)
            })
            .collect();
        json!({
            "schema_version": SCHEMA_VERSION,
            "table": self.name,
            "columns": self.columns,
            "rows": rows,
            "notes": self.notes,
        })
    }

    pub fn to_text(&self, digits: usize) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(|c| c.text(digits)).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| cells.iter().map(|r| r[j].len()).chain([self.columns[j].len()]).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        let line = |s: &mut String, row: &[String]| {
            let parts: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(j, c)| if j == 0 { format!("{c:<w$}", w = widths[j]) } else { format!("{c:>w$}", w = widths[j]) })
                .collect();
            s.push_str(parts.join("  ").trim_end());
            s.push('\n');
        };
        line(&mut s, &self.columns);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut s, &rule);
        for r in &cells {
            line(&mut s, r);
        }
        for n in &self.notes {
            let _ = writeln!(s, "# {n}");
        }
        s
    }

    /// Writes `<dir>/<name>.json` and `<dir>/<name>.txt`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(format!("{}.json", self.name)), &self.to_json())?;
        atomic_write(&dir.join(format!("{}.txt", self.name)), self.to_text(4).as_bytes())
    }
}

/// Pretty JSON, atomically.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_row() {
        let d = parse_dataset("temperature,rate\n15,0.019\n20,0.05\n25,0.08\n").unwrap();
        assert_eq!(d.temperatures()[0], 15.0);
        assert_eq!(d.rates()[0], 0.019);
    }

    #[test]
    fn rate_above_one_names_line() {
        let e = parse_dataset("temperature,rate\n15,0.019\n20,1.5\n25,0.1\n").unwrap_err();
        assert!(matches!(e, Error::Data { line: 3, .. }), "{e}");
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(parse_dataset("").is_err());
        assert!(parse_dataset("temperature,rate\n").is_err());
    }

    #[test]
    fn malformed_row_names_line() {
        let e = parse_dataset("temperature,rate\n15,0.019\n20;0.05\n").unwrap_err();
        assert!(matches!(e, Error::Data { line: 3, .. }), "{e}");
    }

    #[test]
    fn text_round_trip_is_exact() {
        let d = Dataset::new(vec![15.0, 20.1, 33.3], vec![0.1 + 0.2, 1.0 / 3.0, 0.0]).unwrap();
        assert_eq!(parse_dataset(&format_dataset(&d)).unwrap(), d);
    }

    #[test]
    fn non_finite_cells_render_as_na() {
        let mut t = Table::new("x", &["model", "v"]);
        t.push(vec![Cell::Text("a".into()), Cell::num(f64::NAN)]);
        assert!(t.to_text(3).contains("NA"));
        assert_eq!(t.to_json()["rows"][0]["v"], "NA");
    }
}
