//! Tabular results and their CSV / JSON rendering.

use std::io::Write;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Null,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Null, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

/// Named columns and rows in emission order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Table {
            name,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything one command emits: the main `data` table, optional extra
/// tables, and command-specific metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub data: Table,
    pub extra: Vec<Table>,
    pub meta: Map<String, Value>,
}

impl Report {
    pub fn new(data: Table) -> Self {
        Report {
            data,
            extra: Vec::new(),
            meta: Map::new(),
        }
    }
}

/// `x` rounded to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

/// Shortest text that reads back as `round_sig(x, digits)`; positional
/// notation for moderate magnitudes, exponent form otherwise.
pub fn format_sig(x: f64, digits: usize) -> String {
    let r = round_sig(x, digits);
    let a = r.abs();
    if r == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn cell_text(c: &Cell, digits: usize) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Float(x) => format_sig(*x, digits),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Null => String::new(),
    }
}

fn cell_json(c: &Cell, digits: usize) -> Value {
    match c {
        Cell::Int(i) => Value::from(*i),
        Cell::Float(x) if x.is_finite() => Value::from(round_sig(*x, digits)),
        Cell::Float(_) | Cell::Null => Value::Null,
        Cell::Bool(b) => Value::Bool(*b),
        Cell::Text(s) => Value::String(s.clone()),
    }
}

fn table_json(t: &Table, digits: usize) -> Value {
    let rows = t
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = t
                .columns
                .iter()
                .zip(row)
                .map(|(k, c)| (k.to_string(), cell_json(c, digits)))
                .collect();
            Value::Object(obj)
        })
        .collect();
    Value::Array(rows)
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("writing csv: {e}"))
}

/// Main table first; each extra table follows after a blank line with its
/// own header.
pub fn write_csv(report: &Report, digits: usize, out: &mut dyn Write) -> Result<()> {
    for (i, t) in std::iter::once(&report.data)
        .chain(&report.extra)
        .enumerate()
    {
        if i > 0 {
            writeln!(out).map_err(io_err)?;
        }
        let mut w = csv::Writer::from_writer(&mut *out);
        w.write_record(&t.columns).map_err(csv_err)?;
        for row in &t.rows {
            w.write_record(row.iter().map(|c| cell_text(c, digits)))
                .map_err(csv_err)?;
        }
        w.flush().map_err(io_err)?;
    }
    Ok(())
}

pub fn to_json(report: &Report, digits: usize) -> Value {
    let mut top = Map::new();
    top.insert("meta".into(), Value::Object(report.meta.clone()));
    top.insert("data".into(), table_json(&report.data, digits));
    for t in &report.extra {
        top.insert(t.name.into(), table_json(t, digits));
    }
    Value::Object(top)
}

pub fn write_json(report: &Report, digits: usize, out: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &to_json(report, digits))
        .map_err(|e| Error::InvalidArgument(format!("writing json: {e}")))?;
    writeln!(out).map_err(io_err)
}

pub(crate) fn io_err(e: std::io::Error) -> Error {
    Error::InvalidArgument(format!("output: {e}"))
}
