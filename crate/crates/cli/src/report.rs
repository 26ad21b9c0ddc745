use std::path::Path;

use clap::ValueEnum;
use serde_json::Value;

use ssbmf::probes::Frequency;
use ssbmf::recover::EntryReport;

use crate::{write_text, Failure};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Pretty,
}

/// Header plus records for CSV output.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// A command's result, rendered on demand.
pub struct Report {
    value: Value,
    table: Option<Table>,
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

impl Report {
    pub fn new(value: Value) -> Self {
        Report { value, table: None }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    /// One-row table of the top-level fields; nested values as JSON text.
    fn flat_table(&self) -> Table {
        let mut header = Vec::new();
        let mut row = Vec::new();
        if let Value::Object(map) = &self.value {
            for (key, v) in map {
                header.push(key.clone());
                row.push(scalar(v));
            }
        }
        Table { header, rows: vec![row] }
    }

    fn render(&self, format: Format) -> Result<String, Failure> {
        Ok(match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.value).expect("serializable");
                s.push('\n');
                s
            }
            Format::Csv => {
                let flat;
                let table = match &self.table {
                    Some(t) => t,
                    None => {
                        flat = self.flat_table();
                        &flat
                    }
                };
                let rows = std::iter::once(table.header.clone()).chain(table.rows.iter().cloned());
                ssbmf::io::csv_string(rows)?
            }
            Format::Pretty => {
                let mut out = String::new();
                pretty(&self.value, 0, &mut out);
                out
            }
        })
    }

    /// Write to `out`, or print when no path is given.
    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<(), Failure> {
        let text = self.render(format)?;
        match out {
            Some(path) => write_text(path, &text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn pretty(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        Value::Object(map) => {
            for (key, value) in map {
                match value {
                    Value::Object(_) => {
                        out.push_str(&format!("{pad}{key}:\n"));
                        pretty(value, indent + 1, out);
                    }
                    Value::Array(items) if items.iter().any(|i| i.is_object()) => {
                        out.push_str(&format!("{pad}{key}: {} item(s)\n", items.len()));
                        for item in items {
                            out.push_str(&format!("{pad}  -\n"));
                            pretty(item, indent + 2, out);
                        }
                    }
                    other => out.push_str(&format!("{pad}{key}: {}\n", scalar(other))),
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other))),
    }
}

pub fn entry_table(entries: &[EntryReport]) -> Table {
    let opt = |v: Option<bool>| v.map_or(String::new(), |b| b.to_string());
    Table {
        header: ["row", "col", "estimate", "heavy_flag", "heavy_abs_mass", "heavy_signed_sum", "relative_error"]
            .map(String::from)
            .to_vec(),
        rows: entries
            .iter()
            .map(|e| {
                vec![
                    e.row.to_string(),
                    e.col.to_string(),
                    e.estimate.to_string(),
                    e.heavy_flag.to_string(),
                    opt(e.heavy_abs_mass),
                    opt(e.heavy_signed_sum),
                    e.relative_error.map_or(String::new(), |x| x.to_string()),
                ]
            })
            .collect(),
    }
}

/// Selected fields of an array of objects.
pub fn records_table(records: &Value, fields: &[&str]) -> Table {
    let rows = records
        .as_array()
        .map(|items| {
            items
                .iter()
                .map(|item| fields.iter().map(|f| scalar(&item[*f])).collect())
                .collect()
        })
        .unwrap_or_default();
    Table {
        header: fields.iter().map(|f| f.to_string()).collect(),
        rows,
    }
}

/// `(parameter, frequency, ci_low, ci_high)` rows.
pub fn frequency_table(rows: &[(&str, &Frequency)]) -> Table {
    Table {
        header: ["parameter", "frequency", "ci_low", "ci_high"].map(String::from).to_vec(),
        rows: rows
            .iter()
            .map(|(name, f)| {
                vec![
                    name.to_string(),
                    f.frequency.to_string(),
                    f.ci_low.to_string(),
                    f.ci_high.to_string(),
                ]
            })
            .collect(),
    }
}
