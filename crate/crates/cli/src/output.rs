//! Table output shared by the subcommands: CSV with `#` comment lines, or a
//! JSON object with the rows and any extra fields.

use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use rfic_core::{Error, Result};
use serde_json::{Map, Value};

use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Output {
    format: Format,
    path: Option<PathBuf>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    comments: Vec<String>,
    extra: Map<String, Value>,
}

impl Output {
    pub fn new(common: &Common) -> Self {
        Self {
            format: common.format,
            path: common.out.clone(),
            header: Vec::new(),
            rows: Vec::new(),
            comments: Vec::new(),
            extra: Map::new(),
        }
    }

    /// Appends a row; every row of one output shares the same header.
    pub fn record(&mut self, header: &[&str], values: &[String]) {
        debug_assert_eq!(header.len(), values.len());
        if self.header.is_empty() {
            self.header = header.iter().map(|h| h.to_string()).collect();
        }
        self.rows.push(values.to_vec());
    }

    /// A `#` line above the CSV header (ignored in JSON).
    pub fn comment(&mut self, text: &str) {
        self.comments.push(text.to_string());
    }

    /// A top-level field of the JSON object (ignored in CSV).
    pub fn extra(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }

    fn render(&self) -> Result<String> {
        match self.format {
            Format::Csv => {
                let mut buf = Vec::new();
                for c in &self.comments {
                    writeln!(buf, "# {c}").expect("write to memory");
                }
                let mut w = csv::Writer::from_writer(&mut buf);
                let ser = |e: csv::Error| Error::Serialization(e.to_string());
                w.write_record(&self.header).map_err(ser)?;
                for r in &self.rows {
                    w.write_record(r).map_err(ser)?;
                }
                w.flush().map_err(|e| Error::Serialization(e.to_string()))?;
                drop(w);
                String::from_utf8(buf).map_err(|e| Error::Serialization(e.to_string()))
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let obj = self.header.iter().zip(r).map(|(h, v)| (h.clone(), typed(v))).collect();
                        Value::Object(obj)
                    })
                    .collect();
                let mut top = self.extra.clone();
                top.insert("rows".into(), Value::Array(rows));
                serde_json::to_string_pretty(&Value::Object(top))
                    .map(|s| s + "\n")
                    .map_err(|e| Error::Serialization(e.to_string()))
            }
        }
    }

    pub fn finish(self) -> Result<()> {
        let text = self.render()?;
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            }),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

/// Numbers stay numbers in JSON; everything else is a string.
fn typed(v: &str) -> Value {
    if let Ok(i) = v.parse::<i64>() {
        return Value::from(i);
    }
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Value::from(x),
        _ => Value::from(v),
    }
}
