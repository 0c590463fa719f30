use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::format::sig15;

/// Serializable form shared by every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReportDoc {
    pub kind: String,
    pub params: BTreeMap<String, Value>,
    pub arrays: BTreeMap<String, Vec<f64>>,
    pub fixtures: BTreeMap<String, f64>,
}

impl ReportDoc {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            ..Default::default()
        }
    }

    pub fn param(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.params.insert(name.to_string(), value.into());
        self
    }

    pub fn array(mut self, name: &str, values: Vec<f64>) -> Self {
        self.arrays.insert(name.to_string(), values);
        self
    }

    pub fn fixture(mut self, name: &str, value: f64) -> Self {
        self.fixtures.insert(name.to_string(), value);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// One column per array; shorter columns are left blank.
    pub fn to_csv(&self) -> String {
        let names: Vec<&String> = self.arrays.keys().collect();
        let rows = self.arrays.values().map(Vec::len).max().unwrap_or(0);
        let mut out = names
            .iter()
            .map(|s| s.as_str())
            .collect::<Vec<_>>()
            .join(",");
        out.push('\n');
        for i in 0..rows {
            let row: Vec<String> = names
                .iter()
                .map(|n| {
                    self.arrays[*n]
                        .get(i)
                        .map(|v| sig15(*v))
                        .unwrap_or_default()
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the CSV written by [`ReportDoc::to_csv`] back into named arrays.
    pub fn arrays_from_csv(text: &str) -> Result<BTreeMap<String, Vec<f64>>> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty report CSV".into()))?;
        let names: Vec<String> = header
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for line in lines.filter(|l| !l.trim().is_empty()) {
            for (i, cell) in line.split(',').enumerate() {
                let cell = cell.trim();
                if cell.is_empty() {
                    continue;
                }
                let col = cols
                    .get_mut(i)
                    .ok_or_else(|| Error::Parse(format!("row {line:?} has too many cells")))?;
                col.push(match cell {
                    "inf" => f64::INFINITY,
                    "-inf" => f64::NEG_INFINITY,
                    "NaN" => f64::NAN,
                    _ => cell
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad number {cell:?}")))?,
                });
            }
        }
        Ok(names.into_iter().zip(cols).collect())
    }
}

pub trait Report {
    fn to_doc(&self) -> ReportDoc;

    fn to_json(&self) -> String {
        self.to_doc().to_json()
    }

    fn to_csv(&self) -> String {
        self.to_doc().to_csv()
    }
}
