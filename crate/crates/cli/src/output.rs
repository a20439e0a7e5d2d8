//! Rendering of command results as CSV (with commented metadata headers) or
//! as a JSON document mirroring the same content.

use serde_json::{json, Map, Value};
use sigprop::report::fmt_float;

pub enum Format {
    Csv,
    Json,
}

/// A result table: metadata key-value pairs, column names, and rows.
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<&'static str>,
    /// Cells are pre-rendered; `None` prints as an empty CSV field / JSON null.
    pub rows: Vec<Vec<Option<f64>>>,
    /// Columns whose cells are strings rather than floats (e.g. regime labels).
    pub text_rows: Vec<Vec<String>>,
    pub text_columns: Vec<&'static str>,
}

impl Table {
    pub fn numeric(metadata: Vec<(String, String)>, columns: Vec<&'static str>) -> Self {
        Table {
            metadata,
            columns,
            rows: Vec::new(),
            text_rows: Vec::new(),
            text_columns: Vec::new(),
        }
    }

    pub fn render(&self, format: &Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        let mut header: Vec<&str> = self.columns.to_vec();
        header.extend(self.text_columns.iter().copied());
        out.push_str(&header.join(","));
        out.push('\n');
        let empty = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let mut fields: Vec<String> = row
                .iter()
                .map(|c| c.map(fmt_float).unwrap_or_default())
                .collect();
            let texts = self.text_rows.get(i).unwrap_or(&empty);
            fields.extend(texts.iter().cloned());
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json(&self) -> String {
        let mut meta = Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), Value::String(v.clone()));
        }
        let empty = Vec::new();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut obj = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    obj.insert(
                        name.to_string(),
                        cell.map(|v| json!(v)).unwrap_or(Value::Null),
                    );
                }
                let texts = self.text_rows.get(i).unwrap_or(&empty);
                for (name, cell) in self.text_columns.iter().zip(texts) {
                    obj.insert(name.to_string(), Value::String(cell.clone()));
                }
                Value::Object(obj)
            })
            .collect();
        let doc = json!({ "metadata": Value::Object(meta), "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("json rendering");
        s.push('\n');
        s
    }
}
