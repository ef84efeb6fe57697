//! Rendering of row tables as Markdown, CSV or JSON.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Md,
}

/// Rows already turned into strings, alongside the typed rows for JSON.
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Lines printed under a Markdown table.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Table { headers: headers.to_vec(), rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn markdown(&self) -> String {
        let mut s = format!("| {} |\n|{}\n", self.headers.join(" | "), "---|".repeat(self.headers.len()));
        for r in &self.rows {
            s += &format!("| {} |\n", r.join(" | "));
        }
        if !self.notes.is_empty() {
            s.push('\n');
            for n in &self.notes {
                s += n;
                s.push('\n');
            }
        }
        s
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).unwrap();
        for r in &self.rows {
            w.write_record(r).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

pub fn render<T: Serialize>(format: Format, table: &Table, rows: &T) -> String {
    match format {
        Format::Md => table.markdown(),
        Format::Csv => table.csv(),
        Format::Json => serde_json::to_string_pretty(rows).unwrap() + "\n",
    }
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}
