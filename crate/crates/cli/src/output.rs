//! Deterministic table rendering: CSV with embedded metadata comments, or a
//! JSON object with the same content. Floats carry 17 significant digits so
//! identical configs reproduce byte-identical files.

use anyhow::{Context, Result};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, locale-free.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    U(u64),
    I(i64),
    B(bool),
    S(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::U(x) => x.to_string(),
            Cell::I(x) => x.to_string(),
            Cell::B(x) => x.to_string(),
            Cell::S(s) => {
                if s.contains(',') || s.contains('"') {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::F(x) => {
                if x.is_finite() {
                    serde_json::json!(x)
                } else {
                    serde_json::json!(fmt_f64(*x))
                }
            }
            Cell::U(x) => serde_json::json!(x),
            Cell::I(x) => serde_json::json!(x),
            Cell::B(x) => serde_json::json!(x),
            Cell::S(s) => serde_json::json!(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Table {
    pub subcommand: &'static str,
    pub config_line: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(subcommand: &'static str, config_line: String, columns: Vec<&'static str>) -> Self {
        Table { subcommand, config_line, columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                out.push_str(&format!("# imbal {ARTIFACT_VERSION} {}\n", self.subcommand));
                out.push_str(&format!("# config:{}\n", self.config_line));
                out.push_str(&self.columns.join(","));
                out.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                    out.push_str(&cells.join(","));
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let rows: Vec<serde_json::Value> = self
                    .rows
                    .iter()
                    .map(|row| {
                        let obj: serde_json::Map<String, serde_json::Value> = self
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect();
                        serde_json::Value::Object(obj)
                    })
                    .collect();
                let doc = serde_json::json!({
                    "artifact": format!("imbal {ARTIFACT_VERSION}"),
                    "subcommand": self.subcommand,
                    "config": self.config_line.trim(),
                    "rows": rows,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
                s.push('\n');
                s
            }
        }
    }
}

/// Write to a file, or stdout when the destination is `-`.
pub fn write_output(dest: &Path, content: &str) -> Result<()> {
    if dest == Path::new("-") {
        std::io::stdout().write_all(content.as_bytes()).context("writing stdout")?;
        Ok(())
    } else {
        if let Some(parent) = dest.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
        }
        std::fs::write(dest, content).with_context(|| format!("writing {}", dest.display()))
    }
}

/// Resolve a file name inside the output directory.
pub fn in_dir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_17_digits() {
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_rendering_is_stable() {
        let mut t = Table::new("demo", " n=4".into(), vec!["a", "b"]);
        t.push(vec![Cell::U(1), Cell::F(0.25)]);
        let one = t.render(Format::Csv);
        let two = t.render(Format::Csv);
        assert_eq!(one, two);
        assert!(one.starts_with(&format!("# imbal {ARTIFACT_VERSION} demo\n# config: n=4\na,b\n")));
        assert!(one.ends_with("1,2.5000000000000000e-1\n"));
    }

    #[test]
    fn json_rendering_contains_rows() {
        let mut t = Table::new("demo", " n=4".into(), vec!["a"]);
        t.push(vec![Cell::B(true)]);
        let doc: serde_json::Value = serde_json::from_str(&t.render(Format::Json)).unwrap();
        assert_eq!(doc["rows"][0]["a"], serde_json::json!(true));
    }
}
