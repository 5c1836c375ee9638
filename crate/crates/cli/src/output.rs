use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::Common;

/// A CSV table; secondary tables go to `<stem>.<suffix>.csv` next to `--out`.
pub struct Table {
    pub suffix: Option<&'static str>,
    pub text: String,
}

impl Table {
    pub fn primary(text: String) -> Self {
        Self { suffix: None, text }
    }

    pub fn secondary(suffix: &'static str, text: String) -> Self {
        Self { suffix: Some(suffix), text }
    }
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{suffix}.{ext}"))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes the primary table to `--out` (or stdout) and each secondary table
/// beside it. On stdout the tables follow each other, separated by a blank
/// line.
pub fn emit_tables(common: &Common, tables: Vec<Table>) -> Result<()> {
    match &common.out {
        Some(out) => {
            for t in &tables {
                let path = t.suffix.map_or_else(|| out.clone(), |s| sibling(out, s));
                write_file(&path, &t.text)?;
            }
            Ok(())
        }
        None => {
            let joined = tables.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join("\n");
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(joined.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

pub fn emit_text(common: &Common, text: String) -> Result<()> {
    emit_tables(common, vec![Table::primary(text)])
}

pub fn emit_json<T: Serialize + ?Sized>(common: &Common, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit_text(common, text)
}

/// Shortest round-trip rendering of a float.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Builds CSV text line by line.
#[derive(Default)]
pub struct Csv(String);

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut c = Self::default();
        c.row(header.iter().map(|s| s.to_string()));
        c
    }

    pub fn row(&mut self, fields: impl IntoIterator<Item = String>) {
        let fields: Vec<String> = fields.into_iter().collect();
        self.0.push_str(&fields.join(","));
        self.0.push('\n');
    }

    pub fn finish(self) -> String {
        self.0
    }
}
