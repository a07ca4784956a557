use std::fmt::Write as _;
use std::fs;

use serde_json::Value;

use crate::commands::CliError;
use crate::{Format, Global};

/// One command result in every format it supports.
pub struct Report {
    pub json: Value,
    pub text: String,
    pub csv: Option<String>,
}

/// Writes `report` in the requested format to `--output` or standard output.
pub fn emit(g: &Global, command: &str, report: Report) -> Result<(), CliError> {
    let body = render(g.format, command, report)?;
    match &g.output {
        Some(path) => {
            fs::write(path, body).map_err(|source| CliError::Run(outabs::Error::Io { path: path.clone(), source }))
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

pub fn render(format: Format, command: &str, report: Report) -> Result<String, CliError> {
    Ok(match format {
        Format::Json => {
            let mut v = report.json;
            if let Value::Object(map) = &mut v {
                map.insert("format_version".into(), Value::from(outabs::model::FORMAT_VERSION));
            }
            serde_json::to_string_pretty(&v).map_err(|e| CliError::Run(e.into()))? + "\n"
        }
        Format::Text => report.text,
        Format::Csv => {
            report.csv.ok_or_else(|| CliError::Usage(format!("`{command}` has no CSV output; use json or text")))?
        }
    })
}

/// Compact rendering of a vector in scientific notation.
pub fn vec_text(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Left-aligned columns padded to the widest cell.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}", w = *w)).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec(), &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("  "));
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",") + "\n";
    for r in rows {
        out += &r.join(",");
        out.push('\n');
    }
    out
}
