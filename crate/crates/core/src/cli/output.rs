//! Output assembly. Files are rendered in memory and only written once every
//! table of a command has been computed.

use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;

pub const TOOL: &str = "sqzcav";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// JSON wrapper around every command result.
#[derive(Debug, Serialize)]
pub struct ResultEnvelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    /// Effective configuration after command-line overrides, without the
    /// output directory.
    pub config: &'a RunConfig,
    /// Unix seconds; null unless requested, so that reruns are
    /// byte-identical.
    pub timestamp: Option<u64>,
    pub warnings: Vec<String>,
    pub result: T,
}

/// A rendered output file.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

pub fn json_file<T: Serialize>(name: &str, value: &T) -> OutputFile {
    let mut contents = serde_json::to_vec_pretty(value).expect("results serialize to JSON");
    contents.push(b'\n');
    OutputFile {
        name: name.to_string(),
        contents,
    }
}

/// Formats a float so that it parses back to the same value.
pub fn cell(v: f64) -> String {
    format!("{v}")
}

pub fn csv_file(name: &str, header: &[&str], rows: &[Vec<String>]) -> OutputFile {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    OutputFile {
        name: name.to_string(),
        contents: w.into_inner().expect("in-memory flush"),
    }
}

/// Writes all files into `dir`, each through a temporary name.
pub fn write_all(dir: &Path, files: &[OutputFile]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for f in files {
        let tmp = dir.join(format!(".{}.partial", f.name));
        std::fs::write(&tmp, &f.contents)?;
        std::fs::rename(&tmp, dir.join(&f.name))?;
    }
    Ok(())
}

/// Lowercase alphanumeric file-name stem for a panel label.
pub fn slug(label: &str) -> String {
    let mut s = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            s.push(c.to_ascii_lowercase());
        } else if c == '.' {
            s.push('p');
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_string()
}
