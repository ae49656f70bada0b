//! File and option parsing helpers.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use wm1::control::ProblemSpec;
use wm1::CadlagPath;

/// Malformed command-line value.
#[derive(Debug)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

pub fn read_path(path: &Path) -> Result<CadlagPath> {
    let text = read_text(path)?;
    serde_json::from_str(&text).with_context(|| format!("invalid path JSON in {}", path.display()))
}

pub fn read_problem(path: &Path) -> Result<ProblemSpec> {
    let text = read_text(path)?;
    let spec: ProblemSpec =
        serde_json::from_str(&text).with_context(|| format!("invalid problem JSON in {}", path.display()))?;
    spec.validate().with_context(|| format!("problem in {} is inconsistent", path.display()))?;
    Ok(spec)
}

pub fn parse_f64_list(text: &str, name: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| ParseError(format!("{name}: cannot parse {s:?} as a number"))))
        .collect::<std::result::Result<_, _>>()?;
    if values.is_empty() {
        return Err(ParseError(format!("{name} is empty")).into());
    }
    Ok(values)
}

pub fn parse_u64_list(text: &str, name: &str) -> Result<Vec<u64>> {
    let values: Vec<u64> = text
        .split(',')
        .map(|s| s.trim().parse::<u64>().map_err(|_| ParseError(format!("{name}: cannot parse {s:?} as an integer"))))
        .collect::<std::result::Result<_, _>>()?;
    Ok(values)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialise");
    s.push('\n');
    s
}

/// Writes to `out`, or to standard output when it is `None`.
pub fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

pub fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content).with_context(|| format!("cannot write {}", path.display()))
}
