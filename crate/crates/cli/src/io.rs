use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use obkit::digest::bytes_digest;
use obkit::GridFunction;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const TABLE_NAMES: [&str; 4] = ["a", "b", "c", "d"];

/// Raw bytes of an input file, with its digest recorded in `digests`.
pub fn read_input(path: &Path, key: &str, digests: &mut BTreeMap<String, String>) -> Result<Vec<u8>, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    digests.insert(key.to_string(), bytes_digest(&bytes));
    Ok(bytes)
}

pub fn parse_json<T: DeserializeOwned>(bytes: &[u8], what: &Path) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::Validation(format!("{}: {e}", what.display())))
}

pub fn read_json<T: DeserializeOwned>(
    path: &Path,
    key: &str,
    digests: &mut BTreeMap<String, String>,
) -> Result<T, CliError> {
    let bytes = read_input(path, key, digests)?;
    parse_json(&bytes, path)
}

pub fn table_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.json"))
}

/// `a.json` … `d.json` from a directory.
pub fn read_tables(dir: &Path, digests: &mut BTreeMap<String, String>) -> Result<[GridFunction; 4], CliError> {
    let mut out = Vec::with_capacity(4);
    for name in TABLE_NAMES {
        let path = table_path(dir, name);
        let t: GridFunction = read_json(&path, name, digests)?;
        t.validate()?;
        out.push(t);
    }
    Ok(out.try_into().expect("four tables"))
}

/// Compact-free, key-ordered JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(format!("serialisation: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(dir: &Path, file: &str, text: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(file);
    fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, file: &str, value: &T) -> Result<PathBuf, CliError> {
    write_text(dir, file, &to_json(value)?)
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    x: f64,
    y: f64,
}

/// Paired samples from a CSV with headers `x,y`.
pub fn read_samples(path: &Path, digests: &mut BTreeMap<String, String>) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let bytes = read_input(path, "samples", digests)?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().map(str::trim).collect::<Vec<_>>() != ["x", "y"] {
        return Err(CliError::Validation(format!("{}: expected headers x,y", path.display())));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for row in rdr.deserialize::<SampleRow>() {
        let row = row.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        xs.push(row.x);
        ys.push(row.y);
    }
    Ok((xs, ys))
}
