//! Report rendering shared by every subcommand: canonical numeric
//! formatting, deterministic hashing of the run configuration, and the
//! on-disk bundle copy of standard output.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};

/// Rewrites every float in the tree to 17 significant digits so JSON
/// output is byte-stable and round-trips exactly; integer-typed fields
/// keep their plain representation.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) => {
            if n.is_u64() || n.is_i64() {
                Value::Number(n)
            } else {
                let f = n.as_f64().expect("report numbers are finite");
                Value::Number(float_literal(f))
            }
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        Value::Object(fields) => Value::Object(
            fields
                .into_iter()
                .map(|(k, v)| (k, canonical(v)))
                .collect::<Map<_, _>>(),
        ),
        other => other,
    }
}

fn float_literal(f: f64) -> Number {
    float_cell(f).parse().expect("valid number literal")
}

/// A float at 17 significant digits, the cell format used in CSV rows.
pub fn float_cell(f: f64) -> String {
    format!("{f:.16e}")
}

/// One JSON line: report keys first, then the run configuration, all
/// floats canonicalized. Keys serialize sorted, so identical inputs
/// yield identical bytes.
pub fn json_line(command: &str, fields: Vec<(&str, Value)>, config: Value) -> String {
    let mut m = Map::new();
    m.insert("command".into(), Value::String(command.into()));
    for (k, v) in fields {
        m.insert(k.into(), v);
    }
    m.insert("config".into(), config);
    let mut line = serde_json::to_string(&canonical(Value::Object(m))).expect("serializable");
    line.push('\n');
    line
}

/// CSV table with the given header; every cell printed at 17
/// significant digits.
pub fn csv_table(header: &str, rows: &[Vec<f64>]) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// First eight hex digits of the SHA-256 of the run descriptor.
pub fn config_hash(descriptor: &Value) -> String {
    let bytes = serde_json::to_string(&canonical(descriptor.clone())).expect("serializable");
    let digest = Sha256::digest(bytes.as_bytes());
    let mut h = String::with_capacity(8);
    for b in &digest[..4] {
        write!(h, "{b:02x}").expect("string write");
    }
    h
}

/// Writes the exact stdout bytes to `<command>-<hash>.<ext>` under
/// `dir`, creating the directory if needed, and returns the path.
pub fn write_bundle(
    dir: &Path,
    command: &str,
    hash: &str,
    ext: &str,
    bytes: &str,
) -> io::Result<PathBuf> {
    if bytes.is_empty() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "refusing to bundle an empty report",
        ));
    }
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{command}-{hash}.{ext}"));
    fs::write(&path, bytes)?;
    Ok(path)
}
