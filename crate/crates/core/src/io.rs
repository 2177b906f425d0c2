//! File helpers shared by every on-disk format.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Write `contents` to `path` atomically: a sibling temp file is written,
/// flushed and renamed over the destination.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Parse one CSV field as a real number; `NaN` is accepted only when `allow_nan`.
pub(crate) fn parse_real(field: &str, allow_nan: bool, line: usize) -> Result<f64> {
    let field = field.trim();
    if field == "NaN" {
        return if allow_nan {
            Ok(f64::NAN)
        } else {
            Err(Error::Format(format!("line {line}: NaN not allowed here")))
        };
    }
    let v: f64 = field
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(Error::Format(format!("line {line}: non-finite value {field:?}")));
    }
    Ok(v)
}

pub(crate) fn parse_count(field: &str, what: &str, line: usize) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: {what} must be a non-negative integer, got {field:?}")))
}
