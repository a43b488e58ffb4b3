//! JSON Lines reading and writing.
//!
//! Artifacts written by the pipeline may start with a provenance header line
//! of the form `{"_header": {...}}`; readers skip such lines.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Key that marks a provenance header line.
pub const HEADER_KEY: &str = "_header";

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// True for a `{"_header": ...}` line.
pub fn is_header_line(line: &str) -> bool {
    let trimmed = line.trim_start();
    trimmed.starts_with('{')
        && serde_json::from_str::<serde_json::Value>(trimmed)
            .ok()
            .and_then(|v| {
                v.as_object()
                    .map(|o| o.len() == 1 && o.contains_key(HEADER_KEY))
            })
            .unwrap_or(false)
}

/// Reads every non-blank, non-header line of `path` as a `T`, paired with its
/// 1-based line number.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, JsonlError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| JsonlError::Io {
        path: display.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() || is_header_line(&line) {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            path: display.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, record));
    }
    Ok(out)
}

/// Writes `records` one per line, optionally preceded by a header line.
pub fn write_records<W: Write, T: Serialize>(
    mut out: W,
    header: Option<&serde_json::Value>,
    records: impl IntoIterator<Item = T>,
) -> io::Result<()> {
    if let Some(header) = header {
        let line = serde_json::json!({ HEADER_KEY: header });
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    for record in records {
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detection() {
        assert!(is_header_line(r#"{"_header":{"config_hash":"ab"}}"#));
        assert!(!is_header_line(r#"{"_header":1,"id":"x"}"#));
        assert!(!is_header_line(r#"{"id":"x"}"#));
        assert!(!is_header_line("not json"));
    }

    #[test]
    fn write_then_read_skips_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let header = serde_json::json!({"config_hash": "00"});
        let file = File::create(&path).unwrap();
        write_records(file, Some(&header), [1u32, 2, 3]).unwrap();
        let got: Vec<(usize, u32)> = read_records(&path).unwrap();
        assert_eq!(got, vec![(2, 1), (3, 2), (4, 3)]);
    }
}
