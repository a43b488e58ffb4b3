//! Artifact files: atomic writes, provenance headers and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use signweave_core::digest::sha256_hex;
use signweave_core::jsonl::{write_records, HEADER_KEY};

use crate::error::{CliError, Result};

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const FORMAT_VERSION: u32 = 1;

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(
        ".{name}.{}.{}.tmp",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(io_error(path, e));
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

pub fn header(artifact: &str, config_hash: &str) -> Value {
    serde_json::json!({
        "artifact": artifact,
        "config_hash": config_hash,
        "format_version": FORMAT_VERSION,
    })
}

/// JSON Lines artifact with a leading `{"_header": ...}` line.
pub fn write_jsonl<T: Serialize>(
    path: &Path,
    artifact: &str,
    config_hash: &str,
    records: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut buf = Vec::new();
    write_records(&mut buf, Some(&header(artifact, config_hash)), records)?;
    write_atomic(path, &buf)
}

/// JSON object artifact; `config_hash` is added as a top-level key.
pub fn write_json<T: Serialize>(path: &Path, config_hash: &str, value: &T) -> Result<()> {
    let mut value = serde_json::to_value(value)?;
    match &mut value {
        Value::Object(obj) => {
            obj.insert("config_hash".into(), Value::String(config_hash.into()));
        }
        other => {
            value = serde_json::json!({"config_hash": config_hash, "value": other.take()});
        }
    }
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Reads the config hash recorded in a JSONL header or a JSON artifact.
pub fn recorded_hash(path: &Path) -> Option<String> {
    let text = fs::read_to_string(path).ok()?;
    let first = text.lines().next()?;
    if let Ok(Value::Object(line)) = serde_json::from_str::<Value>(first) {
        if let Some(h) = line.get(HEADER_KEY) {
            return h.get("config_hash")?.as_str().map(str::to_string);
        }
    }
    let whole: Value = serde_json::from_str(&text).ok()?;
    whole.get("config_hash")?.as_str().map(str::to_string)
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Seed, config hash and artifact digests of every completed stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config_hash: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl RunManifest {
    pub fn path(out_dir: &Path) -> PathBuf {
        out_dir.join(RUN_MANIFEST)
    }

    /// The manifest in `out_dir`, or an empty one when absent or unreadable.
    pub fn load(out_dir: &Path) -> RunManifest {
        read_json(&Self::path(out_dir)).unwrap_or_default()
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&Self::path(out_dir), text.as_bytes())
    }
}
