//! Run configuration: one JSON document, overridable key by key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use signweave_core::dataplan::{RoleConfig, DEFAULT_VAL2_K};
use signweave_core::digest::sha256_hex;
use signweave_core::features::{Stream, DEFAULT_DIM};
use signweave_core::SentenceConfig;

use crate::error::{CliError, Result};

/// Environment variable that replaces `cache_root`.
pub const CACHE_ENV: &str = "SIGNWEAVE_CACHE";

/// Keys holding paths; relative values in a config file are resolved
/// against the file's directory.
const PATH_KEYS: [&str; 5] = ["manifest", "cache_root", "output_dir", "val1", "synonyms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractorKind {
    Mock,
    External,
}

fn default_n() -> usize {
    13
}
fn default_roles() -> RoleConfig {
    RoleConfig::new(["i1", "i2"], "i3")
}
fn default_true() -> bool {
    true
}
fn default_dim() -> usize {
    DEFAULT_DIM
}
fn default_streams() -> Vec<Stream> {
    Stream::ALL.to_vec()
}
fn default_cache() -> PathBuf {
    PathBuf::from("cache")
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}
fn default_k() -> usize {
    DEFAULT_VAL2_K
}
fn default_workers() -> usize {
    4
}
fn default_config() -> SentenceConfig {
    SentenceConfig::Sf
}
fn default_extractor() -> ExtractorKind {
    ExtractorKind::Mock
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    #[serde(default = "default_n")]
    pub n_per_class: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_config")]
    pub config: SentenceConfig,
    #[serde(default = "default_roles")]
    pub roles: RoleConfig,
    /// Draw augmented versions; off means unaugmented instances only.
    #[serde(default = "default_true")]
    pub augment: bool,
    #[serde(default = "default_extractor")]
    pub extractor: ExtractorKind,
    /// Worker command for the external extractor.
    #[serde(default)]
    pub extractor_command: Vec<String>,
    #[serde(default)]
    pub extractor_id: Option<String>,
    #[serde(default)]
    pub extractor_processes: Option<usize>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub noise_seed: u64,
    #[serde(default = "default_streams")]
    pub streams: Vec<Stream>,
    #[serde(default = "default_cache")]
    pub cache_root: PathBuf,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub val1: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub val2_k: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub synonyms: Option<PathBuf>,
}

/// Parses `--key value` pairs. Values are read as JSON when they parse,
/// otherwise taken as strings; `--key=value` is accepted too.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| CliError::config(format!("expected --key, got {arg:?}")))?;
        let (key, raw) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::config(format!("--{key} needs a value")))?;
                (key.to_string(), v.clone())
            }
        };
        let key = key.replace('-', "_");
        let value = serde_json::from_str(&raw).unwrap_or(Value::String(raw));
        out.push((key, value));
    }
    Ok(out)
}

fn resolve_paths(obj: &mut Map<String, Value>, base: &Path) {
    for key in PATH_KEYS {
        if let Some(Value::String(s)) = obj.get(key) {
            let p = Path::new(s);
            if p.is_relative() {
                let joined = base.join(p).display().to_string();
                obj.insert(key.to_string(), Value::String(joined));
            }
        }
    }
}

impl RunConfig {
    /// Loads `path` (if any), then applies the cache environment variable
    /// and the command-line overrides, in that order.
    pub fn load(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Self> {
        let mut obj = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                let value: Value = serde_json::from_str(&text)
                    .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                let Value::Object(mut obj) = value else {
                    return Err(CliError::config("config must be a JSON object"));
                };
                // Default locations sit beside the config file too.
                obj.entry("cache_root")
                    .or_insert_with(|| Value::String(default_cache().display().to_string()));
                obj.entry("output_dir")
                    .or_insert_with(|| Value::String(default_output().display().to_string()));
                let base = path.parent().unwrap_or(Path::new("."));
                resolve_paths(&mut obj, base);
                obj
            }
            None => Map::new(),
        };
        if let Ok(cache) = std::env::var(CACHE_ENV) {
            if !cache.is_empty() {
                obj.insert("cache_root".into(), Value::String(cache));
            }
        }
        for (k, v) in overrides {
            obj.insert(k.clone(), v.clone());
        }
        let config: RunConfig = serde_json::from_value(Value::Object(obj))
            .map_err(|e| CliError::config(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.manifest.is_file() {
            return Err(CliError::config(format!(
                "manifest {} not found",
                self.manifest.display()
            )));
        }
        for (name, p) in [("val1", &self.val1), ("synonyms", &self.synonyms)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(CliError::config(format!(
                        "{name} file {} not found",
                        p.display()
                    )));
                }
            }
        }
        if self.n_per_class == 0 {
            return Err(CliError::config("n_per_class must be at least 1"));
        }
        self.roles
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if self.streams.is_empty() {
            return Err(CliError::config("streams must not be empty"));
        }
        if self.dim < 8 {
            return Err(CliError::config("dim must be at least 8"));
        }
        if self.workers == 0 {
            return Err(CliError::config("workers must be at least 1"));
        }
        if self.extractor == ExtractorKind::External && self.extractor_command.is_empty() {
            return Err(CliError::config(
                "external extractor needs extractor_command",
            ));
        }
        Ok(())
    }

    /// Streams in canonical order without duplicates.
    pub fn streams(&self) -> Vec<Stream> {
        Stream::ALL
            .into_iter()
            .filter(|s| self.streams.contains(s))
            .collect()
    }

    /// Hash of everything that can change an artifact's bytes. Output
    /// locations and worker counts are excluded; input files enter by
    /// content digest, not by path.
    pub fn config_hash(&self) -> Result<String> {
        let file_digest = |p: &Path| -> Result<String> {
            let bytes =
                std::fs::read(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            Ok(sha256_hex(&bytes))
        };
        let semantic = serde_json::json!({
            "manifest": file_digest(&self.manifest)?,
            "n_per_class": self.n_per_class,
            "seed": self.seed,
            "config": self.config,
            "roles": self.roles,
            "augment": self.augment,
            "extractor": self.extractor,
            "extractor_command": self.extractor_command,
            "extractor_id": self.extractor_id,
            "dim": self.dim,
            "noise_seed": self.noise_seed,
            "streams": self.streams(),
            "val1": self.val1.as_deref().map(file_digest).transpose()?,
            "val2_k": self.val2_k,
            "synonyms": self.synonyms.as_deref().map(file_digest).transpose()?,
        });
        Ok(sha256_hex(semantic.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn override_parsing() {
        let o = parse_overrides(&strings(&[
            "--seed",
            "7",
            "--config=RF",
            "--output-dir",
            "x/y",
        ]))
        .unwrap();
        assert_eq!(o[0], ("seed".into(), Value::from(7)));
        assert_eq!(o[1], ("config".into(), Value::from("RF")));
        assert_eq!(o[2], ("output_dir".into(), Value::from("x/y")));
        assert!(parse_overrides(&strings(&["--seed"])).is_err());
        assert!(parse_overrides(&strings(&["seed", "1"])).is_err());
    }

    #[test]
    fn load_resolves_paths_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("m.jsonl"), "").unwrap();
        let cfg_path = dir.path().join("cfg.json");
        std::fs::write(&cfg_path, r#"{"manifest": "m.jsonl", "n_per_class": 2}"#).unwrap();
        let cfg = RunConfig::load(Some(&cfg_path), &[]).unwrap();
        assert_eq!(cfg.manifest, dir.path().join("m.jsonl"));
        assert_eq!(cfg.output_dir, dir.path().join("out"));
        assert_eq!(cfg.n_per_class, 2);
        assert_eq!(cfg.val2_k, 100);

        let cfg2 =
            RunConfig::load(Some(&cfg_path), &[("n_per_class".into(), Value::from(5))]).unwrap();
        assert_eq!(cfg2.n_per_class, 5);
        assert_ne!(cfg.config_hash().unwrap(), cfg2.config_hash().unwrap());

        // Output location does not enter the hash.
        let cfg3 = RunConfig::load(
            Some(&cfg_path),
            &[("output_dir".into(), Value::from("/tmp/else"))],
        )
        .unwrap();
        assert_eq!(cfg.config_hash().unwrap(), cfg3.config_hash().unwrap());

        for bad in [
            ("n_per_class", Value::from(0)),
            ("streams", serde_json::json!([])),
            ("typo_key", Value::from(1)),
            ("val1", Value::from("missing.jsonl")),
            (
                "roles",
                serde_json::json!({"train_interpreters": ["a", "a"], "heldout_interpreter": "b"}),
            ),
        ] {
            let err = RunConfig::load(Some(&cfg_path), &[(bad.0.into(), bad.1)]).unwrap_err();
            assert_eq!(err.kind, crate::error::ErrorKind::Config, "{err}");
        }
    }
}
