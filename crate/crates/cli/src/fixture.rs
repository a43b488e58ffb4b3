//! Writes a self-contained synthetic workspace: manifest, hand-style
//! validation sentences and a config pointing at both.

use std::path::{Path, PathBuf};

use signweave_core::dataplan::RoleConfig;
use signweave_core::fixture::{manual_sentences, synthetic_manifest, LexiconShape};
use signweave_core::lexicon::select_vocabulary;

use crate::artifacts::write_atomic;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const VAL1_FILE: &str = "val1.jsonl";
pub const CONFIG_FILE: &str = "config.json";

/// Creates the fixture in `dir` and returns the config path. The first
/// validation set holds `4 * n_per_class` sentences.
pub fn write_fixture(dir: &Path, n_per_class: usize, seed: u64) -> Result<PathBuf> {
    let shape = LexiconShape::default();
    let records = synthetic_manifest(&shape);
    let mut manifest = Vec::new();
    for r in &records {
        manifest.extend(serde_json::to_vec(r)?);
        manifest.push(b'\n');
    }
    write_atomic(&dir.join(MANIFEST_FILE), &manifest)?;

    let lexicon = signweave_core::Lexicon::from_records(records)?;
    let roles = RoleConfig::new(["i1", "i2"], "i3");
    let vocab = select_vocabulary(&lexicon, n_per_class, seed, &roles.all())?;
    let sentences = manual_sentences(&vocab, &lexicon, 4 * n_per_class, seed);
    let mut val1 = Vec::new();
    for s in &sentences {
        let line = serde_json::json!({"sentence_id": s.sentence_id, "config": s.config, "sign_ids": s.sign_ids, "text_en": s.text_en});
        val1.extend(serde_json::to_vec(&line)?);
        val1.push(b'\n');
    }
    write_atomic(&dir.join(VAL1_FILE), &val1)?;

    let config = serde_json::json!({
        "manifest": MANIFEST_FILE,
        "n_per_class": n_per_class,
        "seed": seed,
        "config": "SF",
        "roles": roles,
        "val1": VAL1_FILE,
        "cache_root": "cache",
        "output_dir": "out",
    });
    let path = dir.join(CONFIG_FILE);
    let mut text = serde_json::to_string_pretty(&config)?;
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
