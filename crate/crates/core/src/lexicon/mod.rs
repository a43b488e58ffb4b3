//! Isolated-sign lexicon: manifest ingestion, anomaly validation and seeded
//! vocabulary selection.

mod validate;
mod vocab;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use validate::{validate_manifest, ValidationReport, MIN_CLIP_FRAMES, MIN_INTERPRETERS};
pub use vocab::{select_vocabulary, Vocabulary};

/// Grammatical class of a sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosClass {
    Noun,
    Verb,
    Adjective,
    Adverb,
    Other,
}

impl PosClass {
    /// The classes that take part in sentence generation.
    pub const ELIGIBLE: [PosClass; 4] = [
        PosClass::Noun,
        PosClass::Verb,
        PosClass::Adjective,
        PosClass::Adverb,
    ];

    pub const ALL: [PosClass; 5] = [
        PosClass::Noun,
        PosClass::Verb,
        PosClass::Adjective,
        PosClass::Adverb,
        PosClass::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PosClass::Noun => "noun",
            PosClass::Verb => "verb",
            PosClass::Adjective => "adjective",
            PosClass::Adverb => "adverb",
            PosClass::Other => "other",
        }
    }

    pub fn parse(label: &str) -> Option<Self> {
        PosClass::ALL.into_iter().find(|c| c.as_str() == label)
    }

    pub fn is_eligible(self) -> bool {
        self != PosClass::Other
    }
}

impl fmt::Display for PosClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRef {
    pub clip_id: String,
    pub interpreter_id: String,
    pub video_path: String,
    pub frame_count: u32,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignEntry {
    pub sign_id: String,
    pub gloss_pt: String,
    pub gloss_en: String,
    pub pos: PosClass,
    pub clips: Vec<ClipRef>,
}

impl SignEntry {
    pub fn clip_for(&self, interpreter_id: &str) -> Option<&ClipRef> {
        self.clips
            .iter()
            .find(|c| c.interpreter_id == interpreter_id)
    }

    /// True when the sign has a clip for every interpreter in `interpreters`.
    pub fn covers(&self, interpreters: &[String]) -> bool {
        interpreters.iter().all(|i| self.clip_for(i).is_some())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("cannot read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("manifest line {line}: duplicate clip_id {clip_id:?}")]
    DuplicateClip { line: usize, clip_id: String },
    #[error("manifest line {line}: unknown pos label {label:?}")]
    UnknownPos { line: usize, label: String },
    #[error("manifest line {line}: sign {sign_id:?} disagrees with its earlier lines on {field}")]
    InconsistentSign {
        line: usize,
        sign_id: String,
        field: &'static str,
    },
    #[error("manifest line {line}: sign {sign_id:?} already has a clip for interpreter {interpreter_id:?}")]
    DuplicateInterpreter {
        line: usize,
        sign_id: String,
        interpreter_id: String,
    },
    #[error(
        "class {class} has {available} eligible signs, {required} required (short by {shortfall})"
    )]
    InsufficientEligible {
        class: PosClass,
        available: usize,
        required: usize,
        shortfall: usize,
    },
    #[error("n_per_class must be at least 1")]
    ZeroVocabulary,
}

/// One manifest line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sign_id: String,
    pub gloss_pt: String,
    pub gloss_en: String,
    pub pos: String,
    pub interpreter_id: String,
    pub clip_id: String,
    pub video_path: String,
    pub frame_count: u32,
    pub fps: f64,
}

/// All signs of a manifest, in order of first appearance. Immutable once
/// built.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    signs: Vec<SignEntry>,
    by_sign: HashMap<String, usize>,
    by_clip: HashMap<String, (usize, usize)>,
}

/// Reads a JSON Lines manifest from disk.
pub fn load_manifest(path: &Path) -> Result<Lexicon, LexiconError> {
    let file = File::open(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Lexicon::from_reader(BufReader::new(file))
}

impl Lexicon {
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon::default();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| LexiconError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ManifestRecord =
                serde_json::from_str(&line).map_err(|e| LexiconError::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })?;
            lexicon.push_record(line_no, record)?;
        }
        Ok(lexicon)
    }

    pub fn from_records(
        records: impl IntoIterator<Item = ManifestRecord>,
    ) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon::default();
        for (idx, record) in records.into_iter().enumerate() {
            lexicon.push_record(idx + 1, record)?;
        }
        Ok(lexicon)
    }

    fn push_record(&mut self, line: usize, rec: ManifestRecord) -> Result<(), LexiconError> {
        let pos = PosClass::parse(&rec.pos).ok_or_else(|| LexiconError::UnknownPos {
            line,
            label: rec.pos.clone(),
        })?;
        if rec.frame_count == 0 {
            return Err(LexiconError::Malformed {
                line,
                message: format!("clip {:?} has frame_count 0", rec.clip_id),
            });
        }
        if !(rec.fps.is_finite() && rec.fps > 0.0) {
            return Err(LexiconError::Malformed {
                line,
                message: format!("clip {:?} has non-positive fps {}", rec.clip_id, rec.fps),
            });
        }
        if self.by_clip.contains_key(&rec.clip_id) {
            return Err(LexiconError::DuplicateClip {
                line,
                clip_id: rec.clip_id,
            });
        }

        let sign_idx = match self.by_sign.get(&rec.sign_id) {
            Some(&i) => {
                let sign = &self.signs[i];
                let mismatch = if sign.pos != pos {
                    Some("pos")
                } else if sign.gloss_en != rec.gloss_en {
                    Some("gloss_en")
                } else if sign.gloss_pt != rec.gloss_pt {
                    Some("gloss_pt")
                } else {
                    None
                };
                if let Some(field) = mismatch {
                    return Err(LexiconError::InconsistentSign {
                        line,
                        sign_id: rec.sign_id,
                        field,
                    });
                }
                if sign.clip_for(&rec.interpreter_id).is_some() {
                    return Err(LexiconError::DuplicateInterpreter {
                        line,
                        sign_id: rec.sign_id,
                        interpreter_id: rec.interpreter_id,
                    });
                }
                i
            }
            None => {
                self.signs.push(SignEntry {
                    sign_id: rec.sign_id.clone(),
                    gloss_pt: rec.gloss_pt,
                    gloss_en: rec.gloss_en,
                    pos,
                    clips: Vec::new(),
                });
                let i = self.signs.len() - 1;
                self.by_sign.insert(rec.sign_id, i);
                i
            }
        };

        let sign = &mut self.signs[sign_idx];
        self.by_clip
            .insert(rec.clip_id.clone(), (sign_idx, sign.clips.len()));
        sign.clips.push(ClipRef {
            clip_id: rec.clip_id,
            interpreter_id: rec.interpreter_id,
            video_path: rec.video_path,
            frame_count: rec.frame_count,
            fps: rec.fps,
        });
        Ok(())
    }

    pub fn signs(&self) -> &[SignEntry] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn clip_count(&self) -> usize {
        self.by_clip.len()
    }

    pub fn sign(&self, sign_id: &str) -> Option<&SignEntry> {
        self.by_sign.get(sign_id).map(|&i| &self.signs[i])
    }

    /// Looks up a clip and its owning sign.
    pub fn clip(&self, clip_id: &str) -> Option<(&SignEntry, &ClipRef)> {
        self.by_clip.get(clip_id).map(|&(s, c)| {
            let sign = &self.signs[s];
            (sign, &sign.clips[c])
        })
    }

    /// Interpreter ids in order of first appearance.
    pub fn interpreters(&self) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for clip in self.signs.iter().flat_map(|s| &s.clips) {
            if !seen.contains(&clip.interpreter_id) {
                seen.push(clip.interpreter_id.clone());
            }
        }
        seen
    }
}

/// Number of distinct signs per class; every class is present in the map.
pub fn class_counts(lexicon: &Lexicon) -> BTreeMap<PosClass, usize> {
    let mut counts: BTreeMap<PosClass, usize> = PosClass::ALL.iter().map(|&c| (c, 0)).collect();
    for sign in lexicon.signs() {
        *counts.entry(sign.pos).or_default() += 1;
    }
    counts
}
