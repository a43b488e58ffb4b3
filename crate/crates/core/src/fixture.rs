//! Synthetic inputs shaped like the real corpus, for tests and demos.
//!
//! [`LexiconShape::default`] reproduces the published corpus statistics:
//! 1,364 signs (773 nouns, 225 verbs, 216 adjectives, 35 adverbs, the rest
//! unlabeled), three interpreters, and three signs missing one recording,
//! for 4,089 clips in total.

use std::collections::BTreeMap;

use crate::digest::{rank_digest, seed_string};
use crate::lexicon::{Lexicon, ManifestRecord, PosClass, Vocabulary};
use crate::sentencegen::{render_text, Language, Sentence, SentenceConfig};

#[derive(Debug, Clone)]
pub struct LexiconShape {
    pub per_class: BTreeMap<PosClass, usize>,
    pub interpreters: Vec<String>,
    /// (class, index within class, interpreter index) of recordings to drop.
    pub missing: Vec<(PosClass, usize, usize)>,
    pub min_frames: u32,
    pub max_frames: u32,
}

impl Default for LexiconShape {
    fn default() -> Self {
        LexiconShape {
            per_class: [
                (PosClass::Noun, 773),
                (PosClass::Verb, 225),
                (PosClass::Adjective, 216),
                (PosClass::Adverb, 35),
                (PosClass::Other, 115),
            ]
            .into_iter()
            .collect(),
            interpreters: vec!["i1".into(), "i2".into(), "i3".into()],
            missing: vec![
                (PosClass::Noun, 5, 2),
                (PosClass::Verb, 7, 0),
                (PosClass::Other, 0, 1),
            ],
            min_frames: 20,
            max_frames: 89,
        }
    }
}

fn gloss_words(class: PosClass) -> (&'static str, &'static str) {
    match class {
        PosClass::Noun => ("noun", "substantivo"),
        PosClass::Verb => ("verb", "verbo"),
        PosClass::Adjective => ("adjective", "adjetivo"),
        PosClass::Adverb => ("adverb", "advérbio"),
        PosClass::Other => ("other", "outro"),
    }
}

fn digest_u64(parts: &[&str]) -> u64 {
    let hex = rank_digest(parts);
    u64::from_str_radix(&hex[..16], 16).expect("hex digest")
}

/// Manifest records for `shape`, sign by sign in class order.
pub fn synthetic_manifest(shape: &LexiconShape) -> Vec<ManifestRecord> {
    let mut records = Vec::new();
    let mut sign_no = 0usize;
    let span = (shape.max_frames - shape.min_frames + 1) as u64;
    for (&class, &count) in &shape.per_class {
        let (en, pt) = gloss_words(class);
        for k in 0..count {
            sign_no += 1;
            let sign_id = format!("s{sign_no:04}");
            for (ii, interp) in shape.interpreters.iter().enumerate() {
                if shape.missing.contains(&(class, k, ii)) {
                    continue;
                }
                let clip_id = format!("{sign_id}-{interp}");
                let frames = shape.min_frames + (digest_u64(&["frames", &clip_id]) % span) as u32;
                records.push(ManifestRecord {
                    sign_id: sign_id.clone(),
                    gloss_pt: format!("{pt}{k}"),
                    gloss_en: format!("{en}{k}"),
                    pos: class.as_str().to_string(),
                    interpreter_id: interp.clone(),
                    clip_id: clip_id.clone(),
                    video_path: format!("videos/{sign_id}/{interp}.mp4"),
                    frame_count: frames,
                    fps: 30.0,
                });
            }
        }
    }
    records
}

pub fn synthetic_lexicon(shape: &LexiconShape) -> Lexicon {
    Lexicon::from_records(synthetic_manifest(shape)).expect("synthetic manifest is well formed")
}

/// Free-form validation sentences over `vocab`, cycling through lengths 3, 4
/// and 5 and class patterns that are not the fixed four-word order.
pub fn manual_sentences(
    vocab: &Vocabulary,
    lexicon: &Lexicon,
    count: usize,
    seed: u64,
) -> Vec<Sentence> {
    use PosClass::*;
    const PATTERNS: [&[PosClass]; 3] = [
        &[Noun, Verb, Adverb],
        &[Adjective, Noun, Adverb, Verb],
        &[Noun, Adjective, Verb, Noun, Adverb],
    ];
    let seed_str = seed_string(seed);
    (0..count)
        .map(|j| {
            let pattern = PATTERNS[j % PATTERNS.len()];
            let js = j.to_string();
            let mut sign_ids: Vec<String> = Vec::with_capacity(pattern.len());
            for (slot, &class) in pattern.iter().enumerate() {
                let list = vocab.class(class);
                let mut idx = (digest_u64(&[&seed_str, "val1", &js, &slot.to_string()])
                    % list.len() as u64) as usize;
                while sign_ids.contains(&list[idx]) && list.len() > 1 {
                    idx = (idx + 1) % list.len();
                }
                sign_ids.push(list[idx].clone());
            }
            let text_en = render_text(&sign_ids, lexicon, Language::En).expect("vocabulary sign");
            let text_pt = render_text(&sign_ids, lexicon, Language::Pt).expect("vocabulary sign");
            Sentence {
                sentence_id: format!("v1-{j:04}"),
                config: SentenceConfig::Sf,
                pos_order: pattern.to_vec(),
                sign_ids,
                text_en,
                text_pt,
            }
        })
        .collect()
}
