//! Four-word gloss sentences over a vocabulary.
//!
//! SF sentences follow the fixed order noun, adjective, verb, adverb. RF
//! sentences use the same one-word-per-class combinations with each
//! sentence's words shuffled by digest ranking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digest::{rank_digest, seed_string};
use crate::lexicon::{Lexicon, PosClass, Vocabulary};

/// Word order of SF sentences.
pub const SF_ORDER: [PosClass; 4] = [
    PosClass::Noun,
    PosClass::Adjective,
    PosClass::Verb,
    PosClass::Adverb,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SentenceConfig {
    #[serde(rename = "SF")]
    Sf,
    #[serde(rename = "RF")]
    Rf,
}

impl SentenceConfig {
    pub fn prefix(self) -> &'static str {
        match self {
            SentenceConfig::Sf => "sf",
            SentenceConfig::Rf => "rf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    En,
    Pt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sentence_id: String,
    pub config: SentenceConfig,
    pub sign_ids: Vec<String>,
    #[serde(default)]
    pub pos_order: Vec<PosClass>,
    #[serde(default)]
    pub text_en: String,
    #[serde(default)]
    pub text_pt: String,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SentenceError {
    #[error("vocabulary class {0} is empty")]
    EmptyClass(PosClass),
    #[error("sign {0:?} is not in the lexicon")]
    UnknownSign(String),
}

/// Space-joined, lowercased glosses of `sign_ids`.
pub fn render_text(
    sign_ids: &[String],
    lexicon: &Lexicon,
    language: Language,
) -> Result<String, SentenceError> {
    let mut words = Vec::with_capacity(sign_ids.len());
    for id in sign_ids {
        let sign = lexicon
            .sign(id)
            .ok_or_else(|| SentenceError::UnknownSign(id.clone()))?;
        let gloss = match language {
            Language::En => &sign.gloss_en,
            Language::Pt => &sign.gloss_pt,
        };
        words.push(gloss.to_lowercase());
    }
    Ok(words.join(" "))
}

/// Width of the zero-padded index so ids sort in generation order.
fn id_width(count: usize) -> usize {
    let digits = count.saturating_sub(1).to_string().len();
    digits.max(6)
}

fn sentence_id(config: SentenceConfig, index: usize, width: usize) -> String {
    format!("{}-{index:0width$}", config.prefix())
}

/// Class lists in SF order, after checking none is empty and every sign
/// resolves.
fn class_lists<'v>(
    vocab: &'v Vocabulary,
    lexicon: &Lexicon,
) -> Result<[&'v [String]; 4], SentenceError> {
    let lists = SF_ORDER.map(|c| vocab.class(c));
    for (class, list) in SF_ORDER.iter().zip(lists) {
        if list.is_empty() {
            return Err(SentenceError::EmptyClass(*class));
        }
        if let Some(missing) = list.iter().find(|id| lexicon.sign(id).is_none()) {
            return Err(SentenceError::UnknownSign(missing.clone()));
        }
    }
    Ok(lists)
}

/// Decodes a flat index into per-class indices, last class fastest.
fn combination(mut index: usize, lists: &[&[String]; 4]) -> [usize; 4] {
    let mut out = [0; 4];
    for k in (0..4).rev() {
        let len = lists[k].len();
        out[k] = index % len;
        index /= len;
    }
    out
}

fn build(
    config: SentenceConfig,
    index: usize,
    width: usize,
    mut words: Vec<(PosClass, String)>,
    lexicon: &Lexicon,
    seed_str: &str,
) -> Sentence {
    if config == SentenceConfig::Rf {
        let idx = index.to_string();
        words.sort_by_cached_key(|(_, id)| rank_digest(&[seed_str, "rf", &idx, id]));
    }
    let (pos_order, sign_ids): (Vec<_>, Vec<_>) = words.into_iter().unzip();
    // Signs were resolved up front.
    let text_en = render_text(&sign_ids, lexicon, Language::En).expect("resolved");
    let text_pt = render_text(&sign_ids, lexicon, Language::Pt).expect("resolved");
    Sentence {
        sentence_id: sentence_id(config, index, width),
        config,
        sign_ids,
        pos_order,
        text_en,
        text_pt,
    }
}

fn generate(
    config: SentenceConfig,
    vocab: &Vocabulary,
    lexicon: &Lexicon,
    seed: u64,
) -> Result<Vec<Sentence>, SentenceError> {
    let lists = class_lists(vocab, lexicon)?;
    let count: usize = lists.iter().map(|l| l.len()).product();
    let width = id_width(count);
    let seed_str = seed_string(seed);
    Ok((0..count)
        .into_par_iter()
        .map(|index| {
            let combo = combination(index, &lists);
            let words = (0..4)
                .map(|k| (SF_ORDER[k], lists[k][combo[k]].clone()))
                .collect();
            build(config, index, width, words, lexicon, &seed_str)
        })
        .collect())
}

/// Full Cartesian product noun × adjective × verb × adverb, in
/// lexicographic order of class-list indices.
pub fn gen_sf(vocab: &Vocabulary, lexicon: &Lexicon) -> Result<Vec<Sentence>, SentenceError> {
    generate(SentenceConfig::Sf, vocab, lexicon, 0)
}

/// Same combinations as [`gen_sf`]; sentence `i` orders its words by
/// `SHA-256(seed|rf|i|sign_id)` ascending.
pub fn gen_rf(
    vocab: &Vocabulary,
    lexicon: &Lexicon,
    seed: u64,
) -> Result<Vec<Sentence>, SentenceError> {
    generate(SentenceConfig::Rf, vocab, lexicon, seed)
}

pub fn generate_config(
    config: SentenceConfig,
    vocab: &Vocabulary,
    lexicon: &Lexicon,
    seed: u64,
) -> Result<Vec<Sentence>, SentenceError> {
    match config {
        SentenceConfig::Sf => gen_sf(vocab, lexicon),
        SentenceConfig::Rf => gen_rf(vocab, lexicon, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::test_support::record;
    use crate::lexicon::{select_vocabulary, ManifestRecord};
    use sha2::{Digest, Sha256};
    use std::collections::BTreeSet;

    fn setup(n: usize) -> (Lexicon, Vocabulary) {
        let mut recs: Vec<ManifestRecord> = Vec::new();
        for class in PosClass::ELIGIBLE {
            for k in 0..n {
                let sign = format!("{}{k:02}", class.as_str());
                for i in ["i1", "i2", "i3"] {
                    recs.push(record(&sign, class.as_str(), i, 30));
                }
            }
        }
        let lex = Lexicon::from_records(recs).unwrap();
        let roles = vec!["i1".into(), "i2".into(), "i3".into()];
        let vocab = select_vocabulary(&lex, n, 11, &roles).unwrap();
        (lex, vocab)
    }

    #[test]
    fn single_word_per_class_gives_one_sentence() {
        let (lex, vocab) = setup(1);
        let sf = gen_sf(&vocab, &lex).unwrap();
        assert_eq!(sf.len(), 1);
        assert_eq!(sf[0].pos_order, SF_ORDER);
        assert_eq!(
            sf[0].sign_ids,
            ["noun00", "adjective00", "verb00", "adverb00"]
        );
        assert_eq!(sf[0].sentence_id, "sf-000000");
        assert_eq!(
            sf[0].text_en,
            "noun00_en adjective00_en verb00_en adverb00_en"
        );
        assert_eq!(sf[0].text_pt.split(' ').count(), 4);

        for seed in [0, 5, 99] {
            let rf = gen_rf(&vocab, &lex, seed).unwrap();
            let a: BTreeSet<_> = rf[0].sign_ids.iter().collect();
            let b: BTreeSet<_> = sf[0].sign_ids.iter().collect();
            assert_eq!(a, b);
            assert_eq!(rf[0].sentence_id, "rf-000000");
        }
    }

    #[test]
    fn two_per_class_matches_nested_loops() {
        let (lex, vocab) = setup(2);
        let sf = gen_sf(&vocab, &lex).unwrap();
        let mut expected = Vec::new();
        for n in vocab.class(PosClass::Noun) {
            for adj in vocab.class(PosClass::Adjective) {
                for v in vocab.class(PosClass::Verb) {
                    for adv in vocab.class(PosClass::Adverb) {
                        expected.push(vec![n.clone(), adj.clone(), v.clone(), adv.clone()]);
                    }
                }
            }
        }
        assert_eq!(sf.len(), 16);
        let got: Vec<_> = sf.iter().map(|s| s.sign_ids.clone()).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn thirteen_per_class_counts() {
        let (lex, vocab) = setup(13);
        let sf = gen_sf(&vocab, &lex).unwrap();
        let rf = gen_rf(&vocab, &lex, 4).unwrap();
        assert_eq!(sf.len(), 28_561);
        assert_eq!(rf.len(), 28_561);
        let canon = |s: &Sentence| {
            let mut ids = s.sign_ids.clone();
            ids.sort();
            ids
        };
        let a: BTreeSet<_> = sf.iter().map(canon).collect();
        let b: BTreeSet<_> = rf.iter().map(canon).collect();
        assert_eq!(a.len(), 28_561);
        assert_eq!(a, b);
    }

    #[test]
    fn rf_order_matches_digest_oracle() {
        let (lex, vocab) = setup(3);
        let seed = 1234u64;
        let sf = gen_sf(&vocab, &lex).unwrap();
        let rf = gen_rf(&vocab, &lex, seed).unwrap();
        assert_eq!(rf, gen_rf(&vocab, &lex, seed).unwrap());
        for (i, (s, r)) in sf.iter().zip(&rf).enumerate() {
            let mut keyed: Vec<(String, String)> = s
                .sign_ids
                .iter()
                .map(|id| {
                    let text = format!("{seed}|rf|{i}|{id}");
                    (hex::encode(Sha256::digest(text.as_bytes())), id.clone())
                })
                .collect();
            keyed.sort();
            let expected: Vec<String> = keyed.into_iter().map(|(_, id)| id).collect();
            assert_eq!(r.sign_ids, expected);
            let classes: Vec<PosClass> = r
                .sign_ids
                .iter()
                .map(|id| lex.sign(id).unwrap().pos)
                .collect();
            assert_eq!(r.pos_order, classes);
        }
    }

    #[test]
    fn render_languages() {
        let (lex, _) = setup(1);
        let ids: Vec<String> = ["verb00", "noun00"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            render_text(&ids, &lex, Language::En).unwrap(),
            "verb00_en noun00_en"
        );
        assert_eq!(
            render_text(&ids, &lex, Language::Pt).unwrap(),
            "verb00_pt noun00_pt"
        );
        let bad = vec!["zzz".to_string()];
        assert_eq!(
            render_text(&bad, &lex, Language::En),
            Err(SentenceError::UnknownSign("zzz".into()))
        );
    }

    #[test]
    fn render_lowercases() {
        let mut recs = Vec::new();
        for (sign, en) in [("h", "House"), ("b", "BIG"), ("r", "Run"), ("q", "quickly")] {
            let mut r = record(sign, "noun", "i1", 30);
            r.gloss_en = en.into();
            recs.push(r);
        }
        let lex = Lexicon::from_records(recs).unwrap();
        let ids: Vec<String> = ["h", "b", "r", "q"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            render_text(&ids, &lex, Language::En).unwrap(),
            "house big run quickly"
        );
        let perm: Vec<String> = ["r", "h", "q", "b"].iter().map(|s| s.to_string()).collect();
        assert_eq!(
            render_text(&perm, &lex, Language::En).unwrap(),
            "run house quickly big"
        );
    }

    #[test]
    fn empty_class_rejected() {
        let (lex, mut vocab) = setup(2);
        vocab.selected.insert(PosClass::Verb, Vec::new());
        assert_eq!(
            gen_sf(&vocab, &lex),
            Err(SentenceError::EmptyClass(PosClass::Verb))
        );
        assert_eq!(
            gen_rf(&vocab, &lex, 0),
            Err(SentenceError::EmptyClass(PosClass::Verb))
        );
    }

    #[test]
    fn id_width_grows_past_a_million() {
        assert_eq!(id_width(28_561), 6);
        assert_eq!(id_width(1_000_000), 6);
        assert_eq!(id_width(1_000_001), 7);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn rf_is_a_permutation_of_sf(n in 1usize..4, seed in any::<u64>()) {
                let (lex, vocab) = setup(n);
                let sf = gen_sf(&vocab, &lex).unwrap();
                let rf = gen_rf(&vocab, &lex, seed).unwrap();
                prop_assert_eq!(sf.len(), n.pow(4));
                prop_assert_eq!(rf.len(), n.pow(4));
                for (s, r) in sf.iter().zip(&rf) {
                    let mut a = s.sign_ids.clone();
                    let mut b = r.sign_ids.clone();
                    a.sort();
                    b.sort();
                    prop_assert_eq!(a, b);
                    let classes: BTreeSet<_> = r.pos_order.iter().collect();
                    prop_assert_eq!(classes.len(), 4);
                    prop_assert_eq!(r.text_en.split(' ').count(), 4);
                }
            }
        }
    }
}
