use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Lexicon, LexiconError, PosClass};
use crate::digest::{rank_digest, seed_string};

/// A seeded choice of `n_per_class` signs for each eligible class.
///
/// Serializes as `{n_per_class, seed, selected: {class: [sign_id, ...]}}`
/// with each list in selection-rank order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub n_per_class: usize,
    pub seed: u64,
    pub selected: BTreeMap<PosClass, Vec<String>>,
}

impl Vocabulary {
    pub fn class(&self, class: PosClass) -> &[String] {
        self.selected.get(&class).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every selected sign id, class by class.
    pub fn sign_ids(&self) -> impl Iterator<Item = &String> {
        PosClass::ELIGIBLE.iter().flat_map(move |&c| self.class(c))
    }

    pub fn len(&self) -> usize {
        self.selected.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Selects `n_per_class` signs per eligible class.
///
/// Candidates are the signs of the class that have a clip for every id in
/// `interpreters`. They are ranked by `SHA-256(seed|vocab|class|sign_id)`
/// ascending and the first `n_per_class` are kept.
pub fn select_vocabulary(
    lexicon: &Lexicon,
    n_per_class: usize,
    seed: u64,
    interpreters: &[String],
) -> Result<Vocabulary, LexiconError> {
    if n_per_class == 0 {
        return Err(LexiconError::ZeroVocabulary);
    }
    let seed_str = seed_string(seed);
    let mut selected = BTreeMap::new();
    for class in PosClass::ELIGIBLE {
        let mut ranked: Vec<(String, &str)> = lexicon
            .signs()
            .iter()
            .filter(|s| s.pos == class && s.covers(interpreters))
            .map(|s| {
                let key = rank_digest(&[&seed_str, "vocab", class.as_str(), &s.sign_id]);
                (key, s.sign_id.as_str())
            })
            .collect();
        if ranked.len() < n_per_class {
            return Err(LexiconError::InsufficientEligible {
                class,
                available: ranked.len(),
                required: n_per_class,
                shortfall: n_per_class - ranked.len(),
            });
        }
        ranked.sort_unstable();
        selected.insert(
            class,
            ranked
                .into_iter()
                .take(n_per_class)
                .map(|(_, id)| id.to_string())
                .collect(),
        );
    }
    Ok(Vocabulary {
        n_per_class,
        seed,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::test_support::record;
    use crate::lexicon::ManifestRecord;
    use sha2::{Digest, Sha256};

    fn interps() -> Vec<String> {
        vec!["i1".into(), "i2".into(), "i3".into()]
    }

    fn lexicon(per_class: usize) -> Lexicon {
        let mut recs: Vec<ManifestRecord> = Vec::new();
        for class in PosClass::ALL {
            for k in 0..per_class {
                let sign = format!("{}{k:02}", class.as_str());
                for i in ["i1", "i2", "i3"] {
                    recs.push(record(&sign, class.as_str(), i, 30));
                }
            }
        }
        Lexicon::from_records(recs).unwrap()
    }

    /// Ranking recomputed from raw SHA-256 over the concatenated parts.
    fn oracle(lex: &Lexicon, class: PosClass, n: usize, seed: u64) -> Vec<String> {
        let mut all: Vec<(String, String)> = lex
            .signs()
            .iter()
            .filter(|s| s.pos == class)
            .map(|s| {
                let text = format!("{seed}|vocab|{}|{}", class.as_str(), s.sign_id);
                (
                    hex::encode(Sha256::digest(text.as_bytes())),
                    s.sign_id.clone(),
                )
            })
            .collect();
        all.sort();
        all.into_iter().take(n).map(|(_, id)| id).collect()
    }

    #[test]
    fn thirteen_per_class_gives_52() {
        let lex = lexicon(20);
        let vocab = select_vocabulary(&lex, 13, 7, &interps()).unwrap();
        assert_eq!(vocab.len(), 52);
        assert_eq!(vocab.selected.len(), 4);
        assert!(!vocab.selected.contains_key(&PosClass::Other));
    }

    #[test]
    fn forced_choice_ignores_seed() {
        let lex = lexicon(1);
        for seed in [0, 1, u64::MAX] {
            let vocab = select_vocabulary(&lex, 1, seed, &interps()).unwrap();
            assert_eq!(vocab.class(PosClass::Verb), ["verb00"]);
        }
    }

    #[test]
    fn matches_digest_oracle_across_seeds() {
        let lex = lexicon(20);
        for seed in [0u64, 1, 42, 9_999_999_999] {
            let vocab = select_vocabulary(&lex, 5, seed, &interps()).unwrap();
            for class in PosClass::ELIGIBLE {
                assert_eq!(vocab.class(class), oracle(&lex, class, 5, seed).as_slice());
            }
        }
        let a = select_vocabulary(&lex, 5, 1, &interps()).unwrap();
        let b = select_vocabulary(&lex, 5, 2, &interps()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn deterministic_serialization() {
        let lex = lexicon(20);
        let a =
            serde_json::to_string(&select_vocabulary(&lex, 13, 3, &interps()).unwrap()).unwrap();
        let b =
            serde_json::to_string(&select_vocabulary(&lex, 13, 3, &interps()).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(r#"{"n_per_class":13,"seed":3,"selected":{"noun":["#));
    }

    #[test]
    fn ineligible_signs_skipped() {
        let mut recs = vec![
            record("n0", "noun", "i1", 30),
            record("n0", "noun", "i2", 30),
        ];
        for class in PosClass::ELIGIBLE {
            for i in ["i1", "i2", "i3"] {
                recs.push(record(&format!("{class}-full"), class.as_str(), i, 30));
            }
        }
        let lex = Lexicon::from_records(recs).unwrap();
        let vocab = select_vocabulary(&lex, 1, 0, &interps()).unwrap();
        assert_eq!(vocab.class(PosClass::Noun), ["noun-full"]);
        // Only two interpreters required: n0 becomes eligible.
        let two = vec!["i1".to_string(), "i2".to_string()];
        let err = select_vocabulary(&lex, 3, 0, &two).unwrap_err();
        match err {
            LexiconError::InsufficientEligible {
                class,
                available,
                shortfall,
                ..
            } => {
                assert_eq!(class, PosClass::Noun);
                assert_eq!(available, 2);
                assert_eq!(shortfall, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_rejected() {
        assert!(matches!(
            select_vocabulary(&lexicon(2), 0, 0, &interps()),
            Err(LexiconError::ZeroVocabulary)
        ));
    }
}
