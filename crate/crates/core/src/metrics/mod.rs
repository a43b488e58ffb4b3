//! Corpus BLEU@1-4 and METEOR.

mod bleu;
mod meteor;
mod tokenize;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::jsonl::{read_records, JsonlError};

pub use bleu::{bleu_corpus, BleuScores, MAX_ORDER};
pub use meteor::{meteor_sentence, Matcher, MeteorScore, SynonymTable};
pub use tokenize::tokenize;

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("no hypothesis for reference id {0:?}")]
    MissingHypothesis(String),
    #[error("hypothesis id {0:?} has no reference")]
    UnmatchedHypothesis(String),
    #[error("item {0:?} has no reference")]
    NoReference(String),
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub id: String,
    pub references: Vec<Vec<String>>,
    pub hypothesis: Vec<String>,
}

impl EvalItem {
    /// Single-reference item from raw texts.
    pub fn from_texts(id: &str, reference: &str, hypothesis: &str) -> Self {
        EvalItem {
            id: id.to_string(),
            references: vec![tokenize(reference)],
            hypothesis: tokenize(hypothesis),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvalCorpus {
    items: Vec<EvalItem>,
}

impl EvalCorpus {
    pub fn new(items: Vec<EvalItem>) -> Result<Self, MetricError> {
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.id.as_str()) {
                return Err(MetricError::DuplicateId(item.id.clone()));
            }
            if item.references.is_empty() {
                return Err(MetricError::NoReference(item.id.clone()));
            }
        }
        Ok(EvalCorpus { items })
    }

    pub fn items(&self) -> &[EvalItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// One line of an evaluation input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextRecord {
    pub id: String,
    pub text: String,
}

/// Joins reference and hypothesis files on `id`, in reference file order.
pub fn load_eval_files(references: &Path, hypotheses: &Path) -> Result<EvalCorpus, MetricError> {
    let refs: Vec<TextRecord> = read_records(references)?
        .into_iter()
        .map(|(_, r)| r)
        .collect();
    let hyps: Vec<TextRecord> = read_records(hypotheses)?
        .into_iter()
        .map(|(_, r)| r)
        .collect();
    join_records(&refs, &hyps)
}

pub fn join_records(refs: &[TextRecord], hyps: &[TextRecord]) -> Result<EvalCorpus, MetricError> {
    let mut by_id: HashMap<&str, &str> = HashMap::new();
    for h in hyps {
        if by_id.insert(&h.id, &h.text).is_some() {
            return Err(MetricError::DuplicateId(h.id.clone()));
        }
    }
    let mut items = Vec::with_capacity(refs.len());
    for r in refs {
        let hyp = by_id
            .remove(r.id.as_str())
            .ok_or_else(|| MetricError::MissingHypothesis(r.id.clone()))?;
        items.push(EvalItem::from_texts(&r.id, &r.text, hyp));
    }
    if let Some(extra) = hyps.iter().find(|h| by_id.contains_key(h.id.as_str())) {
        return Err(MetricError::UnmatchedHypothesis(extra.id.clone()));
    }
    EvalCorpus::new(items)
}

/// Scores in `[0, 1]`, laid out like a results table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub meteor: f64,
    pub n_items: usize,
    pub hyp_tokens: usize,
    pub ref_tokens: usize,
}

impl MetricReport {
    pub fn bleu(&self) -> [f64; 4] {
        [self.bleu1, self.bleu2, self.bleu3, self.bleu4]
    }

    /// BLEU@1-4 and METEOR as percentages.
    pub fn percentages(&self) -> [f64; 5] {
        [
            self.bleu1 * 100.0,
            self.bleu2 * 100.0,
            self.bleu3 * 100.0,
            self.bleu4 * 100.0,
            self.meteor * 100.0,
        ]
    }
}

pub fn evaluate_corpus(
    corpus: &EvalCorpus,
    matcher: &Matcher,
) -> Result<MetricReport, MetricError> {
    let bleu = bleu_corpus(corpus, MAX_ORDER)?;
    let meteor_sum: f64 = corpus
        .items()
        .iter()
        .map(|item| {
            item.references
                .iter()
                .map(|r| meteor_sentence(r, &item.hypothesis, matcher).score)
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(MetricReport {
        bleu1: bleu.bleu[0],
        bleu2: bleu.bleu[1],
        bleu3: bleu.bleu[2],
        bleu4: bleu.bleu[3],
        meteor: meteor_sum / corpus.len() as f64,
        n_items: corpus.len(),
        hyp_tokens: bleu.hyp_len,
        ref_tokens: bleu.ref_len,
    })
}
