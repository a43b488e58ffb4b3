use std::collections::HashMap;

use super::{EvalCorpus, MetricError};

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct BleuScores {
    /// Clipped matches and totals per order, `[0]` for unigrams.
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    /// `bleu[n - 1]` is BLEU@n.
    pub bleu: Vec<f64>,
}

impl BleuScores {
    pub fn precision(&self, order: usize) -> f64 {
        let (m, t) = (self.matches[order - 1], self.totals[order - 1]);
        if t == 0 {
            0.0
        } else {
            m as f64 / t as f64
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Length of the reference closest to `hyp_len`; ties go to the shorter.
fn closest_ref_len(refs: &[Vec<String>], hyp_len: usize) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

/// Corpus-level BLEU@1..=`max_order` with reference-count clipping and a
/// corpus brevity penalty.
pub fn bleu_corpus(corpus: &EvalCorpus, max_order: usize) -> Result<BleuScores, MetricError> {
    if corpus.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let mut matches = vec![0u64; max_order];
    let mut totals = vec![0u64; max_order];
    let mut hyp_len = 0;
    let mut ref_len = 0;

    for item in corpus.items() {
        hyp_len += item.hypothesis.len();
        ref_len += closest_ref_len(&item.references, item.hypothesis.len());
        for n in 1..=max_order {
            let hyp = ngram_counts(&item.hypothesis, n);
            let mut max_ref: HashMap<&[String], u64> = HashMap::new();
            for r in &item.references {
                for (gram, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(gram).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            for (gram, c) in hyp {
                matches[n - 1] += c.min(max_ref.get(gram).copied().unwrap_or(0));
                totals[n - 1] += c;
            }
        }
    }

    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };

    let mut bleu = Vec::with_capacity(max_order);
    let mut log_sum = 0.0;
    let mut zero = false;
    for n in 1..=max_order {
        let (m, t) = (matches[n - 1], totals[n - 1]);
        if m == 0 || t == 0 {
            zero = true;
        } else {
            log_sum += (m as f64 / t as f64).ln();
        }
        bleu.push(if zero || hyp_len == 0 {
            0.0
        } else {
            brevity_penalty * (log_sum / n as f64).exp()
        });
    }

    Ok(BleuScores {
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
        bleu,
    })
}
