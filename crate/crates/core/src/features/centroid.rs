//! Nearest-centroid baseline translator.
//!
//! Each vocabulary sign gets one centroid per stream: the mean, over the
//! sign's distinct training cache entries, of each entry's window mean. A
//! clip segment of a sentence is translated to the sign whose centroid is
//! nearest to the segment's window mean.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::concat::SentenceFeatures;
use super::{ClipMeta, FeatureError, StackSource, Stream};
use crate::dataplan::{AugmentationSpec, DatasetPlan, Split};
use crate::lexicon::Lexicon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignCentroid {
    pub sign_id: String,
    pub stream: Stream,
    pub vector: Vec<f32>,
}

type EntriesBySign<'p> = BTreeMap<String, BTreeSet<(&'p str, AugmentationSpec)>>;

/// Distinct (clip, augmentation) training entries per sign, sorted.
fn train_entries<'p>(
    plan: &'p DatasetPlan,
    lexicon: &Lexicon,
) -> Result<EntriesBySign<'p>, FeatureError> {
    let mut out = EntriesBySign::new();
    for inst in plan.split(Split::Train) {
        for clip in &inst.clip_ids {
            let (sign, _) = lexicon
                .clip(clip)
                .ok_or_else(|| FeatureError::MissingClip(clip.clone()))?;
            out.entry(sign.sign_id.clone())
                .or_default()
                .insert((clip.as_str(), inst.augmentation));
        }
    }
    Ok(out)
}

/// One centroid per sign in `signs` and per stream, from train-split
/// entries only.
pub fn build_centroids(
    plan: &DatasetPlan,
    lexicon: &Lexicon,
    source: &dyn StackSource,
    streams: &[Stream],
    signs: &[String],
) -> Result<Vec<SignCentroid>, FeatureError> {
    let entries = train_entries(plan, lexicon)?;
    let mut out = Vec::with_capacity(signs.len() * streams.len());
    for sign_id in signs {
        let mine = entries
            .get(sign_id)
            .filter(|e| !e.is_empty())
            .ok_or_else(|| FeatureError::NoTrainEntries(sign_id.clone()))?;
        for &stream in streams {
            let mut acc = vec![0.0f64; source.dim()];
            for &(clip_id, aug) in mine {
                let meta = ClipMeta::from_lexicon(lexicon, clip_id)?;
                let mean = source.stack(&meta, aug, stream)?.window_mean();
                acc.iter_mut().zip(&mean).for_each(|(a, m)| *a += m);
            }
            let n = mine.len() as f64;
            out.push(SignCentroid {
                sign_id: sign_id.clone(),
                stream,
                vector: acc.iter().map(|a| (a / n) as f32).collect(),
            });
        }
    }
    Ok(out)
}

/// Centroids fused across streams to match a sentence feature layout,
/// sorted by sign id.
#[derive(Debug, Clone)]
pub struct CentroidTable {
    entries: Vec<(String, Vec<f32>)>,
    dim: usize,
}

impl CentroidTable {
    /// Concatenates each sign's per-stream centroids in (rgb, flow) order,
    /// keeping only `streams`. Signs lacking one of the streams are skipped.
    pub fn new(centroids: &[SignCentroid], streams: &[Stream]) -> Result<Self, FeatureError> {
        let wanted: Vec<Stream> = Stream::ALL
            .into_iter()
            .filter(|s| streams.contains(s))
            .collect();
        if wanted.is_empty() {
            return Err(FeatureError::NoStreams);
        }
        let mut by_sign: BTreeMap<&str, BTreeMap<Stream, &[f32]>> = BTreeMap::new();
        for c in centroids {
            by_sign
                .entry(c.sign_id.as_str())
                .or_default()
                .insert(c.stream, &c.vector);
        }
        let mut entries = Vec::new();
        for (sign, per_stream) in by_sign {
            if !wanted.iter().all(|s| per_stream.contains_key(s)) {
                continue;
            }
            let vector: Vec<f32> = wanted
                .iter()
                .flat_map(|s| per_stream[s].iter().copied())
                .collect();
            entries.push((sign.to_string(), vector));
        }
        if entries.is_empty() {
            return Err(FeatureError::NoCentroids);
        }
        let dim = entries[0].1.len();
        if let Some((_, bad)) = entries.iter().find(|(_, v)| v.len() != dim) {
            return Err(FeatureError::DimMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(CentroidTable { entries, dim })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sign id of the centroid nearest to `query` by Euclidean distance;
    /// ties go to the smaller sign id.
    pub fn nearest(&self, query: &[f64]) -> &str {
        let mut best: Option<(f64, &str)> = None;
        for (sign, v) in &self.entries {
            let d: f64 = v
                .iter()
                .zip(query)
                .map(|(&c, &q)| (c as f64 - q).powi(2))
                .sum();
            // Entries are sorted, so strict < keeps the smallest id on ties.
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, sign));
            }
        }
        best.expect("table is non-empty").1
    }
}

/// Translates each clip segment of `features` to the lowercased English
/// gloss of its nearest centroid.
pub fn nn_translate(
    features: &SentenceFeatures,
    table: &CentroidTable,
    lexicon: &Lexicon,
) -> Result<Vec<String>, FeatureError> {
    if table.is_empty() {
        return Err(FeatureError::NoCentroids);
    }
    if features.dim != table.dim() {
        return Err(FeatureError::DimMismatch {
            expected: table.dim(),
            got: features.dim,
        });
    }
    let mut tokens = Vec::with_capacity(features.boundaries.len());
    for k in 0..features.boundaries.len() {
        let segment = features.segment(k);
        let n = (segment.len() / features.dim).max(1) as f64;
        let mut mean = vec![0.0f64; features.dim];
        for window in segment.chunks_exact(features.dim) {
            mean.iter_mut()
                .zip(window)
                .for_each(|(m, &v)| *m += v as f64);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let sign_id = table.nearest(&mean);
        let sign = lexicon
            .sign(sign_id)
            .ok_or_else(|| FeatureError::MissingClip(sign_id.to_string()))?;
        tokens.push(sign.gloss_en.to_lowercase());
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataplan::test_support::{roles, setup};
    use crate::dataplan::{build_val2, expand_instances};
    use crate::features::format::StreamTag;
    use crate::features::{Direct, MockExtractor};
    use crate::sentencegen::gen_sf;

    fn features(segments: &[&[f32]], dim: usize) -> SentenceFeatures {
        let mut values = Vec::new();
        let mut boundaries = Vec::new();
        let mut n = 0;
        for s in segments {
            boundaries.push(n);
            values.extend_from_slice(s);
            n += s.len() / dim;
        }
        SentenceFeatures {
            stream: StreamTag::Rgb,
            dim,
            n_windows: n,
            values,
            boundaries,
        }
    }

    fn centroid(sign: &str, v: &[f32]) -> SignCentroid {
        SignCentroid {
            sign_id: sign.into(),
            stream: Stream::Rgb,
            vector: v.to_vec(),
        }
    }

    #[test]
    fn single_centroid_takes_everything() {
        let (lex, _) = setup(1);
        let table = CentroidTable::new(&[centroid("noun00", &[0.0, 0.0])], &[Stream::Rgb]).unwrap();
        let f = features(&[&[1.0, 1.0], &[-5.0, 3.0, 2.0, 2.0]], 2);
        assert_eq!(
            nn_translate(&f, &table, &lex).unwrap(),
            ["noun00_en", "noun00_en"]
        );
    }

    #[test]
    fn ties_go_to_smaller_sign_id() {
        let (lex, _) = setup(1);
        let table = CentroidTable::new(
            &[
                centroid("verb00", &[1.0, 0.0]),
                centroid("adverb00", &[1.0, 0.0]),
            ],
            &[Stream::Rgb],
        )
        .unwrap();
        let f = features(&[&[0.5, 0.5]], 2);
        assert_eq!(nn_translate(&f, &table, &lex).unwrap(), ["adverb00_en"]);
    }

    #[test]
    fn empty_table_rejected() {
        assert!(matches!(
            CentroidTable::new(&[], &[Stream::Rgb]),
            Err(FeatureError::NoCentroids)
        ));
    }

    #[test]
    fn centroids_use_train_entries_only() {
        let (lex, vocab) = setup(2);
        let sentences = gen_sf(&vocab, &lex).unwrap();
        let mut plan = expand_instances(&sentences, &lex, &roles(), 0).unwrap();
        plan.add_instances(build_val2(&sentences, &lex, &roles(), 0, 4).unwrap())
            .unwrap();
        let mock = MockExtractor::new(16, 0).unwrap();
        let signs: Vec<String> = vocab.sign_ids().cloned().collect();
        let cents = build_centroids(&plan, &lex, &Direct(&mock), &[Stream::Rgb], &signs).unwrap();
        assert_eq!(cents.len(), 8);

        // Oracle: distinct train (clip, aug) pairs in reverse order, f32
        // accumulation; must agree to 1e-5.
        let sign = &signs[0];
        let mut pairs: Vec<(String, AugmentationSpec)> = plan
            .split(Split::Train)
            .flat_map(|i| i.clip_ids.iter().map(move |c| (c.clone(), i.augmentation)))
            .filter(|(c, _)| lex.clip(c).unwrap().0.sign_id == *sign)
            .collect();
        pairs.sort();
        pairs.dedup();
        pairs.reverse();
        assert!(pairs.iter().all(|(c, _)| !c.ends_with("-i3")));
        let mut acc = vec![0.0f32; 16];
        for (clip, aug) in &pairs {
            let meta = ClipMeta::from_lexicon(&lex, clip).unwrap();
            let stack = mock.stack(&meta, *aug, Stream::Rgb);
            let mut mean = vec![0.0f32; 16];
            for w in (0..stack.n_windows).rev() {
                mean.iter_mut()
                    .zip(stack.window(w))
                    .for_each(|(m, v)| *m += v);
            }
            acc.iter_mut()
                .zip(&mean)
                .for_each(|(a, m)| *a += m / stack.n_windows as f32);
        }
        let c = cents.iter().find(|c| &c.sign_id == sign).unwrap();
        for (x, y) in c.vector.iter().zip(&acc) {
            assert!((x - y / pairs.len() as f32).abs() < 1e-5);
        }
    }

    #[test]
    fn single_entry_centroid_is_its_window_mean() {
        let (lex, vocab) = setup(1);
        let sentences = gen_sf(&vocab, &lex).unwrap();
        let roles = roles();
        let mut plan = expand_instances(&sentences, &lex, &roles, 0).unwrap();
        // Keep one train instance: each sign then has a single entry.
        plan.instances.truncate(1);
        let mock = MockExtractor::new(16, 0).unwrap();
        let signs: Vec<String> = sentences[0].sign_ids.clone();
        let cents = build_centroids(&plan, &lex, &Direct(&mock), &[Stream::Rgb], &signs).unwrap();
        let inst = &plan.instances[0];
        let meta = ClipMeta::from_lexicon(&lex, &inst.clip_ids[0]).unwrap();
        let mean = mock
            .stack(&meta, inst.augmentation, Stream::Rgb)
            .window_mean();
        let expected: Vec<f32> = mean.iter().map(|&m| m as f32).collect();
        assert_eq!(cents[0].vector, expected);
    }

    #[test]
    fn sign_without_train_entries_rejected() {
        let (lex, vocab) = setup(1);
        let sentences = gen_sf(&vocab, &lex).unwrap();
        let plan = expand_instances(&sentences, &lex, &roles(), 0).unwrap();
        let mock = MockExtractor::new(16, 0).unwrap();
        let err = build_centroids(
            &plan,
            &lex,
            &Direct(&mock),
            &[Stream::Rgb],
            &["ghost".into()],
        )
        .unwrap_err();
        assert!(matches!(err, FeatureError::NoTrainEntries(ref s) if s == "ghost"));
    }
}
