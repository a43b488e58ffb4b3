use super::format::{self, StreamTag};
use super::{
    Cached, ClipMeta, Direct, FeatureCache, FeatureError, FeatureExtractor, StackSource, Stream,
};
use crate::dataplan::SentenceInstance;
use crate::lexicon::Lexicon;

/// Feature sequence of a whole sentence instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceFeatures {
    pub stream: StreamTag,
    pub dim: usize,
    pub n_windows: usize,
    /// `n_windows × dim`, row-major.
    pub values: Vec<f32>,
    /// First window of each clip.
    pub boundaries: Vec<usize>,
}

impl SentenceFeatures {
    /// Windows `[boundaries[k], boundaries[k+1])` belong to clip `k`.
    pub fn segment(&self, k: usize) -> &[f32] {
        let start = self.boundaries[k];
        let end = self
            .boundaries
            .get(k + 1)
            .copied()
            .unwrap_or(self.n_windows);
        &self.values[start * self.dim..end * self.dim]
    }

    pub fn to_sgnf(&self) -> Result<Vec<u8>, format::FormatError> {
        format::encode(self.stream, self.dim, self.n_windows, &self.values)
    }

    pub fn bit_eq(&self, other: &SentenceFeatures) -> bool {
        self.stream == other.stream
            && self.dim == other.dim
            && self.n_windows == other.n_windows
            && self.boundaries == other.boundaries
            && self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Requested streams in canonical (rgb, flow) order, deduplicated.
fn canonical(streams: &[Stream]) -> Result<Vec<Stream>, FeatureError> {
    let out: Vec<Stream> = Stream::ALL
        .into_iter()
        .filter(|s| streams.contains(s))
        .collect();
    if out.is_empty() {
        return Err(FeatureError::NoStreams);
    }
    Ok(out)
}

pub(crate) fn stream_tag(streams: &[Stream]) -> StreamTag {
    match streams {
        [single] => StreamTag::from(*single),
        _ => StreamTag::Concat,
    }
}

/// Concatenates clip stacks along the window axis in word order. With both
/// streams, each window is the rgb vector followed by the flow vector.
pub fn assemble(
    instance: &SentenceInstance,
    lexicon: &Lexicon,
    source: &dyn StackSource,
    streams: &[Stream],
) -> Result<SentenceFeatures, FeatureError> {
    let streams = canonical(streams)?;
    let per_stream = source.dim();
    let dim = per_stream * streams.len();
    let mut values = Vec::new();
    let mut boundaries = Vec::with_capacity(instance.clip_ids.len());
    let mut n_windows = 0;

    for clip_id in &instance.clip_ids {
        let meta = ClipMeta::from_lexicon(lexicon, clip_id)?;
        let stacks = streams
            .iter()
            .map(|&s| source.stack(&meta, instance.augmentation, s))
            .collect::<Result<Vec<_>, _>>()?;
        for stack in &stacks {
            if stack.dim != per_stream {
                return Err(FeatureError::DimMismatch {
                    expected: per_stream,
                    got: stack.dim,
                });
            }
        }
        let windows = stacks[0].n_windows;
        if let [rgb, flow] = stacks.as_slice() {
            if rgb.n_windows != flow.n_windows {
                return Err(FeatureError::StreamMismatch {
                    clip_id: clip_id.clone(),
                    rgb: rgb.n_windows,
                    flow: flow.n_windows,
                });
            }
        }
        boundaries.push(n_windows);
        for w in 0..windows {
            for stack in &stacks {
                values.extend_from_slice(stack.window(w));
            }
        }
        n_windows += windows;
    }

    Ok(SentenceFeatures {
        stream: stream_tag(&streams),
        dim,
        n_windows,
        values,
        boundaries,
    })
}

/// Sentence features built from cached clip stacks.
pub fn concat_instance(
    instance: &SentenceInstance,
    lexicon: &Lexicon,
    cache: &FeatureCache,
    extractor: &dyn FeatureExtractor,
    streams: &[Stream],
) -> Result<SentenceFeatures, FeatureError> {
    assemble(instance, lexicon, &Cached { cache, extractor }, streams)
}

/// Sentence features with every clip extracted afresh, bypassing the cache.
pub fn extract_then_concat(
    instance: &SentenceInstance,
    lexicon: &Lexicon,
    extractor: &dyn FeatureExtractor,
    streams: &[Stream],
) -> Result<SentenceFeatures, FeatureError> {
    assemble(instance, lexicon, &Direct(extractor), streams)
}
