//! Per-clip feature stacks, their on-disk cache and sentence-level
//! concatenation.
//!
//! A sentence video is a concatenation of isolated-sign clips, so its
//! feature sequence is the concatenation of the clips' feature stacks.
//! Stacks depend only on (clip, augmentation, stream, extractor); the
//! [`cache::FeatureCache`] computes each of those once, however many
//! sentences reuse the clip.

pub mod bridge;
pub mod cache;
pub mod centroid;
pub mod concat;
pub mod format;
pub mod mock;

use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};

use crate::dataplan::AugmentationSpec;
use crate::lexicon::Lexicon;

pub use cache::{CacheKey, CacheStats, FeatureCache};
pub use centroid::{build_centroids, nn_translate, CentroidTable, SignCentroid};
pub use concat::{concat_instance, extract_then_concat, SentenceFeatures};
pub use format::StreamTag;
pub use mock::MockExtractor;

/// Frames per feature window.
pub const WINDOW_SIZE: u32 = 10;

/// Default per-stream feature width.
pub const DEFAULT_DIM: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Rgb,
    Flow,
}

impl Stream {
    pub const ALL: [Stream; 2] = [Stream::Rgb, Stream::Flow];

    pub fn name(self) -> &'static str {
        match self {
            Stream::Rgb => "rgb",
            Stream::Flow => "flow",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Frame count after temporal augmentation: up-sampling duplicates every
/// frame, down-sampling keeps every other frame.
pub fn effective_frames(frame_count: u32, augmentation: AugmentationSpec) -> u32 {
    use AugmentationSpec::*;
    match augmentation {
        Identity | HFlip => frame_count,
        Upsample | HFlipUpsample => frame_count * 2,
        Downsample | HFlipDownsample => frame_count.div_ceil(2),
    }
}

/// Non-overlapping windows over `frames`; a trailing partial window is
/// padded by repeating the last frame, so it still counts.
pub fn window_count(frames: u32) -> u32 {
    frames.div_ceil(WINDOW_SIZE)
}

/// Window matrix of one clip under one augmentation and stream.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub stream: Stream,
    pub extractor_id: String,
    pub n_windows: usize,
    pub dim: usize,
    /// `n_windows × dim`, row-major.
    pub values: Vec<f32>,
}

impl FeatureStack {
    pub fn window(&self, index: usize) -> &[f32] {
        &self.values[index * self.dim..(index + 1) * self.dim]
    }

    pub fn windows(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim)
    }

    /// Mean of the window vectors, accumulated in f64.
    pub fn window_mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.dim];
        for w in self.windows() {
            for (a, &v) in acc.iter_mut().zip(w) {
                *a += v as f64;
            }
        }
        let n = self.n_windows.max(1) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// What an extractor needs to know about a clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipMeta {
    pub clip_id: String,
    pub sign_id: String,
    pub interpreter_id: String,
    pub frame_count: u32,
    pub video_path: String,
}

impl ClipMeta {
    pub fn from_lexicon(lexicon: &Lexicon, clip_id: &str) -> Result<Self, FeatureError> {
        let (sign, clip) = lexicon
            .clip(clip_id)
            .ok_or_else(|| FeatureError::MissingClip(clip_id.to_string()))?;
        Ok(ClipMeta {
            clip_id: clip.clip_id.clone(),
            sign_id: sign.sign_id.clone(),
            interpreter_id: clip.interpreter_id.clone(),
            frame_count: clip.frame_count,
            video_path: clip.video_path.clone(),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("clip {0:?} is not in the lexicon")]
    MissingClip(String),
    #[error("corrupt cache entry {digest} (clip {clip_id:?}): {reason}")]
    CorruptEntry {
        digest: String,
        clip_id: String,
        reason: String,
    },
    #[error("extractor failed on clip {clip_id:?}: {message}")]
    Extractor { clip_id: String, message: String },
    #[error("clip {clip_id:?}: rgb has {rgb} windows but flow has {flow}")]
    StreamMismatch {
        clip_id: String,
        rgb: usize,
        flow: usize,
    },
    #[error("no streams requested")]
    NoStreams,
    #[error("centroid set is empty")]
    NoCentroids,
    #[error("sign {0:?} has no training entries")]
    NoTrainEntries(String),
    #[error("feature width {got} does not match expected {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("feature width must be at least {min}, got {got}")]
    DimTooSmall { min: usize, got: usize },
    #[error(transparent)]
    Format(#[from] format::FormatError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Produces the feature stack of one clip.
pub trait FeatureExtractor: Send + Sync {
    /// Identity of the extractor and its configuration; part of every cache
    /// key.
    fn extractor_id(&self) -> &str;

    fn dim(&self) -> usize;

    fn extract(
        &self,
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
    ) -> Result<FeatureStack, FeatureError>;
}

/// Anything that can hand out clip stacks: an extractor directly, or an
/// extractor behind a cache.
pub trait StackSource {
    fn stack(
        &self,
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
    ) -> Result<FeatureStack, FeatureError>;

    fn dim(&self) -> usize;
}

/// Uncached extraction.
pub struct Direct<'a>(pub &'a dyn FeatureExtractor);

impl StackSource for Direct<'_> {
    fn stack(
        &self,
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
    ) -> Result<FeatureStack, FeatureError> {
        self.0.extract(clip, augmentation, stream)
    }

    fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Extraction memoized through a [`FeatureCache`].
pub struct Cached<'a> {
    pub cache: &'a FeatureCache,
    pub extractor: &'a dyn FeatureExtractor,
}

impl StackSource for Cached<'_> {
    fn stack(
        &self,
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
    ) -> Result<FeatureStack, FeatureError> {
        let key = CacheKey::new(
            &clip.clip_id,
            augmentation,
            stream,
            self.extractor.extractor_id(),
        );
        self.cache.get_or_compute(&key, self.extractor, clip)
    }

    fn dim(&self) -> usize {
        self.extractor.dim()
    }
}
