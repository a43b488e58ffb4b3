//! Deterministic stand-in for a video backbone.
//!
//! Every window vector is
//!
//! ```text
//! normalize(u(sign) + 0.10·u(interpreter) + 0.05·u(augmentation) + 0.01·u(clip@window))
//! ```
//!
//! where `u(s)` is a unit vector derived from SHA-256. To expand a string
//! `s` into `dim` components, block `j = 0, 1, ...` hashes
//! `"{noise_seed}/{stream}/{s}#{j}"`; the 32-byte digest is read as eight
//! little-endian u32 words, each consecutive pair `(a, b)` is mapped to
//! `u1 = (a + 0.5)/2³²`, `u2 = (b + 0.5)/2³²` and Box-Muller turns it into
//! `r·cos(2πu2), r·sin(2πu2)` with `r = sqrt(-2 ln u1)`. The first `dim`
//! values are kept and scaled to unit length. Arithmetic is in f64; the
//! final window vector is rounded to f32.
//!
//! Signs are nearly orthogonal at high `dim`, while the interpreter,
//! augmentation and per-window terms are small perturbations, so clips of
//! one sign stay close to each other whoever performs them.

use sha2::{Digest, Sha256};

use super::{
    effective_frames, window_count, ClipMeta, FeatureError, FeatureExtractor, FeatureStack, Stream,
};
use crate::dataplan::AugmentationSpec;

pub const INTERPRETER_WEIGHT: f64 = 0.10;
pub const AUGMENTATION_WEIGHT: f64 = 0.05;
pub const WINDOW_WEIGHT: f64 = 0.01;
pub const MIN_DIM: usize = 8;

#[derive(Debug, Clone)]
pub struct MockExtractor {
    dim: usize,
    noise_seed: u64,
    id: String,
}

impl MockExtractor {
    pub fn new(dim: usize, noise_seed: u64) -> Result<Self, FeatureError> {
        if dim < MIN_DIM {
            return Err(FeatureError::DimTooSmall {
                min: MIN_DIM,
                got: dim,
            });
        }
        Ok(MockExtractor {
            dim,
            noise_seed,
            id: format!("mock-v1-d{dim}-s{noise_seed}"),
        })
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    /// `u(s)` for one stream, in f64.
    pub fn unit_vector(&self, stream: Stream, s: &str) -> Vec<f64> {
        unit_vector(self.noise_seed, stream, s, self.dim)
    }

    /// The stack without going through the trait; never fails.
    pub fn stack(
        &self,
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
    ) -> FeatureStack {
        let frames = effective_frames(clip.frame_count, augmentation);
        let n_windows = window_count(frames) as usize;
        let sign = self.unit_vector(stream, &clip.sign_id);
        let interp = self.unit_vector(stream, &clip.interpreter_id);
        let aug = self.unit_vector(stream, augmentation.name());

        let base: Vec<f64> = (0..self.dim)
            .map(|k| sign[k] + INTERPRETER_WEIGHT * interp[k] + AUGMENTATION_WEIGHT * aug[k])
            .collect();

        let mut values = Vec::with_capacity(n_windows * self.dim);
        for w in 0..n_windows {
            let noise = self.unit_vector(stream, &format!("{}@{w}", clip.clip_id));
            let v: Vec<f64> = base
                .iter()
                .zip(&noise)
                .map(|(b, n)| b + WINDOW_WEIGHT * n)
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            values.extend(v.iter().map(|x| (x / norm) as f32));
        }
        FeatureStack {
            stream,
            extractor_id: self.id.clone(),
            n_windows,
            dim: self.dim,
            values,
        }
    }
}

impl FeatureExtractor for MockExtractor {
    fn extractor_id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn extract(
        &self,
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
    ) -> Result<FeatureStack, FeatureError> {
        Ok(self.stack(clip, augmentation, stream))
    }
}

fn unit_vector(noise_seed: u64, stream: Stream, s: &str, dim: usize) -> Vec<f64> {
    const SCALE: f64 = 1.0 / 4_294_967_296.0;
    let mut out = Vec::with_capacity(dim + 8);
    let mut block = 0u64;
    while out.len() < dim {
        let digest =
            Sha256::digest(format!("{noise_seed}/{}/{s}#{block}", stream.name()).as_bytes());
        let words: Vec<u32> = digest
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        for pair in words.chunks_exact(2) {
            let u1 = (pair[0] as f64 + 0.5) * SCALE;
            let u2 = (pair[1] as f64 + 0.5) * SCALE;
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = std::f64::consts::TAU * u2;
            out.push(r * theta.cos());
            out.push(r * theta.sin());
        }
        block += 1;
    }
    out.truncate(dim);
    let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
    out.iter_mut().for_each(|x| *x /= norm);
    out
}
