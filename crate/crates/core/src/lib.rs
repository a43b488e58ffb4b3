//! Synthesis of sentence-level sign language translation datasets from
//! isolated-sign clips.
//!
//! The pipeline runs in five layers:
//!
//! * [`lexicon`] ingests a clip manifest and picks seeded vocabularies.
//! * [`sentencegen`] enumerates fixed-order (SF) and random-order (RF)
//!   four-word gloss sentences over a vocabulary.
//! * [`dataplan`] expands sentences into per-interpreter, per-augmentation
//!   instances and assembles the two validation sets.
//! * [`features`] computes per-clip feature stacks once, stores them in a
//!   content-addressed cache and concatenates them into sentence features.
//! * [`metrics`] scores translations with corpus BLEU@1-4 and METEOR.
//!
//! Every seeded choice is made by ranking SHA-256 digests, so outputs are
//! reproducible byte for byte without pinning a PRNG implementation.

pub mod dataplan;
pub mod digest;
pub mod features;
pub mod fixture;
pub mod jsonl;
pub mod lexicon;
pub mod metrics;
pub mod sentencegen;

pub use dataplan::{AugmentationSpec, DatasetPlan, RoleConfig, SentenceInstance, Split};
pub use lexicon::{ClipRef, Lexicon, PosClass, SignEntry, Vocabulary};
pub use sentencegen::{Sentence, SentenceConfig};
