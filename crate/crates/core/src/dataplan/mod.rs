//! Expansion of sentences into concrete training and validation instances.
//!
//! Each training sentence is realized six times: once per train interpreter
//! without augmentation, plus two augmented versions per train interpreter
//! drawn without replacement from a five-variant pool. Validation instances
//! always use the held-out interpreter's unaugmented clips.

mod summary;
mod validation;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digest::{rank_digest, seed_string};
use crate::jsonl::JsonlError;
use crate::lexicon::Lexicon;
use crate::sentencegen::{Sentence, SentenceError};

pub use summary::{plan_summary, PlanSummary};
pub use validation::{build_val2, load_val1, load_val1_sentences, val1_instances, DEFAULT_VAL2_K};

/// Augmented versions drawn per (sentence, train interpreter).
pub const AUGMENTED_PER_INTERPRETER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentationSpec {
    Identity,
    Upsample,
    Downsample,
    #[serde(rename = "hflip")]
    HFlip,
    #[serde(rename = "hflip_downsample")]
    HFlipDownsample,
    #[serde(rename = "hflip_upsample")]
    HFlipUpsample,
}

impl AugmentationSpec {
    pub const ALL: [AugmentationSpec; 6] = [
        AugmentationSpec::Identity,
        AugmentationSpec::Upsample,
        AugmentationSpec::Downsample,
        AugmentationSpec::HFlip,
        AugmentationSpec::HFlipDownsample,
        AugmentationSpec::HFlipUpsample,
    ];

    /// Variants eligible for the randomly drawn augmented versions.
    pub const POOL: [AugmentationSpec; 5] = [
        AugmentationSpec::Upsample,
        AugmentationSpec::Downsample,
        AugmentationSpec::HFlip,
        AugmentationSpec::HFlipDownsample,
        AugmentationSpec::HFlipUpsample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentationSpec::Identity => "identity",
            AugmentationSpec::Upsample => "upsample",
            AugmentationSpec::Downsample => "downsample",
            AugmentationSpec::HFlip => "hflip",
            AugmentationSpec::HFlipDownsample => "hflip_downsample",
            AugmentationSpec::HFlipUpsample => "hflip_upsample",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for AugmentationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which interpreters feed training and which is held out for validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleConfig {
    pub train_interpreters: Vec<String>,
    pub heldout_interpreter: String,
}

impl RoleConfig {
    pub fn new(train: [&str; 2], heldout: &str) -> Self {
        RoleConfig {
            train_interpreters: train.iter().map(|s| s.to_string()).collect(),
            heldout_interpreter: heldout.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.train_interpreters.len() != 2 {
            return Err(PlanError::InvalidRoles(format!(
                "expected 2 train interpreters, got {}",
                self.train_interpreters.len()
            )));
        }
        let [a, b] = [&self.train_interpreters[0], &self.train_interpreters[1]];
        if a == b || *a == self.heldout_interpreter || *b == self.heldout_interpreter {
            return Err(PlanError::InvalidRoles(format!(
                "interpreter ids must be distinct: train {a:?}, {b:?}, heldout {:?}",
                self.heldout_interpreter
            )));
        }
        Ok(())
    }

    /// Train interpreters followed by the held-out one.
    pub fn all(&self) -> Vec<String> {
        let mut all = self.train_interpreters.clone();
        all.push(self.heldout_interpreter.clone());
        all
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val1,
    Val2,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val1, Split::Val2];

    pub fn is_validation(self) -> bool {
        self != Split::Train
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceInstance {
    pub instance_id: String,
    pub sentence_id: String,
    pub interpreter_id: String,
    pub augmentation: AugmentationSpec,
    pub split: Split,
    pub clip_ids: Vec<String>,
}

impl SentenceInstance {
    fn sort_key(&self) -> (&str, &str, &str) {
        (
            &self.sentence_id,
            &self.interpreter_id,
            self.augmentation.name(),
        )
    }
}

pub fn instance_id(sentence_id: &str, interpreter_id: &str, spec: AugmentationSpec) -> String {
    format!("{sentence_id}:{interpreter_id}:{}", spec.name())
}

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("invalid roles: {0}")]
    InvalidRoles(String),
    #[error("sign {sign_id:?} has no clip for interpreter {interpreter_id:?}")]
    MissingClip {
        sign_id: String,
        interpreter_id: String,
    },
    #[error(transparent)]
    Sentence(#[from] SentenceError),
    #[error("val2 needs {k} sentences but only {available} are available")]
    TooFewSentences { k: usize, available: usize },
    #[error("duplicate instance id {0:?}")]
    DuplicateInstance(String),
    #[error("sentence {0:?} has no words")]
    EmptySentence(String),
    #[error("at most {max} augmented versions per interpreter, got {got}")]
    TooManyAugmentations { max: usize, got: usize },
    #[error(transparent)]
    Jsonl(#[from] JsonlError),
}

/// All instances of a run, ordered by (sentence_id, interpreter_id,
/// augmentation name).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPlan {
    pub roles: RoleConfig,
    pub seed: u64,
    pub instances: Vec<SentenceInstance>,
}

impl DatasetPlan {
    /// Adds validation instances, keeping the canonical order.
    pub fn add_instances(
        &mut self,
        instances: impl IntoIterator<Item = SentenceInstance>,
    ) -> Result<(), PlanError> {
        self.instances.extend(instances);
        sort_instances(&mut self.instances);
        for pair in self.instances.windows(2) {
            if pair[0].instance_id == pair[1].instance_id {
                return Err(PlanError::DuplicateInstance(pair[0].instance_id.clone()));
            }
        }
        Ok(())
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &SentenceInstance> {
        self.instances.iter().filter(move |i| i.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }
}

fn sort_instances(instances: &mut [SentenceInstance]) {
    instances.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Clip ids realizing `sentence` by `interpreter_id`, in word order.
pub(crate) fn resolve_clips(
    sign_ids: &[String],
    lexicon: &Lexicon,
    interpreter_id: &str,
) -> Result<Vec<String>, PlanError> {
    sign_ids
        .iter()
        .map(|sign_id| {
            let sign = lexicon
                .sign(sign_id)
                .ok_or_else(|| SentenceError::UnknownSign(sign_id.clone()))?;
            sign.clip_for(interpreter_id)
                .map(|c| c.clip_id.clone())
                .ok_or_else(|| PlanError::MissingClip {
                    sign_id: sign_id.clone(),
                    interpreter_id: interpreter_id.to_string(),
                })
        })
        .collect()
}

/// The `count` pool variants with the lowest
/// `SHA-256(seed|aug|sentence_id|interpreter_id|spec_name)` digests.
pub fn sample_augmentations(
    seed_str: &str,
    sentence_id: &str,
    interpreter_id: &str,
    count: usize,
) -> Vec<AugmentationSpec> {
    let mut ranked: Vec<(String, AugmentationSpec)> = AugmentationSpec::POOL
        .iter()
        .map(|&spec| {
            (
                rank_digest(&[seed_str, "aug", sentence_id, interpreter_id, spec.name()]),
                spec,
            )
        })
        .collect();
    ranked.sort_unstable();
    ranked.into_iter().take(count).map(|(_, s)| s).collect()
}

/// Six training instances per sentence: per train interpreter, one
/// unaugmented plus two sampled augmentations.
pub fn expand_instances(
    sentences: &[Sentence],
    lexicon: &Lexicon,
    roles: &RoleConfig,
    seed: u64,
) -> Result<DatasetPlan, PlanError> {
    expand_instances_with(sentences, lexicon, roles, seed, AUGMENTED_PER_INTERPRETER)
}

/// [`expand_instances`] with a configurable number of augmented versions
/// per interpreter; 0 turns augmentation off.
pub fn expand_instances_with(
    sentences: &[Sentence],
    lexicon: &Lexicon,
    roles: &RoleConfig,
    seed: u64,
    augmented: usize,
) -> Result<DatasetPlan, PlanError> {
    roles.validate()?;
    if augmented > AugmentationSpec::POOL.len() {
        return Err(PlanError::TooManyAugmentations {
            max: AugmentationSpec::POOL.len(),
            got: augmented,
        });
    }
    let seed_str = seed_string(seed);
    let per_sentence: Vec<Vec<SentenceInstance>> = sentences
        .par_iter()
        .map(|sentence| {
            let mut out = Vec::with_capacity(roles.train_interpreters.len() * (1 + augmented));
            for interp in &roles.train_interpreters {
                let clip_ids = resolve_clips(&sentence.sign_ids, lexicon, interp)?;
                let specs = std::iter::once(AugmentationSpec::Identity).chain(
                    sample_augmentations(&seed_str, &sentence.sentence_id, interp, augmented),
                );
                for spec in specs {
                    out.push(SentenceInstance {
                        instance_id: instance_id(&sentence.sentence_id, interp, spec),
                        sentence_id: sentence.sentence_id.clone(),
                        interpreter_id: interp.clone(),
                        augmentation: spec,
                        split: Split::Train,
                        clip_ids: clip_ids.clone(),
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_, PlanError>>()?;
    let mut plan = DatasetPlan {
        roles: roles.clone(),
        seed,
        instances: Vec::with_capacity(per_sentence.iter().map(Vec::len).sum()),
    };
    plan.add_instances(per_sentence.into_iter().flatten())?;
    Ok(plan)
}
