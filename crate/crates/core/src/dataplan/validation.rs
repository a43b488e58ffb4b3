use std::path::Path;

use super::{
    instance_id, resolve_clips, AugmentationSpec, PlanError, RoleConfig, SentenceInstance, Split,
};
use crate::digest::{rank_digest, seed_string};
use crate::jsonl::read_records;
use crate::lexicon::Lexicon;
use crate::sentencegen::{render_text, Language, Sentence, SentenceError};

/// Default size of the second validation set.
pub const DEFAULT_VAL2_K: usize = 100;

fn heldout_instance(
    sentence: &Sentence,
    lexicon: &Lexicon,
    roles: &RoleConfig,
    split: Split,
) -> Result<SentenceInstance, PlanError> {
    let interp = &roles.heldout_interpreter;
    Ok(SentenceInstance {
        instance_id: instance_id(&sentence.sentence_id, interp, AugmentationSpec::Identity),
        sentence_id: sentence.sentence_id.clone(),
        interpreter_id: interp.clone(),
        augmentation: AugmentationSpec::Identity,
        split,
        clip_ids: resolve_clips(&sentence.sign_ids, lexicon, interp)?,
    })
}

/// Second validation set: the `k` training sentences with the lowest
/// `SHA-256(seed|val2|sentence_id)` digests, each signed once by the
/// held-out interpreter. Returned in sentence id order.
pub fn build_val2(
    sentences: &[Sentence],
    lexicon: &Lexicon,
    roles: &RoleConfig,
    seed: u64,
    k: usize,
) -> Result<Vec<SentenceInstance>, PlanError> {
    roles.validate()?;
    if k > sentences.len() {
        return Err(PlanError::TooFewSentences {
            k,
            available: sentences.len(),
        });
    }
    let seed_str = seed_string(seed);
    let mut ranked: Vec<(String, &Sentence)> = sentences
        .iter()
        .map(|s| (rank_digest(&[&seed_str, "val2", &s.sentence_id]), s))
        .collect();
    ranked.sort_unstable_by(|a, b| {
        a.0.cmp(&b.0)
            .then_with(|| a.1.sentence_id.cmp(&b.1.sentence_id))
    });
    ranked.truncate(k);
    ranked.sort_unstable_by(|a, b| a.1.sentence_id.cmp(&b.1.sentence_id));
    ranked
        .into_iter()
        .map(|(_, s)| heldout_instance(s, lexicon, roles, Split::Val2))
        .collect()
}

/// Reads hand-written sentences. Any length is accepted; missing
/// `pos_order` and texts are filled in from the lexicon.
pub fn load_val1_sentences(path: &Path, lexicon: &Lexicon) -> Result<Vec<Sentence>, PlanError> {
    let mut out = Vec::new();
    for (_, mut sentence) in read_records::<Sentence>(path)? {
        if sentence.sign_ids.is_empty() {
            return Err(PlanError::EmptySentence(sentence.sentence_id));
        }
        let mut pos = Vec::with_capacity(sentence.sign_ids.len());
        for id in &sentence.sign_ids {
            let sign = lexicon
                .sign(id)
                .ok_or_else(|| SentenceError::UnknownSign(id.clone()))?;
            pos.push(sign.pos);
        }
        if sentence.pos_order.is_empty() {
            sentence.pos_order = pos;
        }
        if sentence.text_en.is_empty() {
            sentence.text_en = render_text(&sentence.sign_ids, lexicon, Language::En)?;
        }
        if sentence.text_pt.is_empty() {
            sentence.text_pt = render_text(&sentence.sign_ids, lexicon, Language::Pt)?;
        }
        out.push(sentence);
    }
    Ok(out)
}

pub fn val1_instances(
    sentences: &[Sentence],
    lexicon: &Lexicon,
    roles: &RoleConfig,
) -> Result<Vec<SentenceInstance>, PlanError> {
    roles.validate()?;
    sentences
        .iter()
        .map(|s| heldout_instance(s, lexicon, roles, Split::Val1))
        .collect()
}

/// First validation set: one held-out, unaugmented instance per
/// hand-written sentence in `path`.
pub fn load_val1(
    path: &Path,
    lexicon: &Lexicon,
    roles: &RoleConfig,
) -> Result<Vec<SentenceInstance>, PlanError> {
    let sentences = load_val1_sentences(path, lexicon)?;
    val1_instances(&sentences, lexicon, roles)
}
