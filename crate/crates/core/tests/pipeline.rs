use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use signweave_core::dataplan::{build_val2, expand_instances, plan_summary, val1_instances};
use signweave_core::features::cache::{CacheKey, FeatureCache};
use signweave_core::features::concat::{concat_instance, extract_then_concat};
use signweave_core::features::format::decode;
use signweave_core::features::mock::MockExtractor;
use signweave_core::features::{ClipMeta, FeatureError, FeatureExtractor, FeatureStack, Stream};
use signweave_core::fixture::{manual_sentences, synthetic_lexicon, LexiconShape};
use signweave_core::lexicon::select_vocabulary;
use signweave_core::sentencegen::{gen_rf, gen_sf};
use signweave_core::{AugmentationSpec, Lexicon, RoleConfig, Split, Vocabulary};

struct CountingMock {
    inner: MockExtractor,
    calls: AtomicU64,
}

impl FeatureExtractor for CountingMock {
    fn extractor_id(&self) -> &str {
        self.inner.extractor_id()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn extract(
        &self,
        clip: &ClipMeta,
        augmentation: AugmentationSpec,
        stream: Stream,
    ) -> Result<FeatureStack, FeatureError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.extract(clip, augmentation, stream)
    }
}

fn roles() -> RoleConfig {
    RoleConfig::new(["i1", "i2"], "i3")
}

fn setup(n: usize) -> (Lexicon, Vocabulary) {
    let lexicon = synthetic_lexicon(&LexiconShape::default());
    let vocab = select_vocabulary(&lexicon, n, 0, &roles().all()).unwrap();
    (lexicon, vocab)
}

#[test]
fn thirteen_words_per_class_give_the_expected_sizes() {
    let (lexicon, vocab) = setup(13);
    for sentences in [
        gen_sf(&vocab, &lexicon).unwrap(),
        gen_rf(&vocab, &lexicon, 0).unwrap(),
    ] {
        assert_eq!(sentences.len(), 28_561);
        let plan = expand_instances(&sentences, &lexicon, &roles(), 0).unwrap();
        assert_eq!(plan.count(Split::Train), 171_366);
        assert_eq!(plan_summary(&plan).clip_slots, 685_464);
    }
}

#[test]
fn extraction_count_equals_distinct_keys() {
    let (lexicon, vocab) = setup(2);
    let sentences = gen_sf(&vocab, &lexicon).unwrap();
    let mut plan = expand_instances(&sentences, &lexicon, &roles(), 4).unwrap();
    plan.add_instances(build_val2(&sentences, &lexicon, &roles(), 4, 5).unwrap())
        .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let cache = FeatureCache::open(dir.path()).unwrap();
    let ex = CountingMock {
        inner: MockExtractor::new(32, 1).unwrap(),
        calls: AtomicU64::new(0),
    };
    let streams = Stream::ALL;
    let mut slots = 0;
    for inst in &plan.instances {
        concat_instance(inst, &lexicon, &cache, &ex, &streams).unwrap();
        slots += inst.clip_ids.len() * streams.len();
    }
    let keys: HashSet<(String, AugmentationSpec)> = plan
        .instances
        .iter()
        .flat_map(|i| i.clip_ids.iter().map(move |c| (c.clone(), i.augmentation)))
        .collect();
    let calls = ex.calls.load(Ordering::Relaxed) as usize;
    assert_eq!(calls, keys.len() * streams.len());
    assert_eq!(cache.len(), calls);
    assert_eq!(slots, plan_summary(&plan).clip_slots * streams.len());
    assert!(calls < slots);

    // A second pass is served entirely from disk.
    for inst in plan.instances.iter().take(20) {
        let cached = concat_instance(inst, &lexicon, &cache, &ex, &streams).unwrap();
        let direct = extract_then_concat(inst, &lexicon, &ex.inner, &streams).unwrap();
        assert!(cached.bit_eq(&direct));
    }
    assert_eq!(ex.calls.load(Ordering::Relaxed) as usize, calls);
}

#[test]
fn cache_files_decode_to_the_extracted_stack() {
    let (lexicon, _) = setup(1);
    let dir = tempfile::tempdir().unwrap();
    let cache = FeatureCache::open(dir.path()).unwrap();
    let mock = MockExtractor::new(16, 9).unwrap();
    let (sign, clip) = {
        let s = &lexicon.signs()[0];
        (s.sign_id.clone(), s.clips[0].clip_id.clone())
    };
    let meta = ClipMeta::from_lexicon(&lexicon, &clip).unwrap();
    assert_eq!(meta.sign_id, sign);
    for aug in AugmentationSpec::ALL {
        let key = CacheKey::new(&clip, aug, Stream::Flow, mock.extractor_id());
        let stack = cache.get_or_compute(&key, &mock, &meta).unwrap();
        let file = decode(&std::fs::read(cache.entry_path(&key.digest)).unwrap()).unwrap();
        assert_eq!(file.dim, 16);
        assert_eq!(file.n_windows, stack.n_windows);
        assert_eq!(file.values, stack.values);
    }

    // Reopening sees the same entries.
    let reopened = FeatureCache::open(dir.path()).unwrap();
    assert_eq!(reopened.digests(), cache.digests());
}

#[test]
fn free_form_validation_sentences_use_the_heldout_interpreter() {
    let (lexicon, vocab) = setup(13);
    let sentences = manual_sentences(&vocab, &lexicon, 52, 0);
    let lengths: BTreeSet<usize> = sentences.iter().map(|s| s.sign_ids.len()).collect();
    assert_eq!(lengths, BTreeSet::from([3, 4, 5]));
    let val1 = val1_instances(&sentences, &lexicon, &roles()).unwrap();
    assert_eq!(val1.len(), 52);
    for inst in &val1 {
        assert_eq!(inst.interpreter_id, "i3");
        assert_eq!(inst.augmentation, AugmentationSpec::Identity);
        for clip in &inst.clip_ids {
            assert_eq!(lexicon.clip(clip).unwrap().1.interpreter_id, "i3");
        }
    }
}
