//! Pipeline stages. Each stage declares the artifacts it reads and
//! writes; the run manifest lets a rerun with unchanged inputs skip it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use signweave_core::dataplan::{
    build_val2, expand_instances_with, load_val1_sentences, plan_summary, val1_instances,
    PlanSummary, AUGMENTED_PER_INTERPRETER,
};
use signweave_core::features::cache::{CacheKey, FeatureCache};
use signweave_core::features::centroid::{build_centroids, nn_translate, CentroidTable};
use signweave_core::features::concat::concat_instance;
use signweave_core::features::{Cached, ClipMeta, Stream};
use signweave_core::jsonl::read_records;
use signweave_core::lexicon::{
    class_counts, load_manifest, select_vocabulary, validate_manifest, ValidationReport,
};
use signweave_core::metrics::{
    evaluate_corpus, load_eval_files, EvalCorpus, Matcher, MetricReport, SynonymTable, TextRecord,
};
use signweave_core::sentencegen::generate_config;
use signweave_core::{
    AugmentationSpec, DatasetPlan, Lexicon, Sentence, SentenceInstance, Split, Vocabulary,
};

use crate::artifacts::{
    file_digest, read_json, recorded_hash, write_json, write_jsonl, RunManifest, StageRecord,
};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::extractors::{self, Counting};

pub const INGEST_REPORT: &str = "ingest_report.json";
pub const VOCAB: &str = "vocab.json";
pub const SENTENCES: &str = "sentences.jsonl";
pub const PLAN: &str = "plan.jsonl";
pub const PLAN_SUMMARY: &str = "plan_summary.json";
pub const EXTRACT: &str = "extract.json";
/// Per-run hit/miss counters; not a tracked artifact since they depend on
/// what an earlier run already cached.
pub const EXTRACT_COUNTERS: &str = "extract_counters.json";
pub const STATS: &str = "stats.json";

pub fn refs_file(split: Split) -> String {
    format!("{}_refs.jsonl", split_name(split))
}

pub fn hyps_file(split: Split) -> String {
    format!("{}_hyps.jsonl", split_name(split))
}

pub fn report_file(split: Split) -> String {
    format!("report_{}.json", split_name(split))
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Val1 => "val1",
        Split::Val2 => "val2",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Ingest,
    Vocab,
    Gen,
    Plan,
    Extract,
    Translate,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Ingest,
        Stage::Vocab,
        Stage::Gen,
        Stage::Plan,
        Stage::Extract,
        Stage::Translate,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Vocab => "vocab",
            Stage::Gen => "gen",
            Stage::Plan => "plan",
            Stage::Extract => "extract",
            Stage::Translate => "translate",
            Stage::Eval => "eval",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Ran(String),
    UpToDate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub signs: usize,
    pub clips: usize,
    pub interpreters: Vec<String>,
    pub class_counts: BTreeMap<String, usize>,
    pub validation: ValidationReport,
    pub clean: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractSummary {
    pub extractor_id: String,
    pub dim: usize,
    pub streams: Vec<Stream>,
    /// Distinct (clip, augmentation) pairs, i.e. cache keys per stream.
    pub keys_per_stream: usize,
    pub clip_slots: usize,
    pub dedup_factor: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExtractCounters {
    pub extractor_calls: BTreeMap<Stream, u64>,
    pub hits: u64,
    pub misses: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    #[serde(flatten)]
    pub metrics: MetricReport,
    /// Position-wise token matches over reference tokens.
    pub token_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stats {
    pub per_split: BTreeMap<Split, usize>,
    pub total: usize,
    pub counts_consistent: bool,
    pub clip_slots: usize,
    pub cache_entries: usize,
    /// Plan keys (over all streams) present in the cache.
    pub cached_plan_keys: usize,
    pub hits: Option<u64>,
    pub misses: Option<u64>,
    pub dedup_factor: f64,
    pub warnings: Vec<String>,
}

/// Position-wise accuracy of hypotheses against their first reference.
pub fn token_accuracy(corpus: &EvalCorpus) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for item in corpus.items() {
        let reference = &item.references[0];
        total += reference.len();
        hit += reference
            .iter()
            .zip(&item.hypothesis)
            .filter(|(r, h)| r == h)
            .count();
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Scores a reference/hypothesis file pair.
pub fn evaluate_files(
    refs: &Path,
    hyps: &Path,
    synonyms: Option<&Path>,
    split: Option<Split>,
) -> Result<EvalReport> {
    let corpus = load_eval_files(refs, hyps)?;
    let matcher = matcher(synonyms)?;
    let metrics = evaluate_corpus(&corpus, &matcher)?;
    Ok(EvalReport {
        split,
        metrics,
        token_accuracy: token_accuracy(&corpus),
    })
}

fn matcher(synonyms: Option<&Path>) -> Result<Matcher> {
    Ok(match synonyms {
        Some(p) => Matcher::default().with_synonyms(SynonymTable::load(p)?),
        None => Matcher::default(),
    })
}

pub struct Pipeline {
    pub config: RunConfig,
    pub config_hash: String,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let config_hash = config.config_hash()?;
        Ok(Pipeline {
            config,
            config_hash,
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    fn val_splits(&self) -> Vec<Split> {
        if self.config.val1.is_some() {
            vec![Split::Val1, Split::Val2]
        } else {
            vec![Split::Val2]
        }
    }

    fn inputs(&self, stage: Stage) -> Vec<String> {
        match stage {
            Stage::Ingest => vec![],
            Stage::Vocab => vec![INGEST_REPORT.into()],
            Stage::Gen => vec![VOCAB.into()],
            Stage::Plan => vec![SENTENCES.into()],
            Stage::Extract => vec![PLAN.into()],
            Stage::Translate => vec![VOCAB.into(), SENTENCES.into(), PLAN.into(), EXTRACT.into()],
            Stage::Eval => self
                .val_splits()
                .into_iter()
                .flat_map(|s| [refs_file(s), hyps_file(s)])
                .collect(),
        }
    }

    fn outputs(&self, stage: Stage) -> Vec<String> {
        match stage {
            Stage::Ingest => vec![INGEST_REPORT.into()],
            Stage::Vocab => vec![VOCAB.into()],
            Stage::Gen => vec![SENTENCES.into()],
            Stage::Plan => vec![PLAN.into(), PLAN_SUMMARY.into()],
            Stage::Extract => vec![EXTRACT.into()],
            Stage::Translate => self
                .val_splits()
                .into_iter()
                .flat_map(|s| [refs_file(s), hyps_file(s)])
                .collect(),
            Stage::Eval => self.val_splits().into_iter().map(report_file).collect(),
        }
    }

    fn producer(name: &str) -> Stage {
        match name {
            INGEST_REPORT => Stage::Ingest,
            VOCAB => Stage::Vocab,
            SENTENCES => Stage::Gen,
            PLAN | PLAN_SUMMARY => Stage::Plan,
            EXTRACT => Stage::Extract,
            n if n.starts_with("report_") => Stage::Eval,
            _ => Stage::Translate,
        }
    }

    /// Digests of the stage's inputs, failing when one is absent or was
    /// produced under a different config.
    fn check_inputs(&self, stage: Stage) -> Result<BTreeMap<String, String>> {
        let mut digests = BTreeMap::new();
        for name in self.inputs(stage) {
            let path = self.artifact(&name);
            let producer = Self::producer(&name);
            if !path.is_file() {
                return Err(CliError::missing(format!(
                    "{stage} needs {}; run the {producer} stage first",
                    path.display()
                )));
            }
            if recorded_hash(&path).as_deref() != Some(self.config_hash.as_str()) {
                return Err(CliError::missing(format!(
                    "{} was produced under a different config; rerun the {producer} stage",
                    path.display()
                )));
            }
            digests.insert(name.clone(), file_digest(&path)?);
        }
        Ok(digests)
    }

    fn up_to_date(
        &self,
        stage: Stage,
        record: &StageRecord,
        inputs: &BTreeMap<String, String>,
    ) -> Result<bool> {
        if record.config_hash != self.config_hash || &record.inputs != inputs {
            return Ok(false);
        }
        let outputs = self.outputs(stage);
        if outputs.len() != record.outputs.len() {
            return Ok(false);
        }
        for name in outputs {
            let path = self.artifact(&name);
            if !path.is_file() || record.outputs.get(&name) != Some(&file_digest(&path)?) {
                return Ok(false);
            }
        }
        if stage == Stage::Extract {
            return self.cache_complete();
        }
        Ok(true)
    }

    pub fn run_stage(&self, stage: Stage) -> Result<Outcome> {
        let inputs = self.check_inputs(stage)?;
        let mut manifest = RunManifest::load(self.out_dir());
        if let Some(record) = manifest.stages.get(stage.name()) {
            if self.up_to_date(stage, record, &inputs)? {
                return Ok(Outcome::UpToDate);
            }
        }
        let message = match stage {
            Stage::Ingest => self.ingest()?,
            Stage::Vocab => self.vocab()?,
            Stage::Gen => self.gen()?,
            Stage::Plan => self.plan()?,
            Stage::Extract => self.extract()?,
            Stage::Translate => self.translate()?,
            Stage::Eval => self.eval()?,
        };
        let mut outputs = BTreeMap::new();
        for name in self.outputs(stage) {
            outputs.insert(name.clone(), file_digest(&self.artifact(&name))?);
        }
        manifest.seed = self.config.seed;
        manifest.config_hash = self.config_hash.clone();
        manifest.stages.insert(
            stage.name().to_string(),
            StageRecord {
                config_hash: self.config_hash.clone(),
                inputs,
                outputs,
            },
        );
        manifest.save(self.out_dir())?;
        Ok(Outcome::Ran(message))
    }

    pub fn run_all(&self) -> Result<Vec<(Stage, Outcome)>> {
        Stage::ALL
            .into_iter()
            .map(|s| self.run_stage(s).map(|o| (s, o)))
            .collect()
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        Ok(load_manifest(&self.config.manifest)?)
    }

    pub fn load_vocab(&self) -> Result<Vocabulary> {
        read_json(&self.artifact(VOCAB))
    }

    pub fn load_sentences(&self) -> Result<Vec<Sentence>> {
        Ok(read_records(&self.artifact(SENTENCES))?
            .into_iter()
            .map(|(_, s)| s)
            .collect())
    }

    pub fn load_plan(&self) -> Result<DatasetPlan> {
        let instances: Vec<SentenceInstance> = read_records(&self.artifact(PLAN))?
            .into_iter()
            .map(|(_, i)| i)
            .collect();
        Ok(DatasetPlan {
            roles: self.config.roles.clone(),
            seed: self.config.seed,
            instances,
        })
    }

    pub fn open_cache(&self) -> Result<FeatureCache> {
        Ok(FeatureCache::open(&self.config.cache_root)?)
    }

    fn ingest(&self) -> Result<String> {
        let lexicon = self.lexicon()?;
        let validation = validate_manifest(&lexicon);
        let report = IngestReport {
            signs: lexicon.len(),
            clips: lexicon.clip_count(),
            interpreters: lexicon.interpreters(),
            class_counts: class_counts(&lexicon)
                .into_iter()
                .map(|(c, n)| (c.as_str().to_string(), n))
                .collect(),
            clean: validation.is_clean(),
            validation,
        };
        write_json(&self.artifact(INGEST_REPORT), &self.config_hash, &report)?;
        Ok(format!(
            "{} signs, {} clips, {} interpreters{}",
            report.signs,
            report.clips,
            report.interpreters.len(),
            if report.clean {
                ""
            } else {
                " (anomalies reported)"
            }
        ))
    }

    fn vocab(&self) -> Result<String> {
        let lexicon = self.lexicon()?;
        let vocab = select_vocabulary(
            &lexicon,
            self.config.n_per_class,
            self.config.seed,
            &self.config.roles.all(),
        )?;
        write_json(&self.artifact(VOCAB), &self.config_hash, &vocab)?;
        Ok(format!("{} signs selected", vocab.len()))
    }

    fn gen(&self) -> Result<String> {
        let lexicon = self.lexicon()?;
        let vocab = self.load_vocab()?;
        let sentences = generate_config(self.config.config, &vocab, &lexicon, self.config.seed)?;
        write_jsonl(
            &self.artifact(SENTENCES),
            "sentences",
            &self.config_hash,
            &sentences,
        )?;
        Ok(format!("{} sentences", sentences.len()))
    }

    fn plan(&self) -> Result<String> {
        let lexicon = self.lexicon()?;
        let sentences = self.load_sentences()?;
        let cfg = &self.config;
        let augmented = if cfg.augment {
            AUGMENTED_PER_INTERPRETER
        } else {
            0
        };
        let mut plan =
            expand_instances_with(&sentences, &lexicon, &cfg.roles, cfg.seed, augmented)?;
        plan.add_instances(build_val2(
            &sentences, &lexicon, &cfg.roles, cfg.seed, cfg.val2_k,
        )?)?;
        if let Some(path) = &cfg.val1 {
            let val1 = load_val1_sentences(path, &lexicon)?;
            plan.add_instances(val1_instances(&val1, &lexicon, &cfg.roles)?)?;
        }
        write_jsonl(
            &self.artifact(PLAN),
            "plan",
            &self.config_hash,
            &plan.instances,
        )?;
        let summary = plan_summary(&plan);
        write_json(&self.artifact(PLAN_SUMMARY), &self.config_hash, &summary)?;
        Ok(format!(
            "{} instances (train {}, val1 {}, val2 {})",
            summary.total,
            plan.count(Split::Train),
            plan.count(Split::Val1),
            plan.count(Split::Val2)
        ))
    }

    /// Every cache key the plan needs, in a fixed order.
    pub fn plan_keys(&self, plan: &DatasetPlan, extractor_id: &str) -> Vec<CacheKey> {
        let pairs: BTreeSet<(&str, AugmentationSpec)> = plan
            .instances
            .iter()
            .flat_map(|i| i.clip_ids.iter().map(move |c| (c.as_str(), i.augmentation)))
            .collect();
        let streams = self.config.streams();
        pairs
            .into_iter()
            .flat_map(|(clip, aug)| {
                streams
                    .iter()
                    .map(move |&s| CacheKey::new(clip, aug, s, extractor_id))
            })
            .collect()
    }

    fn extractor_id(&self) -> Result<String> {
        Ok(extractors::from_config(&self.config)?
            .extractor_id()
            .to_string())
    }

    fn cache_complete(&self) -> Result<bool> {
        let plan = self.load_plan()?;
        let cache = self.open_cache()?;
        let id = self.extractor_id()?;
        Ok(self.plan_keys(&plan, &id).iter().all(|k| cache.contains(k)))
    }

    fn extract(&self) -> Result<String> {
        let lexicon = self.lexicon()?;
        let plan = self.load_plan()?;
        let cache = self.open_cache()?;
        let extractor = extractors::from_config(&self.config)?;
        let counting = Counting::new(extractor.as_ref());
        let keys = self.plan_keys(&plan, extractor.extractor_id());
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.workers)
            .build()
            .map_err(CliError::data)?;
        pool.install(|| {
            keys.par_iter().try_for_each(|key| -> Result<()> {
                let meta = ClipMeta::from_lexicon(&lexicon, &key.clip_id)?;
                cache.get_or_compute(key, &counting, &meta)?;
                Ok(())
            })
        })?;

        let streams = self.config.streams();
        let summary = plan_summary(&plan);
        let keys_per_stream = keys.len() / streams.len();
        let extract = ExtractSummary {
            extractor_id: extractor.extractor_id().to_string(),
            dim: extractor.dim(),
            streams: streams.clone(),
            keys_per_stream,
            clip_slots: summary.clip_slots,
            dedup_factor: ratio(summary.clip_slots, keys_per_stream),
        };
        write_json(&self.artifact(EXTRACT), &self.config_hash, &extract)?;
        let stats = cache.stats();
        let counters = ExtractCounters {
            extractor_calls: streams.iter().map(|&s| (s, counting.calls(s))).collect(),
            hits: stats.hits,
            misses: stats.misses,
        };
        write_json(
            &self.artifact(EXTRACT_COUNTERS),
            &self.config_hash,
            &counters,
        )?;
        Ok(format!(
            "{} keys per stream, {} extractor calls, {} cache hits, dedup {:.1}x",
            keys_per_stream, stats.misses, stats.hits, extract.dedup_factor
        ))
    }

    fn translate(&self) -> Result<String> {
        let lexicon = self.lexicon()?;
        let vocab = self.load_vocab()?;
        let plan = self.load_plan()?;
        let cache = self.open_cache()?;
        let extractor = extractors::from_config(&self.config)?;
        let streams = self.config.streams();
        let signs: Vec<String> = vocab.sign_ids().cloned().collect();
        let source = Cached {
            cache: &cache,
            extractor: extractor.as_ref(),
        };
        let centroids = build_centroids(&plan, &lexicon, &source, &streams, &signs)?;
        let table = CentroidTable::new(&centroids, &streams)?;

        let mut references: HashMap<String, String> = self
            .load_sentences()?
            .into_iter()
            .map(|s| (s.sentence_id, s.text_en))
            .collect();
        if let Some(path) = &self.config.val1 {
            for s in load_val1_sentences(path, &lexicon)? {
                references.insert(s.sentence_id, s.text_en);
            }
        }

        let mut counts = Vec::new();
        for split in self.val_splits() {
            let instances: Vec<&SentenceInstance> = plan.split(split).collect();
            let hyps = instances
                .par_iter()
                .map(|inst| -> Result<TextRecord> {
                    let features =
                        concat_instance(inst, &lexicon, &cache, extractor.as_ref(), &streams)?;
                    let tokens = nn_translate(&features, &table, &lexicon)?;
                    Ok(TextRecord {
                        id: inst.instance_id.clone(),
                        text: tokens.join(" "),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let refs = instances
                .iter()
                .map(|inst| {
                    let text = references.get(&inst.sentence_id).ok_or_else(|| {
                        CliError::data(format!("no reference text for {}", inst.sentence_id))
                    })?;
                    Ok(TextRecord {
                        id: inst.instance_id.clone(),
                        text: text.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let tag = split_name(split);
            write_jsonl(
                &self.artifact(&refs_file(split)),
                &format!("{tag}_refs"),
                &self.config_hash,
                &refs,
            )?;
            write_jsonl(
                &self.artifact(&hyps_file(split)),
                &format!("{tag}_hyps"),
                &self.config_hash,
                &hyps,
            )?;
            counts.push(format!("{tag} {}", hyps.len()));
        }
        Ok(format!(
            "{} centroids; translated {}",
            table.len(),
            counts.join(", ")
        ))
    }

    fn eval(&self) -> Result<String> {
        let mut lines = Vec::new();
        for split in self.val_splits() {
            let report = evaluate_files(
                &self.artifact(&refs_file(split)),
                &self.artifact(&hyps_file(split)),
                self.config.synonyms.as_deref(),
                Some(split),
            )?;
            write_json(
                &self.artifact(&report_file(split)),
                &self.config_hash,
                &report,
            )?;
            let m = &report.metrics;
            lines.push(format!(
                "{}: BLEU@1-4 {:.4} {:.4} {:.4} {:.4}, METEOR {:.4}, token accuracy {:.4}",
                split_name(split),
                m.bleu1,
                m.bleu2,
                m.bleu3,
                m.bleu4,
                m.meteor,
                report.token_accuracy
            ));
        }
        Ok(lines.join("; "))
    }

    /// Plan and cache report. Needs the plan; an empty or missing cache is
    /// reported, not an error.
    pub fn stats(&self) -> Result<Stats> {
        let plan_path = self.artifact(PLAN);
        if !plan_path.is_file() {
            return Err(CliError::missing(format!(
                "stats needs {}; run the plan stage first",
                plan_path.display()
            )));
        }
        let plan = self.load_plan()?;
        let summary: PlanSummary = plan_summary(&plan);
        let mut warnings = Vec::new();
        let (cache_entries, cached) = if self.config.cache_root.is_dir() {
            let cache = self.open_cache()?;
            let id = self.extractor_id()?;
            let cached = self
                .plan_keys(&plan, &id)
                .iter()
                .filter(|k| cache.contains(k))
                .count();
            (cache.len(), cached)
        } else {
            (0, 0)
        };
        let n_streams = self.config.streams().len();
        let dedup_factor = if cached == 0 {
            warnings.push("feature cache holds no entries for this plan; dedup factor is 0".into());
            0.0
        } else {
            ratio(summary.clip_slots * n_streams, cached)
        };
        let counters: Option<ExtractCounters> = read_json(&self.artifact(EXTRACT_COUNTERS)).ok();
        let per_split = summary.per_split.clone();
        let split_sum: usize = per_split.values().sum();
        let stats = Stats {
            counts_consistent: split_sum == summary.total,
            per_split,
            total: summary.total,
            clip_slots: summary.clip_slots,
            cache_entries,
            cached_plan_keys: cached,
            hits: counters.as_ref().map(|c| c.hits),
            misses: counters.as_ref().map(|c| c.misses),
            dedup_factor,
            warnings,
        };
        write_json(&self.artifact(STATS), &self.config_hash, &stats)?;
        Ok(stats)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}
