use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AugmentationSpec, DatasetPlan, Split};

/// Instance counts of a plan plus the number of distinct (clip,
/// augmentation) pairs, which bounds the feature cache size per stream.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub total: usize,
    pub per_split: BTreeMap<Split, usize>,
    pub per_interpreter: BTreeMap<String, usize>,
    pub per_augmentation: BTreeMap<AugmentationSpec, usize>,
    pub clip_slots: usize,
    pub distinct_clip_augmentations: usize,
}

pub fn plan_summary(plan: &DatasetPlan) -> PlanSummary {
    let mut summary = PlanSummary {
        per_split: Split::ALL.iter().map(|&s| (s, 0)).collect(),
        per_augmentation: AugmentationSpec::ALL.iter().map(|&a| (a, 0)).collect(),
        ..PlanSummary::default()
    };
    let mut distinct = BTreeSet::new();
    for inst in &plan.instances {
        summary.total += 1;
        *summary.per_split.entry(inst.split).or_default() += 1;
        *summary
            .per_interpreter
            .entry(inst.interpreter_id.clone())
            .or_default() += 1;
        *summary
            .per_augmentation
            .entry(inst.augmentation)
            .or_default() += 1;
        summary.clip_slots += inst.clip_ids.len();
        for clip in &inst.clip_ids {
            distinct.insert((clip.as_str(), inst.augmentation));
        }
    }
    summary.distinct_clip_augmentations = distinct.len();
    summary
}
