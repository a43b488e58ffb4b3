use serde::{Deserialize, Serialize};

use super::Lexicon;

/// Signs with fewer interpreters than this are reported as missing videos.
pub const MIN_INTERPRETERS: usize = 3;

/// Clips shorter than one feature window are reported.
pub const MIN_CLIP_FRAMES: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingVideos {
    pub sign_id: String,
    pub interpreters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RareInterpreter {
    pub interpreter_id: String,
    pub sign_count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortClip {
    pub clip_id: String,
    pub sign_id: String,
    pub frame_count: u32,
}

/// Manifest anomalies. Validation never fails; it only reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub missing_videos: Vec<MissingVideos>,
    /// Interpreters present for fewer than half of all signs, which usually
    /// means the same person was recorded under different ids.
    pub rare_interpreters: Vec<RareInterpreter>,
    pub short_clips: Vec<ShortClip>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.missing_videos.is_empty()
            && self.rare_interpreters.is_empty()
            && self.short_clips.is_empty()
    }
}

pub fn validate_manifest(lexicon: &Lexicon) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n_signs = lexicon.len();

    for sign in lexicon.signs() {
        if sign.clips.len() < MIN_INTERPRETERS {
            report.missing_videos.push(MissingVideos {
                sign_id: sign.sign_id.clone(),
                interpreters: sign.clips.len(),
            });
        }
        for clip in &sign.clips {
            if clip.frame_count < MIN_CLIP_FRAMES {
                report.short_clips.push(ShortClip {
                    clip_id: clip.clip_id.clone(),
                    sign_id: sign.sign_id.clone(),
                    frame_count: clip.frame_count,
                });
            }
        }
    }

    for interpreter in lexicon.interpreters() {
        let sign_count = lexicon
            .signs()
            .iter()
            .filter(|s| s.clip_for(&interpreter).is_some())
            .count();
        if 2 * sign_count < n_signs {
            report.rare_interpreters.push(RareInterpreter {
                interpreter_id: interpreter,
                sign_count,
                fraction: sign_count as f64 / n_signs as f64,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::test_support::record;

    fn three_interp(sign: &str, pos: &str) -> Vec<crate::lexicon::ManifestRecord> {
        ["i1", "i2", "i3"]
            .iter()
            .map(|i| record(sign, pos, i, 30))
            .collect()
    }

    #[test]
    fn clean_manifest_has_no_anomalies() {
        let mut recs = three_interp("a", "noun");
        recs.extend(three_interp("b", "verb"));
        let lex = Lexicon::from_records(recs).unwrap();
        let report = validate_manifest(&lex);
        assert!(report.is_clean(), "{report:?}");
    }

    #[test]
    fn two_clip_sign_flagged() {
        let mut recs = three_interp("a", "noun");
        recs.push(record("b", "verb", "i1", 30));
        recs.push(record("b", "verb", "i2", 30));
        let lex = Lexicon::from_records(recs).unwrap();
        let report = validate_manifest(&lex);
        assert_eq!(
            report.missing_videos,
            vec![MissingVideos {
                sign_id: "b".into(),
                interpreters: 2
            }]
        );
        assert!(report.short_clips.is_empty());
    }

    #[test]
    fn short_clip_flagged() {
        let mut recs = three_interp("a", "noun");
        recs[1].frame_count = 7;
        let lex = Lexicon::from_records(recs).unwrap();
        let report = validate_manifest(&lex);
        assert_eq!(report.short_clips.len(), 1);
        assert_eq!(report.short_clips[0].clip_id, "a-i2");
        assert_eq!(report.short_clips[0].frame_count, 7);
    }

    #[test]
    fn exactly_ten_frames_is_not_short() {
        let mut recs = three_interp("a", "noun");
        recs[0].frame_count = 10;
        let lex = Lexicon::from_records(recs).unwrap();
        assert!(validate_manifest(&lex).short_clips.is_empty());
    }

    #[test]
    fn inconsistent_identity_suspected() {
        // "i3" and "x3" are presumably the same person under two ids.
        let mut recs = Vec::new();
        for (k, sign) in ["a", "b", "c", "d"].iter().enumerate() {
            recs.push(record(sign, "noun", "i1", 30));
            recs.push(record(sign, "noun", "i2", 30));
            recs.push(record(sign, "noun", if k == 0 { "x3" } else { "i3" }, 30));
        }
        let lex = Lexicon::from_records(recs).unwrap();
        let report = validate_manifest(&lex);
        assert_eq!(report.rare_interpreters.len(), 1);
        assert_eq!(report.rare_interpreters[0].interpreter_id, "x3");
        assert_eq!(report.rare_interpreters[0].sign_count, 1);
    }

    #[test]
    fn half_coverage_is_not_rare() {
        let recs = vec![
            record("a", "noun", "i1", 30),
            record("a", "noun", "i2", 30),
            record("b", "noun", "i1", 30),
        ];
        let lex = Lexicon::from_records(recs).unwrap();
        assert!(validate_manifest(&lex).rare_interpreters.is_empty());
    }
}
