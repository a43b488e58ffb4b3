//! Sentence-level METEOR with staged unigram alignment.
//!
//! Stages run in order: exact, stemmed (Snowball English), then synonyms
//! when a table is supplied. Each stage only considers tokens left unmatched
//! by earlier stages and adds as many one-to-one matches as possible; among
//! the maximal choices it keeps the one giving the fewest chunks.
//!
//! With `m` matches, `P = m/|hyp|`, `R = m/|ref|`,
//! `F = 10PR / (R + 9P)`, `penalty = 0.5 · (chunks/m)³` and
//! `score = F · (1 - penalty)`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rust_stemmers::{Algorithm, Stemmer};

use super::MetricError;

pub const ALPHA_RECALL_WEIGHT: f64 = 9.0;
pub const PENALTY_GAMMA: f64 = 0.5;
pub const PENALTY_BETA: f64 = 3.0;

/// Search nodes per stage before settling for the best alignment found.
const SEARCH_BUDGET: usize = 200_000;

/// Word groups read from a file: one group per line, words separated by
/// whitespace or commas; `#` starts a comment line.
#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    groups: HashMap<String, Vec<usize>>,
}

impl SynonymTable {
    pub fn from_groups<I, G, S>(groups: I) -> Self
    where
        I: IntoIterator<Item = G>,
        G: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut table = SynonymTable::default();
        for (gid, group) in groups.into_iter().enumerate() {
            for word in group {
                let entry = table
                    .groups
                    .entry(word.as_ref().to_lowercase())
                    .or_default();
                if !entry.contains(&gid) {
                    entry.push(gid);
                }
            }
        }
        table
    }

    pub fn load(path: &Path) -> Result<Self, MetricError> {
        let text = fs::read_to_string(path).map_err(|source| MetricError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::parse(&text))
    }

    pub fn parse(text: &str) -> Self {
        Self::from_groups(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| {
                    l.split(|c: char| c.is_whitespace() || c == ',')
                        .filter(|w| !w.is_empty())
                        .collect::<Vec<_>>()
                }),
        )
    }

    pub fn are_synonyms(&self, a: &str, b: &str) -> bool {
        match (self.groups.get(a), self.groups.get(b)) {
            (Some(ga), Some(gb)) => ga.iter().any(|g| gb.contains(g)),
            _ => false,
        }
    }
}

/// Matching resources for the stemmed and synonym stages.
pub struct Matcher {
    stemmer: Option<Stemmer>,
    synonyms: Option<SynonymTable>,
}

impl Default for Matcher {
    /// Exact and English-stemmed matching, no synonyms.
    fn default() -> Self {
        Matcher {
            stemmer: Some(Stemmer::create(Algorithm::English)),
            synonyms: None,
        }
    }
}

impl Matcher {
    pub fn exact_only() -> Self {
        Matcher {
            stemmer: None,
            synonyms: None,
        }
    }

    pub fn with_synonyms(mut self, table: SynonymTable) -> Self {
        self.synonyms = Some(table);
        self
    }

    pub fn stem(&self, word: &str) -> Option<String> {
        self.stemmer.as_ref().map(|s| s.stem(word).into_owned())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeteorScore {
    pub score: f64,
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
}

/// Number of runs of matches contiguous and in the same order on both
/// sides. `pairs` must be sorted by hypothesis position.
pub fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    1 + pairs
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

struct StageSearch<'a> {
    /// Candidate reference positions per hypothesis position.
    edges: &'a [Vec<usize>],
    ref_used: Vec<bool>,
    current: Vec<(usize, usize)>,
    fixed: &'a [(usize, usize)],
    target: usize,
    best: Option<(usize, Vec<(usize, usize)>)>,
    nodes: usize,
}

impl StageSearch<'_> {
    fn chunks_with(&self) -> usize {
        let mut all: Vec<(usize, usize)> =
            self.fixed.iter().chain(&self.current).copied().collect();
        all.sort_unstable();
        count_chunks(&all)
    }

    fn run(&mut self, h: usize) {
        if self.best.as_ref().is_some_and(|(c, _)| *c == 1) || self.nodes >= SEARCH_BUDGET {
            return;
        }
        self.nodes += 1;
        let remaining = self.edges[h..].iter().filter(|e| !e.is_empty()).count();
        if self.current.len() + remaining < self.target {
            return;
        }
        if h == self.edges.len() {
            let chunks = self.chunks_with();
            if self.best.as_ref().is_none_or(|(c, _)| chunks < *c) {
                self.best = Some((chunks, self.current.clone()));
            }
            return;
        }
        for &r in &self.edges[h] {
            if !self.ref_used[r] {
                self.ref_used[r] = true;
                self.current.push((h, r));
                self.run(h + 1);
                self.current.pop();
                self.ref_used[r] = false;
            }
        }
        self.run(h + 1);
    }
}

/// Maximum bipartite matching size (Kuhn's augmenting paths).
fn max_matching(edges: &[Vec<usize>], n_ref: usize) -> usize {
    fn augment(
        h: usize,
        edges: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &r in &edges[h] {
            if !seen[r] {
                seen[r] = true;
                if owner[r].is_none_or(|o| augment(o, edges, seen, owner)) {
                    owner[r] = Some(h);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; n_ref];
    (0..edges.len())
        .filter(|&h| augment(h, edges, &mut vec![false; n_ref], &mut owner))
        .count()
}

fn run_stage(
    hyp: &[String],
    reference: &[String],
    matched: &mut Vec<(usize, usize)>,
    equivalent: impl Fn(usize, usize) -> bool,
) {
    let h_used: Vec<bool> = (0..hyp.len())
        .map(|h| matched.iter().any(|m| m.0 == h))
        .collect();
    let r_used: Vec<bool> = (0..reference.len())
        .map(|r| matched.iter().any(|m| m.1 == r))
        .collect();
    let edges: Vec<Vec<usize>> = (0..hyp.len())
        .map(|h| {
            if h_used[h] {
                return Vec::new();
            }
            (0..reference.len())
                .filter(|&r| !r_used[r] && equivalent(h, r))
                .collect()
        })
        .collect();
    let target = max_matching(&edges, reference.len());
    if target == 0 {
        return;
    }
    let mut search = StageSearch {
        edges: &edges,
        ref_used: r_used,
        current: Vec::new(),
        fixed: matched,
        target,
        best: None,
        nodes: 0,
    };
    search.run(0);
    let (_, pairs) = search.best.expect("a maximum matching exists");
    matched.extend(pairs);
    matched.sort_unstable();
}

/// Unigram alignment pairs `(hyp position, ref position)` sorted by
/// hypothesis position.
pub fn align(
    reference: &[String],
    hypothesis: &[String],
    matcher: &Matcher,
) -> Vec<(usize, usize)> {
    let mut matched = Vec::new();
    run_stage(hypothesis, reference, &mut matched, |h, r| {
        hypothesis[h] == reference[r]
    });
    if let Some(stemmer) = &matcher.stemmer {
        let hs: Vec<_> = hypothesis
            .iter()
            .map(|w| stemmer.stem(w).into_owned())
            .collect();
        let rs: Vec<_> = reference
            .iter()
            .map(|w| stemmer.stem(w).into_owned())
            .collect();
        run_stage(hypothesis, reference, &mut matched, |h, r| hs[h] == rs[r]);
    }
    if let Some(table) = &matcher.synonyms {
        run_stage(hypothesis, reference, &mut matched, |h, r| {
            table.are_synonyms(&hypothesis[h], &reference[r])
        });
    }
    matched
}

pub fn meteor_sentence(
    reference: &[String],
    hypothesis: &[String],
    matcher: &Matcher,
) -> MeteorScore {
    let pairs = align(reference, hypothesis, matcher);
    let m = pairs.len();
    if m == 0 {
        return MeteorScore {
            score: 0.0,
            matches: 0,
            chunks: 0,
            precision: 0.0,
            recall: 0.0,
            fmean: 0.0,
            penalty: 0.0,
        };
    }
    let chunks = count_chunks(&pairs);
    let precision = m as f64 / hypothesis.len() as f64;
    let recall = m as f64 / reference.len() as f64;
    let fmean = 10.0 * precision * recall / (recall + ALPHA_RECALL_WEIGHT * precision);
    let penalty = PENALTY_GAMMA * (chunks as f64 / m as f64).powf(PENALTY_BETA);
    MeteorScore {
        score: fmean * (1.0 - penalty),
        matches: m,
        chunks,
        precision,
        recall,
        fmean,
        penalty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;
    use proptest::prelude::*;

    fn score(r: &str, h: &str) -> MeteorScore {
        meteor_sentence(&tokenize(r), &tokenize(h), &Matcher::default())
    }

    /// Every one-to-one exact alignment of maximum size, by brute force over
    /// all assignments; returns the minimum chunk count.
    fn brute_min_chunks(r: &[String], h: &[String]) -> (usize, usize) {
        fn rec(
            h: usize,
            hyp: &[String],
            reference: &[String],
            used: &mut Vec<bool>,
            cur: &mut Vec<(usize, usize)>,
            best: &mut (usize, usize),
        ) {
            if h == hyp.len() {
                let c = count_chunks(cur);
                let m = cur.len();
                if m > best.0 || (m == best.0 && c < best.1) {
                    *best = (m, c);
                }
                return;
            }
            rec(h + 1, hyp, reference, used, cur, best);
            for r in 0..reference.len() {
                if !used[r] && hyp[h] == reference[r] {
                    used[r] = true;
                    cur.push((h, r));
                    rec(h + 1, hyp, reference, used, cur, best);
                    cur.pop();
                    used[r] = false;
                }
            }
        }
        let mut best = (0, usize::MAX);
        rec(
            0,
            h,
            r,
            &mut vec![false; r.len()],
            &mut Vec::new(),
            &mut best,
        );
        best
    }

    #[test]
    fn identical_four_tokens() {
        let s = score("house big run quickly", "house big run quickly");
        assert_eq!((s.matches, s.chunks), (4, 1));
        assert!((s.score - 0.9921875).abs() < 1e-12);
    }

    #[test]
    fn one_substitution() {
        let s = score("a b c d", "a b x d");
        assert_eq!((s.matches, s.chunks), (3, 2));
        assert!((s.fmean - 0.75).abs() < 1e-12);
        let expected = 0.75 * (1.0 - 0.5 * (2.0f64 / 3.0).powi(3));
        assert!((s.score - expected).abs() < 1e-12);
        assert!((s.score - 0.6389).abs() < 1e-4);
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(score("a b", "c d").score, 0.0);
        assert_eq!(score("a b", "").score, 0.0);
    }

    #[test]
    fn stem_stage_matches_plurals() {
        let s = score("the garden", "the gardens");
        assert_eq!(s.matches, 2);
        let exact = meteor_sentence(
            &tokenize("the garden"),
            &tokenize("the gardens"),
            &Matcher::exact_only(),
        );
        assert_eq!(exact.matches, 1);
    }

    #[test]
    fn synonym_stage_only_with_table() {
        let r = tokenize("big house");
        let h = tokenize("large house");
        assert_eq!(meteor_sentence(&r, &h, &Matcher::default()).matches, 1);
        let table = SynonymTable::parse("# sizes\nbig, large huge\n\n");
        assert!(table.are_synonyms("large", "big"));
        let m = Matcher::default().with_synonyms(table);
        let s = meteor_sentence(&r, &h, &m);
        assert_eq!((s.matches, s.chunks), (2, 1));
    }

    #[test]
    fn duplicates_aligned_for_fewest_chunks() {
        // Greedy left-to-right would pair hyp "a"@0 with ref "a"@0 and give
        // two chunks; the best alignment is one chunk.
        let s = score("a x a b", "a b");
        assert_eq!((s.matches, s.chunks), (2, 1));
    }

    #[test]
    fn earlier_stage_matches_are_kept() {
        // "runs" matches "runs" exactly even though "run" would stem-match it.
        let pairs = align(
            &tokenize("run runs"),
            &tokenize("runs"),
            &Matcher::default(),
        );
        assert_eq!(pairs, [(0, 1)]);
    }

    fn words() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c"]), 0..7)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        #[test]
        fn exact_alignment_is_optimal(r in words(), h in words()) {
            let s = meteor_sentence(&r, &h, &Matcher::exact_only());
            let (m, c) = brute_min_chunks(&r, &h);
            prop_assert_eq!(s.matches, m);
            if m > 0 {
                prop_assert_eq!(s.chunks, c);
            }
        }

        #[test]
        fn bounded_and_consistent(r in words(), h in words()) {
            let s = meteor_sentence(&r, &h, &Matcher::default());
            prop_assert!((0.0..=1.0).contains(&s.score));
            prop_assert!(s.chunks <= s.matches);
            if s.matches > 0 {
                prop_assert_eq!(s.score, s.fmean * (1.0 - s.penalty));
            }
        }
    }
}
