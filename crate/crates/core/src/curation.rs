//! Corpus curation: length, alignment and quality filters followed by
//! short-chunk merging, plus JSONL corpus I/O.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;
use crate::types::{validate_record, AlignedChunkRecord, Chunk};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOutcome {
    Keep,
    Drop(String),
}

impl FilterOutcome {
    pub fn is_keep(&self) -> bool {
        matches!(self, FilterOutcome::Keep)
    }
}

pub fn filter_source_length(record: &AlignedChunkRecord, min_words: usize) -> FilterOutcome {
    let n = record.source_units();
    if n < min_words {
        FilterOutcome::Drop(format!("source length {n} < {min_words}"))
    } else {
        FilterOutcome::Keep
    }
}

pub fn filter_alignment(record: &AlignedChunkRecord) -> FilterOutcome {
    let (s, t) = (record.source_chunks.len(), record.target_chunks.len());
    if s == 0 {
        FilterOutcome::Drop("empty record".into())
    } else if s != t {
        FilterOutcome::Drop(format!("unequal chunk counts {s} vs {t}"))
    } else {
        FilterOutcome::Keep
    }
}

pub fn filter_quality(record: &AlignedChunkRecord, threshold: f64) -> Result<FilterOutcome> {
    let score = record
        .quality_score
        .ok_or_else(|| Error::Unscored(record.id.clone()))?;
    Ok(if score < threshold {
        FilterOutcome::Drop(format!("quality score {score} < {threshold}"))
    } else {
        FilterOutcome::Keep
    })
}

/// Which side of an aligned chunk pair decides whether the pair is too short.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeSide {
    #[default]
    Source,
    Target,
    Either,
}

impl FromStr for MergeSide {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(MergeSide::Source),
            "target" => Ok(MergeSide::Target),
            "either" => Ok(MergeSide::Either),
            _ => Err(Error::Config(format!("merge side must be source|target|either, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeRule {
    pub min_words: usize,
    pub min_cjk_chars: usize,
    pub side: MergeSide,
}

impl Default for MergeRule {
    fn default() -> Self {
        MergeRule {
            min_words: 2,
            min_cjk_chars: 4,
            side: MergeSide::Source,
        }
    }
}

impl MergeRule {
    fn chunk_is_short(&self, chunk: &[String]) -> bool {
        let joined: String = chunk.concat();
        if text::is_cjk(&joined) {
            joined.chars().filter(|c| !c.is_whitespace()).count() < self.min_cjk_chars
        } else {
            chunk.len() < self.min_words
        }
    }

    fn pair_is_short(&self, src: &[String], tgt: &[String]) -> bool {
        match self.side {
            MergeSide::Source => self.chunk_is_short(src),
            MergeSide::Target => self.chunk_is_short(tgt),
            MergeSide::Either => self.chunk_is_short(src) || self.chunk_is_short(tgt),
        }
    }
}

/// Folds each short chunk pair into its successor; a short final pair is
/// folded into its predecessor. Word order on both sides is preserved.
pub fn merge_short_chunks(record: &AlignedChunkRecord, rule: &MergeRule) -> AlignedChunkRecord {
    let n = record.source_chunks.len().min(record.target_chunks.len());
    let mut src_out: Vec<Chunk> = Vec::with_capacity(n);
    let mut tgt_out: Vec<Chunk> = Vec::with_capacity(n);
    let mut carry: Option<(Chunk, Chunk)> = None;

    for (t, (src, tgt)) in record.source_chunks.iter().zip(&record.target_chunks).enumerate() {
        let (mut s, mut g) = carry.take().unwrap_or_default();
        s.extend(src.iter().cloned());
        g.extend(tgt.iter().cloned());
        if t + 1 < n && rule.pair_is_short(&s, &g) {
            carry = Some((s, g));
        } else {
            src_out.push(s);
            tgt_out.push(g);
        }
    }

    let last = src_out.len();
    if last >= 2 && rule.pair_is_short(&src_out[last - 1], &tgt_out[last - 1]) {
        let s = src_out.pop().unwrap();
        let g = tgt_out.pop().unwrap();
        src_out[last - 2].extend(s);
        tgt_out[last - 2].extend(g);
    }

    AlignedChunkRecord {
        source_chunks: src_out,
        target_chunks: tgt_out,
        ..record.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SourceLength,
    Alignment,
    Quality,
    Validation,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::SourceLength => "source_length",
            Stage::Alignment => "alignment",
            Stage::Quality => "quality",
            Stage::Validation => "validation",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurationConfig {
    pub min_source_words: usize,
    /// `None` disables the quality filter.
    pub quality_threshold: Option<f64>,
    pub merge: MergeRule,
    /// Filters run in this order; merging always runs last.
    pub filter_order: Vec<Stage>,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            min_source_words: 20,
            quality_threshold: Some(80.0),
            merge: MergeRule::default(),
            filter_order: vec![Stage::SourceLength, Stage::Alignment, Stage::Quality],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEntry {
    pub id: String,
    pub stage: Stage,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct PipelineOutput {
    pub kept: Vec<AlignedChunkRecord>,
    pub drops: Vec<DropEntry>,
    /// Records that could not be judged (e.g. missing quality score).
    pub errors: Vec<(String, Error)>,
}

impl PipelineOutput {
    pub fn drops_at(&self, stage: Stage) -> usize {
        self.drops.iter().filter(|d| d.stage == stage).count()
    }
}

enum Verdict {
    Keep(AlignedChunkRecord),
    Drop(DropEntry),
    Error(Error),
}

fn curate_one(record: &AlignedChunkRecord, config: &CurationConfig) -> Verdict {
    let drop = |stage, reason| {
        Verdict::Drop(DropEntry {
            id: record.id.clone(),
            stage,
            reason,
        })
    };
    for &stage in &config.filter_order {
        let outcome = match stage {
            Stage::SourceLength => filter_source_length(record, config.min_source_words),
            Stage::Alignment => filter_alignment(record),
            Stage::Quality => match config.quality_threshold {
                Some(th) => match filter_quality(record, th) {
                    Ok(o) => o,
                    Err(e) => return Verdict::Error(e),
                },
                None => FilterOutcome::Keep,
            },
            Stage::Validation => FilterOutcome::Keep,
        };
        if let FilterOutcome::Drop(reason) = outcome {
            return drop(stage, reason);
        }
    }
    let merged = merge_short_chunks(record, &config.merge);
    match validate_record(&merged) {
        Ok(()) => Verdict::Keep(merged),
        Err(v) => drop(
            Stage::Validation,
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ),
    }
}

/// Runs the filters and the merge over a corpus. Output order follows input order.
pub fn run_pipeline(records: &[AlignedChunkRecord], config: &CurationConfig) -> PipelineOutput {
    let mut out = PipelineOutput::default();
    for r in records {
        match curate_one(r, config) {
            Verdict::Keep(k) => out.kept.push(k),
            Verdict::Drop(d) => out.drops.push(d),
            Verdict::Error(e) => out.errors.push((r.id.clone(), e)),
        }
    }
    out
}

#[derive(Debug, Deserialize)]
struct ScoreLine {
    id: String,
    score: f64,
}

/// Reads a `{id, score}` JSONL sidecar.
pub fn read_scores(path: &Path) -> Result<HashMap<String, f64>> {
    let mut scores = HashMap::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: ScoreLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        scores.insert(s.id, s.score);
    }
    Ok(scores)
}

/// Sets `quality_score` from the sidecar; records absent from it keep their own score.
pub fn attach_scores(records: &mut [AlignedChunkRecord], scores: &HashMap<String, f64>) {
    for r in records {
        if let Some(&s) = scores.get(&r.id) {
            r.quality_score = Some(s);
        }
    }
}

/// Parsed corpus plus the lines that failed to parse.
#[derive(Debug, Default)]
pub struct CorpusRead {
    pub records: Vec<AlignedChunkRecord>,
    pub malformed: Vec<Error>,
}

pub fn read_corpus(path: &Path) -> Result<CorpusRead> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = CorpusRead::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<AlignedChunkRecord>(&line) {
            Ok(r) => out.records.push(r),
            Err(e) => out.malformed.push(Error::Malformed {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

pub fn write_jsonl<W: Write, T: Serialize>(out: &mut W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::LatencyLevel;

    fn c(v: &[&[&str]]) -> Vec<Chunk> {
        v.iter().map(|c| c.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn rec(src: &[&[&str]], tgt: &[&[&str]]) -> AlignedChunkRecord {
        AlignedChunkRecord {
            id: "r".into(),
            src_lang: "de".into(),
            tgt_lang: "en".into(),
            latency: LatencyLevel::Medium,
            source_chunks: c(src),
            target_chunks: c(tgt),
            quality_score: Some(90.0),
        }
    }

    fn words(n: usize) -> Vec<Chunk> {
        vec![(0..n).map(|i| format!("w{i}")).collect()]
    }

    #[test]
    fn length_filter_boundary() {
        let mut r = rec(&[], &[]);
        r.source_chunks = words(19);
        assert_eq!(
            filter_source_length(&r, 20),
            FilterOutcome::Drop("source length 19 < 20".into())
        );
        r.source_chunks = words(20);
        assert!(filter_source_length(&r, 20).is_keep());
        r.source_chunks = words(1);
        assert!(filter_source_length(&r, 1).is_keep());
    }

    #[test]
    fn length_filter_counts_cjk_characters() {
        let mut r = rec(&[&["我们今天", "去"]], &[&["we"]]);
        assert!(!filter_source_length(&r, 6).is_keep());
        assert!(filter_source_length(&r, 5).is_keep());
        r.source_chunks = c(&[&["ab", "我"]]);
        assert!(filter_source_length(&r, 2).is_keep());
    }

    #[test]
    fn alignment_filter() {
        assert!(filter_alignment(&rec(&[&["a"], &["b"], &["c"]], &[&["X"], &["Y"], &["Z"]])).is_keep());
        assert!(!filter_alignment(&rec(&[&["a"], &["b"], &["c"]], &[&["X"], &["Y"]])).is_keep());
        assert_eq!(
            filter_alignment(&rec(&[], &[])),
            FilterOutcome::Drop("empty record".into())
        );
    }

    #[test]
    fn quality_filter_boundary_and_missing() {
        let mut r = rec(&[&["a"]], &[&["X"]]);
        r.quality_score = Some(79.9);
        assert!(!filter_quality(&r, 80.0).unwrap().is_keep());
        r.quality_score = Some(80.0);
        assert!(filter_quality(&r, 80.0).unwrap().is_keep());
        r.quality_score = None;
        assert!(matches!(filter_quality(&r, 80.0), Err(Error::Unscored(_))));
    }

    #[test]
    fn merge_examples() {
        let rule = MergeRule::default();
        let m = merge_short_chunks(&rec(&[&["a"], &["b", "c"]], &[&["X"], &["Y"]]), &rule);
        assert_eq!(m.source_chunks, c(&[&["a", "b", "c"]]));
        assert_eq!(m.target_chunks, c(&[&["X", "Y"]]));

        let r = rec(&[&["a", "b"], &["c", "d"]], &[&["X"], &["Y"]]);
        assert_eq!(merge_short_chunks(&r, &rule), r);

        let m = merge_short_chunks(&rec(&[&["a", "b"], &["c"]], &[&["X"], &["Y"]]), &rule);
        assert_eq!(m.source_chunks, c(&[&["a", "b", "c"]]));
        assert_eq!(m.target_chunks, c(&[&["X", "Y"]]));
    }

    #[test]
    fn merge_carries_until_long_enough() {
        let rule = MergeRule { min_words: 3, ..MergeRule::default() };
        let m = merge_short_chunks(
            &rec(&[&["a"], &["b"], &["c"], &["d", "e", "f"]], &[&["W"], &["X"], &["Y"], &["Z"]]),
            &rule,
        );
        assert_eq!(m.source_chunks, c(&[&["a", "b", "c"], &["d", "e", "f"]]));
        assert_eq!(m.target_chunks, c(&[&["W", "X", "Y"], &["Z"]]));
    }

    #[test]
    fn merge_single_short_chunk_is_left_alone() {
        let r = rec(&[&["a"]], &[&["X"]]);
        assert_eq!(merge_short_chunks(&r, &MergeRule::default()), r);
    }

    #[test]
    fn merge_cjk_threshold_and_side() {
        let rule = MergeRule::default();
        let m = merge_short_chunks(&rec(&[&["我们去"], &["北京", "看看"]], &[&["we go"], &["to Beijing"]]), &rule);
        assert_eq!(m.source_chunks.len(), 1);
        let m = merge_short_chunks(&rec(&[&["我们今天"], &["去北京"]], &[&["a"], &["b"]]), &rule);
        // second chunk has 3 characters, so it folds back into the first
        assert_eq!(m.source_chunks, c(&[&["我们今天", "去北京"]]));

        let target_rule = MergeRule { side: MergeSide::Target, ..rule };
        let r = rec(&[&["a", "b"], &["c", "d"]], &[&["X"], &["Y", "Z"]]);
        assert_eq!(merge_short_chunks(&r, &target_rule).source_chunks.len(), 1);
        assert_eq!(merge_short_chunks(&r, &rule).source_chunks.len(), 2);
        let either = MergeRule { side: MergeSide::Either, ..rule };
        assert_eq!(merge_short_chunks(&r, &either).source_chunks.len(), 1);
    }

    #[test]
    fn pipeline_attributes_stages() {
        let mut short = rec(&[&["a", "b"]], &[&["X"]]);
        short.id = "short".into();
        let mut misaligned = rec(&[&["a"], &["b"]], &[&["X"]]);
        misaligned.id = "misaligned".into();
        let mut unscored = rec(&[&["a", "b"]], &[&["X"]]);
        unscored.id = "unscored".into();
        unscored.quality_score = None;
        let ok = rec(&[&["a", "b"]], &[&["X"]]);
        let cfg = CurationConfig { min_source_words: 2, ..CurationConfig::default() };
        let mut short3 = short.clone();
        short3.source_chunks = c(&[&["a"]]);
        let out = run_pipeline(&[short3, misaligned, unscored, ok.clone()], &cfg);
        assert_eq!(out.kept, vec![ok]);
        assert_eq!(out.drops[0].stage, Stage::SourceLength);
        assert_eq!(out.drops[1].stage, Stage::Alignment);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].0, "unscored");

        let empty = run_pipeline(&[], &cfg);
        assert!(empty.kept.is_empty() && empty.drops.is_empty());
    }

    #[test]
    fn pipeline_without_quality_filter_accepts_unscored() {
        let mut r = rec(&[&["a", "b"]], &[&["X"]]);
        r.quality_score = None;
        let cfg = CurationConfig { min_source_words: 1, quality_threshold: None, ..CurationConfig::default() };
        assert_eq!(run_pipeline(&[r], &cfg).kept.len(), 1);
    }

    #[test]
    fn drop_log_serialization() {
        let d = DropEntry { id: "x".into(), stage: Stage::SourceLength, reason: "r".into() };
        assert_eq!(
            serde_json::to_string(&d).unwrap(),
            r#"{"id":"x","stage":"source_length","reason":"r"}"#
        );
    }
}
