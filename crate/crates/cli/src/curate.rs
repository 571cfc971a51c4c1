use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;
use simt_core::curation::{
    attach_scores, read_corpus, read_scores, run_pipeline, write_jsonl, CurationConfig, MergeRule,
    MergeSide,
};

use crate::config::{pick, FileConfig};

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Chunk-aligned corpus (JSONL).
    pub input: PathBuf,
    #[arg(long, env = "SIMT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Kept records; defaults to `<input>.kept.jsonl`.
    #[arg(long, env = "SIMT_OUTPUT")]
    pub output: Option<PathBuf>,
    /// Drop log; defaults to `<input>.drops.jsonl`.
    #[arg(long, env = "SIMT_DROP_LOG")]
    pub drop_log: Option<PathBuf>,
    /// Quality score sidecar (JSONL `{id, score}`).
    #[arg(long, env = "SIMT_SCORES")]
    pub scores: Option<PathBuf>,
    #[arg(long, env = "SIMT_MIN_SOURCE_WORDS")]
    pub min_source_words: Option<usize>,
    #[arg(long, env = "SIMT_QUALITY_THRESHOLD")]
    pub quality_threshold: Option<f64>,
    #[arg(long, env = "SIMT_NO_QUALITY_FILTER")]
    pub no_quality_filter: bool,
    /// source | target | either
    #[arg(long, env = "SIMT_MERGE_SIDE")]
    pub merge_side: Option<String>,
    #[arg(long, env = "SIMT_MIN_CHUNK_WORDS")]
    pub min_chunk_words: Option<usize>,
    #[arg(long, env = "SIMT_MIN_CJK_CHARS")]
    pub min_cjk_chars: Option<usize>,
}

#[derive(Debug, Serialize)]
struct Summary {
    read: usize,
    malformed: usize,
    kept: usize,
    dropped: BTreeMap<String, usize>,
    unscored: usize,
}

fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let mut s = input.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Returns `Ok(false)` when some lines or records could not be processed.
pub fn run(args: &CurateArgs) -> Result<bool> {
    let file = FileConfig::load(args.config.as_deref())?;
    let no_quality = args.no_quality_filter || file.no_quality_filter.unwrap_or(false);
    let defaults = CurationConfig::default();
    let side: MergeSide = pick(args.merge_side.clone(), file.merge_side.clone(), "source".into()).parse()?;
    let config = CurationConfig {
        min_source_words: pick(args.min_source_words, file.min_source_words, defaults.min_source_words),
        quality_threshold: if no_quality {
            None
        } else {
            Some(pick(args.quality_threshold, file.quality_threshold, 80.0))
        },
        merge: MergeRule {
            min_words: pick(args.min_chunk_words, file.min_chunk_words, 2),
            min_cjk_chars: pick(args.min_cjk_chars, file.min_cjk_chars, 4),
            side,
        },
        ..defaults
    };

    let corpus = read_corpus(&args.input)
        .with_context(|| format!("reading corpus {}", args.input.display()))?;
    let mut records = corpus.records;
    let scores_path = args.scores.clone().or(file.scores.map(PathBuf::from));
    if let Some(path) = &scores_path {
        let scores = read_scores(path).with_context(|| format!("reading scores {}", path.display()))?;
        attach_scores(&mut records, &scores);
    }
    for e in &corpus.malformed {
        eprintln!("malformed: {e}");
    }

    let out = run_pipeline(&records, &config);
    for (id, e) in &out.errors {
        eprintln!("record {id}: {e}");
    }

    let output = args.output.clone().unwrap_or_else(|| sibling(&args.input, ".kept.jsonl"));
    let drop_log = args.drop_log.clone().unwrap_or_else(|| sibling(&args.input, ".drops.jsonl"));
    let mut w = BufWriter::new(File::create(&output).with_context(|| format!("creating {}", output.display()))?);
    write_jsonl(&mut w, &out.kept)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(&drop_log).with_context(|| format!("creating {}", drop_log.display()))?);
    write_jsonl(&mut w, &out.drops)?;
    w.flush()?;

    let mut dropped = BTreeMap::new();
    for d in &out.drops {
        *dropped.entry(d.stage.to_string()).or_insert(0) += 1;
    }
    let summary = Summary {
        read: records.len(),
        malformed: corpus.malformed.len(),
        kept: out.kept.len(),
        dropped,
        unscored: out.errors.len(),
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(corpus.malformed.is_empty() && out.errors.is_empty())
}
