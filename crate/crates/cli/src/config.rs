//! JSON config file with a flat key namespace mirroring the CLI flags.
//! Flags (and their `SIMT_*` environment variables) override file values.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    // curate
    pub min_source_words: Option<usize>,
    pub quality_threshold: Option<f64>,
    pub no_quality_filter: Option<bool>,
    pub merge_side: Option<String>,
    pub min_chunk_words: Option<usize>,
    pub min_cjk_chars: Option<usize>,
    pub scores: Option<String>,
    // simulate
    pub policy: Option<String>,
    pub latency: Option<String>,
    pub backend: Option<String>,
    pub template: Option<String>,
    pub max_tokens_per_write: Option<usize>,
    pub max_total_target: Option<usize>,
    pub per_eval_seconds: Option<f64>,
    pub time_mode: Option<String>,
    pub timeout_s: Option<f64>,
    pub retries: Option<u32>,
    pub jobs: Option<usize>,
    // simulate + evaluate
    pub arrival_interval: Option<f64>,
    // evaluate
    pub smooth: Option<bool>,
    pub aggregation: Option<String>,
    pub label: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flag value, else file value, else default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
