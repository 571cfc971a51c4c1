#![allow(dead_code)]

use proptest::prelude::*;
use simt_core::engine::{CostModel, EngineConfig, PredictorHandle, Recording, ScriptedPredictor};
use simt_core::protocol::{interleave, PromptTemplate};
use simt_core::{AlignedChunkRecord, Chunk, LatencyLevel, TranslationTrace};

pub fn chunk(max_len: usize, prefix: &'static str) -> impl Strategy<Value = Chunk> {
    prop::collection::vec(0u8..40, 1..=max_len)
        .prop_map(move |v| v.into_iter().map(|i| format!("{prefix}{i}")).collect())
}

/// Valid records with T in 1..=max_chunks and chunk lengths in 1..=max_len.
pub fn record(max_chunks: usize, max_len: usize) -> impl Strategy<Value = AlignedChunkRecord> {
    (1..=max_chunks)
        .prop_flat_map(move |t| {
            (
                prop::collection::vec(chunk(max_len, "s"), t),
                prop::collection::vec(chunk(max_len, "t"), t),
                prop::sample::select(&LatencyLevel::ALL[..5]),
            )
        })
        .prop_map(|(src, tgt, latency)| AlignedChunkRecord {
            id: "gen".into(),
            src_lang: "de".into(),
            tgt_lang: "en".into(),
            latency,
            source_chunks: src,
            target_chunks: tgt,
            quality_score: Some(90.0),
        })
}

pub fn words(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Replays `record` through the adaptive engine with a scripted, recorded backend.
pub fn replay(
    record: &AlignedChunkRecord,
    config: &EngineConfig,
) -> (TranslationTrace, PredictorHandle<Recording<ScriptedPredictor>>) {
    replay_with(record, config, &PromptTemplate::default())
}

/// Ten prompt tokens after rendering.
pub fn ten_token_template() -> PromptTemplate {
    PromptTemplate::new("translate {src_lang} to {tgt_lang} at {latency_indicator} latency please now :").unwrap()
}

pub fn replay_with(
    record: &AlignedChunkRecord,
    config: &EngineConfig,
    template: &PromptTemplate,
) -> (TranslationTrace, PredictorHandle<Recording<ScriptedPredictor>>) {
    let seq = interleave(record, template).unwrap();
    let mut handle = PredictorHandle::new(
        Recording::new(ScriptedPredictor::new(seq.tokens().to_vec())),
        config.cost_model(),
    );
    handle.extend(seq.tokens()[..seq.prompt_len()].to_vec());
    let source: Vec<String> = record.source_words().map(String::from).collect();
    let trace = simt_core::engine::run_adaptive(&record.id, source, &mut handle, config).unwrap();
    (trace, handle)
}

pub fn sim(per_eval: f64) -> EngineConfig {
    EngineConfig {
        per_eval_seconds: per_eval,
        ..EngineConfig::default()
    }
}

pub fn zero_cost() -> CostModel {
    CostModel::Simulated { per_eval_seconds: 0.0 }
}
