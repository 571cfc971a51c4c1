//! Quality and latency metrics over decoding traces.

mod alignment;
mod bleu;
mod latency;

pub use alignment::{hallucination_rate, policy_alignment_proportion, policy_hits, unaligned_count};
pub use bleu::{corpus_bleu, BleuStats, Smoothing};
pub use latency::{
    average_lagging, computation_aware_al, computation_aware_delays, length_adaptive_al,
    word_wall_time,
};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;
use crate::types::{MetricReport, TranslationTrace, WordAlignment};

/// How per-sentence latencies are combined into one corpus number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyAggregation {
    /// Plain mean over sentences.
    #[default]
    SentenceMean,
    /// Mean weighted by hypothesis length.
    TokenWeighted,
}

impl FromStr for LatencyAggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentence_mean" | "sentence-mean" => Ok(LatencyAggregation::SentenceMean),
            "token_weighted" | "token-weighted" => Ok(LatencyAggregation::TokenWeighted),
            _ => Err(Error::Config(format!("unknown latency aggregation {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub arrival_interval_s: f64,
    pub smoothing: Smoothing,
    pub aggregation: LatencyAggregation,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            arrival_interval_s: 0.3,
            smoothing: Smoothing::None,
            aggregation: LatencyAggregation::SentenceMean,
        }
    }
}

/// Per-sentence latency numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceLatency {
    pub al: f64,
    pub laal: f64,
    pub al_ca: f64,
}

pub fn sentence_latency(
    trace: &TranslationTrace,
    reference_len: usize,
    arrival_interval_s: f64,
) -> Result<SentenceLatency> {
    let y = trace.emitted.len();
    Ok(SentenceLatency {
        al: average_lagging(&trace.delays, trace.source_len, y)?,
        laal: length_adaptive_al(&trace.delays, trace.source_len, y, reference_len)?,
        al_ca: computation_aware_al(trace, arrival_interval_s)?,
    })
}

/// Scores a corpus of traces against references.
///
/// Hallucination rate and policy proportion are pooled over all target
/// tokens and only reported when their inputs are given. Sentences with no
/// output are left out of the latency averages.
pub fn evaluate(
    traces: &[TranslationTrace],
    references: &[String],
    alignments: Option<&[WordAlignment]>,
    gold_positions: Option<&[Vec<usize>]>,
    options: &EvalOptions,
) -> Result<MetricReport> {
    if traces.len() != references.len() {
        return Err(Error::LengthMismatch(format!(
            "{} traces vs {} references",
            traces.len(),
            references.len()
        )));
    }
    let hypotheses: Vec<String> = traces.iter().map(TranslationTrace::hypothesis).collect();
    let bleu = corpus_bleu(&hypotheses, references, options.smoothing)?;

    let (mut al, mut laal, mut al_ca, mut weight) = (0.0, 0.0, 0.0, 0.0);
    for (t, r) in traces.iter().zip(references) {
        if t.emitted.is_empty() {
            continue;
        }
        let ref_len = text::units(r).len().max(1);
        let s = sentence_latency(t, ref_len, options.arrival_interval_s)?;
        let w = match options.aggregation {
            LatencyAggregation::SentenceMean => 1.0,
            LatencyAggregation::TokenWeighted => t.emitted.len() as f64,
        };
        al += w * s.al;
        laal += w * s.laal;
        al_ca += w * s.al_ca;
        weight += w;
    }
    if weight == 0.0 {
        return Err(Error::UndefinedInput("no trace has any output".into()));
    }

    let hallucination_rate = match alignments {
        None => None,
        Some(al) => {
            if al.len() != traces.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} alignments vs {} traces",
                    al.len(),
                    traces.len()
                )));
            }
            let (mut unaligned, mut total) = (0usize, 0usize);
            for (t, a) in traces.iter().zip(al) {
                if t.emitted.is_empty() {
                    continue;
                }
                // validates indices against the hypothesis length
                hallucination_rate(t.emitted.len(), a)?;
                unaligned += unaligned_count(t.emitted.len(), a);
                total += t.emitted.len();
            }
            if total == 0 {
                return Err(Error::UndefinedInput("empty target".into()));
            }
            Some(unaligned as f64 / total as f64)
        }
    };

    let policy_a = match gold_positions {
        None => None,
        Some(gold) => {
            if gold.len() != traces.len() {
                return Err(Error::LengthMismatch(format!(
                    "{} gold policies vs {} traces",
                    gold.len(),
                    traces.len()
                )));
            }
            let (mut hits, mut total) = (0usize, 0usize);
            for (t, a) in traces.iter().zip(gold) {
                hits += policy_hits(a, &t.delays)
                    .map_err(|e| Error::LengthMismatch(format!("{}: {e}", t.record_id)))?;
                total += a.len();
            }
            if total == 0 {
                return Err(Error::UndefinedInput("no target tokens".into()));
            }
            Some(hits as f64 / total as f64)
        }
    };

    Ok(MetricReport {
        al: al / weight,
        laal: laal / weight,
        al_ca: al_ca / weight,
        wwt_ms: word_wall_time(traces)?,
        bleu,
        hallucination_rate,
        policy_a,
        n_sentences: traces.len(),
    })
}
