use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use simt_core::curation::read_corpus;
use simt_core::metrics::{evaluate, EvalOptions, LatencyAggregation, Smoothing};
use simt_core::{MetricReport, TranslationTrace, WordAlignment};

use crate::config::{pick, FileConfig};
use crate::simulate::TraceLine;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// `traces.jsonl` written by `simulate`.
    pub traces: PathBuf,
    /// One reference per line, or a `.jsonl` corpus whose target chunks are joined.
    pub references: PathBuf,
    #[arg(long, env = "SIMT_CONFIG")]
    pub config: Option<PathBuf>,
    /// One line of `src-tgt` pairs per sentence, indexed against the hypothesis.
    #[arg(long, env = "SIMT_ALIGNMENTS")]
    pub alignments: Option<PathBuf>,
    /// One line of space-separated gold read positions per sentence.
    #[arg(long, env = "SIMT_GOLD_POLICY")]
    pub gold_policy: Option<PathBuf>,
    #[arg(long, env = "SIMT_ARRIVAL_INTERVAL")]
    pub arrival_interval: Option<f64>,
    /// Add-one smoothing for BLEU.
    #[arg(long, env = "SIMT_SMOOTH")]
    pub smooth: bool,
    /// sentence-mean | token-weighted
    #[arg(long, env = "SIMT_AGGREGATION")]
    pub aggregation: Option<String>,
    /// Label for the latency curve; defaults to the traces' policy label.
    #[arg(long, env = "SIMT_LABEL")]
    pub label: Option<String>,
    #[arg(long, env = "SIMT_OUT_DIR")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub label: String,
    #[serde(flatten)]
    pub metrics: MetricReport,
    pub arrival_interval_s: f64,
    pub smoothing: String,
    pub aggregation: LatencyAggregation,
}

struct References {
    ids: Option<Vec<String>>,
    texts: Vec<String>,
}

fn read_references(path: &Path) -> Result<References> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let corpus = read_corpus(path)?;
        if let Some(e) = corpus.malformed.first() {
            bail!("malformed reference corpus: {e}");
        }
        Ok(References {
            ids: Some(corpus.records.iter().map(|r| r.id.clone()).collect()),
            texts: corpus.records.iter().map(|r| r.target_text()).collect(),
        })
    } else {
        let text = fs::read_to_string(path)?;
        Ok(References {
            ids: None,
            texts: text.lines().map(str::to_string).collect(),
        })
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_string).collect())
}

fn read_traces(path: &Path) -> Result<(Vec<TranslationTrace>, Option<String>)> {
    let mut traces = Vec::new();
    let mut failed = Vec::new();
    let mut label = None;
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: not a trace line", path.display(), i + 1))?;
        match parsed {
            TraceLine::Ok { trace, policy, .. } => {
                trace
                    .validate()
                    .with_context(|| format!("{}:{}: invalid trace", path.display(), i + 1))?;
                label.get_or_insert(policy);
                traces.push(trace);
            }
            TraceLine::Failed { record_id, error, .. } => failed.push(format!("{record_id}: {error}")),
        }
    }
    if !failed.is_empty() {
        bail!("{} failed records in traces:\n  {}", failed.len(), failed.join("\n  "));
    }
    Ok((traces, label))
}

fn count_mismatch(what: &str, traces: &[TranslationTrace], n: usize, ids: Option<&[String]>) -> anyhow::Error {
    let mut msg = format!("{} traces vs {n} {what}", traces.len());
    if let Some(ids) = ids {
        let t: BTreeSet<&str> = traces.iter().map(|t| t.record_id.as_str()).collect();
        let r: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
        let only_t: Vec<_> = t.difference(&r).take(10).collect();
        let only_r: Vec<_> = r.difference(&t).take(10).collect();
        msg += &format!("; only in traces: {only_t:?}; only in {what}: {only_r:?}");
    }
    anyhow::anyhow!(msg)
}

pub fn run(args: &EvaluateArgs) -> Result<bool> {
    let file = FileConfig::load(args.config.as_deref())?;
    let options = EvalOptions {
        arrival_interval_s: pick(args.arrival_interval, file.arrival_interval, 0.3),
        smoothing: if args.smooth || file.smooth.unwrap_or(false) {
            Smoothing::AddOne
        } else {
            Smoothing::None
        },
        aggregation: pick(args.aggregation.clone(), file.aggregation.clone(), "sentence-mean".into()).parse()?,
    };

    let (traces, policy_label) = read_traces(&args.traces)?;
    let refs = read_references(&args.references)
        .with_context(|| format!("reading references {}", args.references.display()))?;
    if refs.texts.len() != traces.len() {
        return Err(count_mismatch("references", &traces, refs.texts.len(), refs.ids.as_deref()));
    }
    if let Some(ids) = &refs.ids {
        if let Some((t, id)) = traces.iter().zip(ids).find(|(t, id)| &t.record_id != *id) {
            bail!("trace {} is paired with reference {id}", t.record_id);
        }
    }

    let alignments = match &args.alignments {
        None => None,
        Some(p) => {
            let lines = read_lines(p)?;
            if lines.len() != traces.len() {
                return Err(count_mismatch("alignments", &traces, lines.len(), None));
            }
            let parsed = lines
                .iter()
                .enumerate()
                .map(|(i, l)| WordAlignment::parse_line(l).with_context(|| format!("{}:{}", p.display(), i + 1)))
                .collect::<Result<Vec<_>>>()?;
            Some(parsed)
        }
    };
    let gold = match &args.gold_policy {
        None => None,
        Some(p) => {
            let lines = read_lines(p)?;
            if lines.len() != traces.len() {
                return Err(count_mismatch("gold policies", &traces, lines.len(), None));
            }
            let parsed = lines
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    l.split_whitespace()
                        .map(|v| v.parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .with_context(|| format!("{}:{}", p.display(), i + 1))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(parsed)
        }
    };

    let metrics = evaluate(&traces, &refs.texts, alignments.as_deref(), gold.as_deref(), &options)?;
    let label = args
        .label
        .clone()
        .or(file.label.clone())
        .or(policy_label)
        .unwrap_or_else(|| "run".into());
    let report = ReportFile {
        label,
        metrics,
        arrival_interval_s: options.arrival_interval_s,
        smoothing: match options.smoothing {
            Smoothing::None => "none".into(),
            Smoothing::AddOne => "add-one".into(),
        },
        aggregation: options.aggregation,
    };

    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    fs::write(args.out_dir.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(args.out_dir.join("report.csv"), csv(&report))?;
    println!("{}", serde_json::to_string(&report)?);
    Ok(true)
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv(r: &ReportFile) -> String {
    let m = &r.metrics;
    format!(
        "label,al,laal,al_ca,wwt_ms,bleu,hallucination_rate,policy_a,n_sentences\n{},{},{},{},{},{},{},{},{}\n",
        r.label,
        m.al,
        m.laal,
        m.al_ca,
        m.wwt_ms,
        m.bleu,
        opt(m.hallucination_rate),
        opt(m.policy_a),
        m.n_sentences
    )
}
