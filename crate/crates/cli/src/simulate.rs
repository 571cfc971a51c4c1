use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use simt_core::curation::read_corpus;
use simt_core::engine::{
    run_adaptive, run_offline, run_wait_k, Backend, EngineConfig, PredictorHandle,
    ReferencePredictor, RemoteConfig, RemotePredictor, ScriptedPredictor, TimeMode,
};
use simt_core::protocol::{interleave_body, render_prompt, PromptTemplate};
use simt_core::{validate_record, AlignedChunkRecord, LatencyLevel, Token, TranslationTrace};

use crate::config::{pick, FileConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Adaptive,
    WaitK(usize),
    Offline,
}

impl FromStr for Policy {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adaptive" => Ok(Policy::Adaptive),
            "offline" => Ok(Policy::Offline),
            _ => {
                let k = s
                    .strip_prefix("wait-")
                    .and_then(|k| k.parse::<usize>().ok())
                    .filter(|&k| k >= 1)
                    .ok_or_else(|| anyhow!("policy must be adaptive, offline or wait-<k>, got {s:?}"))?;
                Ok(Policy::WaitK(k))
            }
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Adaptive => f.write_str("adaptive"),
            Policy::WaitK(k) => write!(f, "wait-{k}"),
            Policy::Offline => f.write_str("offline"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Mock,
    Remote(String),
}

impl FromStr for BackendSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mock" {
            Ok(BackendSpec::Mock)
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(BackendSpec::Remote(s.to_string()))
        } else {
            bail!("backend must be `mock` or an http(s) URL, got {s:?}")
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Chunk-aligned corpus (JSONL).
    pub corpus: PathBuf,
    #[arg(long, env = "SIMT_CONFIG")]
    pub config: Option<PathBuf>,
    /// adaptive | wait-<k> | offline
    #[arg(long, env = "SIMT_POLICY")]
    pub policy: Option<String>,
    /// Latency indicator for the adaptive prompt; defaults to each record's own level.
    #[arg(long, env = "SIMT_LATENCY")]
    pub latency: Option<String>,
    /// `mock` or the base URL of a next-token server.
    #[arg(long, env = "SIMT_BACKEND")]
    pub backend: Option<String>,
    #[arg(long, env = "SIMT_OUT_DIR")]
    pub out_dir: PathBuf,
    #[arg(long, env = "SIMT_TEMPLATE")]
    pub template: Option<String>,
    #[arg(long, env = "SIMT_MAX_TOKENS_PER_WRITE")]
    pub max_tokens_per_write: Option<usize>,
    #[arg(long, env = "SIMT_MAX_TOTAL_TARGET")]
    pub max_total_target: Option<usize>,
    #[arg(long, env = "SIMT_ARRIVAL_INTERVAL")]
    pub arrival_interval: Option<f64>,
    #[arg(long, env = "SIMT_PER_EVAL_SECONDS")]
    pub per_eval_seconds: Option<f64>,
    /// simulated | wall
    #[arg(long, env = "SIMT_TIME_MODE")]
    pub time_mode: Option<String>,
    #[arg(long, env = "SIMT_TIMEOUT_S")]
    pub timeout_s: Option<f64>,
    #[arg(long, env = "SIMT_RETRIES")]
    pub retries: Option<u32>,
    #[arg(long, env = "SIMT_JOBS")]
    pub jobs: Option<usize>,
}

/// One line of `traces.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceLine {
    Ok {
        #[serde(flatten)]
        trace: TranslationTrace,
        policy: String,
        prompt: String,
    },
    Failed {
        record_id: String,
        policy: String,
        error: String,
    },
}

#[derive(Debug, Serialize)]
struct RunInfo<'a> {
    policy: String,
    backend: &'a str,
    latency: Option<LatencyLevel>,
    template: &'a str,
    engine: &'a EngineConfig,
    records: usize,
    failed: usize,
}

pub struct Session {
    pub policy: Policy,
    pub latency: Option<LatencyLevel>,
    pub backend: BackendSpec,
    pub template: PromptTemplate,
    pub engine: EngineConfig,
    pub remote: Option<RemoteConfig>,
}

impl Session {
    pub fn label(&self) -> String {
        match (self.policy, self.latency) {
            (Policy::Adaptive, Some(l)) => format!("adaptive:{l}"),
            (p, _) => p.to_string(),
        }
    }

    fn prompt_for(&self, record: &AlignedChunkRecord) -> Vec<Token> {
        let latency = match self.policy {
            Policy::Offline => LatencyLevel::Offline,
            _ => self.latency.unwrap_or(record.latency),
        };
        render_prompt(&self.template, &record.src_lang, &record.tgt_lang, latency)
    }

    fn backend_for(&self, record: &AlignedChunkRecord, prompt: &[Token]) -> Result<Box<dyn Backend + Send>> {
        Ok(match &self.backend {
            BackendSpec::Remote(_) => {
                let cfg = self.remote.as_ref().expect("remote config set for remote backend");
                Box::new(RemotePredictor::new(cfg, record.id.as_str()))
            }
            BackendSpec::Mock => {
                if let Err(v) = validate_record(record) {
                    let msg: Vec<String> = v.iter().map(ToString::to_string).collect();
                    bail!("invalid record: {}", msg.join("; "));
                }
                match self.policy {
                    Policy::WaitK(_) => Box::new(ReferencePredictor::new(record.target_words())),
                    Policy::Adaptive | Policy::Offline => {
                        let r = if self.policy == Policy::Offline { record.as_offline() } else { record.clone() };
                        let mut script = prompt.to_vec();
                        interleave_body(&r.source_chunks, &r.target_chunks, &mut script)?;
                        Box::new(ScriptedPredictor::new(script))
                    }
                }
            }
        })
    }

    pub fn run_record(&self, record: &AlignedChunkRecord) -> TraceLine {
        let prompt = self.prompt_for(record);
        let prompt_text = prompt.iter().map(Token::surface).collect::<Vec<_>>().join(" ");
        let result = self.backend_for(record, &prompt).and_then(|backend| {
            let mut handle = PredictorHandle::new(backend, self.engine.cost_model());
            handle.extend(prompt.clone());
            let source = record.source_words().map(String::from).collect::<Vec<_>>();
            let trace = match self.policy {
                Policy::Adaptive => run_adaptive(&record.id, source, &mut handle, &self.engine),
                Policy::Offline => run_offline(&record.id, source, &mut handle, &self.engine),
                Policy::WaitK(k) => run_wait_k(&record.id, source, k, &mut handle, &self.engine),
            };
            Ok(trace?)
        });
        match result {
            Ok(trace) => TraceLine::Ok {
                trace,
                policy: self.label(),
                prompt: prompt_text,
            },
            Err(e) => TraceLine::Failed {
                record_id: record.id.clone(),
                policy: self.label(),
                error: format!("{e:#}"),
            },
        }
    }
}

fn build_session(args: &SimulateArgs, file: &FileConfig) -> Result<Session> {
    let policy: Policy = pick(args.policy.clone(), file.policy.clone(), "adaptive".into()).parse()?;
    let latency = args
        .latency
        .clone()
        .or(file.latency.clone())
        .map(|l| l.parse::<LatencyLevel>())
        .transpose()?;
    let backend: BackendSpec = pick(args.backend.clone(), file.backend.clone(), "mock".into()).parse()?;
    let template = match args.template.clone().or(file.template.clone()) {
        Some(t) => PromptTemplate::new(t)?,
        None => PromptTemplate::default(),
    };
    let mode = match pick(args.time_mode.clone(), file.time_mode.clone(), "simulated".into()).as_str() {
        "simulated" => TimeMode::SimulatedTime,
        "wall" => TimeMode::WallClock,
        other => bail!("time mode must be simulated or wall, got {other:?}"),
    };
    let d = EngineConfig::default();
    let engine = EngineConfig {
        latency: latency.unwrap_or(d.latency),
        max_tokens_per_write: pick(args.max_tokens_per_write, file.max_tokens_per_write, d.max_tokens_per_write),
        max_total_target: args.max_total_target.or(file.max_total_target),
        source_arrival_interval_s: pick(args.arrival_interval, file.arrival_interval, d.source_arrival_interval_s),
        per_eval_seconds: pick(args.per_eval_seconds, file.per_eval_seconds, d.per_eval_seconds),
        mode,
    };
    engine.validate()?;
    let remote = match &backend {
        BackendSpec::Remote(url) => Some(RemoteConfig {
            url: url.clone(),
            timeout: Duration::from_secs_f64(pick(args.timeout_s, file.timeout_s, 30.0)),
            retries: pick(args.retries, file.retries, 2),
        }),
        BackendSpec::Mock => None,
    };
    Ok(Session { policy, latency, backend, template, engine, remote })
}

pub fn run(args: &SimulateArgs) -> Result<bool> {
    let file = FileConfig::load(args.config.as_deref())?;
    let session = build_session(args, &file)?;
    let corpus = read_corpus(&args.corpus).with_context(|| format!("reading corpus {}", args.corpus.display()))?;
    if !corpus.malformed.is_empty() {
        for e in &corpus.malformed {
            eprintln!("malformed: {e}");
        }
        bail!("{} malformed corpus lines", corpus.malformed.len());
    }

    let jobs = pick(args.jobs, file.jobs, 1).max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let lines: Vec<TraceLine> = pool.install(|| corpus.records.par_iter().map(|r| session.run_record(r)).collect());

    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut traces = BufWriter::new(File::create(args.out_dir.join("traces.jsonl"))?);
    let mut hyps = BufWriter::new(File::create(args.out_dir.join("hypotheses.txt"))?);
    let mut refs = BufWriter::new(File::create(args.out_dir.join("references.txt"))?);
    let mut failed = 0;
    for (line, record) in lines.iter().zip(&corpus.records) {
        serde_json::to_writer(&mut traces, line)?;
        traces.write_all(b"\n")?;
        match line {
            TraceLine::Ok { trace, .. } => writeln!(hyps, "{}", trace.hypothesis())?,
            TraceLine::Failed { record_id, error, .. } => {
                failed += 1;
                eprintln!("record {record_id}: {error}");
                writeln!(hyps)?;
            }
        }
        writeln!(refs, "{}", record.target_text())?;
    }
    traces.flush()?;
    hyps.flush()?;
    refs.flush()?;

    let backend_label = match &session.backend {
        BackendSpec::Mock => "mock",
        BackendSpec::Remote(u) => u.as_str(),
    };
    let info = RunInfo {
        policy: session.label(),
        backend: backend_label,
        latency: session.latency,
        template: session.template.text(),
        engine: &session.engine,
        records: lines.len(),
        failed,
    };
    fs::write(args.out_dir.join("run.json"), serde_json::to_string_pretty(&info)? + "\n")?;
    println!("{}", serde_json::to_string(&serde_json::json!({"records": lines.len(), "failed": failed}))?);
    Ok(failed == 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_parsing() {
        assert_eq!("adaptive".parse::<Policy>().unwrap(), Policy::Adaptive);
        assert_eq!("wait-3".parse::<Policy>().unwrap(), Policy::WaitK(3));
        assert_eq!("offline".parse::<Policy>().unwrap(), Policy::Offline);
        assert!("wait-0".parse::<Policy>().is_err());
        assert!("wait-k".parse::<Policy>().is_err());
        assert_eq!(Policy::WaitK(5).to_string(), "wait-5");
    }

    #[test]
    fn backend_parsing() {
        assert_eq!("mock".parse::<BackendSpec>().unwrap(), BackendSpec::Mock);
        assert!(matches!("http://h:1".parse::<BackendSpec>().unwrap(), BackendSpec::Remote(_)));
        assert!("ftp://x".parse::<BackendSpec>().is_err());
    }

    #[test]
    fn trace_lines_round_trip() {
        let failed = TraceLine::Failed { record_id: "a".into(), policy: "offline".into(), error: "boom".into() };
        let s = serde_json::to_string(&failed).unwrap();
        assert_eq!(serde_json::from_str::<TraceLine>(&s).unwrap(), failed);
    }
}
