use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use crate::evaluate::ReportFile;

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Run directories, each holding a `report.json`.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Output CSV.
    #[arg(long, env = "SIMT_OUTPUT")]
    pub output: PathBuf,
}

pub const HEADER: &str = "latency_label,al,laal,al_ca,bleu,wwt_ms";

/// Writes whatever reports exist; returns `Ok(false)` if any were missing.
pub fn run(args: &CurveArgs) -> Result<bool> {
    let mut reports = Vec::new();
    let mut missing = Vec::new();
    for dir in &args.runs {
        let path = dir.join("report.json");
        match fs::read_to_string(&path) {
            Ok(text) => {
                let r: ReportFile =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                reports.push(r);
            }
            Err(_) => missing.push(path),
        }
    }

    let mut seen = BTreeSet::new();
    for r in &reports {
        if !seen.insert(r.label.as_str()) {
            eprintln!("warning: duplicate label {}", r.label);
        }
    }
    // stable: ties keep command-line order
    reports.sort_by(|a, b| a.metrics.al.total_cmp(&b.metrics.al));

    let mut out = String::from(HEADER);
    out.push('\n');
    for r in &reports {
        let m = &r.metrics;
        out += &format!("{},{},{},{},{},{}\n", r.label, m.al, m.laal, m.al_ca, m.bleu, m.wwt_ms);
    }
    fs::write(&args.output, out).with_context(|| format!("writing {}", args.output.display()))?;
    for p in &missing {
        eprintln!("missing report: {}", p.display());
    }
    Ok(missing.is_empty())
}
