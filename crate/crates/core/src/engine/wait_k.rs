use super::{Backend, EngineConfig, PredictorHandle, SessionClock};
use crate::error::{Error, Result};
use crate::types::{Token, TokenKind, TranslationTrace};

/// Wait-k decoding with prompt rebuilding.
///
/// Reads `k` source tokens, then alternates one write with one read. Before
/// every prediction the context is rebuilt as `prompt ++ source so far ++
/// target so far`, so the cache never survives a step. The prompt is taken
/// from the handle's context at entry.
pub fn run_wait_k<B, I>(
    record_id: &str,
    source: I,
    k: usize,
    predictor: &mut PredictorHandle<B>,
    config: &EngineConfig,
) -> Result<TranslationTrace>
where
    B: Backend,
    I: IntoIterator<Item = String>,
{
    if k == 0 {
        return Err(Error::Config("wait-k needs k >= 1".into()));
    }
    config.validate()?;
    let prompt = predictor.context().to_vec();
    if prompt.is_empty() {
        return Err(Error::Config(
            "predictor context must be seeded with the prompt".into(),
        ));
    }
    let mut source = source.into_iter().peekable();
    if source.peek().is_none() {
        return Err(Error::Config("source must be non-empty".into()));
    }

    let forward_origin = predictor.forward_evals();
    let mut clock = SessionClock::new(config.source_arrival_interval_s, predictor);
    let mut read: Vec<Token> = Vec::new();
    let mut written: Vec<Token> = Vec::new();
    let mut delays = Vec::new();
    let mut emit_times = Vec::new();
    let mut chunk_boundaries = Vec::new();
    let mut chunk_reads = Vec::new();
    let mut truncated = false;
    let mut anomalies = 0;

    let mut read_one = |read: &mut Vec<Token>, clock: &mut SessionClock| -> Result<bool> {
        match source.next() {
            Some(w) => {
                read.push(Token::source(w)?);
                clock.arrive(read.len());
                Ok(true)
            }
            None => Ok(false),
        }
    };

    while read.len() < k && read_one(&mut read, &mut clock)? {}

    loop {
        if written.len() >= config.target_cap(read.len()) {
            truncated = true;
            break;
        }
        let mut ctx = Vec::with_capacity(prompt.len() + read.len() + written.len());
        ctx.extend_from_slice(&prompt);
        ctx.extend_from_slice(&read);
        ctx.extend_from_slice(&written);
        predictor.rebuild(ctx);
        let predicted = clock.predict(predictor)?;
        match predicted.kind() {
            TokenKind::EndOfSequence | TokenKind::EndOfWrite | TokenKind::EndOfRead => {
                if predicted.kind() != TokenKind::EndOfSequence {
                    anomalies += 1;
                }
                // a stop request only counts once the whole source is in
                if !read_one(&mut read, &mut clock)? {
                    break;
                }
            }
            _ => {
                written.push(Token::target(predicted.surface())?);
                delays.push(read.len());
                emit_times.push(clock.now());
                chunk_boundaries.push(written.len());
                chunk_reads.push(read.len());
                read_one(&mut read, &mut clock)?;
            }
        }
    }

    let trace = TranslationTrace {
        record_id: record_id.to_string(),
        emitted: written.iter().map(|t| t.surface().to_string()).collect(),
        delays,
        emit_times,
        total_wall: clock.compute_spent(predictor),
        forward_evals: predictor.forward_evals() - forward_origin,
        discarded_predictions: 0,
        source_len: read.len(),
        chunk_boundaries,
        chunk_reads,
        prompt_len: prompt.len(),
        truncated,
        anomalies,
    };
    trace.validate()?;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::super::{CostModel, ReferencePredictor};
    use super::*;

    fn run(k: usize, src: usize, tgt: usize, prompt: usize, per_eval: f64) -> TranslationTrace {
        let target: Vec<String> = (0..tgt).map(|i| format!("y{i}")).collect();
        let mut h = PredictorHandle::new(
            ReferencePredictor::new(target),
            CostModel::Simulated { per_eval_seconds: per_eval },
        );
        h.extend((0..prompt).map(|i| Token::prompt(format!("p{i}")).unwrap()));
        let cfg = EngineConfig { per_eval_seconds: per_eval, ..EngineConfig::default() };
        run_wait_k("r", (0..src).map(|i| format!("x{i}")), k, &mut h, &cfg).unwrap()
    }

    #[test]
    fn wait_1_alternates() {
        let t = run(1, 4, 4, 3, 0.0);
        assert_eq!(t.delays, vec![1, 2, 3, 4]);
        assert_eq!(t.emitted, vec!["y0", "y1", "y2", "y3"]);
    }

    #[test]
    fn large_k_reads_everything() {
        assert_eq!(run(10, 4, 4, 3, 0.0).delays, vec![4; 4]);
    }

    #[test]
    fn delays_follow_closed_form() {
        for k in 1..6 {
            let t = run(k, 9, 12, 2, 0.0);
            let expect: Vec<usize> = (1..=12).map(|i| (k + i - 1).min(9)).collect();
            assert_eq!(t.delays, expect, "k={k}");
        }
    }

    #[test]
    fn rebuild_cost_and_clock() {
        // prompt 3, X=Y=4, wait-1, 0.01 s per position, 0.3 s per source token.
        // Rebuilt lengths 4, 6, 8, 10 for the writes and 11 for the final stop.
        let t = run(1, 4, 4, 3, 0.01);
        assert_eq!(t.forward_evals, 4 + 6 + 8 + 10 + 11);
        let expect = [0.34, 0.66, 0.98, 1.30];
        for (got, want) in t.emit_times.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{:?}", t.emit_times);
        }
        assert!((t.total_wall - 0.39).abs() < 1e-12);
    }

    #[test]
    fn early_stop_keeps_reading() {
        // two target words for five source words
        let t = run(1, 5, 2, 1, 0.0);
        assert_eq!(t.delays, vec![1, 2]);
        assert_eq!(t.source_len, 5);
    }

    #[test]
    fn k_zero_rejected() {
        let mut h = PredictorHandle::new(ReferencePredictor::new(["a"]), CostModel::WallClock);
        h.extend([Token::prompt("p").unwrap()]);
        assert!(run_wait_k("r", ["x".to_string()], 0, &mut h, &EngineConfig::default()).is_err());
    }
}
