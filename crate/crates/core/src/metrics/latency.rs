use crate::error::{Error, Result};
use crate::types::TranslationTrace;

/// Lagging over real-valued delays with rate `target_len / source_len`.
fn lagging(delays: &[f64], source_len: usize, rate_target_len: usize) -> Result<f64> {
    if source_len == 0 || rate_target_len == 0 || delays.is_empty() {
        return Err(Error::UndefinedInput(format!(
            "lagging needs positive lengths (source {source_len}, target {rate_target_len}, delays {})",
            delays.len()
        )));
    }
    let x = source_len as f64;
    let step = x / rate_target_len as f64;
    let tau = delays
        .iter()
        .position(|&g| g >= x)
        .map_or(delays.len(), |i| i + 1);
    let sum: f64 = delays[..tau]
        .iter()
        .enumerate()
        .map(|(i, &g)| g - i as f64 * step)
        .sum();
    Ok(sum / tau as f64)
}

fn as_real(delays: &[usize]) -> Vec<f64> {
    delays.iter().map(|&g| g as f64).collect()
}

/// Average Lagging: `(1/τ) Σ_{i≤τ} g(i) − (i−1)·X/Y`, τ the first index
/// where the whole source has been read (`Y` if never).
pub fn average_lagging(delays: &[usize], source_len: usize, target_len: usize) -> Result<f64> {
    if delays.len() != target_len {
        return Err(Error::LengthMismatch(format!(
            "{} delays for target length {target_len}",
            delays.len()
        )));
    }
    lagging(&as_real(delays), source_len, target_len)
}

/// AL with the rate taken from `max(hypothesis, reference)` length.
pub fn length_adaptive_al(
    delays: &[usize],
    source_len: usize,
    hyp_len: usize,
    ref_len: usize,
) -> Result<f64> {
    if delays.len() != hyp_len {
        return Err(Error::LengthMismatch(format!(
            "{} delays for hypothesis length {hyp_len}",
            delays.len()
        )));
    }
    if ref_len == 0 {
        return Err(Error::UndefinedInput("empty reference".into()));
    }
    lagging(&as_real(delays), source_len, hyp_len.max(ref_len))
}

/// Computation-aware delays: the source position reached by the clock when
/// each token was emitted, never below the policy delay and capped at `X`.
pub fn computation_aware_delays(trace: &TranslationTrace, arrival_interval_s: f64) -> Result<Vec<f64>> {
    if arrival_interval_s.is_nan() || arrival_interval_s <= 0.0 {
        return Err(Error::Config("arrival interval must be positive".into()));
    }
    if trace.emit_times.len() != trace.delays.len() {
        return Err(Error::LengthMismatch("emit_times vs delays".into()));
    }
    let x = trace.source_len as f64;
    Ok(trace
        .delays
        .iter()
        .zip(&trace.emit_times)
        .map(|(&g, &t)| (g as f64).max(t / arrival_interval_s).min(x))
        .collect())
}

pub fn computation_aware_al(trace: &TranslationTrace, arrival_interval_s: f64) -> Result<f64> {
    let g = computation_aware_delays(trace, arrival_interval_s)?;
    lagging(&g, trace.source_len, trace.emitted.len())
}

/// Pooled predictor time per emitted word, in milliseconds.
pub fn word_wall_time(traces: &[TranslationTrace]) -> Result<f64> {
    if traces.is_empty() {
        return Err(Error::UndefinedInput("no traces".into()));
    }
    let words: usize = traces.iter().map(|t| t.emitted.len()).sum();
    if words == 0 {
        return Err(Error::UndefinedInput("zero target words".into()));
    }
    let secs: f64 = traces.iter().map(|t| t.total_wall).sum();
    Ok(secs / words as f64 * 1000.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn al_examples() {
        assert!(close(average_lagging(&[1, 2, 3, 4], 4, 4).unwrap(), 1.0));
        assert!(close(average_lagging(&[4, 4, 4, 4], 4, 4).unwrap(), 4.0));
        assert!(close(average_lagging(&[2, 2], 2, 2).unwrap(), 2.0));
    }

    #[test]
    fn al_uneven_rate() {
        // X=6, Y=3: step 2. g=[2,4,6] -> tau=3, terms 2, 2, 2
        assert!(close(average_lagging(&[2, 4, 6], 6, 3).unwrap(), 2.0));
        // truncated: never reaches X -> tau = Y
        assert!(close(average_lagging(&[1, 1], 4, 2).unwrap(), (1.0 + (1.0 - 2.0)) / 2.0));
    }

    #[test]
    fn al_undefined_inputs() {
        assert!(average_lagging(&[], 4, 0).is_err());
        assert!(average_lagging(&[1], 0, 1).is_err());
        assert!(average_lagging(&[1, 2], 4, 3).is_err());
    }

    #[test]
    fn laal_examples() {
        assert!(close(length_adaptive_al(&[1, 2, 3, 4], 4, 4, 4).unwrap(), 1.0));
        assert!(close(length_adaptive_al(&[4, 4], 4, 2, 4).unwrap(), 4.0));
        // short hypothesis: AL credits the diagonal more than LAAL does
        let al = average_lagging(&[2, 3], 4, 2).unwrap();
        let laal = length_adaptive_al(&[2, 3], 4, 2, 4).unwrap();
        assert!(close(al, (2.0 + 1.0) / 2.0));
        assert!(close(laal, (2.0 + 2.0) / 2.0));
        assert!(length_adaptive_al(&[1], 4, 1, 0).is_err());
    }

    fn trace(delays: Vec<usize>, times: Vec<f64>, x: usize) -> TranslationTrace {
        TranslationTrace {
            record_id: "t".into(),
            emitted: delays.iter().map(|_| "w".to_string()).collect(),
            delays,
            emit_times: times,
            total_wall: 0.0,
            forward_evals: 100,
            discarded_predictions: 0,
            source_len: x,
            chunk_boundaries: vec![],
            chunk_reads: vec![],
            prompt_len: 0,
            truncated: false,
            anomalies: 0,
        }
    }

    #[test]
    fn al_ca_without_compute_equals_al() {
        let t = trace(vec![1, 2, 3, 4], vec![0.3, 0.6, 0.9, 1.2], 4);
        assert!(close(
            computation_aware_al(&t, 0.3).unwrap(),
            average_lagging(&t.delays, 4, 4).unwrap()
        ));
    }

    #[test]
    fn al_ca_spreadsheet() {
        // wait-1, prompt 3, 0.01 s per position: emit times from the rebuild cost replay
        let t = trace(vec![1, 2, 3, 4], vec![0.34, 0.66, 0.98, 1.30], 4);
        let g = computation_aware_delays(&t, 0.3).unwrap();
        let want = [0.34 / 0.3, 0.66 / 0.3, 0.98 / 0.3, 4.0];
        for (a, b) in g.iter().zip(want) {
            assert!(close(*a, b));
        }
        let al_ca = computation_aware_al(&t, 0.3).unwrap();
        let oracle = (0.34 / 0.3 + (0.66 / 0.3 - 1.0) + (0.98 / 0.3 - 2.0) + (4.0 - 3.0)) / 4.0;
        assert!(close(al_ca, oracle));
        assert!((al_ca - 1.15).abs() < 1e-9);
    }

    #[test]
    fn wwt_is_pooled() {
        let mut a = trace(vec![1; 20], vec![0.0; 20], 1);
        a.total_wall = 1.0;
        assert!(close(word_wall_time(std::slice::from_ref(&a)).unwrap(), 50.0));
        let mut b = trace(vec![1; 5], vec![0.0; 5], 1);
        b.total_wall = 1.0;
        // pooled: 2 s / 25 words, not mean(50, 200)
        assert!(close(word_wall_time(&[a, b]).unwrap(), 80.0));
        assert!(word_wall_time(&[]).is_err());
        assert!(word_wall_time(&[trace(vec![], vec![], 1)]).is_err());
    }
}
