use crate::error::{Error, Result};
use crate::types::WordAlignment;

/// Number of target positions in `0..target_len` with no aligned source word.
pub fn unaligned_count(target_len: usize, alignment: &WordAlignment) -> usize {
    let mut aligned = vec![false; target_len];
    for &(_, t) in alignment.pairs() {
        if let Some(slot) = aligned.get_mut(t) {
            *slot = true;
        }
    }
    aligned.iter().filter(|a| !**a).count()
}

/// Fraction of hypothesis words that no source word aligns to.
pub fn hallucination_rate(target_len: usize, alignment: &WordAlignment) -> Result<f64> {
    if target_len == 0 {
        return Err(Error::UndefinedInput("empty target".into()));
    }
    if let Some((_, t)) = alignment.max_indices() {
        if t >= target_len {
            return Err(Error::InvalidAlignment(format!(
                "target index {t} outside hypothesis of {target_len} words"
            )));
        }
    }
    Ok(unaligned_count(target_len, alignment) as f64 / target_len as f64)
}

/// Number of target tokens whose gold source position had been read.
pub fn policy_hits(gold: &[usize], delays: &[usize]) -> Result<usize> {
    if gold.len() != delays.len() {
        return Err(Error::LengthMismatch(format!(
            "{} gold positions vs {} delays",
            gold.len(),
            delays.len()
        )));
    }
    Ok(gold.iter().zip(delays).filter(|(a, g)| a <= g).count())
}

/// `A = (1/T) Σ [a_i <= g_i]`.
pub fn policy_alignment_proportion(gold: &[usize], delays: &[usize]) -> Result<f64> {
    let hits = policy_hits(gold, delays)?;
    if gold.is_empty() {
        return Err(Error::UndefinedInput("no target tokens".into()));
    }
    Ok(hits as f64 / gold.len() as f64)
}
