//! Corpus BLEU-4 over word units (CJK text split per character).

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::text;

const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Smoothing {
    #[default]
    None,
    /// Add one to matches and totals for orders 2 and up.
    AddOne,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

fn ngram_counts<'u, 'a>(units: &'u [&'a str], n: usize) -> HashMap<&'u [&'a str], u64> {
    let mut m = HashMap::new();
    for w in units.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

impl BleuStats {
    pub fn add_sentence(&mut self, hypothesis: &str, reference: &str) {
        let h = text::units(hypothesis);
        let r = text::units(reference);
        self.hyp_len += h.len() as u64;
        self.ref_len += r.len() as u64;
        for n in 1..=MAX_ORDER {
            let hc = ngram_counts(&h, n);
            let rc = ngram_counts(&r, n);
            let matched: u64 = hc
                .iter()
                .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
                .sum();
            self.matches[n - 1] += matched;
            self.totals[n - 1] += h.len().saturating_sub(n - 1) as u64;
        }
    }

    pub fn score(&self, smoothing: Smoothing) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..MAX_ORDER {
            let (mut m, mut t) = (self.matches[n] as f64, self.totals[n] as f64);
            if smoothing == Smoothing::AddOne && n > 0 {
                m += 1.0;
                t += 1.0;
            }
            if m == 0.0 || t == 0.0 {
                return 0.0;
            }
            log_sum += (m / t).ln();
        }
        let bp = if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        };
        100.0 * bp * (log_sum / MAX_ORDER as f64).exp()
    }
}

pub fn corpus_bleu<H: AsRef<str>, R: AsRef<str>>(
    hypotheses: &[H],
    references: &[R],
    smoothing: Smoothing,
) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch(format!(
            "{} hypotheses vs {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if references.is_empty() {
        return Err(Error::UndefinedInput("empty reference corpus".into()));
    }
    let mut stats = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        stats.add_sentence(h.as_ref(), r.as_ref());
    }
    Ok(stats.score(smoothing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_100() {
        let c = ["the quick brown fox jumps", "over the lazy dog today ok"];
        assert_eq!(corpus_bleu(&c, &c, Smoothing::None).unwrap(), 100.0);
    }

    #[test]
    fn disjoint_is_0() {
        let h = ["a b c d e"];
        let r = ["v w x y z"];
        assert_eq!(corpus_bleu(&h, &r, Smoothing::None).unwrap(), 0.0);
        assert_eq!(corpus_bleu(&h, &r, Smoothing::AddOne).unwrap(), 0.0);
    }

    #[test]
    fn short_hypothesis_golden() {
        // frozen from sacrebleu 2.4.3, tokenize="none"
        let h = ["the cat sat"];
        let r = ["the cat sat down"];
        assert_eq!(corpus_bleu(&h, &r, Smoothing::None).unwrap(), 0.0);
        let v = corpus_bleu(&h, &r, Smoothing::AddOne).unwrap();
        assert!((v - 71.65313105737896).abs() < 1e-4, "{v}");
    }

    #[test]
    fn multi_sentence_golden() {
        // frozen from sacrebleu 2.4.3, tokenize="none", smooth_method="none"
        let h = [
            "the quick brown fox jumps over the lazy dog",
            "a b c d e f",
            "we went to the market yesterday morning",
        ];
        let r = [
            "the quick brown fox jumped over the lazy dog",
            "a b c d e f g",
            "yesterday morning we went to the market",
        ];
        let v = corpus_bleu(&h, &r, Smoothing::None).unwrap();
        assert!((v - 70.5759833842001).abs() < 1e-4, "{v}");
    }

    #[test]
    fn size_mismatch() {
        assert!(corpus_bleu(&["a"], &["a", "b"], Smoothing::None).is_err());
        assert!(corpus_bleu::<&str, &str>(&[], &[], Smoothing::None).is_err());
    }

    #[test]
    fn cjk_is_scored_per_character() {
        let v = corpus_bleu(&["我们去北京"], &["我们去北京"], Smoothing::None).unwrap();
        assert_eq!(v, 100.0);
        let part = corpus_bleu(&["我们去北京了"], &["我们去上海了"], Smoothing::AddOne).unwrap();
        assert!(part > 0.0 && part < 100.0);
    }
}
