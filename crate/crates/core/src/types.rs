//! Domain types shared by the protocol, curation, engine and metrics modules.
//!
//! Everything here is immutable after construction. Constructors validate the
//! invariants that downstream code relies on, so a `TranslationTrace` or a
//! `Token` that exists is always well-formed.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text;

pub const END_OF_READ: &str = "<|end-of-read|>";
pub const END_OF_WRITE: &str = "<|end-of-write|>";
pub const END_OF_SEQUENCE: &str = "<|eos|>";
/// Returned by predictors that have nothing sensible to say about a context.
pub const UNKNOWN: &str = "<|unk|>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Source,
    Target,
    EndOfRead,
    EndOfWrite,
    Prompt,
    EndOfSequence,
}

impl TokenKind {
    pub fn is_signal(self) -> bool {
        matches!(
            self,
            TokenKind::EndOfRead | TokenKind::EndOfWrite | TokenKind::EndOfSequence
        )
    }
}

/// One word unit or control signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Token {
    surface: String,
    kind: TokenKind,
}

impl Token {
    pub fn new(surface: impl Into<String>, kind: TokenKind) -> Result<Self> {
        let surface = surface.into();
        let expected = match kind {
            TokenKind::EndOfRead => Some(END_OF_READ),
            TokenKind::EndOfWrite => Some(END_OF_WRITE),
            TokenKind::EndOfSequence => Some(END_OF_SEQUENCE),
            _ => None,
        };
        match expected {
            Some(s) if surface != s => {
                return Err(Error::InvalidToken(format!(
                    "{kind:?} token must have surface {s:?}, got {surface:?}"
                )))
            }
            None if surface.is_empty() => {
                return Err(Error::InvalidToken(format!(
                    "{kind:?} token must have a non-empty surface"
                )))
            }
            _ => {}
        }
        Ok(Token { surface, kind })
    }

    pub fn source(word: impl Into<String>) -> Result<Self> {
        Token::new(word, TokenKind::Source)
    }

    pub fn target(word: impl Into<String>) -> Result<Self> {
        Token::new(word, TokenKind::Target)
    }

    pub fn prompt(word: impl Into<String>) -> Result<Self> {
        Token::new(word, TokenKind::Prompt)
    }

    pub fn end_of_read() -> Self {
        Token {
            surface: END_OF_READ.to_string(),
            kind: TokenKind::EndOfRead,
        }
    }

    pub fn end_of_write() -> Self {
        Token {
            surface: END_OF_WRITE.to_string(),
            kind: TokenKind::EndOfWrite,
        }
    }

    pub fn end_of_sequence() -> Self {
        Token {
            surface: END_OF_SEQUENCE.to_string(),
            kind: TokenKind::EndOfSequence,
        }
    }

    /// The fallback prediction. Typed as a target word so a WRITE phase that
    /// receives it commits something visible rather than stalling.
    pub fn unknown() -> Self {
        Token {
            surface: UNKNOWN.to_string(),
            kind: TokenKind::Target,
        }
    }

    /// Classify a bare surface coming back from a backend. Signals are
    /// recognised by their reserved surfaces; anything else is a target word.
    pub fn from_predicted_surface(surface: &str) -> Self {
        match surface {
            END_OF_READ => Token::end_of_read(),
            END_OF_WRITE => Token::end_of_write(),
            END_OF_SEQUENCE => Token::end_of_sequence(),
            "" => Token::unknown(),
            s => Token {
                surface: s.to_string(),
                kind: TokenKind::Target,
            },
        }
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn kind(&self) -> TokenKind {
        self.kind
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            surface: String,
            kind: TokenKind,
        }
        let raw = Raw::deserialize(d)?;
        Token::new(raw.surface, raw.kind).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LatencyLevel {
    Low,
    LowMedium,
    Medium,
    MediumHigh,
    High,
    Offline,
}

impl LatencyLevel {
    pub const ALL: [LatencyLevel; 6] = [
        LatencyLevel::Low,
        LatencyLevel::LowMedium,
        LatencyLevel::Medium,
        LatencyLevel::MediumHigh,
        LatencyLevel::High,
        LatencyLevel::Offline,
    ];

    pub fn indicator_text(self) -> &'static str {
        match self {
            LatencyLevel::Low => "low",
            LatencyLevel::LowMedium => "low-medium",
            LatencyLevel::Medium => "medium",
            LatencyLevel::MediumHigh => "medium-high",
            LatencyLevel::High => "high",
            LatencyLevel::Offline => "offline",
        }
    }
}

impl fmt::Display for LatencyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.indicator_text())
    }
}

impl FromStr for LatencyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LatencyLevel::ALL
            .into_iter()
            .find(|l| l.indicator_text() == s)
            .ok_or_else(|| Error::InvalidLatency(s.to_string()))
    }
}

impl Serialize for LatencyLevel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.indicator_text())
    }
}

impl<'de> Deserialize<'de> for LatencyLevel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A chunk is a run of word units that is read (or written) as one piece.
pub type Chunk = Vec<String>;

/// One chunk-aligned sentence pair at a given latency level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedChunkRecord {
    pub id: String,
    pub src_lang: String,
    pub tgt_lang: String,
    pub latency: LatencyLevel,
    pub source_chunks: Vec<Chunk>,
    pub target_chunks: Vec<Chunk>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_score: Option<f64>,
}

impl AlignedChunkRecord {
    pub fn source_words(&self) -> impl Iterator<Item = &str> {
        self.source_chunks.iter().flatten().map(String::as_str)
    }

    pub fn target_words(&self) -> impl Iterator<Item = &str> {
        self.target_chunks.iter().flatten().map(String::as_str)
    }

    /// Source length in word units (CJK words count one unit per character).
    pub fn source_units(&self) -> usize {
        self.source_words().map(text::word_units).sum()
    }

    pub fn source_text(&self) -> String {
        self.source_words().collect::<Vec<_>>().join(" ")
    }

    pub fn target_text(&self) -> String {
        self.target_words().collect::<Vec<_>>().join(" ")
    }

    /// The same pair collapsed into a single chunk, as used for offline decoding.
    pub fn as_offline(&self) -> AlignedChunkRecord {
        AlignedChunkRecord {
            latency: LatencyLevel::Offline,
            source_chunks: vec![self.source_words().map(str::to_string).collect()],
            target_chunks: vec![self.target_words().map(str::to_string).collect()],
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnequalChunkCounts { source: usize, target: usize },
    NoChunks,
    EmptySourceChunk { index: usize },
    EmptyTargetChunk { index: usize },
    OfflineMultiChunk { chunks: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnequalChunkCounts { source, target } => {
                write!(f, "unequal chunk counts {source} vs {target}")
            }
            Violation::NoChunks => f.write_str("empty record"),
            Violation::EmptySourceChunk { index } => write!(f, "empty source chunk at {index}"),
            Violation::EmptyTargetChunk { index } => write!(f, "empty target chunk at {index}"),
            Violation::OfflineMultiChunk { chunks } => {
                write!(f, "offline record must have one chunk, has {chunks}")
            }
        }
    }
}

/// Checks every record invariant and lists all violations found.
pub fn validate_record(record: &AlignedChunkRecord) -> std::result::Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let (ns, nt) = (record.source_chunks.len(), record.target_chunks.len());
    if ns == 0 && nt == 0 {
        out.push(Violation::NoChunks);
    } else if ns != nt {
        out.push(Violation::UnequalChunkCounts {
            source: ns,
            target: nt,
        });
    }
    for (index, c) in record.source_chunks.iter().enumerate() {
        if c.is_empty() || c.iter().any(|w| w.is_empty()) {
            out.push(Violation::EmptySourceChunk { index });
        }
    }
    for (index, c) in record.target_chunks.iter().enumerate() {
        if c.is_empty() || c.iter().any(|w| w.is_empty()) {
            out.push(Violation::EmptyTargetChunk { index });
        }
    }
    if record.latency == LatencyLevel::Offline && ns.max(nt) > 1 {
        out.push(Violation::OfflineMultiChunk {
            chunks: ns.max(nt),
        });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Flattened training sequence with its loss mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SftSequence {
    #[serde(rename = "id")]
    record_id: String,
    tokens: Vec<Token>,
    loss_mask: Vec<bool>,
}

impl SftSequence {
    /// Builds the sequence; the loss mask is derived from token kinds.
    pub fn new(record_id: impl Into<String>, tokens: Vec<Token>) -> Self {
        let loss_mask = tokens.iter().map(|t| t.kind() != TokenKind::Prompt).collect();
        SftSequence {
            record_id: record_id.into(),
            tokens,
            loss_mask,
        }
    }

    pub fn record_id(&self) -> &str {
        &self.record_id
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn loss_mask(&self) -> &[bool] {
        &self.loss_mask
    }

    pub fn prompt_len(&self) -> usize {
        self.tokens
            .iter()
            .take_while(|t| t.kind() == TokenKind::Prompt)
            .count()
    }

    pub fn body(&self) -> &[Token] {
        &self.tokens[self.prompt_len()..]
    }
}

impl<'de> Deserialize<'de> for SftSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            id: String,
            tokens: Vec<Token>,
            loss_mask: Vec<bool>,
        }
        let raw = Raw::deserialize(d)?;
        let seq = SftSequence::new(raw.id, raw.tokens);
        if seq.loss_mask != raw.loss_mask {
            return Err(serde::de::Error::custom(
                "loss_mask must be false exactly on prompt tokens",
            ));
        }
        Ok(seq)
    }
}

/// Everything observed during one decoding session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationTrace {
    pub record_id: String,
    /// Committed target words.
    pub emitted: Vec<String>,
    /// g(i): source tokens read when target token i was committed.
    pub delays: Vec<usize>,
    pub emit_times: Vec<f64>,
    /// Seconds spent in the predictor.
    pub total_wall: f64,
    pub forward_evals: u64,
    pub discarded_predictions: u64,
    pub source_len: usize,
    /// Number of emitted tokens at each chunk end.
    pub chunk_boundaries: Vec<usize>,
    /// Source tokens read at each chunk end; parallel to `chunk_boundaries`.
    #[serde(default)]
    pub chunk_reads: Vec<usize>,
    #[serde(default)]
    pub prompt_len: usize,
    #[serde(default)]
    pub truncated: bool,
    #[serde(default)]
    pub anomalies: u64,
}

impl TranslationTrace {
    /// Checks the trace invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTrace(format!("{}: {m}", self.record_id)));
        if self.delays.len() != self.emitted.len() {
            return bad(format!(
                "{} delays for {} emitted tokens",
                self.delays.len(),
                self.emitted.len()
            ));
        }
        if self.emit_times.len() != self.emitted.len() {
            return bad(format!(
                "{} emit times for {} emitted tokens",
                self.emit_times.len(),
                self.emitted.len()
            ));
        }
        if let Some(i) = self.delays.windows(2).position(|w| w[0] > w[1]) {
            return bad(format!("delays decrease at index {}", i + 1));
        }
        if let Some(&g) = self
            .delays
            .iter()
            .find(|&&g| g == 0 || g > self.source_len)
        {
            return bad(format!("delay {g} outside 1..={}", self.source_len));
        }
        if let Some(i) = self.emit_times.windows(2).position(|w| w[0] > w[1]) {
            return bad(format!("emit times decrease at index {}", i + 1));
        }
        if self.forward_evals < self.emitted.len() as u64 + self.discarded_predictions {
            return bad(format!(
                "forward_evals {} below emitted + discarded",
                self.forward_evals
            ));
        }
        if self.chunk_reads.len() != self.chunk_boundaries.len() {
            return bad("chunk_reads and chunk_boundaries differ in length".into());
        }
        Ok(())
    }

    pub fn hypothesis(&self) -> String {
        self.emitted.join(" ")
    }
}

/// Zero-based (source, target) word index pairs for one sentence pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordAlignment {
    pairs: BTreeSet<(usize, usize)>,
}

impl WordAlignment {
    pub fn new(
        pairs: impl IntoIterator<Item = (usize, usize)>,
        source_len: usize,
        target_len: usize,
    ) -> Result<Self> {
        let pairs: BTreeSet<_> = pairs.into_iter().collect();
        if let Some(&(s, t)) = pairs.iter().find(|&&(s, t)| s >= source_len || t >= target_len) {
            return Err(Error::InvalidAlignment(format!(
                "pair {s}-{t} outside {source_len}x{target_len}"
            )));
        }
        Ok(WordAlignment { pairs })
    }

    /// Unchecked construction, for alignments whose sentence lengths are not known.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        WordAlignment {
            pairs: pairs.into_iter().collect(),
        }
    }

    /// Parses the `"0-0 1-2 ..."` pair convention.
    pub fn parse_line(line: &str) -> Result<Self> {
        let mut pairs = BTreeSet::new();
        for item in line.split_whitespace() {
            let (s, t) = item
                .split_once('-')
                .ok_or_else(|| Error::InvalidAlignment(format!("bad pair {item:?}")))?;
            let parse = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::InvalidAlignment(format!("bad index in {item:?}")))
            };
            pairs.insert((parse(s)?, parse(t)?));
        }
        Ok(WordAlignment { pairs })
    }

    pub fn pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.pairs
    }

    pub fn max_indices(&self) -> Option<(usize, usize)> {
        let s = self.pairs.iter().map(|p| p.0).max()?;
        let t = self.pairs.iter().map(|p| p.1).max()?;
        Some((s, t))
    }
}

/// Corpus-level metric summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub al: f64,
    pub laal: f64,
    pub al_ca: f64,
    pub wwt_ms: f64,
    pub bleu: f64,
    pub hallucination_rate: Option<f64>,
    pub policy_a: Option<f64>,
    pub n_sentences: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunks(v: &[&[&str]]) -> Vec<Chunk> {
        v.iter()
            .map(|c| c.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    fn record(src: &[&[&str]], tgt: &[&[&str]], latency: LatencyLevel) -> AlignedChunkRecord {
        AlignedChunkRecord {
            id: "r".into(),
            src_lang: "de".into(),
            tgt_lang: "en".into(),
            latency,
            source_chunks: chunks(src),
            target_chunks: chunks(tgt),
            quality_score: None,
        }
    }

    #[test]
    fn validate_examples() {
        let ok = record(&[&["a", "b"], &["c"]], &[&["X"], &["Y"]], LatencyLevel::Low);
        assert_eq!(validate_record(&ok), Ok(()));

        let bad = record(&[&["a"]], &[&["X"], &["Y"]], LatencyLevel::Low);
        let v = validate_record(&bad).unwrap_err();
        assert_eq!(v[0].to_string(), "unequal chunk counts 1 vs 2");

        let off = record(&[&["a"]], &[&["X"]], LatencyLevel::Offline);
        assert_eq!(validate_record(&off), Ok(()));
    }

    #[test]
    fn validate_reports_every_violation() {
        let r = record(&[&["a"], &[]], &[&[], &["Y"]], LatencyLevel::Offline);
        let v = validate_record(&r).unwrap_err();
        assert!(v.contains(&Violation::EmptySourceChunk { index: 1 }));
        assert!(v.contains(&Violation::EmptyTargetChunk { index: 0 }));
        assert!(v.contains(&Violation::OfflineMultiChunk { chunks: 2 }));
        assert_eq!(
            validate_record(&record(&[], &[], LatencyLevel::Low)),
            Err(vec![Violation::NoChunks])
        );
    }

    #[test]
    fn signal_tokens_need_reserved_surface() {
        assert!(Token::new("eor", TokenKind::EndOfRead).is_err());
        assert!(Token::new(END_OF_READ, TokenKind::EndOfRead).is_ok());
        assert!(Token::new("x", TokenKind::EndOfWrite).is_err());
        assert!(Token::new("", TokenKind::Source).is_err());
        assert!(Token::new("", TokenKind::Prompt).is_err());
        let bad: serde_json::Result<Token> =
            serde_json::from_str(r#"{"surface":"nope","kind":"end_of_read"}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn latency_indicators_round_trip() {
        for l in LatencyLevel::ALL {
            assert_eq!(l.indicator_text().parse::<LatencyLevel>().unwrap(), l);
        }
        assert!("very-low".parse::<LatencyLevel>().is_err());
    }

    #[test]
    fn trace_rejects_decreasing_delays() {
        let mut t = TranslationTrace {
            record_id: "t".into(),
            emitted: vec!["x".into(), "y".into()],
            delays: vec![2, 1],
            emit_times: vec![0.0, 0.1],
            total_wall: 0.0,
            forward_evals: 10,
            discarded_predictions: 0,
            source_len: 2,
            chunk_boundaries: vec![],
            chunk_reads: vec![],
            prompt_len: 0,
            truncated: false,
            anomalies: 0,
        };
        assert!(t.validate().is_err());
        t.delays = vec![1, 3];
        assert!(t.validate().is_err());
        t.delays = vec![1, 2];
        assert!(t.validate().is_ok());
        t.forward_evals = 1;
        assert!(t.validate().is_err());
    }

    #[test]
    fn alignment_line_parsing() {
        let a = WordAlignment::parse_line("0-0 1-2  2-1").unwrap();
        assert_eq!(a.pairs().len(), 3);
        assert_eq!(a.max_indices(), Some((2, 2)));
        assert!(WordAlignment::parse_line("0-x").is_err());
        assert!(WordAlignment::new([(3, 0)], 3, 1).is_err());
    }
}
