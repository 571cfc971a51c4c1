//! Interleaved read/write token layout.
//!
//! A record with chunks `(c1x, c1y) .. (cTx, cTy)` is laid out as
//!
//! ```text
//! prompt.. c1x.. <|end-of-read|> c1y.. <|end-of-write|> .. cTx.. <|end-of-read|> cTy.. <|end-of-write|> <|eos|>
//! ```
//!
//! Training computes loss on everything after the prompt, so the source words
//! and both signals are supervised alongside the target words.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{validate_record, AlignedChunkRecord, Chunk, LatencyLevel, SftSequence, Token, TokenKind};

pub const DEFAULT_TEMPLATE: &str =
    "Translate the following {src_lang} text into {tgt_lang} with {latency_indicator} latency :";

const PLACEHOLDERS: [&str; 3] = ["{src_lang}", "{tgt_lang}", "{latency_indicator}"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PromptTemplate {
    template_text: String,
}

impl PromptTemplate {
    pub fn new(template_text: impl Into<String>) -> Result<Self> {
        let template_text = template_text.into();
        for p in PLACEHOLDERS {
            let n = template_text.matches(p).count();
            if n != 1 {
                return Err(Error::InvalidTemplate(format!(
                    "placeholder {p} appears {n} times, expected once"
                )));
            }
        }
        Ok(PromptTemplate { template_text })
    }

    pub fn text(&self) -> &str {
        &self.template_text
    }
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            template_text: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

impl TryFrom<String> for PromptTemplate {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        PromptTemplate::new(s)
    }
}

impl From<PromptTemplate> for String {
    fn from(t: PromptTemplate) -> String {
        t.template_text
    }
}

/// Substitutes the placeholders and splits the result into prompt tokens.
pub fn render_prompt(
    template: &PromptTemplate,
    src_lang: &str,
    tgt_lang: &str,
    latency: LatencyLevel,
) -> Vec<Token> {
    template
        .text()
        .replace("{src_lang}", src_lang)
        .replace("{tgt_lang}", tgt_lang)
        .replace("{latency_indicator}", latency.indicator_text())
        .split_whitespace()
        .map(|w| Token::prompt(w).expect("whitespace split yields non-empty words"))
        .collect()
}

/// Appends the interleaved body of `record` (no prompt) to `out`.
pub fn interleave_body(
    source_chunks: &[Chunk],
    target_chunks: &[Chunk],
    out: &mut Vec<Token>,
) -> Result<()> {
    for (src, tgt) in source_chunks.iter().zip(target_chunks) {
        for w in src {
            out.push(Token::source(w.as_str())?);
        }
        out.push(Token::end_of_read());
        for w in tgt {
            out.push(Token::target(w.as_str())?);
        }
        out.push(Token::end_of_write());
    }
    out.push(Token::end_of_sequence());
    Ok(())
}

pub fn interleave(record: &AlignedChunkRecord, prompt: &PromptTemplate) -> Result<SftSequence> {
    if let Err(v) = validate_record(record) {
        let msg = v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        return Err(Error::InvalidRecord(format!("{}: {msg}", record.id)));
    }
    let mut tokens = render_prompt(prompt, &record.src_lang, &record.tgt_lang, record.latency);
    interleave_body(&record.source_chunks, &record.target_chunks, &mut tokens)?;
    Ok(SftSequence::new(record.id.clone(), tokens))
}

/// Chunk sequences recovered from an interleaved token stream.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedChunks {
    pub source_chunks: Vec<Chunk>,
    pub target_chunks: Vec<Chunk>,
}

impl ParsedChunks {
    pub fn into_record(
        self,
        id: impl Into<String>,
        src_lang: impl Into<String>,
        tgt_lang: impl Into<String>,
        latency: LatencyLevel,
    ) -> AlignedChunkRecord {
        AlignedChunkRecord {
            id: id.into(),
            src_lang: src_lang.into(),
            tgt_lang: tgt_lang.into(),
            latency,
            source_chunks: self.source_chunks,
            target_chunks: self.target_chunks,
            quality_score: None,
        }
    }
}

/// Inverse of [`interleave`]. Leading prompt tokens are skipped.
pub fn parse_interleaved(tokens: &[Token]) -> Result<ParsedChunks> {
    enum State {
        Reading,
        Writing,
        Done,
    }
    let err = |index: usize, message: &str| Error::Parse {
        index,
        message: message.to_string(),
    };

    let start = tokens
        .iter()
        .take_while(|t| t.kind() == TokenKind::Prompt)
        .count();
    let mut parsed = ParsedChunks::default();
    let mut src: Chunk = Vec::new();
    let mut tgt: Chunk = Vec::new();
    let mut state = State::Reading;

    for (index, tok) in tokens.iter().enumerate().skip(start) {
        match (&state, tok.kind()) {
            (State::Done, _) => return Err(err(index, "token after end of sequence")),
            (_, TokenKind::Prompt) => return Err(err(index, "prompt token inside body")),
            (State::Reading, TokenKind::Source) => src.push(tok.surface().to_string()),
            (State::Reading, TokenKind::EndOfRead) => {
                if src.is_empty() {
                    return Err(err(index, "end-of-read with empty source chunk"));
                }
                state = State::Writing;
            }
            (State::Reading, TokenKind::EndOfWrite) => {
                return Err(err(index, "end-of-write before end-of-read"))
            }
            (State::Reading, TokenKind::Target) => {
                return Err(err(index, "target token before end-of-read"))
            }
            (State::Reading, TokenKind::EndOfSequence) => {
                if !src.is_empty() {
                    return Err(err(index, "unterminated source chunk"));
                }
                state = State::Done;
            }
            (State::Writing, TokenKind::Target) => tgt.push(tok.surface().to_string()),
            (State::Writing, TokenKind::EndOfWrite) => {
                parsed.source_chunks.push(std::mem::take(&mut src));
                parsed.target_chunks.push(std::mem::take(&mut tgt));
                state = State::Reading;
            }
            (State::Writing, TokenKind::EndOfRead) => {
                return Err(err(index, "end-of-read inside target chunk"))
            }
            (State::Writing, TokenKind::Source) => {
                return Err(err(index, "source token inside target chunk"))
            }
            (State::Writing, TokenKind::EndOfSequence) => {
                return Err(err(index, "unterminated target chunk"))
            }
        }
    }
    match state {
        State::Writing => Err(err(tokens.len(), "unterminated target chunk")),
        State::Reading if !src.is_empty() => Err(err(tokens.len(), "unterminated source chunk")),
        _ if parsed.source_chunks.is_empty() => Err(err(tokens.len(), "no chunks")),
        _ => Ok(parsed),
    }
}

/// Re-serializes a decoding trace as an interleaved body using its chunk
/// boundaries. Chunks that read no new source are folded into the previous
/// chunk; target words after the last boundary form a final chunk.
pub fn serialize_trace(trace: &crate::types::TranslationTrace, source: &[String]) -> Result<Vec<Token>> {
    if source.len() < trace.source_len {
        return Err(Error::LengthMismatch(format!(
            "trace read {} source words, {} given",
            trace.source_len,
            source.len()
        )));
    }
    let mut bounds: Vec<(usize, usize)> = trace
        .chunk_boundaries
        .iter()
        .copied()
        .zip(trace.chunk_reads.iter().copied())
        .collect();
    if bounds.last().is_none_or(|&(e, r)| e < trace.emitted.len() || r < trace.source_len) {
        bounds.push((trace.emitted.len(), trace.source_len));
    }
    let mut src_chunks: Vec<Chunk> = Vec::new();
    let mut tgt_chunks: Vec<Chunk> = Vec::new();
    let (mut e0, mut r0) = (0, 0);
    for (e, r) in bounds {
        let s: Chunk = source[r0..r].to_vec();
        let t: Chunk = trace.emitted[e0..e].to_vec();
        match (s.is_empty(), src_chunks.last_mut(), tgt_chunks.last_mut()) {
            (true, Some(_), Some(prev)) => prev.extend(t),
            _ => {
                src_chunks.push(s);
                tgt_chunks.push(t);
            }
        }
        e0 = e;
        r0 = r;
    }
    let mut out = Vec::new();
    interleave_body(&src_chunks, &tgt_chunks, &mut out)?;
    Ok(out)
}

/// Writes one SFT export line: `{id, tokens: [{surface, kind}], loss_mask}`.
pub fn write_sft_jsonl<W: Write>(out: &mut W, seq: &SftSequence) -> Result<()> {
    serde_json::to_writer(&mut *out, seq)?;
    out.write_all(b"\n")?;
    Ok(())
}
