//! Simultaneous translation over an interleaved read/write token protocol.
//!
//! Source and target chunks are laid out as one token stream separated by
//! `<|end-of-read|>` / `<|end-of-write|>` signals. The same layout drives
//! training data export ([`protocol`]), corpus preparation ([`curation`]),
//! adaptive decoding against any next-token backend ([`engine`]) and the
//! latency/quality metrics used to score runs ([`metrics`]).

pub mod curation;
pub mod engine;
mod error;
pub mod metrics;
pub mod protocol;
pub mod text;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_record, AlignedChunkRecord, Chunk, LatencyLevel, MetricReport, SftSequence, Token,
    TokenKind, TranslationTrace, Violation, WordAlignment,
};
