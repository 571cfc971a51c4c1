use std::iter::Peekable;

use super::{Backend, EngineConfig, PredictorHandle, SessionClock};
use crate::error::{Error, Result};
use crate::types::{Token, TokenKind, TranslationTrace};

/// How a WRITE phase ended.
enum WriteEnd {
    /// Chunk closed with end-of-write; source remains.
    BackToRead,
    /// Session is over.
    Finished,
}

struct Session<'a, B> {
    handle: &'a mut PredictorHandle<B>,
    config: &'a EngineConfig,
    clock: SessionClock,
    forward_origin: u64,
    prompt_len: usize,
    read: usize,
    emitted: Vec<String>,
    delays: Vec<usize>,
    emit_times: Vec<f64>,
    discarded: u64,
    anomalies: u64,
    truncated: bool,
    chunk_boundaries: Vec<usize>,
    chunk_reads: Vec<usize>,
}

impl<'a, B: Backend> Session<'a, B> {
    fn start(handle: &'a mut PredictorHandle<B>, config: &'a EngineConfig) -> Result<Self> {
        config.validate()?;
        let prompt_len = handle.context().len();
        if prompt_len == 0 {
            return Err(Error::Config(
                "predictor context must be seeded with the prompt".into(),
            ));
        }
        Ok(Session {
            clock: SessionClock::new(config.source_arrival_interval_s, handle),
            forward_origin: handle.forward_evals(),
            handle,
            config,
            prompt_len,
            read: 0,
            emitted: Vec::new(),
            delays: Vec::new(),
            emit_times: Vec::new(),
            discarded: 0,
            anomalies: 0,
            truncated: false,
            chunk_boundaries: Vec::new(),
            chunk_reads: Vec::new(),
        })
    }

    fn take_source(&mut self, word: String) -> Result<()> {
        self.read += 1;
        self.clock.arrive(self.read);
        self.handle.extend([Token::source(word)?]);
        Ok(())
    }

    /// Reads source tokens until the model predicts end-of-read or the
    /// source runs out, in which case end-of-read is injected.
    fn read_phase<I: Iterator<Item = String>>(&mut self, source: &mut I) -> Result<()> {
        for word in source.by_ref() {
            self.take_source(word)?;
            let predicted = self.clock.predict(self.handle)?;
            match predicted.kind() {
                TokenKind::EndOfRead => {
                    self.handle.extend([Token::end_of_read()]);
                    return Ok(());
                }
                TokenKind::EndOfWrite | TokenKind::EndOfSequence => {
                    self.anomalies += 1;
                    self.discarded += 1;
                }
                _ => self.discarded += 1,
            }
        }
        self.handle.extend([Token::end_of_read()]);
        Ok(())
    }

    fn close_chunk(&mut self) {
        self.handle.extend([Token::end_of_write()]);
        self.chunk_boundaries.push(self.emitted.len());
        self.chunk_reads.push(self.read);
    }

    fn write_phase(&mut self, source_remains: impl Fn() -> bool) -> Result<WriteEnd> {
        let mut in_chunk = 0usize;
        loop {
            if self.emitted.len() >= self.config.target_cap(self.read) {
                self.truncated = true;
                return Ok(WriteEnd::Finished);
            }
            let predicted = self.clock.predict(self.handle)?;
            let end_chunk = match predicted.kind() {
                TokenKind::EndOfWrite => true,
                TokenKind::EndOfRead => {
                    self.anomalies += 1;
                    true
                }
                TokenKind::EndOfSequence => {
                    if source_remains() {
                        self.anomalies += 1;
                        true
                    } else {
                        if in_chunk > 0 {
                            self.chunk_boundaries.push(self.emitted.len());
                            self.chunk_reads.push(self.read);
                        }
                        self.handle.extend([Token::end_of_sequence()]);
                        return Ok(WriteEnd::Finished);
                    }
                }
                TokenKind::Target | TokenKind::Source | TokenKind::Prompt => {
                    let word = predicted.surface().to_string();
                    self.handle.extend([Token::target(word.as_str())?]);
                    self.emitted.push(word);
                    self.delays.push(self.read);
                    self.emit_times.push(self.clock.now());
                    in_chunk += 1;
                    if in_chunk >= self.config.max_tokens_per_write {
                        self.truncated = true;
                        true
                    } else {
                        false
                    }
                }
            };
            if end_chunk {
                if source_remains() {
                    self.close_chunk();
                    return Ok(WriteEnd::BackToRead);
                }
                if in_chunk == 0 {
                    // nothing left to read and nothing more to say
                    self.handle.extend([Token::end_of_write()]);
                    return Ok(WriteEnd::Finished);
                }
                self.close_chunk();
                in_chunk = 0;
            }
        }
    }

    fn finish(self, record_id: &str) -> Result<TranslationTrace> {
        let trace = TranslationTrace {
            record_id: record_id.to_string(),
            emitted: self.emitted,
            delays: self.delays,
            emit_times: self.emit_times,
            total_wall: self.clock.compute_spent(self.handle),
            forward_evals: self.handle.forward_evals() - self.forward_origin,
            discarded_predictions: self.discarded,
            source_len: self.read,
            chunk_boundaries: self.chunk_boundaries,
            chunk_reads: self.chunk_reads,
            prompt_len: self.prompt_len,
            truncated: self.truncated,
            anomalies: self.anomalies,
        };
        trace.validate()?;
        Ok(trace)
    }
}

fn non_empty<I: Iterator<Item = String>>(source: &mut Peekable<I>) -> Result<()> {
    if source.peek().is_none() {
        return Err(Error::Config("source must be non-empty".into()));
    }
    Ok(())
}

/// Adaptive read/write decoding over an append-only context.
///
/// `predictor` must already hold the rendered prompt. Source words are pulled
/// from `source` one at a time, so the stream may be produced lazily.
pub fn run_adaptive<B, I>(
    record_id: &str,
    source: I,
    predictor: &mut PredictorHandle<B>,
    config: &EngineConfig,
) -> Result<TranslationTrace>
where
    B: Backend,
    I: IntoIterator<Item = String>,
{
    let mut source = source.into_iter().peekable();
    non_empty(&mut source)?;
    let mut session = Session::start(predictor, config)?;
    loop {
        session.read_phase(&mut source)?;
        let remains = source.peek().is_some();
        match session.write_phase(|| remains)? {
            WriteEnd::BackToRead => continue,
            WriteEnd::Finished => break,
        }
    }
    session.finish(record_id)
}

/// Reads the whole source, then writes a single chunk.
pub fn run_offline<B, I>(
    record_id: &str,
    source: I,
    predictor: &mut PredictorHandle<B>,
    config: &EngineConfig,
) -> Result<TranslationTrace>
where
    B: Backend,
    I: IntoIterator<Item = String>,
{
    let mut source = source.into_iter().peekable();
    non_empty(&mut source)?;
    let mut session = Session::start(predictor, config)?;
    for word in source {
        session.take_source(word)?;
    }
    session.handle.extend([Token::end_of_read()]);
    session.write_phase(|| false)?;
    session.finish(record_id)
}
