use std::time::Instant;

use crate::error::{Error, Result};
use crate::types::{SftSequence, Token, TokenKind};

/// One next-token decision from a backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub token: Token,
    /// Context positions the backend had to run through to produce `token`.
    pub evaluated_positions: u64,
}

/// A greedy next-token predictor.
///
/// `cached` is the number of leading context positions that earlier calls
/// already evaluated; a caching backend only pays for the rest.
pub trait Backend {
    fn next_token(&mut self, context: &[Token], cached: usize) -> Result<Prediction>;

    /// Forget all cached state. The next call sees `cached == 0`.
    fn reset(&mut self) {}
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn next_token(&mut self, context: &[Token], cached: usize) -> Result<Prediction> {
        (**self).next_token(context, cached)
    }

    fn reset(&mut self) {
        (**self).reset()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    /// Every evaluated position costs a fixed number of seconds.
    Simulated { per_eval_seconds: f64 },
    /// Backend calls are timed with the system clock.
    WallClock,
}

/// Owns a session's context and does the cost bookkeeping.
///
/// The context only grows through [`extend`](Self::extend). The one
/// exception is [`rebuild`](Self::rebuild), which models prompt
/// reorganisation and throws away all cached state.
pub struct PredictorHandle<B> {
    backend: B,
    context: Vec<Token>,
    evaluated: usize,
    forward_evals: u64,
    predictions: u64,
    rebuilds: u64,
    compute_seconds: f64,
    cost: CostModel,
}

impl<B: Backend> PredictorHandle<B> {
    pub fn new(backend: B, cost: CostModel) -> Self {
        PredictorHandle {
            backend,
            context: Vec::new(),
            evaluated: 0,
            forward_evals: 0,
            predictions: 0,
            rebuilds: 0,
            compute_seconds: 0.0,
            cost,
        }
    }

    pub fn extend<I: IntoIterator<Item = Token>>(&mut self, tokens: I) {
        self.context.extend(tokens);
    }

    pub fn predict_next(&mut self) -> Result<Token> {
        if self.context.is_empty() {
            return Err(Error::Predictor("predict on empty context".into()));
        }
        let started = Instant::now();
        let p = self.backend.next_token(&self.context, self.evaluated)?;
        let elapsed = started.elapsed().as_secs_f64();
        self.forward_evals += p.evaluated_positions;
        self.evaluated = self.context.len();
        self.predictions += 1;
        self.compute_seconds += match self.cost {
            CostModel::Simulated { per_eval_seconds } => {
                p.evaluated_positions as f64 * per_eval_seconds
            }
            CostModel::WallClock => elapsed,
        };
        Ok(p.token)
    }

    /// Replaces the whole context and invalidates the cache.
    pub fn rebuild(&mut self, tokens: Vec<Token>) {
        self.context = tokens;
        self.evaluated = 0;
        self.rebuilds += 1;
        self.backend.reset();
    }

    pub fn context(&self) -> &[Token] {
        &self.context
    }

    pub fn forward_evals(&self) -> u64 {
        self.forward_evals
    }

    pub fn predictions(&self) -> u64 {
        self.predictions
    }

    pub fn rebuilds(&self) -> u64 {
        self.rebuilds
    }

    pub fn compute_seconds(&self) -> f64 {
        self.compute_seconds
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn into_backend(self) -> B {
        self.backend
    }
}

/// Replays a fixed token script: when the context equals the script prefix
/// of the same length, the next script token is predicted; otherwise
/// [`Token::unknown`].
#[derive(Debug, Clone)]
pub struct ScriptedPredictor {
    script: Vec<Token>,
}

pub fn mock_predictor_from_script(script: &SftSequence) -> ScriptedPredictor {
    ScriptedPredictor {
        script: script.tokens().to_vec(),
    }
}

impl ScriptedPredictor {
    pub fn new(script: Vec<Token>) -> Self {
        ScriptedPredictor { script }
    }
}

impl Backend for ScriptedPredictor {
    fn next_token(&mut self, context: &[Token], cached: usize) -> Result<Prediction> {
        if context.is_empty() {
            return Err(Error::Predictor("predict on empty context".into()));
        }
        let n = context.len();
        let token = if n < self.script.len() && self.script[..n] == *context {
            self.script[n].clone()
        } else {
            Token::unknown()
        };
        Ok(Prediction {
            token,
            evaluated_positions: (n - cached.min(n)) as u64,
        })
    }
}

/// Emits a fixed reference translation one word at a time, keyed on how many
/// target tokens the context already holds, then end-of-sequence. Policy
/// agnostic, so it drives fixed schedules such as wait-k.
#[derive(Debug, Clone)]
pub struct ReferencePredictor {
    target: Vec<String>,
}

impl ReferencePredictor {
    pub fn new<I, S>(target: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ReferencePredictor {
            target: target.into_iter().map(Into::into).collect(),
        }
    }
}

impl Backend for ReferencePredictor {
    fn next_token(&mut self, context: &[Token], cached: usize) -> Result<Prediction> {
        if context.is_empty() {
            return Err(Error::Predictor("predict on empty context".into()));
        }
        let written = context
            .iter()
            .filter(|t| t.kind() == TokenKind::Target)
            .count();
        let token = match self.target.get(written) {
            Some(w) => Token::target(w.as_str())?,
            None => Token::end_of_sequence(),
        };
        let n = context.len();
        Ok(Prediction {
            token,
            evaluated_positions: (n - cached.min(n)) as u64,
        })
    }
}

/// One observed backend call.
#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub context: Vec<Token>,
    pub cached: usize,
    pub prediction: Token,
}

/// Wraps a backend and keeps a copy of every context it was asked about.
#[derive(Debug, Clone)]
pub struct Recording<B> {
    inner: B,
    calls: Vec<CallRecord>,
    resets: usize,
}

impl<B> Recording<B> {
    pub fn new(inner: B) -> Self {
        Recording {
            inner,
            calls: Vec::new(),
            resets: 0,
        }
    }

    pub fn calls(&self) -> &[CallRecord] {
        &self.calls
    }

    pub fn resets(&self) -> usize {
        self.resets
    }
}

impl<B: Backend> Backend for Recording<B> {
    fn next_token(&mut self, context: &[Token], cached: usize) -> Result<Prediction> {
        let p = self.inner.next_token(context, cached)?;
        self.calls.push(CallRecord {
            context: context.to_vec(),
            cached,
            prediction: p.token.clone(),
        });
        Ok(p)
    }

    fn reset(&mut self) {
        self.resets += 1;
        self.inner.reset();
    }
}
