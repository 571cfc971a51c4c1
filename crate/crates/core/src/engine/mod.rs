//! Inference state machines and the predictor abstraction they drive.
//!
//! * [`run_adaptive`]: two-phase read/write decoding over an append-only
//!   context. READ appends one source token and asks the model whether the
//!   chunk is complete; anything but end-of-read is discarded. WRITE appends
//!   predicted target tokens until end-of-write.
//! * [`run_wait_k`]: fixed wait-k schedule that rebuilds its prompt before
//!   every write, so each step pays for the whole context again.
//! * [`run_offline`]: read everything, then write once.

mod adaptive;
mod predictor;
mod remote;
mod wait_k;

pub use adaptive::{run_adaptive, run_offline};
pub use predictor::{
    mock_predictor_from_script, Backend, CallRecord, CostModel, Prediction, PredictorHandle,
    Recording, ReferencePredictor, ScriptedPredictor,
};
pub use remote::{NextTokenRequest, NextTokenResponse, RemoteConfig, RemotePredictor, NEXT_TOKEN_PATH};
pub use wait_k::run_wait_k;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::LatencyLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    #[default]
    SimulatedTime,
    WallClock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub latency: LatencyLevel,
    pub max_tokens_per_write: usize,
    /// Defaults to `4 * source_len + 32` when unset.
    pub max_total_target: Option<usize>,
    pub source_arrival_interval_s: f64,
    pub per_eval_seconds: f64,
    pub mode: TimeMode,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            latency: LatencyLevel::Medium,
            max_tokens_per_write: 64,
            max_total_target: None,
            source_arrival_interval_s: 0.3,
            per_eval_seconds: 0.01,
            mode: TimeMode::SimulatedTime,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_tokens_per_write == 0 {
            return Err(Error::Config("max_tokens_per_write must be positive".into()));
        }
        if self.max_total_target == Some(0) {
            return Err(Error::Config("max_total_target must be positive".into()));
        }
        if self.source_arrival_interval_s.is_nan() || self.source_arrival_interval_s <= 0.0 {
            return Err(Error::Config("source_arrival_interval_s must be positive".into()));
        }
        if self.per_eval_seconds.is_nan() || self.per_eval_seconds < 0.0 {
            return Err(Error::Config("per_eval_seconds must be non-negative".into()));
        }
        Ok(())
    }

    pub fn cost_model(&self) -> CostModel {
        match self.mode {
            TimeMode::SimulatedTime => CostModel::Simulated {
                per_eval_seconds: self.per_eval_seconds,
            },
            TimeMode::WallClock => CostModel::WallClock,
        }
    }

    pub(crate) fn target_cap(&self, source_read: usize) -> usize {
        self.max_total_target.unwrap_or(4 * source_read + 32)
    }
}

/// Session time. Source token `j` (1-based) becomes available at
/// `j * interval`; predictor compute advances the clock.
#[derive(Debug, Clone)]
pub(crate) struct SessionClock {
    now: f64,
    interval: f64,
    compute_origin: f64,
}

impl SessionClock {
    pub(crate) fn new<B: Backend>(interval: f64, handle: &PredictorHandle<B>) -> Self {
        SessionClock {
            now: 0.0,
            interval,
            compute_origin: handle.compute_seconds(),
        }
    }

    pub(crate) fn arrive(&mut self, source_index: usize) {
        self.now = self.now.max(source_index as f64 * self.interval);
    }

    pub(crate) fn predict<B: Backend>(
        &mut self,
        handle: &mut PredictorHandle<B>,
    ) -> Result<crate::types::Token> {
        let before = handle.compute_seconds();
        let tok = handle.predict_next()?;
        self.now += handle.compute_seconds() - before;
        Ok(tok)
    }

    pub(crate) fn now(&self) -> f64 {
        self.now
    }

    pub(crate) fn compute_spent<B: Backend>(&self, handle: &PredictorHandle<B>) -> f64 {
        handle.compute_seconds() - self.compute_origin
    }
}
