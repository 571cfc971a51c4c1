//! HTTP client for an external next-token server.
//!
//! Each call is a `POST /v1/next_token` with body
//! `{"session_id", "append": [surface, ...], "predict": true}` carrying the
//! context positions the server has not seen yet. The server answers
//! `{"token", "evaluated_positions"}`. A cache reset starts a new server-side
//! session by bumping a generation suffix on the session id.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::predictor::{Backend, Prediction};
use crate::error::{Error, Result};
use crate::types::Token;

pub const NEXT_TOKEN_PATH: &str = "/v1/next_token";

#[derive(Debug, Clone, Serialize)]
pub struct NextTokenRequest<'a> {
    pub session_id: &'a str,
    pub append: Vec<&'a str>,
    pub predict: bool,
}

#[derive(Debug, Clone, Deserialize)]
pub struct NextTokenResponse {
    pub token: String,
    pub evaluated_positions: u64,
}

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub url: String,
    pub timeout: Duration,
    pub retries: u32,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        RemoteConfig {
            url: url.into(),
            timeout: Duration::from_secs(30),
            retries: 2,
        }
    }

    fn endpoint(&self) -> String {
        let base = self.url.trim_end_matches('/');
        if base.ends_with(NEXT_TOKEN_PATH) {
            base.to_string()
        } else {
            format!("{base}{NEXT_TOKEN_PATH}")
        }
    }
}

pub struct RemotePredictor {
    agent: ureq::Agent,
    endpoint: String,
    retries: u32,
    session_base: String,
    generation: u64,
    session_id: String,
    /// Context positions already sent in the current server session.
    sent: usize,
}

impl RemotePredictor {
    pub fn new(config: &RemoteConfig, session_id: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        let session_base = session_id.into();
        RemotePredictor {
            agent,
            endpoint: config.endpoint(),
            retries: config.retries,
            session_id: format!("{session_base}#0"),
            session_base,
            generation: 0,
            sent: 0,
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    fn post(&self, req: &NextTokenRequest<'_>) -> Result<NextTokenResponse> {
        let mut last = None;
        for _ in 0..=self.retries {
            match self.agent.post(&self.endpoint).send_json(req) {
                Ok(resp) => {
                    return resp
                        .into_json::<NextTokenResponse>()
                        .map_err(|e| Error::Transport(format!("bad response body: {e}")))
                }
                // the server understood and refused; retrying will not help
                Err(ureq::Error::Status(code, resp)) if (400..500).contains(&code) => {
                    let body = resp.into_string().unwrap_or_default();
                    return Err(Error::Transport(format!("status {code}: {body}")));
                }
                Err(e) => last = Some(e.to_string()),
            }
        }
        Err(Error::Transport(last.unwrap_or_else(|| "no attempt made".into())))
    }
}

impl Backend for RemotePredictor {
    fn next_token(&mut self, context: &[Token], _cached: usize) -> Result<Prediction> {
        if self.sent > context.len() {
            return Err(Error::Predictor(
                "context shrank without a reset; remote session is out of sync".into(),
            ));
        }
        let req = NextTokenRequest {
            session_id: &self.session_id,
            append: context[self.sent..].iter().map(Token::surface).collect(),
            predict: true,
        };
        let resp = self.post(&req)?;
        self.sent = context.len();
        Ok(Prediction {
            token: Token::from_predicted_surface(&resp.token),
            evaluated_positions: resp.evaluated_positions,
        })
    }

    fn reset(&mut self) {
        self.generation += 1;
        self.session_id = format!("{}#{}", self.session_base, self.generation);
        self.sent = 0;
    }
}
