//! Shared error type and JSON-over-HTTP plumbing for pluggable clients
//! (search, generation, translation, webhooks).

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ClientError {
    #[error("timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server answered HTTP {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("unavailable: {0}")]
    Unavailable(String),
}

impl From<ureq::Error> for ClientError {
    fn from(err: ureq::Error) -> Self {
        match err {
            ureq::Error::Timeout(_) => ClientError::Timeout,
            ureq::Error::StatusCode(code) => ClientError::Status(code),
            ureq::Error::Json(e) => ClientError::Malformed(e.to_string()),
            ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => ClientError::Timeout,
            other => ClientError::Transport(other.to_string()),
        }
    }
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .build()
        .into()
}

/// POST `body` as JSON and decode a JSON reply.
pub fn post_json<B: Serialize, R: DeserializeOwned>(
    url: &str,
    body: &B,
    timeout: Duration,
) -> Result<R, ClientError> {
    let mut response = agent(timeout).post(url).send_json(body)?;
    response
        .body_mut()
        .read_json::<R>()
        .map_err(|e| match ClientError::from(e) {
            ClientError::Transport(m) => ClientError::Malformed(m),
            other => other,
        })
}

/// POST `body` as JSON and ignore the reply body.
pub fn post_json_discard<B: Serialize>(url: &str, body: &B, timeout: Duration) -> Result<(), ClientError> {
    agent(timeout).post(url).send_json(body)?;
    Ok(())
}

/// Somewhere to push JSON payloads (a chat webhook, a test recorder).
pub trait JsonSink: Send + Sync {
    fn name(&self) -> &str;
    fn post(&self, payload: &serde_json::Value) -> Result<(), ClientError>;
}

#[derive(Debug, Clone)]
pub struct HttpWebhook {
    pub url: String,
    pub timeout: Duration,
}

impl JsonSink for HttpWebhook {
    fn name(&self) -> &str {
        &self.url
    }

    fn post(&self, payload: &serde_json::Value) -> Result<(), ClientError> {
        post_json_discard(&self.url, payload, self.timeout)
    }
}
