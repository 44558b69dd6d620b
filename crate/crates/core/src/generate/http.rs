use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Finish, Generation, GenerativeClient, Prompt};
use crate::client::{post_json, ClientError};

#[derive(Debug, Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
}

#[derive(Debug, Deserialize)]
struct GenerateResponse {
    text: String,
    #[serde(default = "complete")]
    finish: Finish,
}

fn complete() -> Finish {
    Finish::Complete
}

/// A model served as `POST {prompt, max_tokens, temperature}` returning
/// `{text, finish}`.
#[derive(Debug, Clone)]
pub struct HttpGenerativeClient {
    pub id: String,
    pub endpoint: String,
    pub timeout: Duration,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl HttpGenerativeClient {
    pub fn new(id: impl Into<String>, endpoint: impl Into<String>, timeout: Duration) -> Self {
        HttpGenerativeClient {
            id: id.into(),
            endpoint: endpoint.into(),
            timeout,
            max_tokens: 300,
            temperature: 0.0,
        }
    }
}

impl GenerativeClient for HttpGenerativeClient {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, prompt: &Prompt) -> Result<Generation, ClientError> {
        let request = GenerateRequest {
            prompt: &prompt.rendered,
            max_tokens: self.max_tokens,
            temperature: self.temperature,
        };
        let response: GenerateResponse = post_json(&self.endpoint, &request, self.timeout)?;
        Ok(Generation {
            text: response.text,
            finish: response.finish,
        })
    }
}
