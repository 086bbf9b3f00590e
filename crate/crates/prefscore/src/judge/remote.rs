//! Remote judge speaking the chat-completion HTTP protocol.
//!
//! Each query renders the prompt template for one presentation order, POSTs
//! a `{system, user}` message pair to `{base_url}/chat/completions`, and
//! feeds the first choice's text through the verdict parser. Credentials are
//! read from an environment variable named in the config, never stored in
//! artifacts.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{parse_verdict, render_prompt, Judge, PromptTemplate, Verdict};
use crate::data::{Essay, EssaySet};
use crate::error::{Error, Result};

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

fn default_temperature() -> f64 {
    0.1
}

fn default_max_attempts() -> usize {
    3
}

fn default_timeout_secs() -> u64 {
    60
}

/// Connection and sampling settings for a remote judge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteJudgeConfig {
    /// Endpoint root, e.g. `https://api.example.com/v1`.
    pub base_url: String,
    /// Model name sent in the request body.
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    /// Sampling temperature for judge calls.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    /// Attempts per query before the pair is skipped.
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

impl RemoteJudgeConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        RemoteJudgeConfig {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: default_api_key_env(),
            temperature: default_temperature(),
            max_attempts: default_max_attempts(),
            timeout_secs: default_timeout_secs(),
        }
    }
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: [ChatMessage<'a>; 2],
}

/// [`Judge`] implementation backed by an HTTP chat-completion endpoint.
pub struct RemoteJudge {
    cfg: RemoteJudgeConfig,
    template: PromptTemplate,
    client: reqwest::blocking::Client,
    api_key: String,
}

impl std::fmt::Debug for RemoteJudge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // never print the credential
        f.debug_struct("RemoteJudge")
            .field("cfg", &self.cfg)
            .field("template", &self.template.source())
            .finish_non_exhaustive()
    }
}

impl RemoteJudge {
    /// Builds the judge, resolving the credential environment variable up
    /// front so a missing key fails before any pairs are attempted.
    pub fn new(cfg: RemoteJudgeConfig, template: PromptTemplate) -> Result<Self> {
        let api_key = std::env::var(&cfg.api_key_env).unwrap_or_default();
        if api_key.is_empty() {
            return Err(Error::MissingCredential {
                name: cfg.api_key_env.clone(),
            });
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Remote {
                endpoint: cfg.base_url.clone(),
                message: format!("could not build HTTP client: {e}"),
            })?;
        Ok(RemoteJudge {
            cfg,
            template,
            client,
            api_key,
        })
    }

    fn completions_url(&self) -> String {
        format!(
            "{}/chat/completions",
            self.cfg.base_url.trim_end_matches('/')
        )
    }

    /// One round trip: returns the assistant text of the first choice.
    fn complete(&self, system: &str, user: &str) -> Result<String> {
        let url = self.completions_url();
        let request = ChatRequest {
            model: &self.cfg.model,
            temperature: self.cfg.temperature,
            messages: [
                ChatMessage {
                    role: "system",
                    content: system,
                },
                ChatMessage {
                    role: "user",
                    content: user,
                },
            ],
        };
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&request)
            .send()
            .map_err(|e| Error::Remote {
                endpoint: url.clone(),
                message: e.to_string(),
            })?;

        let status = response.status();
        let body = response.text().map_err(|e| Error::Remote {
            endpoint: url.clone(),
            message: format!("could not read response body: {e}"),
        })?;
        if !status.is_success() {
            return Err(Error::Remote {
                endpoint: url,
                message: format!("HTTP {status}: {}", snippet(&body)),
            });
        }

        let value: serde_json::Value = serde_json::from_str(&body).map_err(|e| Error::Remote {
            endpoint: url.clone(),
            message: format!("response is not JSON ({e}): {}", snippet(&body)),
        })?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| Error::Remote {
                endpoint: url,
                message: format!(
                    "response missing choices[0].message.content: {}",
                    snippet(&body)
                ),
            })
    }
}

fn snippet(body: &str) -> String {
    const LIMIT: usize = 240;
    if body.len() <= LIMIT {
        body.to_string()
    } else {
        let mut end = LIMIT;
        while !body.is_char_boundary(end) {
            end -= 1;
        }
        format!("{}…", &body[..end])
    }
}

impl Judge for RemoteJudge {
    fn id(&self) -> String {
        format!("remote:{}", self.cfg.model)
    }

    fn max_attempts(&self) -> usize {
        self.cfg.max_attempts
    }

    fn judge_once(&self, set: &EssaySet, first: &Essay, second: &Essay) -> Result<Verdict> {
        let (system, user) = render_prompt(
            &self.template,
            &set.prompt_text,
            &set.rubric_text,
            first,
            second,
        );
        let text = self.complete(&system, &user)?;
        parse_verdict(&text)
    }
}
