//! Chat-completion client for a remotely hosted predictor.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Capabilities, Predictor, Reply, TransportError};
use crate::prompt::{parse_response, render, PromptMode};
use crate::scenario::DrivingScenario;

/// Overrides `EndpointConfig::base_url`.
pub const ENV_ENDPOINT: &str = "TRAJATTACK_ENDPOINT";
/// Bearer token sent with every request.
pub const ENV_TOKEN: &str = "TRAJATTACK_API_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub temperature: f64,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
    #[serde(skip)]
    pub token: Option<String>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".to_string(),
            model: "trajectory-llm".to_string(),
            timeout_s: 60.0,
            max_retries: 3,
            temperature: 0.0,
            backoff_ms: 500,
            token: None,
        }
    }
}

impl EndpointConfig {
    /// Applies the environment-variable overrides.
    pub fn with_env(mut self) -> Self {
        if let Ok(url) = std::env::var(ENV_ENDPOINT) {
            if !url.is_empty() {
                self.base_url = url;
            }
        }
        if let Ok(token) = std::env::var(ENV_TOKEN) {
            if !token.is_empty() {
                self.token = Some(token);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(format!("endpoint timeout must be positive, got {}", self.timeout_s));
        }
        if self.base_url.is_empty() {
            return Err("endpoint base URL is empty".to_string());
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

pub struct RemotePredictor {
    config: EndpointConfig,
    mode: PromptMode,
    agent: ureq::Agent,
}

enum Attempt {
    Retry(TransportError),
    Fatal(TransportError),
}

impl RemotePredictor {
    pub fn new(config: EndpointConfig, mode: PromptMode) -> Result<Self, String> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { config, mode, agent })
    }

    pub fn request_body(&self, scenario: &DrivingScenario) -> Value {
        let prompt = render(scenario, self.mode);
        json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, Attempt> {
        let mut req = self.agent.post(self.config.completions_url());
        if let Some(token) = &self.config.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Err(Attempt::Retry(TransportError::Timeout { attempts: 0, detail: e.to_string() })),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(TransportError::HttpStatus(status)));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(TransportError::HttpStatus(status)));
        }
        let value: Value =
            resp.body_mut().read_json().map_err(|e| Attempt::Fatal(TransportError::Protocol(e.to_string())))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(TransportError::Protocol("missing choices[0].message.content".into())))
    }
}

impl Predictor for RemotePredictor {
    fn capabilities(&self) -> Capabilities {
        Capabilities { mode: self.mode, max_concurrency: 8, deterministic: self.config.temperature == 0.0 }
    }

    fn predict(&self, scenario: &DrivingScenario) -> Result<Reply, TransportError> {
        let body = self.request_body(scenario);
        let attempts = self.config.max_retries + 1;
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut last = TransportError::Timeout { attempts: 0, detail: "no attempt made".into() };
        for n in 1..=attempts {
            match self.attempt(&body) {
                Ok(raw) => {
                    let outcome = parse_response(&raw, self.mode);
                    return Ok(Reply { raw, outcome, cached: false });
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    last = match e {
                        TransportError::Timeout { detail, .. } => TransportError::Timeout { attempts: n, detail },
                        other => other,
                    };
                    if n < attempts {
                        thread::sleep(delay);
                        delay = delay.saturating_mul(2);
                    }
                }
            }
        }
        Err(last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completions_url_is_appended_once() {
        let mut c = EndpointConfig { base_url: "http://h/v1/".into(), ..Default::default() };
        assert_eq!(c.completions_url(), "http://h/v1/chat/completions");
        c.base_url = "http://h/v1/chat/completions".into();
        assert_eq!(c.completions_url(), "http://h/v1/chat/completions");
    }

    #[test]
    fn rejects_nonpositive_timeout() {
        let c = EndpointConfig { timeout_s: 0.0, ..Default::default() };
        assert!(RemotePredictor::new(c, PromptMode::Plain).is_err());
    }
}
