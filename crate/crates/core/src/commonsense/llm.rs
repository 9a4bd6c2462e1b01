//! Text-completion client for the remote language model and the prompt
//! templates used to ask it for common sense.
//!
//! Wire protocol: `POST <endpoint>` with JSON `{"prompt": "...", "max_tokens": N}`;
//! the reply is JSON `{"text": "..."}`. An API key, when configured, is sent
//! as a bearer token.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::kb::SizePrior;

pub const ENV_ENDPOINT: &str = "GLRD_LLM_ENDPOINT";
pub const ENV_KEY: &str = "GLRD_LLM_KEY";

/// Scene-level question asked alongside the projected global feature.
pub const GLOBAL_SCENE_PROMPT: &str = "What kind of scene is it mostly like? Describe the scene.";

pub fn size_prompt(class: &str) -> String {
    format!("What is the common size of a {class}? Answer in the format of length*width*height.")
}

pub fn scene_prompt(class: &str, scene: &str) -> String {
    format!("Is it normal to see a {class} in a {scene}?")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LlmError {
    #[error("no LLM endpoint configured (set {ENV_ENDPOINT})")]
    NotConfigured,
    #[error("request failed after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("could not parse {what} from reply {reply:?}")]
    Unparseable { what: &'static str, reply: String },
}

/// Anything that turns a prompt into a completion.
pub trait LlmClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub endpoint: Option<String>,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub max_tokens: u32,
    pub max_in_flight: usize,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            endpoint: None,
            api_key: None,
            timeout_secs: 30.0,
            max_retries: 3,
            backoff_ms: 250,
            max_tokens: 256,
            max_in_flight: 4,
        }
    }
}

impl LlmSettings {
    /// Fills endpoint and key from the environment when they are unset.
    pub fn with_env(mut self) -> Self {
        if self.endpoint.is_none() {
            self.endpoint = std::env::var(ENV_ENDPOINT).ok().filter(|s| !s.is_empty());
        }
        if self.api_key.is_none() {
            self.api_key = std::env::var(ENV_KEY).ok().filter(|s| !s.is_empty());
        }
        self
    }
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            used: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut used = self.used.lock().unwrap();
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap();
        }
        *used += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.used.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Blocking HTTP client with bounded retries and exponential backoff.
pub struct HttpLlmClient {
    agent: ureq::Agent,
    endpoint: String,
    api_key: Option<String>,
    settings: LlmSettings,
    in_flight: InFlight,
}

impl HttpLlmClient {
    pub fn new(settings: LlmSettings) -> Result<Self, LlmError> {
        let endpoint = settings.endpoint.clone().ok_or(LlmError::NotConfigured)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(settings.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint,
            api_key: settings.api_key.clone(),
            in_flight: InFlight::new(settings.max_in_flight),
            settings,
        })
    }

    fn attempt(&self, prompt: &str) -> Result<String, (bool, LlmError)> {
        let body = CompletionRequest {
            prompt,
            max_tokens: self.settings.max_tokens,
        };
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| {
            (
                true,
                LlmError::Transport {
                    attempts: 1,
                    message: e.to_string(),
                },
            )
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let text = resp.body_mut().read_to_string().unwrap_or_default();
            let retryable = status == 429 || status >= 500;
            return Err((retryable, LlmError::Status { status, body: text }));
        }
        let parsed: CompletionResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| (false, LlmError::MalformedResponse(e.to_string())))?;
        Ok(parsed.text)
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let _slot = self.in_flight.acquire();
        let attempts = self.settings.max_retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.settings.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err((true, err)) => last = Some(err),
                Err((false, err)) => return Err(err),
            }
        }
        Err(match last {
            Some(LlmError::Transport { message, .. }) => LlmError::Transport { attempts, message },
            Some(other) => other,
            None => LlmError::NotConfigured,
        })
    }
}

/// Extracts the first `l*w*h` triple from free text, in meters. A `cm` or
/// `mm` suffix after the triple (or on its last number) converts the values.
pub fn parse_size_reply(reply: &str) -> Option<SizePrior> {
    static PATTERN: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let re = PATTERN.get_or_init(|| {
        let num = r"(\d+(?:\.\d+)?|\.\d+)";
        let unit = r"\s*(?:cm|mm|m)?";
        Regex::new(&format!(
            r"(?i){num}{unit}\s*[*×]\s*{num}{unit}\s*[*×]\s*{num}\s*(cm|mm|m(?:eters?|etres?)?|centimet(?:er|re)s?|millimet(?:er|re)s?)?\b"
        ))
        .expect("static regex")
    });
    let caps = re.captures(reply)?;
    let vals: Vec<f64> = (1..=3)
        .map(|i| caps[i].parse::<f64>())
        .collect::<Result<_, _>>()
        .ok()?;
    let scale = match caps.get(4).map(|m| m.as_str().to_ascii_lowercase()) {
        Some(u) if u == "cm" || u.starts_with("centi") => 0.01,
        Some(u) if u == "mm" || u.starts_with("milli") => 0.001,
        _ => 1.0,
    };
    SizePrior::new(vals[0] * scale, vals[1] * scale, vals[2] * scale).ok()
}

/// `Some(true)` for a reply that opens with yes, `Some(false)` for one that
/// opens with no, `None` otherwise.
pub fn parse_scene_reply(reply: &str) -> Option<bool> {
    static PATTERN: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let re = PATTERN.get_or_init(|| Regex::new(r"(?i)^\W*(yes|no)\b").expect("static regex"));
    let caps = re.captures(reply)?;
    Some(caps[1].eq_ignore_ascii_case("yes"))
}
