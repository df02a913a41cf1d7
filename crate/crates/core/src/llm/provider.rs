use std::collections::{BTreeMap, VecDeque};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GenerationParams, LlmError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: "user".into(),
            content: content.into(),
        }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        Message {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

/// Wire request body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub top_p: f64,
    pub presence_penalty: f64,
    pub frequency_penalty: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(model: &str, messages: Vec<Message>, p: &GenerationParams) -> Self {
        ChatRequest {
            model: model.to_string(),
            messages,
            temperature: p.temperature(),
            top_p: p.top_p(),
            presence_penalty: p.presence_penalty(),
            frequency_penalty: p.frequency_penalty(),
            max_tokens: p.max_tokens(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum ProviderError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimited,
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no scripted response left for step {0}")]
    Exhausted(String),
}

impl ProviderError {
    pub fn retryable(&self) -> bool {
        matches!(self, ProviderError::RateLimited | ProviderError::Timeout | ProviderError::Transport(_))
    }
}

pub trait Provider: Send + Sync {
    fn id(&self) -> String;
    /// `step` names the pipeline step issuing the request.
    fn complete(&self, step: &str, request: &ChatRequest) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 500,
            max_delay_ms: 8000,
        }
    }
}

impl RetryPolicy {
    /// Exponential delay before attempt `attempt + 1`, with up to 50% jitter.
    pub fn delay(&self, attempt: u32) -> Duration {
        let exp = self.base_delay_ms.saturating_mul(1u64 << attempt.min(20)).min(self.max_delay_ms);
        let jitter = if exp > 0 { rand::thread_rng().gen_range(0..=exp / 2) } else { 0 };
        Duration::from_millis(exp + jitter)
    }
}

/// One request, retrying transient failures per `retry`.
/// Returns the response and the number of attempts made.
pub fn chat_complete(
    provider: &dyn Provider,
    step: &str,
    request: &ChatRequest,
    retry: &RetryPolicy,
) -> Result<(String, u32), (ProviderError, u32)> {
    let max = retry.max_attempts.max(1);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match provider.complete(step, request) {
            Ok(r) => return Ok((r, attempt)),
            Err(e) if e.retryable() && attempt < max => std::thread::sleep(retry.delay(attempt - 1)),
            Err(e) => return Err((e, attempt)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Scripted {
    Reply(String),
    Fail(ProviderError),
}

/// Replays canned responses from a script.
///
/// A script is plain text split into sections by lines of the form
/// `%%% <step>`, optionally followed by `!rate_limit`, `!auth` or
/// `!timeout` to script a failure instead of a reply. Section `*` serves
/// steps without their own sections. In cycling mode a step's responses
/// repeat once used up.
#[derive(Debug)]
pub struct MockProvider {
    queues: Mutex<BTreeMap<String, VecDeque<Scripted>>>,
    script: BTreeMap<String, Vec<Scripted>>,
    cycle: bool,
    name: String,
}

impl MockProvider {
    pub fn from_script(text: &str) -> Result<Self, LlmError> {
        let mut script: BTreeMap<String, Vec<Scripted>> = BTreeMap::new();
        let mut current: Option<(String, Option<ProviderError>, Vec<&str>)> = None;
        let flush = |cur: Option<(String, Option<ProviderError>, Vec<&str>)>, script: &mut BTreeMap<String, Vec<Scripted>>| {
            if let Some((step, fail, lines)) = cur {
                let entry = match fail {
                    Some(e) => Scripted::Fail(e),
                    None => Scripted::Reply(lines.join("\n").trim_matches('\n').to_string()),
                };
                script.entry(step).or_default().push(entry);
            }
        };
        for line in text.lines() {
            if let Some(head) = line.strip_prefix("%%%") {
                flush(current.take(), &mut script);
                let mut parts = head.split_whitespace();
                let step = parts
                    .next()
                    .ok_or_else(|| LlmError::Script("section header without step name".into()))?
                    .to_string();
                let fail = match parts.next() {
                    None => None,
                    Some("!rate_limit") => Some(ProviderError::RateLimited),
                    Some("!auth") => Some(ProviderError::Auth("scripted".into())),
                    Some("!timeout") => Some(ProviderError::Timeout),
                    Some(other) => return Err(LlmError::Script(format!("unknown directive {other}"))),
                };
                current = Some((step, fail, Vec::new()));
            } else if let Some((_, _, lines)) = current.as_mut() {
                lines.push(line);
            } else if !line.trim().is_empty() {
                return Err(LlmError::Script("text before the first section header".into()));
            }
        }
        flush(current, &mut script);
        let queues = script.iter().map(|(k, v)| (k.clone(), v.iter().cloned().collect())).collect();
        Ok(MockProvider {
            queues: Mutex::new(queues),
            script,
            cycle: false,
            name: "mock".into(),
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))?;
        let mut m = Self::from_script(&text)?;
        m.name = format!("mock:{}", path.file_name().and_then(|n| n.to_str()).unwrap_or("script"));
        Ok(m)
    }

    pub fn cycling(mut self) -> Self {
        self.cycle = true;
        self
    }
}

impl Provider for MockProvider {
    fn id(&self) -> String {
        self.name.clone()
    }

    fn complete(&self, step: &str, _request: &ChatRequest) -> Result<String, ProviderError> {
        let mut queues = self.queues.lock().expect("mock queue lock");
        let key = if queues.contains_key(step) { step } else { "*" };
        let q = queues
            .get_mut(key)
            .ok_or_else(|| ProviderError::Exhausted(step.to_string()))?;
        if q.is_empty() && self.cycle {
            q.extend(self.script[key].iter().cloned());
        }
        match q.pop_front() {
            Some(Scripted::Reply(r)) => Ok(r),
            Some(Scripted::Fail(e)) => Err(e),
            None => Err(ProviderError::Exhausted(step.to_string())),
        }
    }
}

/// Environment variable holding the HTTP provider credential.
pub const API_KEY_VAR: &str = "FSMGUARD_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    /// "mock" or "http".
    pub kind: String,
    pub endpoint: String,
    pub model: String,
    pub timeout_secs: u64,
    pub script: Option<PathBuf>,
    pub max_in_flight: usize,
    pub char_budget: usize,
    pub retry: RetryPolicy,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: "mock".into(),
            endpoint: String::new(),
            model: String::new(),
            timeout_secs: 60,
            script: None,
            max_in_flight: 4,
            char_budget: 24_000,
            retry: RetryPolicy::default(),
        }
    }
}

impl ProviderConfig {
    pub fn build(&self) -> Result<Box<dyn Provider>, LlmError> {
        match self.kind.as_str() {
            "mock" => {
                let path = self
                    .script
                    .as_ref()
                    .ok_or_else(|| LlmError::Config("mock provider needs a script".into()))?;
                Ok(Box::new(MockProvider::from_file(path)?.cycling()))
            }
            "http" => Ok(Box::new(HttpProvider::from_env(self)?)),
            other => Err(LlmError::Config(format!("unknown provider kind {other}"))),
        }
    }
}

/// Chat-completion client for OpenAI-style endpoints.
pub struct HttpProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    key: String,
}

impl HttpProvider {
    pub fn new(config: &ProviderConfig, key: String) -> Result<Self, LlmError> {
        if config.endpoint.is_empty() || config.model.is_empty() {
            return Err(LlmError::Config("http provider needs endpoint and model".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(HttpProvider {
            client,
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
            key,
        })
    }

    pub fn from_env(config: &ProviderConfig) -> Result<Self, LlmError> {
        let key = std::env::var(API_KEY_VAR).map_err(|_| LlmError::Config(format!("{API_KEY_VAR} is not set")))?;
        Self::new(config, key)
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}
#[derive(Deserialize)]
struct WireChoice {
    message: Message,
}

impl Provider for HttpProvider {
    fn id(&self) -> String {
        format!("http:{}", self.model)
    }

    fn complete(&self, _step: &str, request: &ChatRequest) -> Result<String, ProviderError> {
        let mut body = request.clone();
        body.model = self.model.clone();
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ProviderError::Timeout
                } else {
                    ProviderError::Transport(e.to_string())
                }
            })?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(ProviderError::Auth(status.to_string()));
        }
        if status.as_u16() == 429 {
            return Err(ProviderError::RateLimited);
        }
        if !status.is_success() {
            return Err(ProviderError::Transport(status.to_string()));
        }
        let wire: WireResponse = resp.json().map_err(|e| ProviderError::Transport(e.to_string()))?;
        wire.choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| ProviderError::Transport("response without choices".into()))
    }
}
