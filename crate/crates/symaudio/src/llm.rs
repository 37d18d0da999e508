//! Chat-completion client with retries, a concurrency cap and a
//! requests-per-minute limit, plus a scripted offline responder.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use symaudio_core::eval::QaSample;
use symaudio_core::prompt::{classify_prompt, option_letter, render_question_block, PromptStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LlmRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmRequest {
    /// A single user message at temperature 0.
    pub fn user(model_id: &str, content: &str, max_tokens: u32) -> Self {
        LlmRequest {
            model_id: model_id.into(),
            messages: vec![ChatMessage {
                role: Role::User,
                content: content.into(),
            }],
            temperature: 0.0,
            max_tokens,
        }
    }

    /// Content of the last message, which carries the prompt.
    pub fn prompt_text(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }

    fn check(&self) -> Result<(), LlmError> {
        if self.messages.is_empty() {
            return Err(LlmError::InvalidRequest("no messages".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(LlmError::InvalidRequest("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LlmResponse {
    pub text: String,
    pub finish_reason: FinishReason,
    pub latency_ms: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl LlmResponse {
    pub fn stop(text: impl Into<String>) -> Self {
        LlmResponse {
            text: text.into(),
            finish_reason: FinishReason::Stop,
            latency_ms: 0,
            prompt_tokens: 0,
            completion_tokens: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("endpoint rejected the credential (HTTP {status})")]
    Unauthorized { status: u16 },
    #[error("still rate limited after {attempts} attempts")]
    RateLimitedExhausted { attempts: u32 },
    #[error("request failed after {attempts} attempt(s): {detail}")]
    TransportFailure { attempts: u32, detail: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// Anything that answers chat-completion requests. Shared across workers.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

impl<T: LlmClient + ?Sized> LlmClient for &T {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

impl<T: LlmClient + ?Sized> LlmClient for Box<T> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (**self).complete(request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// One HTTP POST of a JSON body. `Err` means no HTTP response arrived.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<HttpReply, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        UreqTransport {
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<HttpReply, String> {
        let mut request = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send(body.to_string()).map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        let body = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            factor: 2,
        }
    }
}

impl RetryPolicy {
    /// Wait before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base_delay * self.factor.saturating_pow(retry.saturating_sub(1))
    }
}

/// Counting semaphore bounding in-flight requests.
pub struct Semaphore {
    available: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    pub fn new(permits: usize) -> Self {
        Semaphore {
            available: Mutex::new(permits.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

/// Sliding-window limiter: at most `limit` starts within any `window`.
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    starts: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn new(limit: usize, window: Duration) -> Self {
        RateLimiter {
            limit: limit.max(1),
            window,
            starts: Mutex::new(VecDeque::new()),
        }
    }

    pub fn per_minute(limit: usize) -> Self {
        RateLimiter::new(limit, Duration::from_secs(60))
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut starts = self.starts.lock().unwrap_or_else(|e| e.into_inner());
                let now = Instant::now();
                while starts.front().is_some_and(|t| now.duration_since(*t) >= self.window) {
                    starts.pop_front();
                }
                if starts.len() < self.limit {
                    starts.push_back(now);
                    return;
                }
                self.window - now.duration_since(starts[0])
            };
            std::thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub model_id: String,
    /// Environment variable holding the credential.
    pub api_key_env: String,
    /// Explicit credential, normally `${VAR}` in the config file.
    pub api_key: Option<String>,
    pub max_concurrent: usize,
    /// Zero disables the limit.
    pub requests_per_minute: usize,
    pub timeout_s: u64,
    pub max_attempts: u32,
    pub backoff_base_s: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "http://localhost:8000/v1".into(),
            model_id: "default".into(),
            api_key_env: "SYMAUDIO_API_KEY".into(),
            api_key: None,
            max_concurrent: 4,
            requests_per_minute: 0,
            timeout_s: 120,
            max_attempts: 5,
            backoff_base_s: 1.0,
        }
    }
}

impl EndpointConfig {
    /// The explicit key, else the named environment variable.
    pub fn credential(&self) -> Option<String> {
        self.api_key
            .clone()
            .filter(|k| !k.is_empty())
            .or_else(|| std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty()))
    }
}

type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

pub struct HttpChatClient {
    url: String,
    credential: Option<String>,
    transport: Box<dyn Transport>,
    retry: RetryPolicy,
    in_flight: Semaphore,
    rate: Option<RateLimiter>,
    sleep: Sleeper,
}

impl HttpChatClient {
    pub fn new(endpoint: &EndpointConfig) -> Self {
        let transport = UreqTransport::new(Duration::from_secs(endpoint.timeout_s.max(1)));
        HttpChatClient::with_transport(endpoint, Box::new(transport))
    }

    pub fn with_transport(endpoint: &EndpointConfig, transport: Box<dyn Transport>) -> Self {
        let credential = endpoint.credential();
        if credential.is_none() {
            log::warn!("no credential found in ${}; sending unauthenticated requests", endpoint.api_key_env);
        }
        HttpChatClient {
            url: format!("{}/chat/completions", endpoint.base_url.trim_end_matches('/')),
            credential,
            transport,
            retry: RetryPolicy {
                max_attempts: endpoint.max_attempts.max(1),
                base_delay: Duration::from_secs_f64(endpoint.backoff_base_s.max(0.0)),
                factor: 2,
            },
            in_flight: Semaphore::new(endpoint.max_concurrent),
            rate: (endpoint.requests_per_minute > 0).then(|| RateLimiter::per_minute(endpoint.requests_per_minute)),
            sleep: Box::new(std::thread::sleep),
        }
    }

    /// Replaces the backoff sleep, e.g. to record delays in tests.
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Box::new(sleep);
        self
    }

    pub fn with_rate_limiter(mut self, limiter: RateLimiter) -> Self {
        self.rate = Some(limiter);
        self
    }

    fn attempt(&self, body: &Value) -> Result<HttpReply, String> {
        if let Some(rate) = &self.rate {
            rate.acquire();
        }
        let _permit = self.in_flight.acquire();
        self.transport.post_json(&self.url, self.credential.as_deref(), body)
    }
}

enum Retryable {
    RateLimited,
    Transport(String),
}

impl LlmClient for HttpChatClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        request.check()?;
        let body = json!({
            "model": request.model_id,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let started = Instant::now();
        let mut attempt = 0;
        loop {
            attempt += 1;
            let failure = match self.attempt(&body) {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    let latency_ms = started.elapsed().as_millis() as u64;
                    return parse_completion(&reply.body, latency_ms);
                }
                Ok(reply) if reply.status == 401 || reply.status == 403 => {
                    return Err(LlmError::Unauthorized { status: reply.status });
                }
                Ok(reply) if reply.status == 429 => Retryable::RateLimited,
                Ok(reply) if (500..600).contains(&reply.status) => {
                    Retryable::Transport(format!("HTTP {}: {}", reply.status, snippet(&reply.body)))
                }
                Ok(reply) => {
                    return Err(LlmError::TransportFailure {
                        attempts: attempt,
                        detail: format!("HTTP {}: {}", reply.status, snippet(&reply.body)),
                    })
                }
                Err(e) => Retryable::Transport(e),
            };
            if attempt >= self.retry.max_attempts {
                return Err(match failure {
                    Retryable::RateLimited => LlmError::RateLimitedExhausted { attempts: attempt },
                    Retryable::Transport(detail) => LlmError::TransportFailure {
                        attempts: attempt,
                        detail,
                    },
                });
            }
            let delay = self.retry.delay(attempt);
            log::debug!("attempt {attempt} failed, retrying in {delay:?}");
            (self.sleep)(delay);
        }
    }
}

fn snippet(body: &str) -> String {
    body.chars().take(200).collect()
}

/// Reads the first choice of a chat-completion response body.
pub fn parse_completion(body: &str, latency_ms: u64) -> Result<LlmResponse, LlmError> {
    let value: Value = serde_json::from_str(body).map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| LlmError::MalformedResponse("no choices".into()))?;
    let text = choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::MalformedResponse("choice has no message content".into()))?
        .to_string();
    let finish_reason = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("stop") | None => FinishReason::Stop,
        Some("length") => FinishReason::Length,
        Some(_) => FinishReason::Error,
    };
    if finish_reason == FinishReason::Stop && text.trim().is_empty() {
        return Err(LlmError::MalformedResponse("empty completion".into()));
    }
    let usage = |key: &str| value.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
    Ok(LlmResponse {
        text,
        finish_reason,
        latency_ms,
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockRule {
    /// Substring of the prompt that triggers this rule.
    pub contains: String,
    pub reply: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockSection {
    pub rules: Vec<MockRule>,
    pub default: Option<String>,
}

/// Replies keyed by prompt kind. In each section the first rule whose
/// `contains` occurs in the prompt wins, else `default`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockScript {
    pub answer: MockSection,
    pub caption: MockSection,
    pub selection: MockSection,
}

const MOCK_ANSWER: &str = "I cannot tell.";
const MOCK_CAPTION: &str = "An audio clip.";
const MOCK_SELECTION: &str = "none";

impl MockScript {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Answers every sample with its gold letter. Rules key on the full
    /// question block, so samples need distinct question blocks.
    pub fn gold_oracle(samples: &[QaSample]) -> Self {
        let rules = samples
            .iter()
            .map(|s| MockRule {
                contains: render_question_block(&s.question),
                reply: option_letter(s.gold_index).to_string(),
            })
            .collect();
        MockScript {
            answer: MockSection { rules, default: None },
            ..MockScript::default()
        }
    }

    /// The same reply to every call.
    pub fn constant(reply: &str) -> Self {
        let section = MockSection {
            rules: Vec::new(),
            default: Some(reply.into()),
        };
        MockScript {
            answer: section.clone(),
            caption: section.clone(),
            selection: section,
        }
    }

    pub fn reply(&self, prompt: &str) -> String {
        let (section, fallback) = match classify_prompt(prompt) {
            Some(PromptStyle::CaptionStage1) => (&self.caption, MOCK_CAPTION),
            Some(PromptStyle::AgentSelection) => (&self.selection, MOCK_SELECTION),
            _ => (&self.answer, MOCK_ANSWER),
        };
        section
            .rules
            .iter()
            .find(|r| prompt.contains(&r.contains))
            .map(|r| r.reply.clone())
            .or_else(|| section.default.clone())
            .unwrap_or_else(|| fallback.into())
    }
}

/// Offline client answering from a [`MockScript`] and counting calls.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    script: MockScript,
    calls: AtomicUsize,
    by_kind: Mutex<BTreeMap<&'static str, usize>>,
}

fn kind_name(prompt: &str) -> &'static str {
    match classify_prompt(prompt) {
        Some(PromptStyle::Flat) => "flat",
        Some(PromptStyle::CaptionStage1) => "caption",
        Some(PromptStyle::CaptionStage2) => "caption_reasoning",
        Some(PromptStyle::AgentSelection) => "selection",
        None => "other",
    }
}

impl ScriptedClient {
    pub fn new(script: MockScript) -> Self {
        ScriptedClient {
            script,
            ..ScriptedClient::default()
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Calls per prompt kind: `flat`, `caption`, `caption_reasoning`,
    /// `selection` or `other`.
    pub fn calls_by_kind(&self) -> BTreeMap<&'static str, usize> {
        self.by_kind.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        request.check()?;
        self.calls.fetch_add(1, Ordering::SeqCst);
        let prompt = request.prompt_text();
        *self
            .by_kind
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(kind_name(prompt))
            .or_default() += 1;
        Ok(LlmResponse::stop(self.script.reply(prompt)))
    }
}
