use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::cache::{cache_key, Cache, CacheEntry, EntryKind};
use super::transport::Transport;
use crate::error::{Error, Result};

pub fn build_prompt(concept: &str) -> Result<String> {
    if concept.trim().is_empty() {
        return Err(Error::EmptyInput("concept".into()));
    }
    Ok(format!("What are the features of {concept} in quantum computing?"))
}

/// `texts` are joined by blank lines in the given order.
pub fn build_summary_prompt(concept: &str, texts: &[&str]) -> String {
    format!(
        "Summarize this text about the features of {concept}. Text: {}",
        texts.join("\n\n")
    )
}

/// Request/response field mapping for one provider shape.
///
/// `request` is a JSON template; string leaves equal to `$model`, `$input`
/// or `$max_tokens` are substituted. `response` is a JSON pointer to the
/// generated text (chat shape) or the vector (embedding shape).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adapter {
    pub request: Value,
    pub response: String,
}

impl Adapter {
    pub fn chat() -> Self {
        Self {
            request: serde_json::json!({
                "model": "$model",
                "messages": [{"role": "user", "content": "$input"}],
                "max_tokens": "$max_tokens",
            }),
            response: "/choices/0/message/content".into(),
        }
    }

    pub fn embedding() -> Self {
        Self {
            request: serde_json::json!({"model": "$model", "input": "$input"}),
            response: "/data/0/embedding".into(),
        }
    }

    fn render(&self, model: &str, input: &str, max_tokens: usize) -> Value {
        fn walk(v: &Value, model: &str, input: &str, max_tokens: usize) -> Value {
            match v {
                Value::String(s) if s == "$model" => Value::from(model),
                Value::String(s) if s == "$input" => Value::from(input),
                Value::String(s) if s == "$max_tokens" => Value::from(max_tokens),
                Value::Array(a) => Value::Array(a.iter().map(|x| walk(x, model, input, max_tokens)).collect()),
                Value::Object(o) => Value::Object(
                    o.iter()
                        .map(|(k, x)| (k.clone(), walk(x, model, input, max_tokens)))
                        .collect(),
                ),
                other => other.clone(),
            }
        }
        walk(&self.request, model, input, max_tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmClientConfig {
    pub endpoint: String,
    pub model_id: String,
    pub max_tokens: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Requests per second; 0 disables throttling.
    pub rate_limit: f64,
    pub api_key_env: String,
    /// First retry delay; doubles per attempt.
    pub backoff_ms: u64,
    pub adapter: Adapter,
}

impl LlmClientConfig {
    pub fn chat(endpoint: &str, model_id: &str) -> Self {
        Self {
            endpoint: endpoint.into(),
            model_id: model_id.into(),
            max_tokens: 512,
            timeout_secs: 120,
            max_retries: 5,
            rate_limit: 2.0,
            api_key_env: "QCLP_LLM_API_KEY".into(),
            backoff_ms: 1000,
            adapter: Adapter::chat(),
        }
    }

    pub fn embedding(endpoint: &str, model_id: &str) -> Self {
        Self {
            adapter: Adapter::embedding(),
            ..Self::chat(endpoint, model_id)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureText {
    pub concept: String,
    pub model_id: String,
    pub prompt: String,
    pub text: String,
    pub fetched_at: u64,
}

/// Cached, rate-limited, retrying client for one model.
pub struct LlmClient {
    cfg: LlmClientConfig,
    cache: Cache,
    transport: Option<Arc<dyn Transport>>,
    next_slot: Mutex<Option<Instant>>,
}

impl LlmClient {
    pub fn new(cfg: LlmClientConfig, cache: Cache, transport: Arc<dyn Transport>) -> Self {
        Self {
            cfg,
            cache,
            transport: Some(transport),
            next_slot: Mutex::new(None),
        }
    }

    /// Cache-only client: every miss is [`Error::FixtureMissing`].
    pub fn fixtures_only(cfg: LlmClientConfig, cache: Cache) -> Self {
        Self {
            cfg,
            cache,
            transport: None,
            next_slot: Mutex::new(None),
        }
    }

    pub fn model_id(&self) -> &str {
        &self.cfg.model_id
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.cfg
    }

    pub fn generate_feature_text(&self, concept: &str) -> Result<FeatureText> {
        let prompt = build_prompt(concept)?;
        self.complete(concept, prompt)
    }

    /// Summarize several models' texts for `concept`. Texts are ordered by
    /// ascending model id before concatenation.
    pub fn summarize_merge(&self, concept: &str, texts: &[(String, String)]) -> Result<FeatureText> {
        if texts.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "summarize merge needs at least 2 texts, got {}",
                texts.len()
            )));
        }
        let mut sorted: Vec<&(String, String)> = texts.iter().collect();
        sorted.sort_by(|a, b| a.0.cmp(&b.0));
        let bodies: Vec<&str> = sorted.iter().map(|(_, t)| t.as_str()).collect();
        let prompt = build_summary_prompt(concept, &bodies);
        self.complete(concept, prompt)
    }

    fn complete(&self, concept: &str, prompt: String) -> Result<FeatureText> {
        let key = cache_key(&self.cfg.model_id, &prompt);
        if let Some(entry) = self.cache.get(&key)? {
            if let (EntryKind::Generation, Some(text)) = (entry.kind, entry.text) {
                return Ok(FeatureText {
                    concept: concept.into(),
                    model_id: self.cfg.model_id.clone(),
                    prompt,
                    text,
                    fetched_at: entry.fetched_at,
                });
            }
        }
        let body = self.request(&key, &prompt)?;
        let text = body
            .pointer(&self.cfg.adapter.response)
            .and_then(Value::as_str)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| Error::Transport(format!("no text at {} in response", self.cfg.adapter.response)))?
            .to_string();
        let entry = CacheEntry::generation(&self.cfg.model_id, &prompt, &text);
        self.cache.put(&entry)?;
        Ok(FeatureText {
            concept: concept.into(),
            model_id: self.cfg.model_id.clone(),
            prompt,
            text,
            fetched_at: entry.fetched_at,
        })
    }

    pub fn embed_text(&self, text: &str) -> Result<Vec<f64>> {
        if text.is_empty() {
            return Err(Error::EmptyInput("text to embed".into()));
        }
        let key = cache_key(&self.cfg.model_id, text);
        if let Some(entry) = self.cache.get(&key)? {
            if let (EntryKind::Embedding, Some(v)) = (entry.kind, entry.embedding) {
                return Ok(v);
            }
        }
        let body = self.request(&key, text)?;
        let vector: Vec<f64> = body
            .pointer(&self.cfg.adapter.response)
            .and_then(Value::as_array)
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::Transport(format!("no vector at {} in response", self.cfg.adapter.response)))?;
        self.cache
            .put(&CacheEntry::embedding(&self.cfg.model_id, text, vector.clone()))?;
        Ok(vector)
    }

    fn throttle(&self) {
        if self.cfg.rate_limit <= 0.0 {
            return;
        }
        let interval = Duration::from_secs_f64(1.0 / self.cfg.rate_limit);
        let wait = {
            let mut slot = self.next_slot.lock().unwrap_or_else(|p| p.into_inner());
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + interval);
            start.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }

    fn request(&self, key: &str, input: &str) -> Result<Value> {
        let Some(transport) = &self.transport else {
            return Err(Error::FixtureMissing { key: key.into() });
        };
        let body = self
            .cfg
            .adapter
            .render(&self.cfg.model_id, input, self.cfg.max_tokens)
            .to_string();
        let mut headers = Vec::new();
        if let Ok(k) = std::env::var(&self.cfg.api_key_env) {
            headers.push(("authorization".to_string(), format!("Bearer {k}")));
        }
        let timeout = Duration::from_secs(self.cfg.timeout_secs);
        let mut last_err = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                let delay = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            self.throttle();
            match transport.post_json(&self.cfg.endpoint, &headers, &body, timeout) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return serde_json::from_str(&resp.body)
                        .map_err(|e| Error::Transport(format!("bad JSON response: {e}")));
                }
                Ok(resp) if resp.status == 429 || resp.status >= 500 => {
                    last_err = format!("HTTP {}", resp.status);
                    log::warn!("{}: {last_err}, attempt {}", self.cfg.model_id, attempt + 1);
                }
                Ok(resp) => {
                    return Err(Error::Transport(format!("HTTP {}: {}", resp.status, resp.body)));
                }
                Err(e) => {
                    last_err = e.to_string();
                    log::warn!("{}: {last_err}, attempt {}", self.cfg.model_id, attempt + 1);
                }
            }
        }
        Err(Error::Transport(format!(
            "gave up after {} attempts: {last_err}",
            self.cfg.max_retries + 1
        )))
    }
}
