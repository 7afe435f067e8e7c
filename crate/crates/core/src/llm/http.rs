use std::time::Duration;

use serde_json::{json, Value};

use super::{CompletionRequest, CompletionResult, Embedder, HttpSettings, LlmError, Provider};

pub struct HttpProvider {
    settings: HttpSettings,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(settings: HttpSettings) -> Result<Self, LlmError> {
        let api_key = std::env::var(&settings.api_key_env)
            .map_err(|_| LlmError::ProviderFailure(format!("environment variable {} is not set", settings.api_key_env)))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpProvider { settings, api_key, agent })
    }

    fn post(&self, path: &str, body: Value) -> Result<Value, LlmError> {
        let url = format!("{}/{path}", self.settings.endpoint.trim_end_matches('/'));
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| LlmError::ProviderFailure(format!("POST {url}: {e}")))?;
        let status = resp.status();
        let value: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::ProviderFailure(format!("POST {url}: unreadable body: {e}")))?;
        if !status.is_success() {
            return Err(LlmError::ProviderFailure(format!("POST {url}: HTTP {status}: {value}")));
        }
        Ok(value)
    }
}

impl Embedder for HttpProvider {
    fn embed(&self, text: &str) -> Result<Vec<f32>, LlmError> {
        let v = self.post("embeddings", json!({ "model": self.settings.embedding_model, "input": text }))?;
        v["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| LlmError::ProviderFailure("embedding response without data[0].embedding".into()))?
            .iter()
            .map(|x| x.as_f64().map(|f| f as f32))
            .collect::<Option<Vec<f32>>>()
            .ok_or_else(|| LlmError::ProviderFailure("non-numeric embedding component".into()))
    }
}

impl Provider for HttpProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let body = json!({
            "model": self.settings.model,
            "temperature": req.temperature,
            "messages": [
                { "role": "system", "content": req.system_prompt },
                { "role": "user", "content": req.user_prompt },
            ],
        });
        let v = self.post("chat/completions", body)?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| LlmError::ProviderFailure("completion response without choices[0].message.content".into()))?
            .to_string();
        Ok(CompletionResult {
            text,
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        })
    }
}
