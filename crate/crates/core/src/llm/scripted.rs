use std::collections::VecDeque;
use std::sync::Mutex;

use super::{count_tokens, CompletionRequest, CompletionResult, Embedder, HashEmbedder, LlmError, Provider};

/// Replays canned responses in order and records every request.
#[derive(Debug)]
pub struct ScriptedProvider {
    responses: Mutex<VecDeque<String>>,
    requests: Mutex<Vec<CompletionRequest>>,
    embedder: HashEmbedder,
}

impl ScriptedProvider {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_dim(responses, 1536)
    }

    pub fn with_dim<I, S>(responses: I, dim: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedProvider {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            requests: Mutex::new(Vec::new()),
            embedder: HashEmbedder::new(dim),
        }
    }

    /// Every request seen so far, in call order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.requests.lock().expect("requests lock").clone()
    }

    pub fn remaining(&self) -> usize {
        self.responses.lock().expect("responses lock").len()
    }
}

impl Embedder for ScriptedProvider {
    fn embed(&self, text: &str) -> Result<Vec<f32>, LlmError> {
        self.embedder.embed(text)
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResult, LlmError> {
        let mut requests = self.requests.lock().expect("requests lock");
        requests.push(req.clone());
        let text = self
            .responses
            .lock()
            .expect("responses lock")
            .pop_front()
            .ok_or(LlmError::ScriptExhausted { calls: requests.len() })?;
        Ok(CompletionResult {
            prompt_tokens: count_tokens(&req.system_prompt) + count_tokens(&req.user_prompt),
            completion_tokens: count_tokens(&text),
            text,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(u: &str) -> CompletionRequest {
        CompletionRequest::new("t", "sys".into(), u.into(), 0.0)
    }

    #[test]
    fn replays_in_order_then_exhausts() {
        let p = ScriptedProvider::with_dim(["one", "two words"], 8);
        assert_eq!(p.complete(&req("a")).unwrap().text, "one");
        let r = p.complete(&req("b c")).unwrap();
        assert_eq!((r.text.as_str(), r.prompt_tokens, r.completion_tokens), ("two words", 3, 2));
        assert_eq!(p.complete(&req("d")).unwrap_err(), LlmError::ScriptExhausted { calls: 3 });
        assert_eq!(p.requests().len(), 3);
        assert_eq!(p.requests()[1].user_prompt, "b c");
    }

    #[test]
    fn distinct_texts_embed_differently() {
        let p = ScriptedProvider::with_dim(Vec::<String>::new(), 1536);
        let texts = ["cavity", "pitzDaily", "damBreak", "elbow", "motorBike", "icoFoam", "simpleFoam"];
        let vs: Vec<Vec<f32>> = texts.iter().map(|t| p.embed(t).unwrap()).collect();
        for i in 0..vs.len() {
            assert_eq!(vs[i], p.embed(texts[i]).unwrap());
            for j in i + 1..vs.len() {
                assert_ne!(vs[i], vs[j], "{} vs {}", texts[i], texts[j]);
            }
        }
    }
}
