//! Client for endpoints that speak the common chat-completion JSON shape.
//!
//! | operation | request | response field used |
//! |-----------|---------|---------------------|
//! | chat | `POST {endpoint}/chat/completions` `{"model", "messages": [{"role": "system"}, {"role": "user"}]}` | `choices[0].message.content` |
//! | embed | `POST {endpoint}/embeddings` `{"model", "input": [..]}` | `data[].embedding`, ordered by `data[].index` |
//!
//! The credential is sent as `Authorization: Bearer <key>`, the key being read
//! from the configured environment variable on every request.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use super::{check_batch, ChatProvider, EmbeddingProvider, ProviderConfig, ProviderError};
use crate::drafting::PromptPackage;
use crate::retrieval::EmbeddingVector;

/// Counting semaphore capping in-flight requests.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Permits {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

pub struct OpenAiCompatible {
    config: ProviderConfig,
    agent: ureq::Agent,
    permits: Permits,
}

impl std::fmt::Debug for OpenAiCompatible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OpenAiCompatible")
            .field("endpoint", &self.config.endpoint)
            .field("chat_model", &self.config.chat_model)
            .finish_non_exhaustive()
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    #[serde(default)]
    index: usize,
    embedding: Vec<f32>,
}

pub(crate) fn chat_request_body(model: &str, package: &PromptPackage) -> Value {
    json!({
        "model": model,
        "messages": [
            {"role": "system", "content": package.system_preamble},
            {"role": "user", "content": package.user_message()},
        ],
    })
}

pub(crate) fn parse_chat_response(body: &str) -> Result<String, ProviderError> {
    let resp: ChatResponse = serde_json::from_str(body).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    let text = resp
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| ProviderError::Malformed("response has no message content".into()))?;
    if text.trim().is_empty() {
        return Err(ProviderError::Malformed("empty completion".into()));
    }
    Ok(text)
}

pub(crate) fn parse_embedding_response(body: &str, expected: usize) -> Result<Vec<EmbeddingVector>, ProviderError> {
    let mut resp: EmbeddingResponse =
        serde_json::from_str(body).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    if resp.data.len() != expected {
        return Err(ProviderError::Malformed(format!(
            "expected {expected} embeddings, got {}",
            resp.data.len()
        )));
    }
    resp.data.sort_by_key(|d| d.index);
    resp.data
        .into_iter()
        .map(|d| EmbeddingVector::normalized(d.embedding).map_err(|e| ProviderError::Malformed(e.to_string())))
        .collect()
}

fn map_transport(err: ureq::Error) -> ProviderError {
    match err {
        ureq::Error::Timeout(_) => ProviderError::Timeout,
        ureq::Error::StatusCode(s) => status_error(s, String::new()),
        other => ProviderError::Transport(other.to_string()),
    }
}

fn status_error(status: u16, message: String) -> ProviderError {
    match status {
        401 | 403 => ProviderError::Auth(format!("HTTP {status}")),
        _ => ProviderError::Status { status, message },
    }
}

impl OpenAiCompatible {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        if config.endpoint.trim().is_empty() {
            return Err(ProviderError::Config("endpoint is empty".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.max(1))))
            .http_status_as_error(false)
            .build()
            .into();
        let permits = Permits::new(config.max_concurrency);
        Ok(OpenAiCompatible { config, agent, permits })
    }

    fn credential(&self) -> Result<String, ProviderError> {
        std::env::var(&self.config.credential_env)
            .map_err(|_| ProviderError::Auth(format!("credential variable {} is not set", self.config.credential_env)))
    }

    fn post(&self, path: &str, body: &Value) -> Result<String, ProviderError> {
        let key = self.credential()?;
        let url = format!("{}/{}", self.config.endpoint.trim_end_matches('/'), path);
        let _permit = self.permits.acquire();
        let mut resp = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(map_transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(map_transport)?;
        if !(200..300).contains(&status) {
            let snippet: String = text.chars().take(200).collect();
            return Err(status_error(status, snippet));
        }
        Ok(text)
    }
}

impl ChatProvider for OpenAiCompatible {
    fn model(&self) -> &str {
        &self.config.chat_model
    }

    fn chat_complete(&self, package: &PromptPackage) -> Result<String, ProviderError> {
        let body = chat_request_body(&self.config.chat_model, package);
        parse_chat_response(&self.post("chat/completions", &body)?)
    }
}

impl EmbeddingProvider for OpenAiCompatible {
    fn model(&self) -> &str {
        &self.config.embedding_model
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, ProviderError> {
        check_batch(texts)?;
        let body = json!({"model": self.config.embedding_model, "input": texts});
        parse_embedding_response(&self.post("embeddings", &body)?, texts.len())
    }
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::thread;

    use super::*;
    use crate::drafting::{assemble_prompt, DraftingConfig};

    /// Serves one canned HTTP response on loopback and returns the raw request.
    fn serve_once(status: u16, body: &'static str) -> (String, thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = format!("http://{}", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            let resp = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
            head + &String::from_utf8(buf).unwrap()
        });
        (addr, handle)
    }

    fn client(endpoint: String, env: &str) -> OpenAiCompatible {
        OpenAiCompatible::new(ProviderConfig {
            endpoint,
            credential_env: env.into(),
            timeout_secs: 5,
            ..ProviderConfig::default()
        })
        .unwrap()
    }

    fn package() -> PromptPackage {
        assemble_prompt(&DraftingConfig::default(), "Why does git push fail?", "Be brief.", &[]).unwrap()
    }

    #[test]
    fn chat_round_trip_over_loopback() {
        std::env::set_var("DRAFTDESK_HTTP_TEST_KEY", "k-123");
        let (addr, server) = serve_once(
            200,
            r#"{"choices":[{"message":{"role":"assistant","content":"Set a remote."}}]}"#,
        );
        let c = client(addr, "DRAFTDESK_HTTP_TEST_KEY");
        assert_eq!(c.chat_complete(&package()).unwrap(), "Set a remote.");
        let request = server.join().unwrap();
        assert!(request.starts_with("POST /chat/completions"));
        assert!(request.to_ascii_lowercase().contains("authorization: bearer k-123"));
        let body: Value = serde_json::from_str(request.split("\r\n\r\n").nth(1).unwrap()).unwrap();
        assert_eq!(body["messages"][0]["role"], "system");
        assert!(body["messages"][1]["content"]
            .as_str()
            .unwrap()
            .contains("Why does git push fail?"));
    }

    #[test]
    fn unauthorised_maps_to_auth() {
        std::env::set_var("DRAFTDESK_HTTP_TEST_KEY2", "bad");
        let (addr, server) = serve_once(401, r#"{"error":"nope"}"#);
        let c = client(addr, "DRAFTDESK_HTTP_TEST_KEY2");
        assert!(matches!(c.chat_complete(&package()), Err(ProviderError::Auth(_))));
        server.join().unwrap();
    }

    #[test]
    fn missing_credential_is_auth_error() {
        let c = client("http://127.0.0.1:9".into(), "DRAFTDESK_DEFINITELY_UNSET");
        assert!(matches!(c.chat_complete(&package()), Err(ProviderError::Auth(_))));
    }

    #[test]
    fn embedding_response_reordered_by_index() {
        let body = r#"{"data":[{"index":1,"embedding":[0,2]},{"index":0,"embedding":[3,4]}]}"#;
        let v = parse_embedding_response(body, 2).unwrap();
        assert_eq!(v[0].values(), &[0.6, 0.8]);
        assert_eq!(v[1].values(), &[0.0, 1.0]);
        assert!(parse_embedding_response(body, 3).is_err());
        assert!(parse_embedding_response(r#"{"data":[{"embedding":[0,0]}]}"#, 1).is_err());
    }

    #[test]
    fn chat_response_parsing() {
        assert!(parse_chat_response(r#"{"choices":[]}"#).is_err());
        assert!(parse_chat_response(r#"{"choices":[{"message":{"content":"  "}}]}"#).is_err());
        assert!(parse_chat_response("not json").is_err());
    }

    #[test]
    fn request_body_shape() {
        let body = chat_request_body("gpt-4", &package());
        assert_eq!(body["model"], "gpt-4");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1]["role"], "user");
    }
}
