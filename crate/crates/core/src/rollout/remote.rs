//! Policy backed by an OpenAI-compatible chat completions endpoint.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::policy::{Policy, PolicyError};
use super::transcript::{Role, Turn};

pub const API_KEY_VAR: &str = "CATFORGE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full URL of the chat completions route.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    pub attempts: u32,
    /// Minimum spacing between requests to one endpoint, across threads.
    pub min_interval_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            temperature: 1.0,
            max_tokens: 2048,
            timeout_secs: 120,
            attempts: 3,
            min_interval_ms: 0,
        }
    }
}

type Gate = Arc<Mutex<Instant>>;

static GATES: LazyLock<Mutex<HashMap<String, Gate>>> = LazyLock::new(|| Mutex::new(HashMap::new()));

fn gate_for(endpoint: &str) -> Gate {
    let mut gates = GATES.lock().unwrap_or_else(|e| e.into_inner());
    gates.entry(endpoint.to_string()).or_insert_with(|| Arc::new(Mutex::new(Instant::now()))).clone()
}

pub struct RemoteChat {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: Gate,
    name: String,
}

impl RemoteChat {
    pub fn new(config: RemoteConfig) -> Result<RemoteChat, PolicyError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| PolicyError::Transport(e.to_string()))?;
        let api_key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        Ok(RemoteChat {
            gate: gate_for(&config.endpoint),
            name: format!("remote:{}", config.model),
            config,
            client,
            api_key,
        })
    }

    fn wait_turn(&self) {
        let interval = Duration::from_millis(self.config.min_interval_ms);
        if interval.is_zero() {
            return;
        }
        let mut next = self.gate.lock().unwrap_or_else(|e| e.into_inner());
        let now = Instant::now();
        if *next > now {
            std::thread::sleep(*next - now);
        }
        *next = Instant::now() + interval;
    }

    fn request_body(&self, transcript: &[Turn]) -> serde_json::Value {
        let messages: Vec<serde_json::Value> = transcript
            .iter()
            .map(|t| {
                let role = match t.role {
                    Role::System => "system",
                    Role::Assistant => "assistant",
                    Role::User | Role::Tool => "user",
                };
                json!({"role": role, "content": t.content})
            })
            .collect();
        json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        })
    }

    /// One request. `Err((retryable, message))` on failure.
    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, String)> {
        self.wait_turn();
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((retry, format!("HTTP {status}")));
        }
        let value: serde_json::Value = resp.json().map_err(|e| (false, format!("bad response body: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| (false, "response has no choices[0].message.content".to_string()))
    }
}

impl Policy for RemoteChat {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn next_action(&mut self, transcript: &[Turn]) -> Result<String, PolicyError> {
        let body = self.request_body(transcript);
        let attempts = self.config.attempts.max(1);
        let mut last = String::new();
        for i in 0..attempts {
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err((true, msg)) => {
                    log::warn!("{} attempt {}/{attempts} failed: {msg}", self.config.endpoint, i + 1);
                    last = msg;
                    if i + 1 < attempts {
                        std::thread::sleep(Duration::from_millis(200 << i));
                    }
                }
                Err((false, msg)) => return Err(PolicyError::Other(msg)),
            }
        }
        Err(PolicyError::Transport(last))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    /// Serves the given `(status, body)` replies in order, one per connection,
    /// and returns the request bodies it saw.
    fn mock(replies: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen.push(String::from_utf8(buf).unwrap());
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
            seen
        });
        (url, handle)
    }

    fn config(url: String) -> RemoteConfig {
        RemoteConfig { endpoint: url, model: "m".into(), timeout_secs: 5, ..RemoteConfig::default() }
    }

    #[test]
    fn retries_server_errors_then_reads_content() {
        let ok = json!({"choices": [{"message": {"content": "ANSWER:\n42\nEND ANSWER"}}]}).to_string();
        let (url, server) = mock(vec![(503, "{}".into()), (200, ok)]);
        let mut chat = RemoteChat::new(config(url)).unwrap();
        let turns = vec![Turn::new(Role::System, "sys"), Turn::new(Role::Tool, "obs")];
        assert_eq!(chat.next_action(&turns).unwrap(), "ANSWER:\n42\nEND ANSWER");
        let seen = server.join().unwrap();
        assert_eq!(seen.len(), 2);
        let body: serde_json::Value = serde_json::from_str(&seen[1]).unwrap();
        assert_eq!(body["messages"][1]["role"], "user");
        assert_eq!(body["model"], "m");
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, server) = mock(vec![(400, "{}".into())]);
        let mut chat = RemoteChat::new(config(url)).unwrap();
        assert!(matches!(chat.next_action(&[]), Err(PolicyError::Other(_))));
        assert_eq!(server.join().unwrap().len(), 1);
    }
}
