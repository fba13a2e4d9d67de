//! Endpoint-templated HTTP transport.
//!
//! Search APIs differ in URL layout and response shape, so the adapter is
//! configured rather than coded per engine: a URL template with a `{QUERY}`
//! placeholder, a dotted path locating result URLs in the JSON response
//! (`*` walks every array element), and an optional auth header whose value
//! is read from an environment variable.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Transport, TransportError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// e.g. `https://api.example.com/search?q={QUERY}&num=50`
    pub url_template: String,
    /// e.g. `items.*.link`
    pub result_path: String,
    #[serde(default)]
    pub auth_header: Option<String>,
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

impl HttpConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if !cfg.url_template.contains("{QUERY}") {
            return Err(format!("{}: url_template lacks {{QUERY}}", path.display()));
        }
        Ok(cfg)
    }

    /// Request URL for a query, with the query form-encoded into the template.
    pub fn request_url(&self, query: &str) -> String {
        let encoded: String = url::form_urlencoded::byte_serialize(query.as_bytes()).collect();
        self.url_template.replace("{QUERY}", &encoded)
    }
}

/// Collects the strings found at a dotted path. `*` fans out over arrays,
/// numeric segments index arrays, other segments index objects.
pub fn extract_path(value: &Value, path: &str) -> Vec<String> {
    let mut current = vec![value];
    for seg in path.split('.').filter(|s| !s.is_empty()) {
        let mut next = Vec::new();
        for v in current {
            match (seg, v) {
                ("*", Value::Array(items)) => next.extend(items.iter()),
                (_, Value::Array(items)) => {
                    if let Some(x) = seg.parse::<usize>().ok().and_then(|i| items.get(i)) {
                        next.push(x);
                    }
                }
                (_, Value::Object(map)) => {
                    if let Some(x) = map.get(seg) {
                        next.push(x);
                    }
                }
                _ => {}
            }
        }
        current = next;
    }
    current
        .into_iter()
        .flat_map(|v| match v {
            Value::String(s) => vec![s.clone()],
            Value::Array(items) => items
                .iter()
                .filter_map(|x| x.as_str().map(str::to_string))
                .collect(),
            _ => Vec::new(),
        })
        .collect()
}

pub struct HttpTransport {
    config: HttpConfig,
    agent: ureq::Agent,
    auth_value: Option<String>,
}

impl HttpTransport {
    pub fn new(config: HttpConfig) -> Result<Self, String> {
        let auth_value = match (&config.auth_header, &config.auth_env) {
            (Some(_), Some(var)) => Some(
                std::env::var(var).map_err(|_| format!("auth env var {var} is not set"))?,
            ),
            _ => None,
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.timeout_secs.unwrap_or(30))))
            .build()
            .new_agent();
        Ok(Self {
            config,
            agent,
            auth_value,
        })
    }
}

impl Transport for HttpTransport {
    fn fetch(&mut self, query: &str) -> Result<Vec<String>, TransportError> {
        let url = self.config.request_url(query);
        let mut req = self.agent.get(&url);
        if let (Some(name), Some(value)) = (&self.config.auth_header, &self.auth_value) {
            req = req.header(name.as_str(), value.as_str());
        }
        let mut resp = req.call().map_err(|e| match e {
            ureq::Error::Io(_)
            | ureq::Error::Timeout(_)
            | ureq::Error::HostNotFound
            | ureq::Error::ConnectionFailed => TransportError::Transient(e.to_string()),
            other => TransportError::Fatal(other.to_string()),
        })?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(TransportError::Transient(format!("http status {status}")));
        }
        if status >= 400 {
            return Err(TransportError::Fatal(format!("http status {status}")));
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let json: Value =
            serde_json::from_str(&body).map_err(|e| TransportError::Malformed(e.to_string()))?;
        Ok(extract_path(&json, &self.config.result_path))
    }
}
