//! Minimal JSON-over-HTTP POST used by the remote translator and embedder.

use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Failure of one HTTP exchange, pre-classified for retrying.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum HttpFailure {
    /// Connection refused, timeout, 5xx.
    Unavailable(String),
    /// 429, with the server's `Retry-After` if it sent one.
    RateLimited(Option<Duration>),
    /// Other 4xx or an unparseable body; retrying will not help.
    Rejected(String),
}

pub(crate) fn client(timeout: Duration) -> Result<Client, String> {
    Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| e.to_string())
}

pub(crate) fn post_json<B: Serialize, R: DeserializeOwned>(
    client: &Client,
    endpoint: &str,
    bearer: Option<&str>,
    body: &B,
) -> Result<R, HttpFailure> {
    let mut req = client.post(endpoint).json(body);
    if let Some(token) = bearer {
        req = req.bearer_auth(token);
    }
    let resp = req
        .send()
        .map_err(|e| HttpFailure::Unavailable(e.to_string()))?;
    let status = resp.status();
    if status == StatusCode::TOO_MANY_REQUESTS {
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        return Err(HttpFailure::RateLimited(retry_after));
    }
    if status.is_server_error() {
        return Err(HttpFailure::Unavailable(format!("server returned {status}")));
    }
    if !status.is_success() {
        return Err(HttpFailure::Rejected(format!("server returned {status}")));
    }
    resp.json::<R>()
        .map_err(|e| HttpFailure::Rejected(format!("bad response body: {e}")))
}

/// Validates that `endpoint` is an absolute http(s) URL.
pub(crate) fn check_endpoint(endpoint: &str) -> Result<(), String> {
    let url = reqwest::Url::parse(endpoint).map_err(|e| format!("bad endpoint {endpoint:?}: {e}"))?;
    match url.scheme() {
        "http" | "https" => Ok(()),
        other => Err(format!("unsupported scheme {other:?} in {endpoint:?}")),
    }
}
