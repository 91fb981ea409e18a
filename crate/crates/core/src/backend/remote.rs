//! HTTP provider. Request: `{role, system, user, frames?, model?}`; response:
//! `{text}` for generation, `{embedding}` for `role = "embed"`, and
//! `{blocked: true}` (or status 451) when the provider refuses.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, EmbeddingVector, FrameRef, PromptBundle};
use crate::error::{RavuError, Result};
use crate::text;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default)]
    pub token: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    pub embed_dim: usize,
    #[serde(default = "default_deadline_secs")]
    pub deadline_secs: f64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

fn default_deadline_secs() -> f64 {
    60.0
}

fn default_max_in_flight() -> usize {
    4
}

#[derive(Serialize)]
struct WireRequest<'a> {
    role: &'a str,
    system: &'a str,
    user: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    frames: Option<&'a [FrameRef]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<&'a str>,
}

#[derive(Deserialize)]
struct WireResponse {
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    embedding: Option<Vec<f64>>,
    #[serde(default)]
    blocked: bool,
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    used: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn acquire(&self) -> Permit<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
    in_flight: InFlight,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.embed_dim == 0 {
            return Err(RavuError::InvalidArgument("embed_dim must be positive".into()));
        }
        if config.deadline_secs.is_nan() || config.deadline_secs <= 0.0 {
            return Err(RavuError::InvalidArgument("deadline must be positive".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.deadline_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let limit = config.max_in_flight.max(1);
        Ok(RemoteBackend {
            config,
            agent,
            in_flight: InFlight {
                used: Mutex::new(0),
                freed: Condvar::new(),
                limit,
            },
        })
    }

    fn call(&self, request: &WireRequest<'_>) -> Result<WireResponse> {
        let _permit = self.in_flight.acquire();
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.config.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(request).map_err(|e| self.transport_error(e))?;
        let status = resp.status().as_u16();
        if status == 451 {
            return Err(RavuError::BlockedContent);
        }
        if !(200..300).contains(&status) {
            return Err(RavuError::malformed(request.role, format!("http status {status}")));
        }
        let body: WireResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => self.transport_error(e),
                other => RavuError::malformed(request.role, other.to_string()),
            })?;
        if body.blocked {
            return Err(RavuError::BlockedContent);
        }
        Ok(body)
    }

    fn transport_error(&self, e: ureq::Error) -> RavuError {
        match e {
            ureq::Error::Timeout(_)
            | ureq::Error::Io(_)
            | ureq::Error::ConnectionFailed
            | ureq::Error::HostNotFound => RavuError::Timeout(format!(
                "{} (deadline {}s): {e}",
                self.config.endpoint, self.config.deadline_secs
            )),
            other => RavuError::malformed("transport", other.to_string()),
        }
    }
}

impl Backend for RemoteBackend {
    fn generate(&self, bundle: &PromptBundle) -> Result<String> {
        bundle.validate()?;
        let body = self.call(&WireRequest {
            role: bundle.role.as_str(),
            system: &bundle.system_prompt,
            user: &bundle.user_payload,
            frames: bundle.frame_refs.as_deref(),
            model: self.config.model.as_deref(),
        })?;
        match body.text {
            Some(t) if !t.trim().is_empty() => Ok(t),
            _ => Err(RavuError::malformed(bundle.role, "empty text")),
        }
    }

    fn embed(&self, input: &str) -> Result<EmbeddingVector> {
        if text::words(input).is_empty() {
            return Ok(EmbeddingVector::zeros(self.config.embed_dim));
        }
        let body = self.call(&WireRequest {
            role: "embed",
            system: "",
            user: input,
            frames: None,
            model: self.config.model.as_deref(),
        })?;
        let values = body
            .embedding
            .ok_or_else(|| RavuError::malformed("embed", "missing embedding"))?;
        if values.len() != self.config.embed_dim {
            return Err(RavuError::malformed(
                "embed",
                format!("dimension {} != configured {}", values.len(), self.config.embed_dim),
            ));
        }
        Ok(EmbeddingVector::normalized(&values))
    }

    fn dimension(&self) -> usize {
        self.config.embed_dim
    }
}
