//! Runtime configuration: a TOML file plus `RAVU_*` environment overrides.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, MockBackend, RemoteBackend, RemoteConfig, DEFAULT_MAX_RETRIES};
use crate::error::{RavuError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub token: Option<String>,
    pub model: Option<String>,
    pub embed_dim: usize,
    /// Seed for the mock backend.
    pub seed: u64,
    pub deadline_secs: f64,
    pub max_in_flight: usize,
    pub max_retries: usize,
    /// Neighbouring frame descriptions attached to frame-graph prompts.
    pub context_frames: usize,
    pub min_iou: f64,
    pub fps: f64,
    /// Embedding candidates handed to the reranker.
    pub rerank_k: usize,
    pub budget: usize,
    pub global_budget: usize,
    /// Stage-one candidates per event in hierarchical retrieval.
    pub per_event_candidates: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            backend: BackendKind::Mock,
            endpoint: None,
            token: None,
            model: None,
            embed_dim: crate::backend::mock::DEFAULT_MOCK_DIM,
            seed: 0,
            deadline_secs: 60.0,
            max_in_flight: 4,
            max_retries: DEFAULT_MAX_RETRIES,
            context_frames: 2,
            min_iou: crate::ingest::DEFAULT_MIN_IOU,
            fps: 1.0,
            rerank_k: 10,
            budget: 5,
            global_budget: 10,
            per_event_candidates: 2,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            RavuError::parse(line, "config", e.message().to_string())
        })
    }

    /// Reads `path` if given (defaults otherwise) and applies environment
    /// overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Config::from_toml(&std::fs::read_to_string(p)?)?,
            None => Config::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// `RAVU_ENDPOINT` (also selects the remote backend), `RAVU_TOKEN`,
    /// `RAVU_EMBED_DIM`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(ep) = get("RAVU_ENDPOINT") {
            self.endpoint = Some(ep);
            self.backend = BackendKind::Remote;
        }
        if let Some(tok) = get("RAVU_TOKEN") {
            self.token = Some(tok);
        }
        if let Some(dim) = get("RAVU_EMBED_DIM") {
            self.embed_dim = dim
                .parse()
                .map_err(|_| RavuError::InvalidArgument(format!("RAVU_EMBED_DIM={dim:?}")))?;
        }
        Ok(())
    }

    pub fn make_backend(&self) -> Result<Arc<dyn Backend>> {
        match self.backend {
            BackendKind::Mock => Ok(Arc::new(MockBackend::new(self.embed_dim.max(1), self.seed))),
            BackendKind::Remote => {
                let endpoint = self
                    .endpoint
                    .clone()
                    .ok_or_else(|| RavuError::InvalidArgument("remote backend needs an endpoint".into()))?;
                Ok(Arc::new(RemoteBackend::new(RemoteConfig {
                    endpoint,
                    token: self.token.clone(),
                    model: self.model.clone(),
                    embed_dim: self.embed_dim,
                    deadline_secs: self.deadline_secs,
                    max_in_flight: self.max_in_flight,
                })?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_defaults() {
        let cfg = Config::from_toml("budget = 7\nrerank_k = 3\n").unwrap();
        assert_eq!(cfg.budget, 7);
        assert_eq!(cfg.rerank_k, 3);
        assert_eq!(cfg.global_budget, 10);
        assert_eq!(cfg.backend, BackendKind::Mock);
    }

    #[test]
    fn env_selects_remote() {
        let mut cfg = Config::default();
        cfg.apply_env(|k| match k {
            "RAVU_ENDPOINT" => Some("http://x".into()),
            "RAVU_EMBED_DIM" => Some("768".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!(cfg.backend, BackendKind::Remote);
        assert_eq!(cfg.embed_dim, 768);
    }

    #[test]
    fn bad_toml_reports_line() {
        match Config::from_toml("budget = 5\nrerank_k = \"x\"\n").unwrap_err() {
            RavuError::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e:?}"),
        }
    }
}
