//! Model backends: text generation, multimodal answering and text embedding
//! behind one trait, with a deterministic mock and an HTTP provider.

pub(crate) mod mock;
mod remote;

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{RavuError, Result};
use crate::graph::FrameIndex;
use crate::text;

pub use mock::MockBackend;
pub use remote::{RemoteBackend, RemoteConfig};

pub const DEFAULT_MAX_RETRIES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    FrameGraph,
    NodeDescription,
    EventSegmentation,
    Rerank,
    EventAnalysis,
    Breakdown,
    Answer,
    EventSelect,
}

impl Role {
    pub const ALL: [Role; 8] = [
        Role::FrameGraph,
        Role::NodeDescription,
        Role::EventSegmentation,
        Role::Rerank,
        Role::EventAnalysis,
        Role::Breakdown,
        Role::Answer,
        Role::EventSelect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::FrameGraph => "frame_graph",
            Role::NodeDescription => "node_description",
            Role::EventSegmentation => "event_segmentation",
            Role::Rerank => "rerank",
            Role::EventAnalysis => "event_analysis",
            Role::Breakdown => "breakdown",
            Role::Answer => "answer",
            Role::EventSelect => "event_select",
        }
    }

    fn takes_frames(self) -> bool {
        matches!(self, Role::Answer | Role::EventSelect)
    }

    /// Shipped system prompt for the role.
    pub fn system_prompt(self) -> &'static str {
        match self {
            Role::FrameGraph => include_str!("../../assets/prompts/frame_graph.txt"),
            Role::NodeDescription => include_str!("../../assets/prompts/node_description.txt"),
            Role::EventSegmentation => include_str!("../../assets/prompts/event_segmentation.txt"),
            Role::Rerank => include_str!("../../assets/prompts/rerank.txt"),
            Role::EventAnalysis => include_str!("../../assets/prompts/event_analysis.txt"),
            Role::Breakdown => include_str!("../../assets/prompts/breakdown.txt"),
            Role::Answer => include_str!("../../assets/prompts/answer.txt"),
            Role::EventSelect => include_str!("../../assets/prompts/event_select.txt"),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub frame_index: FrameIndex,
    pub source_ref: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub role: Role,
    pub system_prompt: String,
    pub user_payload: String,
    pub frame_refs: Option<Vec<FrameRef>>,
}

impl PromptBundle {
    /// Bundle with the role's shipped system prompt.
    pub fn new(role: Role, user_payload: impl Into<String>) -> Self {
        PromptBundle {
            role,
            system_prompt: role.system_prompt().to_string(),
            user_payload: user_payload.into(),
            frame_refs: None,
        }
    }

    pub fn with_frames(mut self, frames: Vec<FrameRef>) -> Result<Self> {
        if !self.role.takes_frames() {
            return Err(RavuError::InvalidArgument(format!(
                "role {} does not accept frames",
                self.role
            )));
        }
        self.frame_refs = Some(frames);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_refs.is_some() && !self.role.takes_frames() {
            return Err(RavuError::InvalidArgument(format!(
                "role {} does not accept frames",
                self.role
            )));
        }
        Ok(())
    }

    /// Every text the provider will see, for token accounting and hooks.
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        [self.system_prompt.as_str(), self.user_payload.as_str()]
            .into_iter()
            .chain(self.frame_refs.iter().flatten().map(|f| f.description.as_str()))
    }

    pub fn token_count(&self) -> usize {
        self.texts().map(text::token_count).sum()
    }
}

/// Embedding values; unit L2 norm, or all zeros for text with no words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(pub Vec<f32>);

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }

    /// L2-normalized copy; zero vectors stay zero.
    pub fn normalized(values: &[f64]) -> Self {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return EmbeddingVector(vec![0.0; values.len()]);
        }
        EmbeddingVector(values.iter().map(|v| (v / norm) as f32).collect())
    }
}

/// Cosine similarity in f64; 0 when either side is the zero vector.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

pub trait Backend: Send + Sync {
    /// One text-generation call.
    fn generate(&self, bundle: &PromptBundle) -> Result<String>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector>;

    fn dimension(&self) -> usize;
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn generate(&self, bundle: &PromptBundle) -> Result<String> {
        (**self).generate(bundle)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        (**self).embed(text)
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn generate(&self, bundle: &PromptBundle) -> Result<String> {
        (**self).generate(bundle)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        (**self).embed(text)
    }

    fn dimension(&self) -> usize {
        (**self).dimension()
    }
}

/// Calls `generate` until `parse` accepts the output, at most `max_retries`
/// attempts (at least one). Only parse failures are retried; provider errors
/// propagate immediately.
pub fn generate_parsed<T>(
    backend: &dyn Backend,
    bundle: &PromptBundle,
    max_retries: usize,
    parse: impl Fn(&str) -> std::result::Result<T, String>,
) -> Result<T> {
    bundle.validate()?;
    let attempts = max_retries.max(1);
    let mut last = String::new();
    for attempt in 0..attempts {
        let raw = backend.generate(bundle)?;
        match parse(&raw) {
            Ok(v) => return Ok(v),
            Err(why) => {
                tracing::debug!(role = %bundle.role, attempt, %why, "rejected backend output");
                last = why;
            }
        }
    }
    Err(RavuError::malformed(bundle.role, last))
}

/// Parses a bare integer in `0..len`.
pub fn parse_index(raw: &str, len: usize) -> std::result::Result<usize, String> {
    let v: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("expected a bare integer, got {:?}", raw.trim()))?;
    if v >= len {
        return Err(format!("index {v} out of range 0..{len}"));
    }
    Ok(v)
}

/// Asks the answering model to pick an option given retrieved frames.
pub fn answer(
    backend: &dyn Backend,
    question: &str,
    options: &[String],
    frames: Vec<FrameRef>,
    notes: &[String],
    max_retries: usize,
) -> Result<usize> {
    if options.is_empty() {
        return Err(RavuError::InvalidArgument("question has no options".into()));
    }
    let bundle = PromptBundle::new(Role::Answer, crate::prompts::answer_payload(question, options, notes))
        .with_frames(frames)?;
    generate_parsed(backend, &bundle, max_retries, |raw| parse_index(raw, options.len()))
}

/// Wraps a backend and counts whitespace tokens of every prompt sent.
pub struct MeteredBackend<B> {
    inner: B,
    tokens: AtomicUsize,
    calls: AtomicUsize,
}

impl<B: Backend> MeteredBackend<B> {
    pub fn new(inner: B) -> Self {
        MeteredBackend {
            inner,
            tokens: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn tokens(&self) -> usize {
        self.tokens.load(Ordering::Relaxed)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl<B: Backend> Backend for MeteredBackend<B> {
    fn generate(&self, bundle: &PromptBundle) -> Result<String> {
        self.tokens.fetch_add(bundle.token_count(), Ordering::Relaxed);
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.generate(bundle)
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        self.tokens.fetch_add(text::token_count(text), Ordering::Relaxed);
        self.inner.embed(text)
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct Scripted {
        replies: Mutex<Vec<String>>,
        calls: AtomicUsize,
    }

    impl Backend for Scripted {
        fn generate(&self, _bundle: &PromptBundle) -> Result<String> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let mut r = self.replies.lock().unwrap();
            Ok(if r.len() > 1 { r.remove(0) } else { r[0].clone() })
        }

        fn embed(&self, _text: &str) -> Result<EmbeddingVector> {
            Ok(EmbeddingVector::zeros(4))
        }

        fn dimension(&self) -> usize {
            4
        }
    }

    fn scripted(replies: &[&str]) -> Scripted {
        Scripted {
            replies: Mutex::new(replies.iter().map(|s| s.to_string()).collect()),
            calls: AtomicUsize::new(0),
        }
    }

    #[test]
    fn retries_bounded_by_max_retries() {
        let b = scripted(&["nope"]);
        let bundle = PromptBundle::new(Role::Rerank, "x");
        let err = generate_parsed(&b, &bundle, 2, |r| parse_index(r, 3)).unwrap_err();
        assert!(matches!(err, RavuError::MalformedResponse { .. }));
        assert_eq!(b.calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn retry_recovers_on_second_attempt() {
        let b = scripted(&["garbage", "1"]);
        let bundle = PromptBundle::new(Role::Rerank, "x");
        assert_eq!(generate_parsed(&b, &bundle, 2, |r| parse_index(r, 3)).unwrap(), 1);
    }

    #[test]
    fn frames_only_for_answer_roles() {
        assert!(PromptBundle::new(Role::Rerank, "").with_frames(vec![]).is_err());
        assert!(PromptBundle::new(Role::EventSelect, "").with_frames(vec![]).is_ok());
    }

    #[test]
    fn metered_counts_tokens() {
        let m = MeteredBackend::new(scripted(&["0"]));
        let bundle = PromptBundle {
            role: Role::Rerank,
            system_prompt: "a b".into(),
            user_payload: "c d e".into(),
            frame_refs: None,
        };
        m.generate(&bundle).unwrap();
        assert_eq!(m.tokens(), 5);
        assert_eq!(m.calls(), 1);
    }

    #[test]
    fn cosine_of_zero_is_zero() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
        assert!((cosine(&[2.0, 0.0], &[1.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}
