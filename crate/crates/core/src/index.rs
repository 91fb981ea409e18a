//! Exact cosine search over node embeddings and the two-stage localize
//! (embedding top-k, then a backend rerank over the candidates' descriptions).

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::backend::{generate_parsed, parse_index, Backend, EmbeddingVector, PromptBundle, Role};
use crate::builder::EmbeddingRecord;
use crate::error::{RavuError, Result};
use crate::graph::{EntityId, FrameIndex, NodeKey};
use crate::prompts;

pub const DEFAULT_RERANK_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub entity_id: EntityId,
    pub frame_index: FrameIndex,
    pub score: f64,
    pub description: String,
}

impl Candidate {
    pub fn key(&self) -> NodeKey {
        NodeKey {
            entity_id: self.entity_id,
            frame_index: self.frame_index,
        }
    }
}

/// Descending score, then ascending (frame_index, entity_id).
pub fn candidate_order(a: &Candidate, b: &Candidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.frame_index.cmp(&b.frame_index))
        .then(a.entity_id.cmp(&b.entity_id))
}

/// Result of [`EmbeddingIndex::localize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Localized {
    pub candidate: Candidate,
    /// Zero-based position among the top-k candidates.
    pub rank: usize,
    /// Set when the rerank answer was unusable and rank 0 was taken.
    pub fallback: bool,
}

/// Immutable after construction; safe to query from many threads.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingIndex {
    records: Vec<EmbeddingRecord>,
    /// L2 norm of each record, parallel to `records`.
    norms: Vec<f64>,
    dim: usize,
}

impl EmbeddingIndex {
    pub fn new(mut records: Vec<EmbeddingRecord>) -> Result<Self> {
        records.sort_by_key(|r| (r.frame_index, r.entity_id));
        let dim = records.first().map(|r| r.vector.dim()).unwrap_or(0);
        let mut seen = BTreeSet::new();
        for r in &records {
            if r.vector.dim() != dim {
                return Err(RavuError::InvalidArgument(format!(
                    "{} has dimension {}, index has {dim}",
                    r.key(),
                    r.vector.dim()
                )));
            }
            if !seen.insert(r.key()) {
                return Err(RavuError::InvalidArgument(format!("duplicate embedding for {}", r.key())));
            }
        }
        let norms = records.iter().map(|r| sum_of_squares(&r.vector.0).sqrt()).collect();
        Ok(EmbeddingIndex { records, norms, dim })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, key: NodeKey) -> Option<&EmbeddingRecord> {
        self.records
            .binary_search_by_key(&(key.frame_index, key.entity_id), |r| (r.frame_index, r.entity_id))
            .ok()
            .map(|i| &self.records[i])
    }

    fn candidate(&self, i: usize, score: f64) -> Candidate {
        let r = &self.records[i];
        Candidate {
            entity_id: r.entity_id,
            frame_index: r.frame_index,
            score,
            description: r.description.clone(),
        }
    }

    /// Scores every record that passes `keep` and returns the best `k`.
    pub fn top_k_where(
        &self,
        query: &EmbeddingVector,
        k: usize,
        keep: impl Fn(&EmbeddingRecord) -> bool,
    ) -> Result<Vec<Candidate>> {
        if k == 0 {
            return Err(RavuError::InvalidArgument("k must be at least 1".into()));
        }
        if self.is_empty() {
            return Err(RavuError::EmptyIndex);
        }
        if query.dim() != self.dim {
            return Err(RavuError::InvalidArgument(format!(
                "query dimension {} does not match index dimension {}",
                query.dim(),
                self.dim
            )));
        }
        let q_norm = sum_of_squares(&query.0).sqrt();
        let mut scored: Vec<(usize, f64)> = self
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| keep(r))
            .map(|(i, r)| {
                let n = self.norms[i];
                let score = if q_norm == 0.0 || n == 0.0 { 0.0 } else { dot(&query.0, &r.vector.0) / (q_norm * n) };
                (i, score)
            })
            .collect();
        // Records are sorted by key, so position breaks score ties.
        let order = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        Ok(scored.into_iter().map(|(i, score)| self.candidate(i, score)).collect())
    }

    /// Exact top-k by cosine similarity.
    pub fn top_k(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Candidate>> {
        self.top_k_where(query, k, |_| true)
    }

    /// Embeds the phrase, keeps the top `k` nodes and lets the backend pick
    /// the best description among them.
    pub fn localize(&self, phrase: &str, k: usize, backend: &dyn Backend, max_retries: usize) -> Result<Localized> {
        if phrase.trim().is_empty() {
            return Err(RavuError::InvalidArgument("empty grounding phrase".into()));
        }
        let query = backend.embed(phrase)?;
        let candidates = self.top_k(&query, k)?;
        rerank(phrase, candidates, backend, max_retries)
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (&x, &y)| acc + x as f64 * y as f64)
}

fn sum_of_squares(a: &[f32]) -> f64 {
    dot(a, a)
}

/// Backend choice among `candidates` (kept in the given order). A single
/// candidate is returned without asking.
pub fn rerank(phrase: &str, mut candidates: Vec<Candidate>, backend: &dyn Backend, max_retries: usize) -> Result<Localized> {
    if candidates.is_empty() {
        return Err(RavuError::EmptyIndex);
    }
    if candidates.len() == 1 {
        return Ok(Localized {
            candidate: candidates.remove(0),
            rank: 0,
            fallback: false,
        });
    }
    let descriptions: Vec<String> = candidates.iter().map(|c| c.description.clone()).collect();
    let bundle = PromptBundle::new(Role::Rerank, prompts::rerank_payload(phrase, &descriptions));
    let n = candidates.len();
    let (rank, fallback) = match generate_parsed(backend, &bundle, max_retries, |raw| parse_index(raw, n)) {
        Ok(i) => (i, false),
        Err(RavuError::MalformedResponse { detail, .. }) => {
            tracing::warn!(%detail, "rerank fell back to rank 1");
            (0, true)
        }
        Err(e) => return Err(e),
    };
    Ok(Localized {
        candidate: candidates.swap_remove(rank),
        rank,
        fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;

    struct Says(&'static str);

    impl Backend for Says {
        fn generate(&self, _b: &PromptBundle) -> Result<String> {
            Ok(self.0.into())
        }
        fn embed(&self, text: &str) -> Result<EmbeddingVector> {
            MockBackend::default().embed(text)
        }
        fn dimension(&self) -> usize {
            crate::backend::mock::DEFAULT_MOCK_DIM
        }
    }

    fn record(entity_id: u64, frame_index: usize, v: Vec<f32>, d: &str) -> EmbeddingRecord {
        EmbeddingRecord {
            entity_id,
            frame_index,
            description: d.into(),
            vector: EmbeddingVector(v),
        }
    }

    fn described(texts: &[&str]) -> EmbeddingIndex {
        let m = MockBackend::default();
        EmbeddingIndex::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| EmbeddingRecord {
                    entity_id: i as u64,
                    frame_index: i,
                    description: t.to_string(),
                    vector: m.embed(t).unwrap(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn stored_vector_scores_one() {
        let idx = EmbeddingIndex::new(vec![
            record(0, 0, vec![1.0, 0.0], "a"),
            record(1, 0, vec![0.0, 1.0], "b"),
        ])
        .unwrap();
        let top = idx.top_k(&EmbeddingVector(vec![0.0, 1.0]), 1).unwrap();
        assert_eq!(top[0].entity_id, 1);
        assert!((top[0].score - 1.0).abs() < 1e-12);
        assert_eq!(idx.top_k(&EmbeddingVector(vec![0.0, 1.0]), 9).unwrap().len(), 2);
    }

    #[test]
    fn ties_by_frame_then_entity() {
        let idx = EmbeddingIndex::new(vec![
            record(5, 1, vec![1.0, 0.0], ""),
            record(2, 1, vec![1.0, 0.0], ""),
            record(9, 0, vec![1.0, 0.0], ""),
        ])
        .unwrap();
        let keys: Vec<_> = idx
            .top_k(&EmbeddingVector(vec![2.0, 0.0]), 3)
            .unwrap()
            .iter()
            .map(|c| (c.frame_index, c.entity_id))
            .collect();
        assert_eq!(keys, vec![(0, 9), (1, 2), (1, 5)]);
    }

    #[test]
    fn empty_and_bad_arguments() {
        let idx = EmbeddingIndex::default();
        assert!(matches!(idx.top_k(&EmbeddingVector(vec![1.0]), 1), Err(RavuError::EmptyIndex)));
        let idx = EmbeddingIndex::new(vec![record(0, 0, vec![1.0], "")]).unwrap();
        assert!(idx.top_k(&EmbeddingVector(vec![1.0]), 0).is_err());
        assert!(EmbeddingIndex::new(vec![record(0, 0, vec![1.0], ""), record(0, 0, vec![1.0], "")]).is_err());
    }

    #[test]
    fn localize_reranks_by_overlap() {
        let idx = described(&["man standing on stage", "man on stage sitting"]);
        let got = idx.localize("man on stage sitting", 10, &MockBackend::default(), 2).unwrap();
        assert_eq!(got.candidate.entity_id, 1);
        assert!(!got.fallback);
    }

    #[test]
    fn single_node_ignores_backend() {
        let idx = described(&["dog"]);
        let got = idx.localize("cat", 5, &Says("garbage"), 2).unwrap();
        assert_eq!(got.candidate.entity_id, 0);
        assert!(!got.fallback);
    }

    #[test]
    fn out_of_range_rerank_falls_back() {
        let idx = described(&["a dog", "a cat", "a bird", "a fish", "a cow", "a pig"]);
        let got = idx.localize("a cat", 5, &Says("7"), 2).unwrap();
        assert!(got.fallback);
        assert_eq!(got.rank, 0);
        let best = idx.top_k(&MockBackend::default().embed("a cat").unwrap(), 1).unwrap();
        assert_eq!(got.candidate, best[0]);
    }

    #[test]
    fn empty_phrase_rejected() {
        let idx = described(&["dog"]);
        assert!(idx.localize("  ", 5, &MockBackend::default(), 2).is_err());
    }
}
