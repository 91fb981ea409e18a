//! Two-stage retrieval for whole-video questions: the best few nodes of every
//! event, then a backend pick over the pooled descriptions.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::FrameSet;
use crate::backend::{generate_parsed, Backend, PromptBundle, Role};
use crate::error::{RavuError, Result};
use crate::graph::SpatioTemporalGraph;
use crate::index::{candidate_order, Candidate, EmbeddingIndex};
use crate::prompts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchical {
    pub frames: FrameSet,
    pub selected: Vec<Candidate>,
    /// Pool size after the per-event stage.
    pub pool: usize,
    /// The backend selection was unusable; the pool's best `top` were taken.
    pub fallback: bool,
}

fn parse_selection(raw: &str, len: usize, top: usize) -> std::result::Result<Vec<usize>, String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for part in raw.split([',', '\n', ' ']).map(str::trim).filter(|p| !p.is_empty()) {
        let i: usize = part.parse().map_err(|_| format!("bad index {part:?}"))?;
        if i >= len {
            return Err(format!("index {i} out of range 0..{len}"));
        }
        if seen.insert(i) {
            out.push(i);
        }
    }
    if out.is_empty() {
        return Err("no indices selected".into());
    }
    if out.len() > top {
        return Err(format!("selected {} of at most {top}", out.len()));
    }
    Ok(out)
}

/// Per event, the `m` nodes closest to the question; the pool is ordered by
/// rank within event, then score, and the backend chooses `top` of it.
#[allow(clippy::too_many_arguments)]
pub fn hierarchical_retrieve(
    question: &str,
    graph: &SpatioTemporalGraph,
    index: &EmbeddingIndex,
    backend: &dyn Backend,
    m: usize,
    top: usize,
    max_retries: usize,
) -> Result<Hierarchical> {
    if m == 0 || top == 0 {
        return Err(RavuError::InvalidArgument("m and top must be at least 1".into()));
    }
    if graph.all_events().next().is_none() {
        return Err(RavuError::InvalidArgument("graph has no events".into()));
    }
    let query = backend.embed(question)?;
    let mut ranked: Vec<(usize, Candidate)> = Vec::new();
    for e in graph.all_events() {
        let best = index.top_k_where(&query, m, |r| r.entity_id == e.entity_id && e.contains(r.frame_index))?;
        ranked.extend(best.into_iter().enumerate());
    }
    ranked.sort_by(|a, b| a.0.cmp(&b.0).then(candidate_order(&a.1, &b.1)));
    let pool: Vec<Candidate> = ranked.into_iter().map(|(_, c)| c).collect();
    let descriptions: Vec<String> = pool.iter().map(|c| c.description.clone()).collect();
    let bundle = PromptBundle::new(Role::EventSelect, prompts::event_select_payload(question, top, &descriptions));
    let (picked, fallback) = match generate_parsed(backend, &bundle, max_retries, |raw| {
        parse_selection(raw, pool.len(), top)
    }) {
        Ok(ix) => (ix, false),
        Err(RavuError::MalformedResponse { detail, .. }) => {
            tracing::warn!(%detail, "event selection fell back to pool scores");
            let mut by_score: Vec<usize> = (0..pool.len()).collect();
            by_score.sort_by(|&a, &b| candidate_order(&pool[a], &pool[b]));
            by_score.truncate(top);
            (by_score, true)
        }
        Err(e) => return Err(e),
    };
    let selected: Vec<Candidate> = picked.into_iter().map(|i| pool[i].clone()).collect();
    Ok(Hierarchical {
        frames: selected.iter().map(|c| c.frame_index).collect(),
        selected,
        pool: pool.len(),
        fallback,
    })
}
