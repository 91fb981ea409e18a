//! Turns associated observations into a full graph: relation edges per frame,
//! a description and an embedding per node, and entity-wise events.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{generate_parsed, Backend, EmbeddingVector, PromptBundle, Role};
use crate::error::{RavuError, Result};
use crate::graph::{
    EntityEvent, EntityId, EntityNode, FrameIndex, FrameRecord, NodeKey, RelationEdge,
    SpatioTemporalGraph,
};
use crate::ingest::{mentions, Association};
use crate::prompts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub entity_id: EntityId,
    pub frame_index: FrameIndex,
    pub description: String,
    pub vector: EmbeddingVector,
}

impl EmbeddingRecord {
    pub fn key(&self) -> NodeKey {
        NodeKey {
            entity_id: self.entity_id,
            frame_index: self.frame_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub max_retries: usize,
    pub context_frames: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_retries: crate::backend::DEFAULT_MAX_RETRIES,
            context_frames: 2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameEdges {
    pub edges: Vec<RelationEdge>,
    /// Backend lines dropped as unparseable or referencing absent entities.
    pub dropped: usize,
}

fn co_mentioned(description: &str) -> bool {
    description.split(['.', '!', '?', ';']).any(|s| {
        let ids: BTreeSet<_> = mentions(s).into_iter().collect();
        ids.len() >= 2
    })
}

/// Asks the backend for the frame's relation triples. Node attributes are
/// never touched; only edges between entities present in the frame survive.
pub fn build_frame_graph(
    frame: &FrameRecord,
    nodes_in_frame: &[&EntityNode],
    context: &[&FrameRecord],
    backend: &dyn Backend,
    opts: BuildOptions,
) -> Result<FrameEdges> {
    let present: BTreeSet<EntityId> = nodes_in_frame.iter().map(|n| n.entity_id).collect();
    let needs_edges = co_mentioned(&frame.description);
    let bundle = PromptBundle::new(
        Role::FrameGraph,
        prompts::frame_graph_payload(frame, nodes_in_frame, context),
    );
    generate_parsed(backend, &bundle, opts.max_retries, |raw| {
        let mut out = FrameEdges::default();
        let mut seen = BTreeSet::new();
        for line in raw.lines().filter(|l| !l.trim().is_empty()) {
            match prompts::parse_triple(line) {
                Some((s, rel, o)) if s != o && present.contains(&s) && present.contains(&o) => {
                    if seen.insert((s, rel.clone(), o)) {
                        out.edges.push(RelationEdge {
                            frame_index: frame.frame_index,
                            subject_id: s,
                            relation: rel,
                            object_id: o,
                        });
                    }
                }
                _ => out.dropped += 1,
            }
        }
        if out.edges.is_empty() && out.dropped > 0 && needs_edges {
            return Err(format!("no usable edge lines for frame {}", frame.frame_index));
        }
        if out.edges.is_empty() && needs_edges && present.len() >= 2 {
            return Err(format!("no edges for frame {} with co-mentioned entities", frame.frame_index));
        }
        if out.dropped > 0 {
            tracing::warn!(frame = frame.frame_index, dropped = out.dropped, "dropped edge lines");
        }
        Ok(out)
    })
    .map_err(|e| e.context(format!("frame {}", frame.frame_index)))
}

/// One sentence for the node from its attributes and the edges touching it.
pub fn describe_node(
    node: &EntityNode,
    edges: &[&RelationEdge],
    backend: &dyn Backend,
    opts: BuildOptions,
) -> Result<String> {
    if let Some(e) = edges.iter().find(|e| !e.touches(node.entity_id)) {
        return Err(RavuError::InvalidArgument(format!(
            "edge {}-{} does not touch {}",
            e.subject_id,
            e.object_id,
            node.key()
        )));
    }
    let bundle = PromptBundle::new(Role::NodeDescription, prompts::node_description_payload(node, edges));
    generate_parsed(backend, &bundle, opts.max_retries, |raw| {
        let t = raw.trim();
        if t.is_empty() {
            Err("empty description".to_string())
        } else {
            Ok(crate::text::one_line(t))
        }
    })
    .map_err(|e| e.context(node.key().to_string()))
}

/// One embedding per node, computed from the node's description.
pub fn embed_graph(graph: &SpatioTemporalGraph, backend: &dyn Backend) -> Result<Vec<EmbeddingRecord>> {
    graph
        .nodes()
        .par_iter()
        .map(|n| {
            let description = n
                .description
                .clone()
                .ok_or_else(|| RavuError::InvalidArgument(format!("{} has no description", n.key())))?;
            let vector = backend
                .embed(&description)
                .map_err(|e| e.context(n.key().to_string()))?;
            Ok(EmbeddingRecord {
                entity_id: n.entity_id,
                frame_index: n.frame_index,
                description,
                vector,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentOutcome {
    pub events: Vec<EntityEvent>,
    /// True when the backend's spans were unusable and contiguous appearance
    /// runs were used instead.
    pub fallback: bool,
}

/// Maximal runs of consecutive frames.
fn contiguous_runs(frames: &[FrameIndex]) -> Vec<(FrameIndex, FrameIndex)> {
    let mut runs = Vec::new();
    let mut iter = frames.iter().copied();
    let Some(first) = iter.next() else {
        return runs;
    };
    let (mut start, mut end) = (first, first);
    for f in iter {
        if f == end + 1 {
            end = f;
        } else {
            runs.push((start, end));
            start = f;
            end = f;
        }
    }
    runs.push((start, end));
    runs
}

fn parse_spans(
    raw: &str,
    entity_id: EntityId,
    appearances: &[FrameIndex],
) -> std::result::Result<Vec<EntityEvent>, String> {
    let mut spans: Vec<(usize, usize, String)> = Vec::new();
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        let mut p = line.trim().splitn(3, '|');
        let (Some(s), Some(e), Some(summary)) = (p.next(), p.next(), p.next()) else {
            return Err(format!("bad event line {line:?}"));
        };
        let s: usize = s.trim().parse().map_err(|_| format!("bad start in {line:?}"))?;
        let e: usize = e.trim().parse().map_err(|_| format!("bad end in {line:?}"))?;
        let summary = summary.trim();
        if s > e || summary.is_empty() {
            return Err(format!("bad span {line:?}"));
        }
        if let Some(prev) = spans.last() {
            if prev.1 >= s {
                return Err(format!("span {s}..{e} overlaps or is out of order"));
            }
        }
        spans.push((s, e, summary.to_string()));
    }
    let mut events = Vec::new();
    let mut covered = 0usize;
    for (s, e, summary) in spans {
        let lo = appearances.partition_point(|&f| f < s);
        let hi = appearances.partition_point(|&f| f <= e);
        if lo == hi {
            return Err(format!("span {s}..{e} holds no appearance"));
        }
        covered += hi - lo;
        // Absence inside a span forces a boundary.
        for (start, end) in contiguous_runs(&appearances[lo..hi]) {
            events.push(EntityEvent {
                entity_id,
                start_frame: start,
                end_frame: end,
                summary: summary.clone(),
            });
        }
    }
    if covered != appearances.len() {
        return Err(format!("spans cover {covered} of {} appearances", appearances.len()));
    }
    Ok(events)
}

/// Splits one entity's nodes into events. Falls back to contiguous
/// appearance runs (flagged) when the backend's spans stay invalid.
pub fn segment_events(
    graph: &SpatioTemporalGraph,
    entity_id: EntityId,
    backend: &dyn Backend,
    opts: BuildOptions,
) -> Result<SegmentOutcome> {
    let timeline = graph.entity_timeline(entity_id)?;
    let appearances: Vec<FrameIndex> = timeline.iter().map(|n| n.frame_index).collect();
    let bundle = PromptBundle::new(
        Role::EventSegmentation,
        prompts::event_segmentation_payload(entity_id, &timeline),
    );
    match generate_parsed(backend, &bundle, opts.max_retries, |raw| {
        parse_spans(raw, entity_id, &appearances)
    }) {
        Ok(events) => Ok(SegmentOutcome {
            events,
            fallback: false,
        }),
        Err(RavuError::MalformedResponse { detail, .. }) => {
            tracing::warn!(entity_id, %detail, "event segmentation fell back to appearance runs");
            let events = contiguous_runs(&appearances)
                .into_iter()
                .map(|(start, end)| {
                    let first = timeline.iter().find(|n| n.frame_index == start);
                    let summary = first
                        .and_then(|n| n.description.clone())
                        .filter(|d| !d.is_empty())
                        .unwrap_or_else(|| format!("entity {entity_id}"));
                    EntityEvent {
                        entity_id,
                        start_frame: start,
                        end_frame: end,
                        summary,
                    }
                })
                .collect();
            Ok(SegmentOutcome {
                events,
                fallback: true,
            })
        }
        Err(e) => Err(e.context(format!("events of entity {entity_id}"))),
    }
}

/// Events for every entity; returns the graph with events attached and the
/// entities that needed the fallback.
pub fn segment_all_events(
    graph: &SpatioTemporalGraph,
    backend: &dyn Backend,
    opts: BuildOptions,
) -> Result<(SpatioTemporalGraph, Vec<EntityId>)> {
    let ids: Vec<EntityId> = graph.entity_ids().collect();
    let outcomes: Vec<(EntityId, SegmentOutcome)> = ids
        .par_iter()
        .map(|&id| segment_events(graph, id, backend, opts).map(|o| (id, o)))
        .collect::<Result<_>>()?;
    let mut events = BTreeMap::new();
    let mut fallbacks = Vec::new();
    for (id, o) in outcomes {
        if o.fallback {
            fallbacks.push(id);
        }
        events.insert(id, o.events);
    }
    Ok((graph.with_events(events), fallbacks))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub frames: usize,
    pub nodes: usize,
    pub edges: usize,
    pub dropped_edge_lines: usize,
    pub event_fallbacks: Vec<EntityId>,
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub graph: SpatioTemporalGraph,
    pub embeddings: Vec<EmbeddingRecord>,
    pub report: BuildReport,
}

/// Graph with edges and node descriptions but no events yet.
pub fn build_described_graph(
    association: &Association,
    backend: &dyn Backend,
    opts: BuildOptions,
) -> Result<(SpatioTemporalGraph, usize)> {
    let skeleton = SpatioTemporalGraph::new(
        association.frames.clone(),
        association.nodes.clone(),
        Vec::new(),
        BTreeMap::new(),
        association.fps,
    );
    let frames = skeleton.frames();
    let per_frame: Vec<FrameEdges> = frames
        .par_iter()
        .enumerate()
        .map(|(i, frame)| {
            let lo = i.saturating_sub(opts.context_frames);
            let hi = (i + opts.context_frames + 1).min(frames.len());
            let context: Vec<&FrameRecord> = frames[lo..hi].iter().filter(|f| f.frame_index != frame.frame_index).collect();
            build_frame_graph(frame, &skeleton.nodes_in_frame(frame.frame_index), &context, backend, opts)
        })
        .collect::<Result<_>>()?;
    let dropped = per_frame.iter().map(|f| f.dropped).sum();
    let edges: Vec<RelationEdge> = per_frame.into_iter().flat_map(|f| f.edges).collect();
    let with_edges = SpatioTemporalGraph::new(
        association.frames.clone(),
        association.nodes.clone(),
        edges,
        BTreeMap::new(),
        association.fps,
    );
    let described: Vec<EntityNode> = with_edges
        .nodes()
        .par_iter()
        .map(|n| {
            let edges = with_edges.node_edges(n.entity_id, n.frame_index)?;
            let description = describe_node(n, &edges, backend, opts)?;
            Ok(EntityNode {
                description: Some(description),
                ..n.clone()
            })
        })
        .collect::<Result<_>>()?;
    let (frames, _, edges, _, fps) = with_edges.into_parts();
    Ok((SpatioTemporalGraph::new(frames, described, edges, BTreeMap::new(), fps), dropped))
}

/// Full build: edges, descriptions, events and embeddings.
pub fn build_graph(association: &Association, backend: &dyn Backend, opts: BuildOptions) -> Result<BuildOutput> {
    let (described, dropped) = build_described_graph(association, backend, opts)?;
    let (graph, event_fallbacks) = segment_all_events(&described, backend, opts)?;
    let embeddings = embed_graph(&graph, backend)?;
    let report = BuildReport {
        frames: graph.num_frames(),
        nodes: graph.nodes().len(),
        edges: graph.edges().len(),
        dropped_edge_lines: dropped,
        event_fallbacks,
    };
    Ok(BuildOutput {
        graph,
        embeddings,
        report,
    })
}

#[derive(Serialize, Deserialize)]
struct DescriptionLine {
    entity_id: EntityId,
    frame_index: FrameIndex,
    description: String,
}

#[derive(Serialize, Deserialize)]
struct IndexLine {
    row: usize,
    entity_id: EntityId,
    frame_index: FrameIndex,
}

pub fn edges_jsonl(graph: &SpatioTemporalGraph) -> String {
    crate::graph::to_jsonl(graph.edges())
}

pub fn descriptions_jsonl(graph: &SpatioTemporalGraph) -> String {
    let lines: Vec<DescriptionLine> = graph
        .nodes()
        .iter()
        .map(|n| DescriptionLine {
            entity_id: n.entity_id,
            frame_index: n.frame_index,
            description: n.description.clone().unwrap_or_default(),
        })
        .collect();
    crate::graph::to_jsonl(&lines)
}

/// `embeddings.bin` (u32 LE dimension, u32 LE count, then count x dimension
/// f32 LE) and `embeddings.index.jsonl` (row -> node).
pub fn encode_embeddings(records: &[EmbeddingRecord]) -> Result<(Vec<u8>, String)> {
    let dim = records.first().map(|r| r.vector.dim()).unwrap_or(0);
    if let Some(r) = records.iter().find(|r| r.vector.dim() != dim) {
        return Err(RavuError::InvalidArgument(format!(
            "{} has dimension {} (expected {dim})",
            r.key(),
            r.vector.dim()
        )));
    }
    let mut bin = Vec::with_capacity(8 + records.len() * dim * 4);
    bin.extend_from_slice(&(dim as u32).to_le_bytes());
    bin.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for r in records {
        for v in &r.vector.0 {
            bin.extend_from_slice(&v.to_le_bytes());
        }
    }
    let index: Vec<IndexLine> = records
        .iter()
        .enumerate()
        .map(|(row, r)| IndexLine {
            row,
            entity_id: r.entity_id,
            frame_index: r.frame_index,
        })
        .collect();
    Ok((bin, crate::graph::to_jsonl(&index)))
}

/// Inverse of [`encode_embeddings`]; descriptions come from `graph`.
pub fn decode_embeddings(bin: &[u8], index: &str, graph: &SpatioTemporalGraph) -> Result<Vec<EmbeddingRecord>> {
    let word = |at: usize| -> Result<u32> {
        bin.get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| RavuError::parse(0, "embeddings.bin", "truncated header"))
    };
    let dim = word(0)? as usize;
    let count = word(4)? as usize;
    if bin.len() != 8 + dim * count * 4 {
        return Err(RavuError::parse(
            0,
            "embeddings.bin",
            format!("expected {} bytes for {count}x{dim}, got {}", 8 + dim * count * 4, bin.len()),
        ));
    }
    let lines: Vec<IndexLine> = crate::graph::from_jsonl(index, "embeddings.index")?;
    if lines.len() != count {
        return Err(RavuError::parse(0, "embeddings.index", format!("{} rows for {count} vectors", lines.len())));
    }
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if l.row >= count {
                return Err(RavuError::parse(i + 1, "row", format!("row {} out of range", l.row)));
            }
            let key = NodeKey {
                entity_id: l.entity_id,
                frame_index: l.frame_index,
            };
            let node = graph.node(key).ok_or_else(|| RavuError::NotFound(key.to_string()))?;
            let start = 8 + l.row * dim * 4;
            let vector = bin[start..start + dim * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(EmbeddingRecord {
                entity_id: l.entity_id,
                frame_index: l.frame_index,
                description: node.description.clone().unwrap_or_default(),
                vector: EmbeddingVector(vector),
            })
        })
        .collect()
}
