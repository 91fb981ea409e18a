//! Spatio-temporal graph types, validation, and the canonical graph document.
//!
//! A video is a list of frames, each holding entity nodes and within-frame
//! relation edges. Nodes that share an `entity_id` are temporally linked;
//! the link is implicit and never stored twice.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{RavuError, Result};

pub type EntityId = u64;
pub type FrameIndex = usize;

/// Frames, nodes, edges, events and fps, as taken apart by
/// [`SpatioTemporalGraph::into_parts`].
pub type GraphParts = (
    Vec<FrameRecord>,
    Vec<EntityNode>,
    Vec<RelationEdge>,
    BTreeMap<EntityId, Vec<EntityEvent>>,
    f64,
);

/// Attribute keys every node carries (values may be empty).
pub const REQUIRED_ATTRIBUTES: [&str; 3] = ["appearance", "action", "body_pose"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BoundingBox { x_min, y_min, x_max, y_max };
        match b.problem() {
            None => Ok(b),
            Some(p) => Err(RavuError::InvalidArgument(format!("box: {p}"))),
        }
    }

    fn problem(&self) -> Option<&'static str> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            Some("non-finite coordinate")
        } else if coords.iter().any(|c| *c < 0.0) {
            Some("negative coordinate")
        } else if self.x_min >= self.x_max {
            Some("x_min >= x_max")
        } else if self.y_min >= self.y_max {
            Some("y_min >= y_max")
        } else {
            None
        }
    }

    pub fn is_valid(&self) -> bool {
        self.problem().is_none()
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = String;

    fn try_from(v: [f64; 4]) -> std::result::Result<Self, String> {
        BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityNode {
    pub entity_id: EntityId,
    pub frame_index: FrameIndex,
    pub attributes: BTreeMap<String, String>,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl EntityNode {
    pub fn attribute(&self, key: &str) -> &str {
        self.attributes.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn key(&self) -> NodeKey {
        NodeKey {
            entity_id: self.entity_id,
            frame_index: self.frame_index,
        }
    }
}

/// Identifies one node: an entity in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeKey {
    pub entity_id: EntityId,
    pub frame_index: FrameIndex,
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entity {} @ frame {}", self.entity_id, self.frame_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub frame_index: FrameIndex,
    pub subject_id: EntityId,
    pub relation: String,
    pub object_id: EntityId,
}

impl RelationEdge {
    pub fn touches(&self, entity_id: EntityId) -> bool {
        self.subject_id == entity_id || self.object_id == entity_id
    }

    fn sort_key(&self) -> (FrameIndex, EntityId, EntityId, &str) {
        (self.frame_index, self.subject_id, self.object_id, &self.relation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: FrameIndex,
    pub timestamp_s: f64,
    pub description: String,
    #[serde(default)]
    pub source_ref: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityEvent {
    pub entity_id: EntityId,
    pub start_frame: FrameIndex,
    /// Inclusive.
    pub end_frame: FrameIndex,
    pub summary: String,
}

impl EntityEvent {
    pub fn contains(&self, frame: FrameIndex) -> bool {
        self.start_frame <= frame && frame <= self.end_frame
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub element: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: &str) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    fn push(&mut self, rule: &'static str, element: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            element: element.into(),
        });
    }
}

/// Frames, nodes, edges and entity events of one video. Immutable once built.
#[derive(Debug, Clone)]
pub struct SpatioTemporalGraph {
    frames: Vec<FrameRecord>,
    nodes: Vec<EntityNode>,
    edges: Vec<RelationEdge>,
    events: BTreeMap<EntityId, Vec<EntityEvent>>,
    fps: f64,
    by_entity: BTreeMap<EntityId, Vec<usize>>,
    by_frame: BTreeMap<FrameIndex, Vec<usize>>,
}

impl PartialEq for SpatioTemporalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.frames == other.frames
            && self.nodes == other.nodes
            && self.edges == other.edges
            && self.events == other.events
            && self.fps == other.fps
    }
}

impl Default for SpatioTemporalGraph {
    fn default() -> Self {
        SpatioTemporalGraph::new(Vec::new(), Vec::new(), Vec::new(), BTreeMap::new(), 1.0)
    }
}

impl SpatioTemporalGraph {
    /// Assembles a graph, putting every list in canonical order. Does not
    /// validate; call [`validate`] for that.
    pub fn new(
        mut frames: Vec<FrameRecord>,
        mut nodes: Vec<EntityNode>,
        mut edges: Vec<RelationEdge>,
        mut events: BTreeMap<EntityId, Vec<EntityEvent>>,
        fps: f64,
    ) -> Self {
        frames.sort_by_key(|f| f.frame_index);
        nodes.sort_by_key(|n| (n.frame_index, n.entity_id));
        edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        for list in events.values_mut() {
            list.sort_by_key(|e| (e.start_frame, e.end_frame));
        }
        let mut by_entity: BTreeMap<EntityId, Vec<usize>> = BTreeMap::new();
        let mut by_frame: BTreeMap<FrameIndex, Vec<usize>> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate() {
            by_entity.entry(n.entity_id).or_default().push(i);
            by_frame.entry(n.frame_index).or_default().push(i);
        }
        SpatioTemporalGraph {
            frames,
            nodes,
            edges,
            events,
            fps,
            by_entity,
            by_frame,
        }
    }

    pub fn frames(&self) -> &[FrameRecord] {
        &self.frames
    }

    pub fn nodes(&self) -> &[EntityNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[RelationEdge] {
        &self.edges
    }

    pub fn events(&self) -> &BTreeMap<EntityId, Vec<EntityEvent>> {
        &self.events
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.by_entity.keys().copied()
    }

    pub fn node(&self, key: NodeKey) -> Option<&EntityNode> {
        self.by_frame
            .get(&key.frame_index)?
            .iter()
            .map(|&i| &self.nodes[i])
            .find(|n| n.entity_id == key.entity_id)
    }

    pub fn nodes_in_frame(&self, frame: FrameIndex) -> Vec<&EntityNode> {
        self.by_frame
            .get(&frame)
            .map(|ix| ix.iter().map(|&i| &self.nodes[i]).collect())
            .unwrap_or_default()
    }

    pub fn edges_in_frame(&self, frame: FrameIndex) -> &[RelationEdge] {
        let start = self.edges.partition_point(|e| e.frame_index < frame);
        let end = self.edges.partition_point(|e| e.frame_index <= frame);
        &self.edges[start..end]
    }

    pub fn events_of(&self, entity_id: EntityId) -> &[EntityEvent] {
        self.events.get(&entity_id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_events(&self) -> impl Iterator<Item = &EntityEvent> {
        self.events.values().flatten()
    }

    /// Nodes of one entity ordered by frame.
    pub fn entity_timeline(&self, entity_id: EntityId) -> Result<Vec<&EntityNode>> {
        let ix = self
            .by_entity
            .get(&entity_id)
            .ok_or_else(|| RavuError::NotFound(format!("entity {entity_id}")))?;
        // `nodes` is sorted by frame first, so the index list already is too.
        Ok(ix.iter().map(|&i| &self.nodes[i]).collect())
    }

    /// Edges of the node's frame in which the entity is subject or object.
    pub fn node_edges(&self, entity_id: EntityId, frame: FrameIndex) -> Result<Vec<&RelationEdge>> {
        let key = NodeKey {
            entity_id,
            frame_index: frame,
        };
        if self.node(key).is_none() {
            return Err(RavuError::NotFound(key.to_string()));
        }
        Ok(self
            .edges_in_frame(frame)
            .iter()
            .filter(|e| e.touches(entity_id))
            .collect())
    }

    /// Frames in which the entity appears, ascending.
    pub fn appearance_frames(&self, entity_id: EntityId) -> Vec<FrameIndex> {
        self.by_entity
            .get(&entity_id)
            .map(|ix| ix.iter().map(|&i| self.nodes[i].frame_index).collect())
            .unwrap_or_default()
    }

    /// Same graph with `events` replaced.
    pub fn with_events(&self, events: BTreeMap<EntityId, Vec<EntityEvent>>) -> Self {
        SpatioTemporalGraph::new(
            self.frames.clone(),
            self.nodes.clone(),
            self.edges.clone(),
            events,
            self.fps,
        )
    }

    pub fn into_parts(self) -> GraphParts {
        (self.frames, self.nodes, self.edges, self.events, self.fps)
    }
}

/// Checks every structural invariant; violations are reported, not raised.
pub fn validate(graph: &SpatioTemporalGraph) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (pos, f) in graph.frames.iter().enumerate() {
        if f.frame_index != pos {
            report.push("frame-index-gap", format!("frame {} at position {pos}", f.frame_index));
        }
        if pos > 0 && f.timestamp_s <= graph.frames[pos - 1].timestamp_s {
            report.push("timestamp-order", format!("frame {}", f.frame_index));
        }
    }

    let mut seen = BTreeSet::new();
    for n in &graph.nodes {
        let key = n.key();
        if !seen.insert(key) {
            report.push("duplicate-node", key.to_string());
        }
        if n.frame_index >= graph.frames.len() {
            report.push("node-frame-unknown", key.to_string());
        }
        if !n.bbox.is_valid() {
            report.push("box-invalid", key.to_string());
        }
        for attr in REQUIRED_ATTRIBUTES {
            if !n.attributes.contains_key(attr) {
                report.push("missing-attribute", format!("{key}: {attr}"));
            }
        }
    }

    for e in &graph.edges {
        let label = format!(
            "frame {}: {} {} {}",
            e.frame_index, e.subject_id, e.relation, e.object_id
        );
        if e.subject_id == e.object_id {
            report.push("self-edge", label.clone());
        }
        let present = |id| seen.contains(&NodeKey { entity_id: id, frame_index: e.frame_index });
        if !present(e.subject_id) || !present(e.object_id) {
            report.push("dangling-edge", label);
        }
    }

    for (&entity_id, list) in &graph.events {
        let appearances: BTreeSet<FrameIndex> =
            graph.appearance_frames(entity_id).into_iter().collect();
        if appearances.is_empty() {
            report.push("event-unknown-entity", format!("entity {entity_id}"));
            continue;
        }
        for (i, ev) in list.iter().enumerate() {
            let label = format!("entity {entity_id} [{}..{}]", ev.start_frame, ev.end_frame);
            if ev.entity_id != entity_id {
                report.push("event-entity-mismatch", label.clone());
            }
            if ev.start_frame > ev.end_frame {
                report.push("event-span", label.clone());
                continue;
            }
            if !appearances.contains(&ev.start_frame) || !appearances.contains(&ev.end_frame) {
                report.push("event-endpoint-absent", label.clone());
            }
            let inside = appearances.range(ev.start_frame..=ev.end_frame).count();
            if inside != ev.end_frame - ev.start_frame + 1 {
                report.push("event-gap", label.clone());
            }
            if i > 0 && list[i - 1].end_frame >= ev.start_frame {
                report.push("event-overlap", label);
            }
        }
        for &f in &appearances {
            if !list.iter().any(|ev| ev.contains(f)) {
                report.push("event-coverage", format!("entity {entity_id} frame {f}"));
            }
        }
    }
    report
}

#[derive(Serialize, Deserialize)]
struct GraphDocument {
    frames: Vec<FrameRecord>,
    nodes: Vec<EntityNode>,
    edges: Vec<RelationEdge>,
    events: BTreeMap<EntityId, Vec<EntityEvent>>,
    fps: f64,
}

const DOCUMENT_KEYS: [&str; 5] = ["frames", "nodes", "edges", "events", "fps"];

/// Canonical JSON document: sorted keys, canonical list order, two-space
/// indentation, trailing newline. Equal graphs give identical bytes.
pub fn serialize(graph: &SpatioTemporalGraph) -> String {
    let doc = GraphDocument {
        frames: graph.frames.clone(),
        nodes: graph.nodes.clone(),
        edges: graph.edges.clone(),
        events: graph.events.clone(),
        fps: graph.fps,
    };
    // serde_json::Map is ordered by key, so a round trip through Value sorts
    // every object.
    let value = serde_json::to_value(&doc).expect("graph document is always representable");
    let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
    out.push('\n');
    out
}

pub fn deserialize(document: &str) -> Result<SpatioTemporalGraph> {
    let value: serde_json::Value = serde_json::from_str(document)
        .map_err(|e| RavuError::parse(e.line(), "document", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| RavuError::parse(1, "document", "top level is not an object"))?;
    for key in DOCUMENT_KEYS {
        if !obj.contains_key(key) {
            return Err(RavuError::parse(1, key, format!("missing key \"{key}\"")));
        }
    }
    let doc: GraphDocument = serde_json::from_str(document).map_err(|e| {
        let field = DOCUMENT_KEYS
            .iter()
            .find(|k| e.to_string().contains(*k))
            .map(|k| k.to_string())
            .unwrap_or_else(|| "document".into());
        RavuError::parse(e.line(), field, e.to_string())
    })?;
    Ok(SpatioTemporalGraph::new(
        doc.frames, doc.nodes, doc.edges, doc.events, doc.fps,
    ))
}

/// One JSON object per line, each line in canonical key order.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        let value = serde_json::to_value(item).expect("serializable record");
        out.push_str(&serde_json::to_string(&value).expect("value serializes"));
        out.push('\n');
    }
    out
}

/// Parses one record per non-blank line; errors carry the 1-based line.
pub fn from_jsonl<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RavuError::parse(i + 1, what, e.to_string()))
        })
        .collect()
}
