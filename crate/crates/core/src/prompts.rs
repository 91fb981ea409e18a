//! User-payload layouts for every backend role.
//!
//! Payloads are line-oriented `key: value` headers followed by list sections.
//! Callers build them here; the mock backend reads them back with the
//! matching `read_*` functions, so both sides share one definition.

use crate::graph::{EntityEvent, EntityNode, FrameRecord, RelationEdge};
use crate::text::one_line;

fn header<'a>(payload: &'a str, key: &str) -> Option<&'a str> {
    let prefix = format!("{key}:");
    payload
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .map(str::trim)
}

fn last_header<'a>(payload: &'a str, key: &str) -> Option<&'a str> {
    let prefix = format!("{key}:");
    payload
        .lines()
        .filter_map(|l| l.strip_prefix(&prefix))
        .next_back()
        .map(str::trim)
}

/// Lines of the section introduced by `name:` up to the next section header.
fn section<'a>(payload: &'a str, name: &str) -> Vec<&'a str> {
    let marker = format!("{name}:");
    let mut lines = payload.lines();
    for l in lines.by_ref() {
        if l == marker {
            break;
        }
    }
    lines
        .take_while(|l| !(l.ends_with(':') && !l.contains('|') && !l.contains(' ')))
        .filter(|l| !l.trim().is_empty())
        .collect()
}

fn numbered(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{i}: {}\n", one_line(s)))
        .collect()
}

fn read_numbered(lines: &[&str]) -> Vec<String> {
    lines
        .iter()
        .filter_map(|l| l.split_once(": ").map(|(_, v)| v.to_string()))
        .collect()
}

pub fn frame_graph_payload(frame: &FrameRecord, nodes: &[&EntityNode], context: &[&FrameRecord]) -> String {
    let mut s = format!("frame: {}\ndescription: {}\nentities:\n", frame.frame_index, one_line(&frame.description));
    for n in nodes {
        s.push_str(&format!(
            "{}|{}|{}|{}\n",
            n.entity_id,
            one_line(n.attribute("appearance")),
            one_line(n.attribute("action")),
            one_line(n.attribute("body_pose")),
        ));
    }
    if !context.is_empty() {
        s.push_str("context:\n");
        for c in context {
            s.push_str(&format!("{}|{}\n", c.frame_index, one_line(&c.description)));
        }
    }
    s
}

pub fn read_frame_description(payload: &str) -> String {
    header(payload, "description").unwrap_or("").to_string()
}

pub fn node_description_payload(node: &EntityNode, edges: &[&RelationEdge]) -> String {
    let mut s = format!(
        "entity: {}\nframe: {}\nappearance: {}\naction: {}\nbody_pose: {}\nrelations:\n",
        node.entity_id,
        node.frame_index,
        one_line(node.attribute("appearance")),
        one_line(node.attribute("action")),
        one_line(node.attribute("body_pose")),
    );
    for e in edges {
        s.push_str(&format!("{}|{}|{}\n", e.subject_id, one_line(&e.relation), e.object_id));
    }
    s
}

pub struct NodeDescriptionRequest {
    pub entity_id: u64,
    pub appearance: String,
    pub action: String,
    pub relations: Vec<(u64, String, u64)>,
}

pub fn read_node_description(payload: &str) -> Option<NodeDescriptionRequest> {
    let relations = section(payload, "relations")
        .iter()
        .filter_map(|l| parse_triple(l))
        .collect();
    Some(NodeDescriptionRequest {
        entity_id: header(payload, "entity")?.parse().ok()?,
        appearance: header(payload, "appearance")?.to_string(),
        action: header(payload, "action")?.to_string(),
        relations,
    })
}

/// `subject|relation|object` with integer endpoints.
pub fn parse_triple(line: &str) -> Option<(u64, String, u64)> {
    let mut parts = line.trim().splitn(3, '|');
    let s = parts.next()?.trim().parse().ok()?;
    let rel = parts.next()?.trim().to_string();
    let o = parts.next()?.trim().parse().ok()?;
    if rel.is_empty() {
        return None;
    }
    Some((s, rel, o))
}

pub fn event_segmentation_payload(entity_id: u64, nodes: &[&EntityNode]) -> String {
    let mut s = format!("entity: {entity_id}\nnodes:\n");
    for n in nodes {
        s.push_str(&format!(
            "{}|{}|{}\n",
            n.frame_index,
            one_line(n.attribute("action")),
            one_line(n.description.as_deref().unwrap_or("")),
        ));
    }
    s
}

/// (frame, action, description) rows of an event-segmentation payload.
pub fn read_event_segmentation(payload: &str) -> Vec<(usize, String, String)> {
    section(payload, "nodes")
        .iter()
        .filter_map(|l| {
            let mut p = l.splitn(3, '|');
            let f = p.next()?.parse().ok()?;
            Some((f, p.next()?.to_string(), p.next().unwrap_or("").to_string()))
        })
        .collect()
}

pub fn rerank_payload(grounding: &str, candidates: &[String]) -> String {
    format!("grounding: {}\ncandidates:\n{}", one_line(grounding), numbered(candidates))
}

pub fn read_rerank(payload: &str) -> (String, Vec<String>) {
    (
        header(payload, "grounding").unwrap_or("").to_string(),
        read_numbered(&section(payload, "candidates")),
    )
}

pub fn event_analysis_payload(query: &str, entity_id: u64, events: &[EntityEvent]) -> String {
    let mut s = format!("query: {}\nentity: {entity_id}\nevents:\n", one_line(query));
    for e in events {
        s.push_str(&format!("{}|{}|{}\n", e.start_frame, e.end_frame, one_line(&e.summary)));
    }
    s
}

/// Query plus (start, end, summary) rows.
pub fn read_event_analysis(payload: &str) -> (String, Vec<(usize, usize, String)>) {
    let events = section(payload, "events")
        .iter()
        .filter_map(|l| {
            let mut p = l.splitn(3, '|');
            Some((p.next()?.parse().ok()?, p.next()?.parse().ok()?, p.next().unwrap_or("").to_string()))
        })
        .collect();
    (header(payload, "query").unwrap_or("").to_string(), events)
}

pub fn breakdown_payload(question: &str, examples: &str) -> String {
    format!("examples:\n{examples}\nquestion: {}\n", one_line(question))
}

/// The question being broken down (the last `question:` line; earlier ones
/// belong to the in-context examples).
pub fn read_breakdown(payload: &str) -> String {
    last_header(payload, "question").unwrap_or("").to_string()
}

pub fn event_select_payload(question: &str, top: usize, candidates: &[String]) -> String {
    format!(
        "question: {}\nselect: {top}\ncandidates:\n{}",
        one_line(question),
        numbered(candidates)
    )
}

pub fn read_event_select(payload: &str) -> (String, usize, Vec<String>) {
    (
        header(payload, "question").unwrap_or("").to_string(),
        header(payload, "select").and_then(|s| s.parse().ok()).unwrap_or(0),
        read_numbered(&section(payload, "candidates")),
    )
}

pub fn answer_payload(question: &str, options: &[String], notes: &[String]) -> String {
    let mut s = format!("question: {}\noptions:\n{}", one_line(question), numbered(options));
    if !notes.is_empty() {
        s.push_str("notes:\n");
        for n in notes {
            s.push_str(&one_line(n));
            s.push('\n');
        }
    }
    s
}

/// Options and notes of an answer payload.
pub fn read_answer(payload: &str) -> (Vec<String>, Vec<String>) {
    (
        read_numbered(&section(payload, "options")),
        section(payload, "notes").iter().map(|s| s.to_string()).collect(),
    )
}
