//! Observation and tracklet documents, IoU, and the association step that
//! rewrites per-frame local entity IDs into video-consistent IDs.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{RavuError, Result};
use crate::graph::{BoundingBox, EntityId, EntityNode, FrameIndex, FrameRecord, REQUIRED_ATTRIBUTES};

static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[E(\d+)\]").unwrap());

pub const DEFAULT_MIN_IOU: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedEntity {
    pub local_id: u64,
    pub attributes: BTreeMap<String, String>,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameObservation {
    pub frame_index: FrameIndex,
    pub description: String,
    pub entities: Vec<ObservedEntity>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source_ref: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub track_id: u64,
    pub boxes: BTreeMap<FrameIndex, BoundingBox>,
}

#[derive(Deserialize)]
struct RawEntity {
    local_id: u64,
    #[serde(default)]
    attributes: BTreeMap<String, String>,
    #[serde(rename = "box")]
    bbox: Vec<f64>,
}

#[derive(Deserialize)]
struct RawObservation {
    frame_index: FrameIndex,
    #[serde(default)]
    description: String,
    #[serde(default)]
    entities: Vec<RawEntity>,
    #[serde(default)]
    source_ref: String,
}

#[derive(Deserialize)]
struct RawTracklet {
    track_id: u64,
    boxes: BTreeMap<String, Vec<f64>>,
}

#[derive(Deserialize)]
struct RawTracklets {
    tracks: Vec<RawTracklet>,
}

#[derive(Serialize)]
struct TrackletsOut<'a> {
    tracks: Vec<TrackletOut<'a>>,
}

#[derive(Serialize)]
struct TrackletOut<'a> {
    track_id: u64,
    boxes: BTreeMap<String, &'a BoundingBox>,
}

fn parse_box(raw: &[f64], line: usize) -> Result<BoundingBox> {
    if raw.len() != 4 {
        return Err(RavuError::parse(line, "box", format!("expected 4 coordinates, got {}", raw.len())));
    }
    BoundingBox::new(raw[0], raw[1], raw[2], raw[3])
        .map_err(|e| RavuError::parse(line, "box", e.to_string()))
}

/// Parses `observations.jsonl`: one frame per line, frame indices dense from 0.
pub fn parse_observations(document: &str) -> Result<Vec<FrameObservation>> {
    let mut out: Vec<FrameObservation> = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in document.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawObservation = serde_json::from_str(line)
            .map_err(|e| RavuError::parse(line_no, "observation", e.to_string()))?;
        if !seen.insert(raw.frame_index) {
            return Err(RavuError::parse(
                line_no,
                "frame_index",
                format!("duplicate frame {}", raw.frame_index),
            ));
        }
        let mut local_ids = BTreeSet::new();
        let mut entities = Vec::with_capacity(raw.entities.len());
        for e in raw.entities {
            if !local_ids.insert(e.local_id) {
                return Err(RavuError::parse(
                    line_no,
                    "local_id",
                    format!("duplicate local id {} in frame {}", e.local_id, raw.frame_index),
                ));
            }
            let mut attributes = e.attributes;
            for key in REQUIRED_ATTRIBUTES {
                attributes.entry(key.to_string()).or_default();
            }
            entities.push(ObservedEntity {
                local_id: e.local_id,
                attributes,
                bbox: parse_box(&e.bbox, line_no)?,
            });
        }
        out.push(FrameObservation {
            frame_index: raw.frame_index,
            description: raw.description,
            entities,
            source_ref: raw.source_ref,
        });
    }
    out.sort_by_key(|o| o.frame_index);
    if let Some((pos, o)) = out.iter().enumerate().find(|(pos, o)| o.frame_index != *pos) {
        return Err(RavuError::parse(
            0,
            "frame_index",
            format!("frame indices not dense: expected {pos}, found {}", o.frame_index),
        ));
    }
    Ok(out)
}

/// Parses `tracklets.json`.
pub fn parse_tracklets(document: &str) -> Result<Vec<Tracklet>> {
    let raw: RawTracklets = serde_json::from_str(document)
        .map_err(|e| RavuError::parse(e.line(), "tracks", e.to_string()))?;
    let mut ids = BTreeSet::new();
    let mut out = Vec::with_capacity(raw.tracks.len());
    for t in raw.tracks {
        if !ids.insert(t.track_id) {
            return Err(RavuError::parse(0, "track_id", format!("duplicate track {}", t.track_id)));
        }
        if t.boxes.is_empty() {
            return Err(RavuError::parse(0, "boxes", format!("track {} has no boxes", t.track_id)));
        }
        let mut boxes = BTreeMap::new();
        for (k, v) in t.boxes {
            let frame: FrameIndex = k
                .parse()
                .map_err(|_| RavuError::parse(0, "boxes", format!("bad frame key {k:?}")))?;
            boxes.insert(frame, parse_box(&v, 0)?);
        }
        out.push(Tracklet {
            track_id: t.track_id,
            boxes,
        });
    }
    Ok(out)
}

pub fn observations_to_jsonl(observations: &[FrameObservation]) -> String {
    crate::graph::to_jsonl(observations)
}

pub fn tracklets_to_json(tracklets: &[Tracklet]) -> String {
    let doc = TrackletsOut {
        tracks: tracklets
            .iter()
            .map(|t| TrackletOut {
                track_id: t.track_id,
                boxes: t.boxes.iter().map(|(f, b)| (f.to_string(), b)).collect(),
            })
            .collect(),
    };
    let value = serde_json::to_value(&doc).expect("tracklets serialize");
    let mut s = serde_json::to_string(&value).expect("value serializes");
    s.push('\n');
    s
}

/// Intersection over union; 0 for disjoint boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let h = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = w * h;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Greedy one-to-one matching of rows (observed entities) to columns
/// (tracks). Pairs are taken in order of descending IoU, ties going to the
/// lower track id and then the lower local id. A pair is eligible only if its
/// IoU is positive and at least `min_iou`.
///
/// `row_ids` and `col_ids` are the local ids and track ids used for tie-breaks.
pub fn greedy_assign(
    ious: &[Vec<f64>],
    row_ids: &[u64],
    col_ids: &[u64],
    min_iou: f64,
) -> Vec<Option<usize>> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (r, row) in ious.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > 0.0 && v >= min_iou {
                pairs.push((r, c, v));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(col_ids[a.1].cmp(&col_ids[b.1]))
            .then(row_ids[a.0].cmp(&row_ids[b.0]))
    });
    let mut row_taken = vec![None; ious.len()];
    let mut col_used = vec![false; col_ids.len()];
    for (r, c, _) in pairs {
        if row_taken[r].is_none() && !col_used[c] {
            row_taken[r] = Some(c);
            col_used[c] = true;
        }
    }
    row_taken
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociateOptions {
    pub min_iou: f64,
    pub fps: f64,
}

impl Default for AssociateOptions {
    fn default() -> Self {
        AssociateOptions {
            min_iou: DEFAULT_MIN_IOU,
            fps: 1.0,
        }
    }
}

/// Output of [`associate`]: nodes and frames with consistent IDs, plus the
/// per-frame local → entity mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub nodes: Vec<EntityNode>,
    pub frames: Vec<FrameRecord>,
    pub id_maps: Vec<BTreeMap<u64, EntityId>>,
    pub fps: f64,
}

/// Rewrites `[E<local>]` mentions using `map`; unknown mentions are kept.
pub fn rewrite_mentions(text: &str, map: &BTreeMap<u64, EntityId>) -> String {
    MENTION
        .replace_all(text, |caps: &regex::Captures<'_>| {
            let local: Option<u64> = caps[1].parse().ok();
            match local.and_then(|l| map.get(&l)) {
                Some(id) => format!("[E{id}]"),
                None => caps[0].to_string(),
            }
        })
        .into_owned()
}

/// Entity ids mentioned in `text`, in order of appearance.
pub fn mentions(text: &str) -> Vec<EntityId> {
    MENTION
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

/// Assigns each observed entity the track maximizing IoU in its frame (one
/// entity per track per frame). Entities without an eligible track get a
/// fresh singleton id above every track id, allocated in (frame, local id)
/// order.
pub fn associate(
    observations: &[FrameObservation],
    tracklets: &[Tracklet],
    opts: AssociateOptions,
) -> Result<Association> {
    if !(0.0..=1.0).contains(&opts.min_iou) {
        return Err(RavuError::InvalidArgument(format!("min_iou {} outside [0,1]", opts.min_iou)));
    }
    if opts.fps.is_nan() || opts.fps <= 0.0 {
        return Err(RavuError::InvalidArgument(format!("fps {} must be positive", opts.fps)));
    }
    let n_frames = observations.len();
    for t in tracklets {
        if let Some((&f, _)) = t.boxes.range(n_frames..).next() {
            return Err(RavuError::parse(
                0,
                "boxes",
                format!("track {} references unknown frame {f}", t.track_id),
            ));
        }
    }

    let per_frame: Vec<Vec<Option<u64>>> = observations
        .par_iter()
        .map(|obs| {
            let tracks: Vec<(u64, &BoundingBox)> = tracklets
                .iter()
                .filter_map(|t| t.boxes.get(&obs.frame_index).map(|b| (t.track_id, b)))
                .collect();
            let ious: Vec<Vec<f64>> = obs
                .entities
                .iter()
                .map(|e| tracks.iter().map(|(_, b)| iou(&e.bbox, b)).collect())
                .collect();
            let row_ids: Vec<u64> = obs.entities.iter().map(|e| e.local_id).collect();
            let col_ids: Vec<u64> = tracks.iter().map(|(id, _)| *id).collect();
            greedy_assign(&ious, &row_ids, &col_ids, opts.min_iou)
                .into_iter()
                .map(|c| c.map(|c| col_ids[c]))
                .collect()
        })
        .collect();

    let mut next_fresh = tracklets.iter().map(|t| t.track_id + 1).max().unwrap_or(0);
    let mut nodes = Vec::new();
    let mut frames = Vec::with_capacity(n_frames);
    let mut id_maps = Vec::with_capacity(n_frames);
    for (obs, assigned) in observations.iter().zip(per_frame) {
        let mut order: Vec<usize> = (0..obs.entities.len()).collect();
        order.sort_by_key(|&i| obs.entities[i].local_id);
        let mut map = BTreeMap::new();
        for i in order {
            let e = &obs.entities[i];
            let id = assigned[i].unwrap_or_else(|| {
                let id = next_fresh;
                next_fresh += 1;
                id
            });
            map.insert(e.local_id, id);
            nodes.push(EntityNode {
                entity_id: id,
                frame_index: obs.frame_index,
                attributes: e.attributes.clone(),
                bbox: e.bbox,
                description: None,
            });
        }
        frames.push(FrameRecord {
            frame_index: obs.frame_index,
            timestamp_s: obs.frame_index as f64 / opts.fps,
            description: rewrite_mentions(&obs.description, &map),
            source_ref: obs.source_ref.clone(),
        });
        id_maps.push(map);
    }
    nodes.sort_by_key(|n| (n.frame_index, n.entity_id));
    Ok(Association {
        nodes,
        frames,
        id_maps,
        fps: opts.fps,
    })
}
