//! Seeded synthetic videos with a known script, for oracle testing.
//!
//! Every entity lives in its own horizontal lane, performs a few actions in
//! consecutive events and may leave the scene between events. Observations
//! use per-frame local ids in random order; tracklets carry the true ids.
//! One entity always shares its species and one action with another entity
//! and differs only in color, so text-embedding retrieval has a near
//! duplicate to trip over.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Category, LocalizationAnnotation, McqItem};
use crate::error::{RavuError, Result};
use crate::graph::{
    serialize, BoundingBox, EntityEvent, EntityId, EntityNode, FrameIndex, FrameRecord, RelationEdge,
    SpatioTemporalGraph,
};
use crate::ingest::{observations_to_jsonl, rewrite_mentions, tracklets_to_json, FrameObservation, ObservedEntity, Tracklet};

const SPECIES: [(&str, &str); 8] = [
    ("dog", "dogs"),
    ("cat", "cats"),
    ("man", "men"),
    ("woman", "women"),
    ("horse", "horses"),
    ("bird", "birds"),
    ("boy", "boys"),
    ("girl", "girls"),
];
const COLORS: [&str; 8] = ["brown", "black", "white", "red", "grey", "golden", "green", "blue"];
const ACTIONS: [&str; 20] = [
    "sitting",
    "running",
    "jumping",
    "eating",
    "sleeping",
    "walking",
    "climbing",
    "dancing",
    "drinking",
    "reading",
    "swimming",
    "waving",
    "digging",
    "rolling",
    "singing",
    "painting",
    "cooking",
    "juggling",
    "skating",
    "stretching",
];
const RELATIONS: [&str; 6] = ["watches", "follows", "faces", "greets", "nudges", "passes"];
const ACCESSORIES: [&str; 4] = [
    "wearing a leather collar",
    "with a striped scarf",
    "carrying a wicker basket",
    "holding a paper umbrella",
];
const POSES: [&str; 4] = ["upright", "crouched", "prone", "leaning"];
const MAX_EVENTS: usize = 10;
const RELATION_RATE: f64 = 0.5;
const LANE_SPAN: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_frames: usize,
    pub n_entities: usize,
    pub n_questions: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_frames: 32,
            n_entities: 4,
            n_questions: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEvent {
    pub start: FrameIndex,
    pub end: FrameIndex,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntity {
    pub entity_id: EntityId,
    pub species: String,
    pub color: String,
    /// Extra appearance words the questions never mention.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accessory: Option<String>,
    pub pose: String,
    pub events: Vec<ScriptEvent>,
}

impl ScriptEntity {
    /// Short name used in questions.
    pub fn name(&self) -> String {
        format!("{} {}", self.color, self.species)
    }

    pub fn appearance(&self) -> String {
        match &self.accessory {
            Some(a) => format!("{} {} {a}", self.color, self.species),
            None => self.name(),
        }
    }

    fn event_at(&self, frame: FrameIndex) -> Option<&ScriptEvent> {
        self.events.iter().find(|e| (e.start..=e.end).contains(&frame))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Before,
    After,
    Count,
    Global,
}

/// A generated question with the facts needed to grade retrieval.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthQuestion {
    pub item: McqItem,
    pub template: Template,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<EntityId>,
    /// Event named in the question.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<(FrameIndex, FrameIndex)>,
    /// Event holding the answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<(FrameIndex, FrameIndex)>,
}

impl SynthQuestion {
    /// Spans a correct retrieval may draw frames from.
    pub fn oracle_spans(&self) -> Vec<(FrameIndex, FrameIndex)> {
        self.anchor.into_iter().chain(self.target).collect()
    }

    pub fn within_oracle_spans(&self, frames: &[FrameIndex]) -> bool {
        let spans = self.oracle_spans();
        !spans.is_empty() && frames.iter().all(|f| spans.iter().any(|(s, e)| (s..=e).contains(&f)))
    }

    /// Localization annotation: the frames of the event the question names.
    pub fn annotation(&self) -> Option<LocalizationAnnotation> {
        let (s, e) = self.anchor?;
        Some(LocalizationAnnotation {
            video_id: self.item.video_id.clone(),
            question: self.item.question.clone(),
            gt_frames: (s..=e).collect(),
            category: Some(self.item.category),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub seed: u64,
    pub video_id: String,
    pub params: SynthParams,
    pub script: Vec<ScriptEntity>,
    pub relations: Vec<RelationEdge>,
    pub observations: Vec<FrameObservation>,
    pub tracklets: Vec<Tracklet>,
    pub ground_truth: SpatioTemporalGraph,
    pub questions: Vec<SynthQuestion>,
}

fn jitter(rng: &mut ChaCha8Rng, b: [f64; 4], amount: f64) -> BoundingBox {
    let mut v = b.map(|x| x + rng.random_range(-amount..=amount));
    v = v.map(|x| (x * 100.0).round() / 100.0);
    BoundingBox::new(v[0], v[1], v[2], v[3]).expect("jitter keeps boxes valid")
}

fn lane_box(k: usize, n: usize) -> [f64; 4] {
    let w = LANE_SPAN / n as f64;
    let y0 = 100.0 + 50.0 * (k % 3) as f64;
    [k as f64 * w + 0.1 * w, y0, k as f64 * w + 0.9 * w, y0 + 400.0]
}

fn pick_entities(rng: &mut ChaCha8Rng, n: usize) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::with_capacity(n);
    for k in 0..n {
        loop {
            let species = if k == 1 {
                out[0].0.clone()
            } else {
                SPECIES.choose(rng).unwrap().0.to_string()
            };
            let color = COLORS.choose(rng).unwrap().to_string();
            if !out.iter().any(|(s, c)| *s == species && *c == color) {
                out.push((species, color));
                break;
            }
        }
    }
    out
}

fn script_events(rng: &mut ChaCha8Rng, n_frames: usize, wanted: usize) -> Vec<(FrameIndex, FrameIndex)> {
    let mut spans = Vec::new();
    let mut t = rng.random_range(0..=3usize.min(n_frames - 1));
    while spans.len() < wanted && t < n_frames {
        let len = rng.random_range(4..=9usize);
        let end = (t + len - 1).min(n_frames - 1);
        spans.push((t, end));
        t = end + 1 + [0, 0, 1, 2].choose(rng).copied().unwrap();
    }
    if spans.is_empty() {
        spans.push((n_frames - 1, n_frames - 1));
    }
    spans
}

fn unused_actions(script: &[ScriptEntity]) -> Vec<&'static str> {
    let used: BTreeSet<&str> = script.iter().flat_map(|e| e.events.iter().map(|ev| ev.action.as_str())).collect();
    ACTIONS.iter().copied().filter(|a| !used.contains(a)).collect()
}

fn options_with(rng: &mut ChaCha8Rng, correct: String, pool: &[String]) -> (Vec<String>, usize) {
    let mut options: Vec<String> = pool.choose_multiple(rng, 3).cloned().collect();
    options.push(correct.clone());
    options.shuffle(rng);
    let answer = options.iter().position(|o| *o == correct).unwrap();
    (options, answer)
}

/// Deterministic world for `seed`.
pub fn synth_world(seed: u64, params: SynthParams) -> Result<SyntheticWorld> {
    if params.n_frames == 0 || params.n_entities == 0 || params.n_questions == 0 {
        return Err(RavuError::InvalidArgument("synthetic world parameters must be at least 1".into()));
    }
    if params.n_entities > MAX_EVENTS || params.n_entities > SPECIES.len() * COLORS.len() {
        return Err(RavuError::InvalidArgument(format!("at most {MAX_EVENTS} entities")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n_frames;
    let looks = pick_entities(&mut rng, params.n_entities);

    let mut script: Vec<ScriptEntity> = Vec::new();
    let mut events_left = MAX_EVENTS;
    for (k, (species, color)) in looks.into_iter().enumerate() {
        let reserve = params.n_entities - k - 1;
        let lo = if k < 2 { 2 } else { 1 };
        let wanted = rng.random_range(lo..=3).min(events_left - reserve).max(1);
        let spans = script_events(&mut rng, n, wanted);
        events_left -= spans.len();
        let mut actions: Vec<&str> = ACTIONS.choose_multiple(&mut rng, spans.len()).copied().collect();
        if k == 1 {
            // The near duplicate shares one action with entity 0.
            let shared = script[0].events.choose(&mut rng).unwrap().action.clone();
            if !actions.contains(&shared.as_str()) {
                let slot = rng.random_range(0..actions.len());
                actions[slot] = ACTIONS.iter().copied().find(|a| *a == shared).unwrap();
            }
        }
        // Entity 0 always carries an accessory and its near duplicate never
        // does, so the duplicate's shorter description can outscore it.
        let accessory = match k {
            0 => Some(ACCESSORIES.choose(&mut rng).unwrap().to_string()),
            1 => None,
            _ => rng.random_bool(0.5).then(|| ACCESSORIES.choose(&mut rng).unwrap().to_string()),
        };
        script.push(ScriptEntity {
            entity_id: k as EntityId,
            species,
            color,
            accessory,
            pose: POSES.choose(&mut rng).unwrap().to_string(),
            events: spans
                .into_iter()
                .zip(actions)
                .map(|((start, end), action)| ScriptEvent {
                    start,
                    end,
                    action: action.to_string(),
                })
                .collect(),
        });
    }

    let mut observations = Vec::with_capacity(n);
    let mut frames = Vec::with_capacity(n);
    let mut nodes = Vec::new();
    let mut relations = Vec::new();
    let mut track_boxes: Vec<BTreeMap<FrameIndex, BoundingBox>> = vec![BTreeMap::new(); script.len()];
    for f in 0..n {
        let present: Vec<(&ScriptEntity, &ScriptEvent)> =
            script.iter().filter_map(|e| e.event_at(f).map(|ev| (e, ev))).collect();
        let mut locals: Vec<u64> = (0..present.len() as u64).collect();
        locals.shuffle(&mut rng);
        let local_of: BTreeMap<EntityId, u64> = present.iter().map(|(e, _)| e.entity_id).zip(locals.iter().copied()).collect();

        let mut order: Vec<usize> = (0..present.len()).collect();
        order.shuffle(&mut rng);
        let mut sentences: Vec<String> = order
            .iter()
            .map(|&i| format!("[E{}] is {}.", local_of[&present[i].0.entity_id], present[i].1.action))
            .collect();
        for i in 0..present.len() {
            for j in i + 1..present.len() {
                if rng.random_bool(RELATION_RATE) {
                    let (mut a, mut b) = (present[i].0.entity_id, present[j].0.entity_id);
                    if rng.random_bool(0.5) {
                        std::mem::swap(&mut a, &mut b);
                    }
                    let rel = RELATIONS.choose(&mut rng).unwrap();
                    sentences.push(format!("[E{}] {rel} [E{}].", local_of[&a], local_of[&b]));
                    relations.push(RelationEdge {
                        frame_index: f,
                        subject_id: a,
                        relation: rel.to_string(),
                        object_id: b,
                    });
                }
            }
        }
        let description = if sentences.is_empty() {
            "Nothing moves in the scene.".to_string()
        } else {
            sentences.join(" ")
        };

        let mut entities = Vec::with_capacity(present.len());
        for (e, ev) in &present {
            let k = e.entity_id as usize;
            let base = lane_box(k, script.len());
            let w = LANE_SPAN / script.len() as f64;
            let observed = jitter(&mut rng, base, 0.03 * w);
            track_boxes[k].insert(f, jitter(&mut rng, base, 0.02 * w));
            let attributes = BTreeMap::from([
                ("appearance".to_string(), e.appearance()),
                ("action".to_string(), ev.action.clone()),
                ("body_pose".to_string(), e.pose.clone()),
            ]);
            entities.push(ObservedEntity {
                local_id: local_of[&e.entity_id],
                attributes: attributes.clone(),
                bbox: observed,
            });
            nodes.push(EntityNode {
                entity_id: e.entity_id,
                frame_index: f,
                attributes,
                bbox: observed,
                description: None,
            });
        }
        entities.sort_by_key(|e| e.local_id);
        let to_global: BTreeMap<u64, EntityId> = local_of.iter().map(|(&g, &l)| (l, g)).collect();
        let source_ref = format!("frame_{f:04}.jpg");
        frames.push(FrameRecord {
            frame_index: f,
            timestamp_s: f as f64,
            description: rewrite_mentions(&description, &to_global),
            source_ref: source_ref.clone(),
        });
        observations.push(FrameObservation {
            frame_index: f,
            description,
            entities,
            source_ref,
        });
    }

    let tracklets: Vec<Tracklet> = track_boxes
        .into_iter()
        .enumerate()
        .map(|(k, boxes)| Tracklet {
            track_id: k as u64,
            boxes,
        })
        .collect();
    let events: BTreeMap<EntityId, Vec<EntityEvent>> = script
        .iter()
        .map(|e| {
            let list = e
                .events
                .iter()
                .map(|ev| EntityEvent {
                    entity_id: e.entity_id,
                    start_frame: ev.start,
                    end_frame: ev.end,
                    summary: format!("{} {}", e.appearance(), ev.action),
                })
                .collect();
            (e.entity_id, list)
        })
        .collect();
    let ground_truth = SpatioTemporalGraph::new(frames, nodes, relations.clone(), events, 1.0);

    let video_id = format!("seed-{seed}");
    let questions = make_questions(&mut rng, &script, &ground_truth, params.n_questions, &video_id);
    Ok(SyntheticWorld {
        seed,
        video_id,
        params,
        script,
        relations,
        observations,
        tracklets,
        ground_truth,
        questions,
    })
}

fn make_questions(
    rng: &mut ChaCha8Rng,
    script: &[ScriptEntity],
    truth: &SpatioTemporalGraph,
    count: usize,
    video_id: &str,
) -> Vec<SynthQuestion> {
    let unused: Vec<String> = unused_actions(script).into_iter().map(String::from).collect();
    let pairs: Vec<(usize, usize)> = script
        .iter()
        .enumerate()
        .flat_map(|(k, e)| (1..e.events.len()).map(move |i| (k, i)))
        .collect();
    // Anchors whose action a same-species entity also performs.
    let confusable = |k: usize, i: usize| {
        let action = &script[k].events[i].action;
        script
            .iter()
            .any(|o| o.entity_id != script[k].entity_id && o.species == script[k].species && o.events.iter().any(|e| e.action == *action))
    };
    let cycle = [Template::Before, Template::After, Template::Count, Template::Global];
    let mut out = Vec::with_capacity(count);
    for q in 0..count {
        let mut template = cycle[q % cycle.len()];
        if pairs.is_empty() && matches!(template, Template::Before | Template::After) {
            template = if q % 2 == 0 { Template::Count } else { Template::Global };
        }
        let item = |question: String, (options, answer_index): (Vec<String>, usize), category, sub: Option<&str>| McqItem {
            video_id: video_id.to_string(),
            question,
            options,
            answer_index,
            category,
            subcategory: sub.map(String::from),
        };
        let question = match template {
            Template::Before | Template::After => {
                let anchor_of = |&(k, i): &(usize, usize)| if template == Template::Before { (k, i) } else { (k, i - 1) };
                let hard: Vec<(usize, usize)> =
                    pairs.iter().copied().filter(|p| { let (k, a) = anchor_of(p); confusable(k, a) }).collect();
                let &(k, i) = if hard.is_empty() { pairs.choose(rng) } else { hard.choose(rng) }.unwrap();
                let e = &script[k];
                let (anchor, target) = if template == Template::Before {
                    (&e.events[i], &e.events[i - 1])
                } else {
                    (&e.events[i - 1], &e.events[i])
                };
                let word = if template == Template::Before { "before" } else { "after" };
                SynthQuestion {
                    item: item(
                        format!("What did the {} do {word} {}?", e.name(), anchor.action),
                        options_with(rng, target.action.clone(), &unused),
                        Category::Temporal,
                        Some(if template == Template::Before { "TP" } else { "TN" }),
                    ),
                    template,
                    entity_id: Some(e.entity_id),
                    anchor: Some((anchor.start, anchor.end)),
                    target: Some((target.start, target.end)),
                }
            }
            Template::Count => {
                let species: Vec<&str> = script.iter().map(|e| e.species.as_str()).collect();
                let s = *species.choose(rng).unwrap();
                let c = species.iter().filter(|x| **x == s).count();
                let plural = SPECIES.iter().find(|(one, _)| *one == s).unwrap().1;
                let others: Vec<String> = (1..=6).filter(|&x| x != c).map(|x| x.to_string()).collect();
                SynthQuestion {
                    item: item(
                        format!("How many {plural} appear?"),
                        options_with(rng, c.to_string(), &others),
                        Category::Descriptive,
                        Some("DC"),
                    ),
                    template,
                    entity_id: None,
                    anchor: None,
                    target: None,
                }
            }
            Template::Global => {
                let mut frames_per_action: BTreeMap<&str, usize> = BTreeMap::new();
                for node in truth.nodes() {
                    *frames_per_action.entry(node.attribute("action")).or_default() += 1;
                }
                let main = ACTIONS
                    .iter()
                    .copied()
                    .max_by_key(|a| (frames_per_action.get(a).copied().unwrap_or(0), std::cmp::Reverse(*a)))
                    .unwrap();
                SynthQuestion {
                    item: item(
                        "What is the main activity in the video?".to_string(),
                        options_with(rng, main.to_string(), &unused),
                        Category::Global,
                        None,
                    ),
                    template,
                    entity_id: None,
                    anchor: None,
                    target: None,
                }
            }
        };
        out.push(question);
    }
    out
}

impl SyntheticWorld {
    /// Renames the video, updating every question.
    pub fn with_video_id(mut self, video_id: &str) -> Self {
        self.video_id = video_id.to_string();
        for q in &mut self.questions {
            q.item.video_id = video_id.to_string();
        }
        self
    }

    pub fn items(&self) -> Vec<McqItem> {
        self.questions.iter().map(|q| q.item.clone()).collect()
    }

    pub fn annotations(&self) -> Vec<LocalizationAnnotation> {
        self.questions.iter().filter_map(SynthQuestion::annotation).collect()
    }

    /// The world's files, keyed by file name.
    pub fn documents(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("observations.jsonl".to_string(), observations_to_jsonl(&self.observations)),
            ("tracklets.json".to_string(), tracklets_to_json(&self.tracklets)),
            ("truth.json".to_string(), serialize(&self.ground_truth)),
            ("mcq.jsonl".to_string(), crate::graph::to_jsonl(&self.items())),
            ("loc.jsonl".to_string(), crate::graph::to_jsonl(&self.annotations())),
            ("oracle.jsonl".to_string(), crate::graph::to_jsonl(&self.questions)),
        ])
    }
}

/// A set of worlds with derived seeds and ids `vid_000`, `vid_001`, ...
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub seed: u64,
    pub videos: Vec<SyntheticWorld>,
}

pub fn synth_corpus(seed: u64, n_videos: usize, params: SynthParams) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let videos = (0..n_videos)
        .map(|i| synth_world(rng.next_u64(), params).map(|w| w.with_video_id(&format!("vid_{i:03}"))))
        .collect::<Result<_>>()?;
    Ok(Corpus { seed, videos })
}

impl Corpus {
    pub fn items(&self) -> Vec<McqItem> {
        self.videos.iter().flat_map(SyntheticWorld::items).collect()
    }

    pub fn annotations(&self) -> Vec<LocalizationAnnotation> {
        self.videos.iter().flat_map(SyntheticWorld::annotations).collect()
    }

    pub fn questions(&self) -> impl Iterator<Item = &SynthQuestion> {
        self.videos.iter().flat_map(|w| w.questions.iter())
    }

    /// Relative path → contents: one directory per video with its inputs and
    /// ground truth, plus corpus-wide `mcq.jsonl`, `loc.jsonl` and `oracle.jsonl`.
    pub fn documents(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        for w in &self.videos {
            for name in ["observations.jsonl", "tracklets.json", "truth.json"] {
                out.insert(format!("{}/{name}", w.video_id), w.documents().remove(name).unwrap());
            }
        }
        out.insert("mcq.jsonl".into(), crate::graph::to_jsonl(&self.items()));
        out.insert("loc.jsonl".into(), crate::graph::to_jsonl(&self.annotations()));
        let oracle: Vec<&SynthQuestion> = self.questions().collect();
        out.insert("oracle.jsonl".into(), crate::graph::to_jsonl(&oracle));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate;

    #[test]
    fn same_seed_same_world() {
        let a = synth_world(7, SynthParams::default()).unwrap();
        let b = synth_world(7, SynthParams::default()).unwrap();
        assert_eq!(a.documents(), b.documents());
        assert_ne!(a.documents(), synth_world(8, SynthParams::default()).unwrap().documents());
    }

    #[test]
    fn minimal_world() {
        let w = synth_world(
            3,
            SynthParams {
                n_frames: 1,
                n_entities: 1,
                n_questions: 1,
            },
        )
        .unwrap();
        assert_eq!(w.ground_truth.nodes().len(), 1);
        assert_eq!(w.ground_truth.all_events().count(), 1);
        assert_eq!(w.questions.len(), 1);
        assert!(validate(&w.ground_truth).is_valid());
    }

    #[test]
    fn zero_parameters_rejected() {
        for p in [(0, 1, 1), (1, 0, 1), (1, 1, 0)] {
            let params = SynthParams {
                n_frames: p.0,
                n_entities: p.1,
                n_questions: p.2,
            };
            assert!(synth_world(1, params).is_err());
        }
    }

    #[test]
    fn ground_truth_is_valid_and_bounded() {
        for seed in 0..30 {
            let w = synth_world(seed, SynthParams::default()).unwrap();
            let report = validate(&w.ground_truth);
            assert!(report.is_valid(), "seed {seed}: {:?}", report.violations);
            assert!(w.ground_truth.all_events().count() <= MAX_EVENTS);
            for q in &w.questions {
                assert!(q.item.answer_index < q.item.options.len());
                let distinct: BTreeSet<_> = q.item.options.iter().collect();
                assert_eq!(distinct.len(), q.item.options.len(), "seed {seed}: {:?}", q.item);
            }
        }
    }

    #[test]
    fn near_duplicate_present() {
        let w = synth_world(11, SynthParams::default()).unwrap();
        assert_eq!(w.script[0].species, w.script[1].species);
        assert_ne!(w.script[0].color, w.script[1].color);
        let a: BTreeSet<_> = w.script[0].events.iter().map(|e| &e.action).collect();
        assert!(w.script[1].events.iter().any(|e| a.contains(&e.action)));
    }

    #[test]
    fn templates_cycle() {
        let w = synth_world(5, SynthParams::default()).unwrap();
        let t: Vec<Template> = w.questions.iter().map(|q| q.template).collect();
        assert_eq!(t, vec![Template::Before, Template::After, Template::Count, Template::Global]);
        let before = &w.questions[0];
        let (a, t) = (before.anchor.unwrap(), before.target.unwrap());
        assert!(t.1 < a.0);
    }

    #[test]
    fn corpus_ids_and_sizes() {
        let c = synth_corpus(42, 3, SynthParams::default()).unwrap();
        let ids: Vec<&str> = c.videos.iter().map(|v| v.video_id.as_str()).collect();
        assert_eq!(ids, ["vid_000", "vid_001", "vid_002"]);
        assert_eq!(c.items().len(), 12);
        assert!(c.items().iter().all(|i| i.video_id.starts_with("vid_")));
    }
}
