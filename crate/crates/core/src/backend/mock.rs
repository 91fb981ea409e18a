//! Deterministic offline backend. Every role has a fixed, documented rule so
//! the whole pipeline runs and can be checked without a model.

use std::sync::LazyLock;

use regex::Regex;

use super::{Backend, EmbeddingVector, PromptBundle, Role};
use crate::error::{RavuError, Result};
use crate::ingest::mentions;
use crate::prompts;
use crate::text::{self, contains_all_content_words, content_words, word_overlap, word_set, words};

pub const DEFAULT_MOCK_DIM: usize = 256;

/// Payload marker that makes the mock refuse, like a provider safety filter.
pub const BLOCK_MARKER: &str = "[BLOCK]";

#[derive(Debug, Clone)]
pub struct MockBackend {
    dim: usize,
    seed: u64,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend::new(DEFAULT_MOCK_DIM, 0)
    }
}

impl MockBackend {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        MockBackend { dim, seed }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl Backend for MockBackend {
    fn generate(&self, bundle: &PromptBundle) -> Result<String> {
        if bundle.texts().any(|t| t.contains(BLOCK_MARKER)) {
            return Err(RavuError::BlockedContent);
        }
        let p = bundle.user_payload.as_str();
        Ok(match bundle.role {
            Role::FrameGraph => frame_graph(p),
            Role::NodeDescription => node_description(p),
            Role::EventSegmentation => event_segmentation(p),
            Role::Rerank => rerank(p),
            Role::EventAnalysis => event_analysis(p),
            Role::Breakdown => breakdown(&prompts::read_breakdown(p)),
            Role::EventSelect => event_select(p),
            Role::Answer => {
                let frames: Vec<&str> = bundle
                    .frame_refs
                    .iter()
                    .flatten()
                    .map(|f| f.description.as_str())
                    .collect();
                answer(p, &frames)
            }
        })
    }

    /// Sum of per-word pseudo-random vectors, L2-normalized. Words are hashed
    /// with the configured seed and expanded with splitmix64.
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut acc = vec![0.0f64; self.dim];
        for w in words(text) {
            let mut state = fnv1a(w.as_bytes()) ^ self.seed;
            for v in acc.iter_mut() {
                let r = splitmix64(&mut state);
                *v += (r >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
            }
        }
        Ok(EmbeddingVector::normalized(&acc))
    }

    fn dimension(&self) -> usize {
        self.dim
    }
}

/// `[Ea] words [Eb]` inside one sentence becomes `a|words|b`.
fn frame_graph(payload: &str) -> String {
    static PAIR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[E\d+\]").unwrap());
    let description = prompts::read_frame_description(payload);
    let mut out = String::new();
    for sentence in description.split(['.', '!', '?', ';']) {
        let found: Vec<_> = PAIR.find_iter(sentence).collect();
        for pair in found.windows(2) {
            let between = &sentence[pair[0].end()..pair[1].start()];
            let relation = words(between).join(" ");
            let (Some(&a), Some(&b)) = (mentions(pair[0].as_str()).first(), mentions(pair[1].as_str()).first())
            else {
                continue;
            };
            if !relation.is_empty() {
                out.push_str(&format!("{a}|{relation}|{b}\n"));
            }
        }
    }
    out
}

fn node_description(payload: &str) -> String {
    let Some(req) = prompts::read_node_description(payload) else {
        return String::new();
    };
    let relations: Vec<String> = req
        .relations
        .iter()
        .map(|(s, rel, o)| {
            if *s == req.entity_id {
                format!("{rel} entity {o}")
            } else {
                format!("entity {s} {rel}")
            }
        })
        .collect();
    format!(
        "entity {}: {}; {}; relations: {}",
        req.entity_id,
        req.appearance,
        req.action,
        relations.join(", ")
    )
    .trim_end()
    .to_string()
}

/// New event wherever the action changes or a frame is skipped.
fn event_segmentation(payload: &str) -> String {
    let mut rows = prompts::read_event_segmentation(payload);
    rows.sort_by_key(|r| r.0);
    let mut out = String::new();
    let mut i = 0;
    while i < rows.len() {
        let mut j = i;
        while j + 1 < rows.len() && rows[j + 1].0 == rows[j].0 + 1 && rows[j + 1].1 == rows[i].1 {
            j += 1;
        }
        let summary = if rows[i].2.trim().is_empty() {
            rows[i].1.clone()
        } else {
            rows[i].2.clone()
        };
        out.push_str(&format!("{}|{}|{}\n", rows[i].0, rows[j].0, summary));
        i = j + 1;
    }
    out
}

/// Candidate with the most grounding words; ties go to the lower index.
fn rerank(payload: &str) -> String {
    let (grounding, candidates) = prompts::read_rerank(payload);
    best_by_overlap(&grounding, &candidates).to_string()
}

fn best_by_overlap(query: &str, candidates: &[String]) -> usize {
    let mut best = (0usize, 0usize);
    for (i, c) in candidates.iter().enumerate() {
        let score = word_overlap(query, c);
        if score > best.1 {
            best = (i, score);
        }
    }
    best.0
}

/// Start of the first event whose summary holds every content word of the
/// query, else the entity's first frame.
fn event_analysis(payload: &str) -> String {
    let (query, events) = prompts::read_event_analysis(payload);
    events
        .iter()
        .find(|(_, _, summary)| contains_all_content_words(summary, &query))
        .or(events.first())
        .map(|(start, _, _)| start.to_string())
        .unwrap_or_default()
}

/// The `top` candidates sharing the most content words with the question,
/// stable on ties.
fn event_select(payload: &str) -> String {
    let (question, top, candidates) = prompts::read_event_select(payload);
    let q = content_words(&question);
    let mut scored: Vec<(usize, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let have = word_set(c);
            (i, q.iter().filter(|w| have.contains(*w)).count())
        })
        .collect();
    scored.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
        .iter()
        .take(top)
        .map(|(i, _)| i.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

/// Option whose content words occur most often in the frame descriptions
/// and notes; ties go to the lower index.
fn answer(payload: &str, frames: &[&str]) -> String {
    let (options, notes) = prompts::read_answer(payload);
    let mut context = frames.join(" ");
    for n in &notes {
        context.push(' ');
        context.push_str(n);
    }
    let have = word_set(&context);
    let mut best = (0usize, 0usize);
    for (i, o) in options.iter().enumerate() {
        let score = content_words(o).iter().filter(|w| have.contains(*w)).count();
        if score > best.1 {
            best = (i, score);
        }
    }
    best.0.to_string()
}

const ARTICLES: [&str; 3] = ["the", "a", "an"];
const PREPOSITIONS: [&str; 7] = ["in", "on", "with", "at", "near", "wearing", "holding"];

fn strip_articles(phrase: &str) -> String {
    phrase
        .split_whitespace()
        .filter(|w| !ARTICLES.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Head noun of an entity phrase: the word before the first preposition, or
/// the last word.
fn head_word(phrase: &str) -> String {
    let ws: Vec<&str> = phrase.split_whitespace().collect();
    match ws.iter().position(|w| PREPOSITIONS.contains(w)) {
        Some(i) if i > 0 => ws[i - 1].to_string(),
        _ => ws.last().copied().unwrap_or("entity").to_string(),
    }
}

fn singular(word: &str) -> String {
    match word {
        "men" => "man".into(),
        "women" => "woman".into(),
        "people" => "person".into(),
        "children" => "child".into(),
        w if w.ends_with("sses") => w.trim_end_matches("es").into(),
        w if w.ends_with('s') && !w.ends_with("ss") => w[..w.len() - 1].into(),
        w => w.into(),
    }
}

fn singular_phrase(phrase: &str) -> String {
    let mut ws: Vec<String> = strip_articles(phrase).split_whitespace().map(String::from).collect();
    if let Some(last) = ws.last_mut() {
        *last = singular(last);
    }
    ws.join(" ")
}

type BuildFn = fn(&regex::Captures<'_>) -> String;

struct Template {
    pattern: &'static str,
    build: BuildFn,
}

static TEMPLATES: LazyLock<Vec<(Regex, BuildFn)>> = LazyLock::new(|| {
    let table: Vec<Template> = vec![
        Template {
            pattern: r"^what did (.+?) do before (.+)$",
            build: |c| {
                let x = strip_articles(&c[1]);
                let y = c[2].trim();
                format!(
                    "# analysis: temporal question about what happened before an event; localize the event, find when it started, sample the preceding event\n\
                     localize_node(query=\"{x} {y}\")\n\
                     analyze_events(query=\"when did the {h} start {y}\", node=$1)\n\
                     sample_entity_events(node=$1, sample_start_time=$2, events_to_sample=\"previous:1\")\n",
                    h = head_word(&x)
                )
            },
        },
        Template {
            pattern: r"^what did (.+?) do after (.+)$",
            build: |c| {
                let x = strip_articles(&c[1]);
                let y = c[2].trim();
                format!(
                    "# analysis: temporal question about what happened after an event; localize the event, find when it happened, sample the following event\n\
                     localize_node(query=\"{x} {y}\")\n\
                     analyze_events(query=\"when did the {h} finish {y}\", node=$1)\n\
                     sample_entity_events(node=$1, sample_start_time=$2, events_to_sample=\"next:1\")\n",
                    h = head_word(&x)
                )
            },
        },
        Template {
            pattern: r"^why (?:did|does|is|was) (.+)$",
            build: |c| {
                format!(
                    "# analysis: causal question; localize the event and look at what surrounds it\n\
                     localize_node(query=\"{}\")\n\
                     sample_entity_events(node=$1, events_to_sample=\"current\")\n",
                    strip_articles(&c[1])
                )
            },
        },
        Template {
            pattern: r"^how many (.+?) (?:appear|are there|can be seen)(?: in (?:the|this) video)?$",
            build: |c| {
                format!(
                    "# analysis: counting question over distinct entities\n\
                     count_nodes(node_query=\"{}\")\n",
                    singular_phrase(&c[1])
                )
            },
        },
        Template {
            pattern: r"^how many (.+?) (?:were|are|was|is) (.+?)(?: in (?:the|this) video)?$",
            build: |c| {
                format!(
                    "# analysis: counting question over entities satisfying an event condition\n\
                     count_nodes(node_query=\"{}\", event_condition=\"{}\")\n",
                    singular_phrase(&c[1]),
                    c[2].trim()
                )
            },
        },
        Template {
            pattern: r"(beginning|start|middle|end) of (?:the|this) video",
            build: |c| {
                let part = if &c[1] == "start" { "beginning" } else { &c[1] };
                format!(
                    "# analysis: question about one part of the video\n\
                     extract_temporal_part(target_part=\"{part}\")\n"
                )
            },
        },
        Template {
            pattern: r"^(?:who is|what is) (.+?)(?: doing)?$",
            build: |c| {
                format!(
                    "# analysis: descriptive question about a named entity; identify it and look at all its events\n\
                     identify_node(query=\"{}\")\n\
                     sample_entity_events(node=$1, events_to_sample=\"all\")\n",
                    strip_articles(&c[1])
                )
            },
        },
    ];
    table
        .into_iter()
        .map(|t| (Regex::new(t.pattern).expect("template pattern"), t.build))
        .collect()
});

const GLOBAL_PLAN: &str = "# analysis: global question about the whole video\nget_global_context()\n";

/// Plan from the first matching question template, else global context.
fn breakdown(question: &str) -> String {
    let q = text::one_line(question)
        .trim()
        .trim_end_matches(['?', '.', '!'])
        .to_lowercase();
    if ["overall", "main", "summar", "throughout", "whole video"]
        .iter()
        .any(|k| q.contains(k))
    {
        return GLOBAL_PLAN.to_string();
    }
    TEMPLATES
        .iter()
        .find_map(|(re, build)| re.captures(&q).map(|c| build(&c)))
        .unwrap_or_else(|| GLOBAL_PLAN.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{cosine, FrameRef};

    fn gen(role: Role, payload: String) -> String {
        MockBackend::default()
            .generate(&PromptBundle::new(role, payload))
            .unwrap()
    }

    #[test]
    fn rerank_picks_max_overlap() {
        let p = prompts::rerank_payload(
            "dog running up the stairs",
            &["dog sleeping".into(), "dog running up the stairs".into()],
        );
        assert_eq!(gen(Role::Rerank, p), "1");
        let p = prompts::rerank_payload("anything", &["only".into()]);
        assert_eq!(gen(Role::Rerank, p), "0");
    }

    #[test]
    fn rerank_tie_goes_to_lowest_index() {
        let p = prompts::rerank_payload("cat", &["a cat".into(), "the cat".into()]);
        assert_eq!(gen(Role::Rerank, p), "0");
    }

    #[test]
    fn embedding_is_deterministic_and_unit() {
        let m = MockBackend::default();
        let a = m.embed("red dog").unwrap();
        assert_eq!(a, m.embed("red dog").unwrap());
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert!((cosine(&a.0, &a.0) - 1.0).abs() < 1e-6);
        assert_eq!(m.embed("").unwrap().norm(), 0.0);
        assert_eq!(m.embed(" ,. ").unwrap(), EmbeddingVector::zeros(DEFAULT_MOCK_DIM));
    }

    #[test]
    fn embedding_tracks_word_overlap() {
        let m = MockBackend::default();
        let red_dog = m.embed("red dog").unwrap();
        let park = m.embed("red dog park").unwrap();
        let cat = m.embed("blue cat").unwrap();
        assert!(cosine(&red_dog.0, &park.0) > cosine(&red_dog.0, &cat.0));
    }

    #[test]
    fn seed_changes_embedding() {
        let a = MockBackend::new(64, 1).embed("dog").unwrap();
        let b = MockBackend::new(64, 2).embed("dog").unwrap();
        assert_ne!(a, b);
        assert_eq!(a.dim(), 64);
    }

    #[test]
    fn frame_graph_extracts_pairs() {
        let p = "frame: 0\ndescription: [E0] chases [E1] in the park. [E2] sleeps.\nentities:\n";
        assert_eq!(gen(Role::FrameGraph, p.into()), "0|chases|1\n");
    }

    #[test]
    fn node_description_template() {
        let p = "entity: 0\nframe: 0\nappearance: brown dog\naction: running\nbody_pose: \nrelations:\n0|on|1\n";
        assert_eq!(
            gen(Role::NodeDescription, p.into()),
            "entity 0: brown dog; running; relations: on entity 1"
        );
        let p = "entity: 1\nframe: 0\nappearance: stairs\naction: \nbody_pose: \nrelations:\n0|on|1\n";
        assert_eq!(gen(Role::NodeDescription, p.into()), "entity 1: stairs; ; relations: entity 0 on");
    }

    #[test]
    fn segmentation_splits_on_action_and_gap() {
        let p = "entity: 0\nnodes:\n0|sit|a\n1|sit|b\n2|walk|c\n4|walk|d\n";
        assert_eq!(gen(Role::EventSegmentation, p.into()), "0|1|a\n2|2|c\n4|4|d\n");
    }

    #[test]
    fn event_analysis_matches_summary() {
        let p = "query: when did the man start sitting\nentity: 0\nevents:\n0|2|man walking\n3|5|man sitting\n";
        assert_eq!(gen(Role::EventAnalysis, p.into()), "3");
        let p = "query: when did the cat jump\nentity: 0\nevents:\n4|5|man walking\n";
        assert_eq!(gen(Role::EventAnalysis, p.into()), "4");
    }

    #[test]
    fn breakdown_before_template() {
        let plan = breakdown("What did the man on the stage do before sitting?");
        let steps: Vec<&str> = plan.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(
            steps,
            vec![
                "localize_node(query=\"man on stage sitting\")",
                "analyze_events(query=\"when did the man start sitting\", node=$1)",
                "sample_entity_events(node=$1, sample_start_time=$2, events_to_sample=\"previous:1\")",
            ]
        );
    }

    #[test]
    fn breakdown_count_and_fallback() {
        assert!(breakdown("How many dogs appear?").contains("count_nodes(node_query=\"dog\")"));
        assert!(breakdown("How many men were sitting?")
            .contains("count_nodes(node_query=\"man\", event_condition=\"sitting\")"));
        assert_eq!(breakdown("Describe the weather please"), GLOBAL_PLAN);
        assert!(breakdown("What happens at the end of the video?").contains("target_part=\"end\""));
    }

    #[test]
    fn answer_uses_frame_overlap() {
        let payload = prompts::answer_payload(
            "what did the dog do?",
            &["sleeping".into(), "running up stairs".into(), "eating".into()],
            &[],
        );
        let bundle = PromptBundle::new(Role::Answer, payload)
            .with_frames(vec![FrameRef {
                frame_index: 0,
                source_ref: String::new(),
                description: "[E0] is running up the stairs.".into(),
            }])
            .unwrap();
        assert_eq!(MockBackend::default().generate(&bundle).unwrap(), "1");
    }

    #[test]
    fn block_marker_refuses() {
        let bundle = PromptBundle::new(Role::Breakdown, "question: [BLOCK] why?");
        assert!(matches!(
            MockBackend::default().generate(&bundle),
            Err(RavuError::BlockedContent)
        ));
    }

    #[test]
    fn event_select_ranks_by_overlap() {
        let p = prompts::event_select_payload(
            "what is the dog eating",
            2,
            &["cat sleeping".into(), "dog eating bone".into(), "dog barking".into()],
        );
        assert_eq!(gen(Role::EventSelect, p), "1,2");
    }
}
