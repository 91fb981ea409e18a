//! Sequential plan execution.

use serde::{Deserialize, Serialize};

use super::{ArgValue, FrameSet, Function, ReasoningPlan, ReasoningStep, StepValue, ValueKind};
use crate::backend::{generate_parsed, Backend, PromptBundle, Role};
use crate::error::{RavuError, Result};
use crate::graph::{EntityEvent, FrameIndex, NodeKey, SpatioTemporalGraph};
use crate::index::{self, Candidate, EmbeddingIndex};
use crate::prompts;
use crate::text::{contains_all_content_words, uniform_sample};

/// Everything a step may consult.
#[derive(Clone, Copy)]
pub struct ExecContext<'a> {
    pub graph: &'a SpatioTemporalGraph,
    pub index: &'a EmbeddingIndex,
    pub backend: &'a dyn Backend,
    pub max_retries: usize,
    pub rerank_k: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub function: Function,
    pub value: Option<StepValue>,
    pub frames: Vec<FrameIndex>,
    pub error: Option<String>,
    /// The step degraded to its fallback behaviour.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Execution {
    pub frames: FrameSet,
    pub steps: Vec<StepOutcome>,
    /// Extra facts for the answer prompt, such as counts.
    pub notes: Vec<String>,
    /// No step produced frames and global context was used instead.
    pub global_fallback: bool,
}

struct Produced {
    value: StepValue,
    frames: Vec<FrameIndex>,
    fallback: bool,
}

fn produced(value: StepValue, frames: Vec<FrameIndex>) -> Produced {
    Produced {
        value,
        frames,
        fallback: false,
    }
}

fn global_frames(n: usize, quota: usize) -> Vec<FrameIndex> {
    let all: Vec<FrameIndex> = (0..n).collect();
    uniform_sample(&all, quota)
}

/// Thirds of `0..n`, remainder to the last part; fewer than three frames
/// make every part the whole video.
pub(crate) fn temporal_part(n: usize, part: &str) -> Option<(FrameIndex, FrameIndex)> {
    if n == 0 {
        return None;
    }
    if n < 3 {
        return Some((0, n - 1));
    }
    let third = n / 3;
    match part {
        "beginning" => Some((0, third - 1)),
        "middle" => Some((third, 2 * third - 1)),
        "end" => Some((2 * third, n - 1)),
        _ => None,
    }
}

/// Spreads `quota` frames over the events, earlier events taking the
/// remainder, and samples uniformly inside each.
pub(crate) fn sample_events(events: &[&EntityEvent], quota: usize) -> Vec<FrameIndex> {
    if events.is_empty() || quota == 0 {
        return Vec::new();
    }
    if events.len() > quota {
        let picked = uniform_sample(&(0..events.len()).collect::<Vec<_>>(), quota);
        return picked
            .into_iter()
            .map(|i| {
                let e = events[i];
                e.start_frame + (e.end_frame - e.start_frame) / 2
            })
            .collect();
    }
    let base = quota / events.len();
    let extra = quota % events.len();
    let mut out = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let share = base + usize::from(i < extra);
        let frames: Vec<FrameIndex> = (e.start_frame..=e.end_frame).collect();
        out.extend(uniform_sample(&frames, share));
    }
    out
}

/// Events chosen by a selector relative to time `t`.
pub(crate) fn select_events<'g>(events: &'g [EntityEvent], t: FrameIndex, selector: &str) -> Vec<&'g EntityEvent> {
    if selector == "all" {
        return events.iter().collect();
    }
    let containing = events.iter().position(|e| e.contains(t));
    // Outside every event, "previous" means events ending before t.
    let before = containing.unwrap_or_else(|| events.partition_point(|e| e.end_frame < t));
    let after = containing.map(|c| c + 1).unwrap_or(before);
    match selector.split_once(':') {
        Some(("previous", n)) => {
            let n: usize = n.parse().unwrap_or(0);
            events[before.saturating_sub(n)..before].iter().collect()
        }
        Some(("next", n)) => {
            let n: usize = n.parse().unwrap_or(0);
            events[after..(after + n).min(events.len())].iter().collect()
        }
        _ => containing.map(|c| vec![&events[c]]).unwrap_or_default(),
    }
}

struct Executor<'a> {
    ctx: ExecContext<'a>,
    values: Vec<Option<StepValue>>,
    notes: Vec<String>,
}

impl Executor<'_> {
    fn node_arg(&self, step: &ReasoningStep, name: &str) -> std::result::Result<Option<NodeKey>, String> {
        match step.args.get(name) {
            Some(ArgValue::Ref(n)) => match self.values.get(n - 1) {
                Some(Some(StepValue::NodeRef(k))) => Ok(Some(*k)),
                Some(Some(v)) => Err(format!("${n} is {}, not NodeRef", v.kind())),
                _ => Err(format!("${n} failed")),
            },
            Some(_) => Err(format!("{name} must reference a node")),
            None => Ok(None),
        }
    }

    fn time_arg(&self, step: &ReasoningStep, name: &str) -> std::result::Result<Option<FrameIndex>, String> {
        match step.args.get(name) {
            Some(ArgValue::Ref(n)) => match self.values.get(n - 1) {
                Some(Some(StepValue::TimeIndex(t))) => Ok(Some(*t)),
                Some(Some(v)) => Err(format!("${n} is {}, not TimeIndex", v.kind())),
                _ => Err(format!("${n} failed")),
            },
            Some(ArgValue::Int(t)) => Ok(Some(*t as FrameIndex)),
            Some(ArgValue::Text(_)) => Err(format!("{name} must be a time")),
            None => Ok(None),
        }
    }

    fn run(&mut self, step: &ReasoningStep, quota: usize) -> Result<Produced> {
        let ctx = self.ctx;
        let n = ctx.graph.num_frames();
        let bad = |m: String| RavuError::InvalidArgument(m);
        let text = |name: &str| step.text(name).unwrap_or_default().to_string();
        match step.function {
            Function::LocalizeNode => {
                let got = ctx.index.localize(&text("query"), ctx.rerank_k, ctx.backend, ctx.max_retries)?;
                let key = got.candidate.key();
                Ok(Produced {
                    value: StepValue::NodeRef(key),
                    frames: vec![key.frame_index],
                    fallback: got.fallback,
                })
            }
            Function::IdentifyNode => {
                let candidates: Vec<Candidate> = ctx
                    .graph
                    .entity_ids()
                    .filter_map(|id| ctx.graph.entity_timeline(id).ok()?.first().copied())
                    .map(|node| Candidate {
                        entity_id: node.entity_id,
                        frame_index: node.frame_index,
                        score: 0.0,
                        description: node.description.clone().unwrap_or_default(),
                    })
                    .collect();
                let got = index::rerank(&text("query"), candidates, ctx.backend, ctx.max_retries)?;
                let key = got.candidate.key();
                Ok(Produced {
                    value: StepValue::NodeRef(key),
                    frames: vec![key.frame_index],
                    fallback: got.fallback,
                })
            }
            Function::AnalyzeEvents => {
                let node = self.node_arg(step, "node").map_err(bad)?.expect("checked at parse");
                let events = ctx.graph.events_of(node.entity_id);
                let appear = ctx.graph.appearance_frames(node.entity_id);
                let (Some(&lo), Some(&hi)) = (appear.first(), appear.last()) else {
                    return Err(RavuError::NotFound(format!("entity {}", node.entity_id)));
                };
                let fallback_t = events
                    .iter()
                    .find(|e| e.contains(node.frame_index))
                    .map(|e| e.start_frame)
                    .unwrap_or(node.frame_index);
                let bundle = PromptBundle::new(
                    Role::EventAnalysis,
                    prompts::event_analysis_payload(&text("query"), node.entity_id, events),
                );
                let parsed = generate_parsed(ctx.backend, &bundle, ctx.max_retries, |raw| {
                    raw.trim().parse::<i64>().map_err(|_| format!("expected a frame index, got {:?}", raw.trim()))
                });
                match parsed {
                    Ok(t) => {
                        let clamped = t.clamp(lo as i64, hi as i64) as FrameIndex;
                        Ok(Produced {
                            value: StepValue::TimeIndex(clamped),
                            frames: Vec::new(),
                            fallback: clamped as i64 != t,
                        })
                    }
                    Err(RavuError::MalformedResponse { .. }) => Ok(Produced {
                        value: StepValue::TimeIndex(fallback_t),
                        frames: Vec::new(),
                        fallback: true,
                    }),
                    Err(e) => Err(e),
                }
            }
            Function::SampleEntityEvents => {
                let node = self.node_arg(step, "node").map_err(bad)?.expect("checked at parse");
                let t = self.time_arg(step, "sample_start_time").map_err(bad)?.unwrap_or(node.frame_index);
                let events = ctx.graph.events_of(node.entity_id);
                let chosen = select_events(events, t, &text("events_to_sample"));
                let frames: Vec<FrameIndex> = sample_events(&chosen, quota).into_iter().filter(|&f| f < n).collect();
                Ok(produced(StepValue::FrameSet(frames.iter().copied().collect()), frames))
            }
            Function::ExtractTemporalPart => {
                let (start, end) = temporal_part(n, &text("target_part"))
                    .ok_or_else(|| bad(format!("no {} part in a {n}-frame video", text("target_part"))))?;
                let frames = uniform_sample(&(start..=end).collect::<Vec<_>>(), quota);
                Ok(produced(StepValue::Segment { start, end }, frames))
            }
            Function::CountNodes => {
                let only = self.node_arg(step, "node").map_err(bad)?.map(|k| k.entity_id);
                let query = step.text("node_query");
                let condition = step.text("event_condition");
                let count = ctx
                    .graph
                    .entity_ids()
                    .filter(|id| only.is_none_or(|o| o == *id))
                    .filter(|&id| {
                        query.is_none_or(|q| {
                            ctx.graph.entity_timeline(id).unwrap_or_default().iter().any(|node| {
                                contains_all_content_words(node.description.as_deref().unwrap_or(""), q)
                            })
                        })
                    })
                    .filter(|&id| {
                        condition.is_none_or(|c| {
                            ctx.graph.events_of(id).iter().any(|e| contains_all_content_words(&e.summary, c))
                        })
                    })
                    .count();
                self.notes.push(format!("count_nodes result: {count}"));
                Ok(produced(StepValue::Count(count), Vec::new()))
            }
            Function::GetGlobalContext => {
                let frames = global_frames(n, quota);
                Ok(produced(StepValue::FrameSet(frames.iter().copied().collect()), frames))
            }
        }
    }
}

fn failed_reference(step: &ReasoningStep, values: &[Option<StepValue>]) -> Option<usize> {
    step.args.values().find_map(|v| match v {
        ArgValue::Ref(n) if values.get(n - 1).is_none_or(Option::is_none) => Some(*n),
        _ => None,
    })
}

/// Runs the steps in order. Step failures are recorded and their dependents
/// skipped; only blocked content aborts. The result is sorted, duplicate-free
/// and at most `budget` frames.
pub fn execute(plan: &ReasoningPlan, ctx: ExecContext<'_>, budget: usize) -> Result<Execution> {
    if plan.steps.is_empty() {
        return Err(RavuError::InvalidArgument("plan has no steps".into()));
    }
    if budget == 0 {
        return Err(RavuError::InvalidArgument("budget must be at least 1".into()));
    }
    let mut ex = Executor {
        ctx,
        values: Vec::with_capacity(plan.steps.len()),
        notes: Vec::new(),
    };
    let mut outcomes = Vec::with_capacity(plan.steps.len());
    let mut pool: Vec<FrameIndex> = Vec::new();
    let mut producers_left = plan.steps.iter().filter(|s| s.function.produces_frames()).count();
    for (i, step) in plan.steps.iter().enumerate() {
        let quota = if step.function.produces_frames() {
            let have = pool.iter().copied().collect::<FrameSet>().len();
            let q = budget.saturating_sub(have).div_ceil(producers_left.max(1)).max(1);
            producers_left -= 1;
            q
        } else {
            0
        };
        let result = match failed_reference(step, &ex.values) {
            Some(n) => Err(RavuError::InvalidArgument(format!("depends on failed step ${n}"))),
            None => ex.run(step, quota),
        };
        match result {
            Ok(p) => {
                debug_assert_eq!(p.value.kind(), expected_kind(step));
                pool.extend(&p.frames);
                ex.values.push(Some(p.value.clone()));
                outcomes.push(StepOutcome {
                    function: step.function,
                    value: Some(p.value),
                    frames: p.frames,
                    error: None,
                    fallback: p.fallback,
                });
            }
            Err(e) if e.is_blocked() => return Err(e),
            Err(e) => {
                tracing::warn!(step = i + 1, function = %step.function, error = %e, "step failed");
                ex.values.push(None);
                outcomes.push(StepOutcome {
                    function: step.function,
                    value: None,
                    frames: Vec::new(),
                    error: Some(e.to_string()),
                    fallback: false,
                });
            }
        }
    }
    let n = ctx.graph.num_frames();
    let mut frames: Vec<FrameIndex> = pool.into_iter().filter(|&f| f < n).collect::<FrameSet>().into_vec();
    let global_fallback = frames.is_empty() && n > 0;
    if global_fallback {
        frames = global_frames(n, budget);
    }
    let frames: FrameSet = uniform_sample(&frames, budget).into_iter().collect();
    Ok(Execution {
        frames,
        steps: outcomes,
        notes: ex.notes,
        global_fallback,
    })
}

fn expected_kind(step: &ReasoningStep) -> ValueKind {
    step.function.output()
}
