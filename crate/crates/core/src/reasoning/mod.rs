//! Reasoning plans: a small line-oriented DSL of retrieval functions, the
//! backend breakdown that writes plans, and the executor that runs them
//! against a graph to pick frames.

mod breakdown;
mod dsl;
mod exec;
mod hierarchical;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{FrameIndex, NodeKey};

pub use breakdown::{breakdown, Breakdown, ExampleLibrary, PlanExample, QuestionType};
pub use dsl::{parse_plan, render_plan};
pub use exec::{execute, Execution, ExecContext, StepOutcome};
pub use hierarchical::{hierarchical_retrieve, Hierarchical};

pub const DEFAULT_BUDGET: usize = 5;
pub const DEFAULT_GLOBAL_BUDGET: usize = 10;
pub const DEFAULT_PER_EVENT_CANDIDATES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Function {
    LocalizeNode,
    IdentifyNode,
    AnalyzeEvents,
    SampleEntityEvents,
    ExtractTemporalPart,
    CountNodes,
    GetGlobalContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgType {
    Text,
    Int,
    /// Reference to a step producing a node.
    Node,
    /// Reference to a step producing a time index.
    Time,
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub name: &'static str,
    pub accepts: &'static [ArgType],
    pub required: bool,
}

const fn param(name: &'static str, accepts: &'static [ArgType], required: bool) -> Param {
    Param {
        name,
        accepts,
        required,
    }
}

impl Function {
    pub const ALL: [Function; 7] = [
        Function::LocalizeNode,
        Function::IdentifyNode,
        Function::AnalyzeEvents,
        Function::SampleEntityEvents,
        Function::ExtractTemporalPart,
        Function::CountNodes,
        Function::GetGlobalContext,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Function::LocalizeNode => "localize_node",
            Function::IdentifyNode => "identify_node",
            Function::AnalyzeEvents => "analyze_events",
            Function::SampleEntityEvents => "sample_entity_events",
            Function::ExtractTemporalPart => "extract_temporal_part",
            Function::CountNodes => "count_nodes",
            Function::GetGlobalContext => "get_global_context",
        }
    }

    /// Accepts `analyze_entity_events` as a second spelling.
    pub fn from_name(name: &str) -> Option<Function> {
        if name == "analyze_entity_events" {
            return Some(Function::AnalyzeEvents);
        }
        Function::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Parameters in canonical order.
    pub fn params(self) -> &'static [Param] {
        use ArgType::*;
        const QUERY: [Param; 1] = [param("query", &[Text], true)];
        const ANALYZE: [Param; 2] = [param("query", &[Text], true), param("node", &[Node], true)];
        const SAMPLE: [Param; 3] = [
            param("node", &[Node], true),
            param("sample_start_time", &[Time, Int], false),
            param("events_to_sample", &[Text], true),
        ];
        const PART: [Param; 1] = [param("target_part", &[Text], true)];
        const COUNT: [Param; 3] = [
            param("node_query", &[Text], false),
            param("node", &[Node], false),
            param("event_condition", &[Text], false),
        ];
        match self {
            Function::LocalizeNode | Function::IdentifyNode => &QUERY,
            Function::AnalyzeEvents => &ANALYZE,
            Function::SampleEntityEvents => &SAMPLE,
            Function::ExtractTemporalPart => &PART,
            Function::CountNodes => &COUNT,
            Function::GetGlobalContext => &[],
        }
    }

    pub fn output(self) -> ValueKind {
        match self {
            Function::LocalizeNode | Function::IdentifyNode => ValueKind::NodeRef,
            Function::AnalyzeEvents => ValueKind::TimeIndex,
            Function::SampleEntityEvents | Function::GetGlobalContext => ValueKind::FrameSet,
            Function::ExtractTemporalPart => ValueKind::Segment,
            Function::CountNodes => ValueKind::Count,
        }
    }

    /// Whether the step adds frames to the retrieved set.
    pub fn produces_frames(self) -> bool {
        !matches!(self, Function::AnalyzeEvents | Function::CountNodes)
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    NodeRef,
    TimeIndex,
    FrameSet,
    Count,
    Segment,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::NodeRef => "NodeRef",
            ValueKind::TimeIndex => "TimeIndex",
            ValueKind::FrameSet => "FrameSet",
            ValueKind::Count => "Count",
            ValueKind::Segment => "Segment",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArgValue {
    Text(String),
    Int(u64),
    /// 1-based step reference (`$n`).
    Ref(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningStep {
    pub function: Function,
    pub args: BTreeMap<String, ArgValue>,
}

impl ReasoningStep {
    pub fn new(function: Function) -> Self {
        ReasoningStep {
            function,
            args: BTreeMap::new(),
        }
    }

    pub fn arg(mut self, name: &str, value: ArgValue) -> Self {
        self.args.insert(name.to_string(), value);
        self
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        match self.args.get(name) {
            Some(ArgValue::Text(s)) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReasoningPlan {
    pub question: String,
    pub analysis: String,
    pub steps: Vec<ReasoningStep>,
}

impl ReasoningPlan {
    pub fn global() -> Self {
        ReasoningPlan {
            question: String::new(),
            analysis: String::new(),
            steps: vec![ReasoningStep::new(Function::GetGlobalContext)],
        }
    }

    /// Query of the first `localize_node` step, if any.
    pub fn grounding_phrase(&self) -> Option<&str> {
        self.steps
            .iter()
            .find(|s| s.function == Function::LocalizeNode)
            .and_then(|s| s.text("query"))
    }
}

/// Sorted, duplicate-free frame indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameSet(Vec<FrameIndex>);

impl FrameSet {
    pub fn as_slice(&self) -> &[FrameIndex] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, frame: FrameIndex) -> bool {
        self.0.binary_search(&frame).is_ok()
    }

    pub fn into_vec(self) -> Vec<FrameIndex> {
        self.0
    }
}

impl FromIterator<FrameIndex> for FrameSet {
    fn from_iter<I: IntoIterator<Item = FrameIndex>>(iter: I) -> Self {
        let mut v: Vec<FrameIndex> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        FrameSet(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepValue {
    NodeRef(NodeKey),
    TimeIndex(FrameIndex),
    FrameSet(FrameSet),
    Count(usize),
    Segment { start: FrameIndex, end: FrameIndex },
}

impl StepValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            StepValue::NodeRef(_) => ValueKind::NodeRef,
            StepValue::TimeIndex(_) => ValueKind::TimeIndex,
            StepValue::FrameSet(_) => ValueKind::FrameSet,
            StepValue::Count(_) => ValueKind::Count,
            StepValue::Segment { .. } => ValueKind::Segment,
        }
    }
}
