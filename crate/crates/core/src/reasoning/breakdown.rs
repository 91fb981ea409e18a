//! Question breakdown: the backend writes a plan, guided by worked examples.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{parse_plan, render_plan, ReasoningPlan};
use crate::backend::{generate_parsed, Backend, PromptBundle, Role};
use crate::error::{RavuError, Result};
use crate::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Causal,
    Temporal,
    Descriptive,
    Global,
}

impl QuestionType {
    pub const ALL: [QuestionType; 4] = [
        QuestionType::Causal,
        QuestionType::Temporal,
        QuestionType::Descriptive,
        QuestionType::Global,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Causal => "causal",
            QuestionType::Temporal => "temporal",
            QuestionType::Descriptive => "descriptive",
            QuestionType::Global => "global",
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QuestionType {
    type Err = RavuError;

    fn from_str(s: &str) -> Result<Self> {
        QuestionType::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| RavuError::InvalidArgument(format!("unknown question type {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanExample {
    pub question_type: QuestionType,
    pub plan: ReasoningPlan,
}

impl PlanExample {
    /// Example file: `question:` and `category:` lines followed by plan text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut question = None;
        let mut question_type = None;
        let mut body = String::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(q) = line.strip_prefix("question:") {
                question = Some(q.trim().to_string());
            } else if let Some(c) = line.strip_prefix("category:") {
                question_type = Some(c.trim().parse().map_err(|_| RavuError::parse(i + 1, "category", c.trim()))?);
            } else {
                // Keep numbering aligned with the file for plan errors.
                body.push_str(line);
            }
            body.push('\n');
        }
        let mut plan = parse_plan(&body)?;
        plan.question = question.ok_or_else(|| RavuError::parse(1, "question", "missing question line"))?;
        Ok(PlanExample {
            question_type: question_type.ok_or_else(|| RavuError::parse(1, "category", "missing category line"))?,
            plan,
        })
    }

    pub fn render(&self) -> String {
        let plan = ReasoningPlan {
            question: String::new(),
            ..self.plan.clone()
        };
        format!(
            "question: {}\ncategory: {}\n{}",
            self.plan.question,
            self.question_type,
            render_plan(&plan)
        )
    }
}

/// In-context examples for the breakdown prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExampleLibrary {
    examples: Vec<PlanExample>,
}

const BUILTIN: [(&str, &str); 8] = [
    ("temporal_before", include_str!("../../assets/examples/temporal_before.txt")),
    ("temporal_after", include_str!("../../assets/examples/temporal_after.txt")),
    ("causal_why_girl", include_str!("../../assets/examples/causal_why_girl.txt")),
    ("causal_why_boy", include_str!("../../assets/examples/causal_why_boy.txt")),
    ("descriptive_who", include_str!("../../assets/examples/descriptive_who.txt")),
    ("descriptive_count", include_str!("../../assets/examples/descriptive_count.txt")),
    (
        "descriptive_count_condition",
        include_str!("../../assets/examples/descriptive_count_condition.txt"),
    ),
    ("global_summary", include_str!("../../assets/examples/global_summary.txt")),
];

impl ExampleLibrary {
    pub fn new(examples: Vec<PlanExample>) -> Result<Self> {
        if examples.is_empty() {
            return Err(RavuError::InvalidArgument("example library is empty".into()));
        }
        Ok(ExampleLibrary { examples })
    }

    /// The examples shipped with the crate.
    pub fn builtin() -> Self {
        let examples = BUILTIN
            .iter()
            .map(|(name, text)| PlanExample::parse(text).unwrap_or_else(|e| panic!("bundled example {name}: {e}")))
            .collect();
        ExampleLibrary { examples }
    }

    /// Every `*.txt` file of a directory, in file-name order.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        let examples = paths
            .iter()
            .map(|p| {
                let text = std::fs::read_to_string(p)?;
                PlanExample::parse(&text).map_err(|e| e.context(p.display().to_string()))
            })
            .collect::<Result<_>>()?;
        ExampleLibrary::new(examples)
    }

    pub fn examples(&self) -> &[PlanExample] {
        &self.examples
    }

    pub fn count(&self, question_type: QuestionType) -> usize {
        self.examples.iter().filter(|e| e.question_type == question_type).count()
    }

    pub fn render(&self) -> String {
        self.examples.iter().map(|e| e.render() + "\n").collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Breakdown {
    pub plan: ReasoningPlan,
    /// The backend never produced a parseable plan; global context is used.
    pub fallback: bool,
}

/// Asks the backend for a plan. Unparseable output falls back to a single
/// `get_global_context()` step; blocked content and provider errors propagate.
pub fn breakdown(
    question: &str,
    library: &ExampleLibrary,
    backend: &dyn Backend,
    max_retries: usize,
) -> Result<Breakdown> {
    let bundle = PromptBundle::new(Role::Breakdown, prompts::breakdown_payload(question, &library.render()));
    match generate_parsed(backend, &bundle, max_retries, |raw| parse_plan(raw).map_err(|e| e.to_string())) {
        Ok(mut plan) => {
            plan.question = question.to_string();
            Ok(Breakdown { plan, fallback: false })
        }
        Err(RavuError::MalformedResponse { detail, .. }) => {
            tracing::warn!(%detail, "breakdown fell back to global context");
            Ok(Breakdown {
                plan: ReasoningPlan {
                    question: question.to_string(),
                    ..ReasoningPlan::global()
                },
                fallback: true,
            })
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{EmbeddingVector, MockBackend};
    use crate::reasoning::Function;

    struct Says(&'static str);

    impl Backend for Says {
        fn generate(&self, _b: &PromptBundle) -> Result<String> {
            Ok(self.0.into())
        }
        fn embed(&self, _t: &str) -> Result<EmbeddingVector> {
            Ok(EmbeddingVector(vec![1.0]))
        }
        fn dimension(&self) -> usize {
            1
        }
    }

    #[test]
    fn builtin_library_covers_types() {
        let lib = ExampleLibrary::builtin();
        for t in [QuestionType::Temporal, QuestionType::Descriptive, QuestionType::Causal] {
            assert!(lib.count(t) >= 2, "{t}");
        }
        for e in lib.examples() {
            assert_eq!(PlanExample::parse(&e.render()).unwrap(), *e);
        }
    }

    #[test]
    fn library_from_dir() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/examples");
        assert_eq!(ExampleLibrary::from_dir(&dir).unwrap().examples().len(), BUILTIN.len());
        assert!(ExampleLibrary::new(vec![]).is_err());
    }

    #[test]
    fn mock_before_plan() {
        let b = breakdown(
            "What did the man on the stage do before sitting?",
            &ExampleLibrary::builtin(),
            &MockBackend::default(),
            2,
        )
        .unwrap();
        assert!(!b.fallback);
        let expected = parse_plan(
            "localize_node(query=\"man on stage sitting\")\n\
             analyze_events(query=\"when did the man start sitting\", node=$1)\n\
             sample_entity_events(node=$1, sample_start_time=$2, events_to_sample=\"previous:1\")",
        )
        .unwrap();
        assert_eq!(b.plan.steps, expected.steps);
        assert_eq!(b.plan.question, "What did the man on the stage do before sitting?");
    }

    #[test]
    fn mock_count_plan() {
        let b = breakdown("How many dogs appear?", &ExampleLibrary::builtin(), &MockBackend::default(), 2).unwrap();
        assert!(b.plan.steps.iter().any(|s| s.function == Function::CountNodes));
        assert_eq!(b.plan.steps[0].text("node_query"), Some("dog"));
    }

    #[test]
    fn unparseable_falls_back() {
        let b = breakdown("anything", &ExampleLibrary::builtin(), &Says("I think we should look around"), 2).unwrap();
        assert!(b.fallback);
        assert_eq!(b.plan.steps, ReasoningPlan::global().steps);
    }

    #[test]
    fn blocked_propagates() {
        let err = breakdown("[BLOCK] x", &ExampleLibrary::builtin(), &MockBackend::default(), 2).unwrap_err();
        assert!(err.is_blocked());
    }
}
