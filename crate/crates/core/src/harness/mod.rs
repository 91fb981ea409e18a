//! End-to-end question answering, evaluation and synthetic test worlds.

mod eval;
mod pipeline;
mod synth;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{RavuError, Result};
use crate::graph::FrameIndex;

pub use crate::reasoning::QuestionType as Category;
pub use eval::{eval_localization, eval_qa, LocItemResult, LocMethod, LocReport, LocTally, QaItemResult, QaOutcome, QaReport, Tally};
pub use pipeline::{
    answer_question, ask, associate_options, build_options, build_video, load_video, write_video, Answered, QaSettings,
    RetrievalMode, Video, VideoBuild,
};
pub use synth::{synth_corpus, synth_world, Corpus, SynthParams, SynthQuestion, SyntheticWorld, Template};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McqItem {
    pub video_id: String,
    pub question: String,
    pub options: Vec<String>,
    pub answer_index: usize,
    pub category: Category,
    /// Optional finer label such as `CW` or `TN`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcategory: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationAnnotation {
    pub video_id: String,
    pub question: String,
    pub gt_frames: BTreeSet<FrameIndex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

/// Reads `mcq.jsonl`, checking that every answer index names an option.
pub fn parse_mcq(text: &str) -> Result<Vec<McqItem>> {
    let items: Vec<McqItem> = crate::graph::from_jsonl(text, "mcq")?;
    for ((i, _), item) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).zip(&items) {
        if item.answer_index >= item.options.len() {
            return Err(RavuError::parse(
                i + 1,
                "answer_index",
                format!("{} with {} options", item.answer_index, item.options.len()),
            ));
        }
    }
    Ok(items)
}

/// Reads `loc.jsonl`; ground-truth frame sets must be non-empty.
pub fn parse_loc(text: &str) -> Result<Vec<LocalizationAnnotation>> {
    let items: Vec<LocalizationAnnotation> = crate::graph::from_jsonl(text, "loc")?;
    for ((i, _), item) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).zip(&items) {
        if item.gt_frames.is_empty() {
            return Err(RavuError::parse(i + 1, "gt_frames", "empty ground-truth frame set"));
        }
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcq_answer_index_checked() {
        let ok = r#"{"video_id":"v","question":"q","options":["a","b"],"answer_index":1,"category":"temporal"}"#;
        assert_eq!(parse_mcq(ok).unwrap()[0].answer_index, 1);
        let bad = format!("{ok}\n{}", ok.replace("\"answer_index\":1", "\"answer_index\":2"));
        match parse_mcq(&bad) {
            Err(RavuError::Parse { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "answer_index");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn subcategory_optional() {
        let s = r#"{"video_id":"v","question":"q","options":["a"],"answer_index":0,"category":"causal","subcategory":"CW"}"#;
        assert_eq!(parse_mcq(s).unwrap()[0].subcategory.as_deref(), Some("CW"));
    }

    #[test]
    fn loc_requires_frames() {
        assert!(parse_loc(r#"{"video_id":"v","question":"q","gt_frames":[]}"#).is_err());
        let a = parse_loc(r#"{"video_id":"v","question":"q","gt_frames":[3,1]}"#).unwrap();
        assert_eq!(a[0].gt_frames.iter().copied().collect::<Vec<_>>(), vec![1, 3]);
    }
}
