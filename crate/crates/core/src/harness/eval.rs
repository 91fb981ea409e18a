//! Accuracy reports for question answering and frame localization.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{answer_question, QaSettings, Video};
use super::{LocalizationAnnotation, McqItem};
use crate::backend::{cosine, Backend};
use crate::error::{RavuError, Result};
use crate::graph::FrameIndex;
use crate::reasoning::{breakdown, render_plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaOutcome {
    Correct,
    Wrong,
    Blocked,
    Errored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItemResult {
    pub video_id: String,
    pub question: String,
    pub category: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcategory: Option<String>,
    pub outcome: QaOutcome,
    pub answer_index: usize,
    pub choice: Option<usize>,
    pub frames: Vec<FrameIndex>,
    pub tokens: usize,
    pub plan: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Counts behind one report row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub items: usize,
    pub correct: usize,
    pub blocked: usize,
    pub errored: usize,
}

impl Tally {
    fn add(&mut self, outcome: QaOutcome) {
        self.items += 1;
        match outcome {
            QaOutcome::Correct => self.correct += 1,
            QaOutcome::Wrong => {}
            QaOutcome::Blocked => self.blocked += 1,
            QaOutcome::Errored => self.errored += 1,
        }
    }

    /// Accuracy over items that were neither blocked nor errored.
    pub fn accuracy_non_blocked(&self) -> Option<f64> {
        let n = self.items - self.blocked - self.errored;
        (n > 0).then(|| self.correct as f64 / n as f64)
    }

    /// Accuracy with blocked items counted as wrong; errored items excluded.
    pub fn accuracy_overall(&self) -> Option<f64> {
        let n = self.items - self.errored;
        (n > 0).then(|| self.correct as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaReport {
    pub overall: Tally,
    pub by_category: BTreeMap<String, Tally>,
    /// Mean retrieved frames over answered items.
    pub mean_frames: f64,
    /// Mean prompt tokens over answered items.
    pub mean_tokens: f64,
    pub items: Vec<QaItemResult>,
}

fn metric_rows(out: &mut String, name: &str, t: &Tally) {
    let _ = writeln!(out, "{name},items,{}", t.items);
    let _ = writeln!(out, "{name},correct,{}", t.correct);
    let _ = writeln!(out, "{name},blocked,{}", t.blocked);
    let _ = writeln!(out, "{name},errored,{}", t.errored);
    if let Some(a) = t.accuracy_non_blocked() {
        let _ = writeln!(out, "{name},accuracy_non_blocked,{a:.6}");
    }
    if let Some(a) = t.accuracy_overall() {
        let _ = writeln!(out, "{name},accuracy_overall,{a:.6}");
    }
}

impl QaReport {
    /// `category,metric,value` rows: categories (and subcategories) first,
    /// then `overall`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,metric,value\n");
        for (name, t) in &self.by_category {
            metric_rows(&mut out, name, t);
        }
        metric_rows(&mut out, "overall", &self.overall);
        let _ = writeln!(out, "overall,mean_frames,{:.6}", self.mean_frames);
        let _ = writeln!(out, "overall,mean_tokens,{:.6}", self.mean_tokens);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn qa_item(item: &McqItem, videos: &BTreeMap<String, Video>, backend: &dyn Backend, settings: &QaSettings) -> QaItemResult {
    let mut r = QaItemResult {
        video_id: item.video_id.clone(),
        question: item.question.clone(),
        category: item.category.to_string(),
        subcategory: item.subcategory.clone(),
        outcome: QaOutcome::Errored,
        answer_index: item.answer_index,
        choice: None,
        frames: Vec::new(),
        tokens: 0,
        plan: String::new(),
        error: None,
    };
    let Some(video) = videos.get(&item.video_id) else {
        r.error = Some(format!("no graph for video {}", item.video_id));
        return r;
    };
    match answer_question(video, item, backend, settings) {
        Ok(a) => {
            r.outcome = if a.choice == Some(item.answer_index) {
                QaOutcome::Correct
            } else {
                QaOutcome::Wrong
            };
            r.choice = a.choice;
            r.frames = a.frames.into_vec();
            r.tokens = a.tokens;
            r.plan = render_plan(&a.plan);
        }
        Err(e) if e.is_blocked() => r.outcome = QaOutcome::Blocked,
        Err(e) => r.error = Some(e.to_string()),
    }
    r
}

/// Answers every item (in parallel) and tallies accuracy per category, per
/// subcategory when given, and overall, in both blocked-handling modes.
pub fn eval_qa(
    items: &[McqItem],
    videos: &BTreeMap<String, Video>,
    backend: &dyn Backend,
    settings: &QaSettings,
) -> QaReport {
    let mut results: Vec<(usize, QaItemResult)> = items
        .par_iter()
        .enumerate()
        .map(|(i, item)| (i, qa_item(item, videos, backend, settings)))
        .collect();
    results.sort_by(|a, b| a.1.video_id.cmp(&b.1.video_id).then(a.0.cmp(&b.0)));
    let items: Vec<QaItemResult> = results.into_iter().map(|(_, r)| r).collect();

    let mut overall = Tally::default();
    let mut by_category: BTreeMap<String, Tally> = BTreeMap::new();
    let (mut frames, mut tokens, mut answered) = (0usize, 0usize, 0usize);
    for r in &items {
        overall.add(r.outcome);
        by_category.entry(r.category.clone()).or_default().add(r.outcome);
        if let Some(sub) = &r.subcategory {
            by_category.entry(sub.clone()).or_default().add(r.outcome);
        }
        if matches!(r.outcome, QaOutcome::Correct | QaOutcome::Wrong) {
            answered += 1;
            frames += r.frames.len();
            tokens += r.tokens;
        }
    }
    let mean = |x: usize| if answered == 0 { 0.0 } else { x as f64 / answered as f64 };
    QaReport {
        overall,
        by_category,
        mean_frames: mean(frames),
        mean_tokens: mean(tokens),
        items,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocMethod {
    /// Embedding top-k followed by the backend rerank.
    Rerank,
    /// Best node by embedding alone.
    TextEmbedding,
    /// Best frame by cosine against supplied frame vectors.
    RawVector,
}

impl FromStr for LocMethod {
    type Err = RavuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rerank" => Ok(LocMethod::Rerank),
            "text_embedding" => Ok(LocMethod::TextEmbedding),
            "raw_vector" => Ok(LocMethod::RawVector),
            _ => Err(RavuError::InvalidArgument(format!(
                "unknown method {s:?}; expected rerank, text_embedding or raw_vector"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocItemResult {
    pub video_id: String,
    pub question: String,
    pub category: String,
    pub query: String,
    pub predicted: Option<FrameIndex>,
    /// `None` when the item was skipped.
    pub correct: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocTally {
    pub items: usize,
    pub correct: usize,
    pub skipped: usize,
}

impl LocTally {
    pub fn accuracy(&self) -> Option<f64> {
        let n = self.items - self.skipped;
        (n > 0).then(|| self.correct as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocReport {
    pub method: LocMethod,
    pub overall: LocTally,
    pub by_category: BTreeMap<String, LocTally>,
    pub items: Vec<LocItemResult>,
}

impl LocReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,metric,value\n");
        let rows = self.by_category.iter().map(|(k, v)| (k.as_str(), v)).chain([("overall", &self.overall)]);
        for (name, t) in rows {
            let _ = writeln!(out, "{name},items,{}", t.items);
            let _ = writeln!(out, "{name},correct,{}", t.correct);
            let _ = writeln!(out, "{name},skipped,{}", t.skipped);
            if let Some(a) = t.accuracy() {
                let _ = writeln!(out, "{name},accuracy,{a:.6}");
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn predict(video: &Video, query: &str, method: LocMethod, backend: &dyn Backend, settings: &QaSettings) -> Result<Option<FrameIndex>> {
    match method {
        LocMethod::Rerank => Ok(Some(
            video
                .index
                .localize(query, settings.rerank_k, backend, settings.max_retries)?
                .candidate
                .frame_index,
        )),
        LocMethod::TextEmbedding => {
            let q = backend.embed(query)?;
            Ok(video.index.top_k(&q, 1)?.first().map(|c| c.frame_index))
        }
        LocMethod::RawVector => {
            let Some(vectors) = &video.frame_vectors else {
                return Ok(None);
            };
            let q = backend.embed(query)?;
            let mut best: Option<(FrameIndex, f64)> = None;
            for (f, v) in vectors.iter().enumerate() {
                let s = cosine(&q.0, &v.0);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((f, s));
                }
            }
            Ok(best.map(|(f, _)| f))
        }
    }
}

fn loc_item(
    a: &LocalizationAnnotation,
    videos: &BTreeMap<String, Video>,
    method: LocMethod,
    backend: &dyn Backend,
    settings: &QaSettings,
) -> LocItemResult {
    let mut r = LocItemResult {
        video_id: a.video_id.clone(),
        question: a.question.clone(),
        category: a.category.map(|c| c.to_string()).unwrap_or_else(|| "uncategorized".into()),
        query: String::new(),
        predicted: None,
        correct: None,
        skipped: None,
    };
    let Some(video) = videos.get(&a.video_id) else {
        r.skipped = Some(format!("no graph for video {}", a.video_id));
        return r;
    };
    let query = match breakdown(&a.question, &settings.library, backend, settings.max_retries) {
        Ok(b) => b.plan.grounding_phrase().unwrap_or(&a.question).to_string(),
        Err(e) => {
            r.skipped = Some(e.to_string());
            return r;
        }
    };
    r.query = query.clone();
    match predict(video, &query, method, backend, settings) {
        Ok(Some(f)) => {
            r.predicted = Some(f);
            r.correct = Some(a.gt_frames.contains(&f));
        }
        Ok(None) => r.skipped = Some("no frame vectors for this video".into()),
        Err(e) => r.skipped = Some(e.to_string()),
    }
    r
}

/// Grounding-phrase localization: correct when the predicted frame is one of
/// the annotated frames. The phrase comes from the question's breakdown.
pub fn eval_localization(
    annotations: &[LocalizationAnnotation],
    videos: &BTreeMap<String, Video>,
    method: LocMethod,
    backend: &dyn Backend,
    settings: &QaSettings,
) -> LocReport {
    let mut results: Vec<(usize, LocItemResult)> = annotations
        .par_iter()
        .enumerate()
        .map(|(i, a)| (i, loc_item(a, videos, method, backend, settings)))
        .collect();
    results.sort_by(|a, b| a.1.video_id.cmp(&b.1.video_id).then(a.0.cmp(&b.0)));
    let items: Vec<LocItemResult> = results.into_iter().map(|(_, r)| r).collect();
    let mut overall = LocTally::default();
    let mut by_category: BTreeMap<String, LocTally> = BTreeMap::new();
    for r in &items {
        for t in [&mut overall, by_category.entry(r.category.clone()).or_default()] {
            t.items += 1;
            match r.correct {
                Some(true) => t.correct += 1,
                Some(false) => {}
                None => t.skipped += 1,
            }
        }
    }
    LocReport {
        method,
        overall,
        by_category,
        items,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_accuracy() {
        let mut t = Tally::default();
        for _ in 0..9 {
            t.add(QaOutcome::Correct);
        }
        t.add(QaOutcome::Blocked);
        assert_eq!(t.accuracy_non_blocked(), Some(1.0));
        assert_eq!(t.accuracy_overall(), Some(0.9));
        t.add(QaOutcome::Errored);
        assert_eq!(t.accuracy_overall(), Some(0.9));
        assert_eq!(Tally::default().accuracy_overall(), None);
    }

    #[test]
    fn methods_parse() {
        assert_eq!("rerank".parse::<LocMethod>().unwrap(), LocMethod::Rerank);
        assert!("clip".parse::<LocMethod>().is_err());
    }
}
