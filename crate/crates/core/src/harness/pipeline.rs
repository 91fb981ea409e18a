//! Building a video's graph from raw inputs, persisting it, and answering
//! questions against it.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, LazyLock};

use serde::{Deserialize, Serialize};

use super::{Category, McqItem};
use crate::backend::{self, Backend, EmbeddingVector, FrameRef, MeteredBackend};
use crate::builder::{self, BuildOptions, BuildOutput};
use crate::config::Config;
use crate::error::{RavuError, Result};
use crate::graph::{self, SpatioTemporalGraph};
use crate::index::EmbeddingIndex;
use crate::ingest::{self, AssociateOptions, Association};
use crate::reasoning::{
    breakdown, execute, hierarchical_retrieve, ExampleLibrary, ExecContext, Execution, FrameSet, Function,
    Hierarchical, ReasoningPlan,
};
use crate::text::uniform_sample;

static BUILTIN_LIBRARY: LazyLock<Arc<ExampleLibrary>> = LazyLock::new(|| Arc::new(ExampleLibrary::builtin()));

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    /// Global questions use hierarchical retrieval, the rest run their plan.
    #[default]
    Auto,
    Plan,
    Global,
}

impl FromStr for RetrievalMode {
    type Err = RavuError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(RetrievalMode::Auto),
            "plan" => Ok(RetrievalMode::Plan),
            "global" => Ok(RetrievalMode::Global),
            _ => Err(RavuError::InvalidArgument(format!("unknown mode {s:?}; expected auto, plan or global"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct QaSettings {
    pub budget: usize,
    pub global_budget: usize,
    pub per_event_candidates: usize,
    pub rerank_k: usize,
    pub max_retries: usize,
    pub mode: RetrievalMode,
    pub library: Arc<ExampleLibrary>,
}

impl QaSettings {
    pub fn from_config(config: &Config, mode: RetrievalMode) -> Self {
        QaSettings {
            budget: config.budget,
            global_budget: config.global_budget,
            per_event_candidates: config.per_event_candidates,
            rerank_k: config.rerank_k,
            max_retries: config.max_retries,
            mode,
            library: BUILTIN_LIBRARY.clone(),
        }
    }
}

impl Default for QaSettings {
    fn default() -> Self {
        QaSettings::from_config(&Config::default(), RetrievalMode::Auto)
    }
}

/// A built video ready for questions.
#[derive(Debug, Clone)]
pub struct Video {
    pub graph: SpatioTemporalGraph,
    pub index: EmbeddingIndex,
    /// Optional per-frame image vectors, row `i` for frame `i`.
    pub frame_vectors: Option<Vec<EmbeddingVector>>,
}

impl Video {
    pub fn from_build(out: &BuildOutput) -> Result<Self> {
        Ok(Video {
            graph: out.graph.clone(),
            index: EmbeddingIndex::new(out.embeddings.clone())?,
            frame_vectors: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct VideoBuild {
    pub association: Association,
    pub output: BuildOutput,
}

pub fn build_options(config: &Config) -> BuildOptions {
    BuildOptions {
        max_retries: config.max_retries,
        context_frames: config.context_frames,
    }
}

pub fn associate_options(config: &Config) -> AssociateOptions {
    AssociateOptions {
        min_iou: config.min_iou,
        fps: config.fps,
    }
}

/// Observations and tracklets documents to a full graph with embeddings.
pub fn build_video(observations: &str, tracklets: &str, backend: &dyn Backend, config: &Config) -> Result<VideoBuild> {
    let obs = ingest::parse_observations(observations).map_err(|e| e.context("observations"))?;
    let tracks = ingest::parse_tracklets(tracklets).map_err(|e| e.context("tracklets"))?;
    let association = ingest::associate(&obs, &tracks, associate_options(config))?;
    let output = builder::build_graph(&association, backend, build_options(config))?;
    Ok(VideoBuild { association, output })
}

/// Writes `graph.json`, the edge, description and embedding artifacts and
/// `build_report.json` into `dir`.
pub fn write_video(dir: &Path, out: &BuildOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (bin, index) = builder::encode_embeddings(&out.embeddings)?;
    fs::write(dir.join("graph.json"), graph::serialize(&out.graph))?;
    fs::write(dir.join("edges.jsonl"), builder::edges_jsonl(&out.graph))?;
    fs::write(dir.join("descriptions.jsonl"), builder::descriptions_jsonl(&out.graph))?;
    fs::write(dir.join("embeddings.bin"), bin)?;
    fs::write(dir.join("embeddings.index.jsonl"), index)?;
    let report = serde_json::to_string_pretty(&out.report).expect("report serializes") + "\n";
    fs::write(dir.join("build_report.json"), report)?;
    Ok(())
}

/// Reads a directory written by [`write_video`]. `frame_vectors.bin`, in the
/// embeddings layout with one row per frame, is picked up when present.
pub fn load_video(dir: &Path) -> Result<Video> {
    let read = |name: &str| fs::read_to_string(dir.join(name)).map_err(|e| RavuError::from(e).context(name.to_string()));
    let graph = graph::deserialize(&read("graph.json")?).map_err(|e| e.context("graph.json"))?;
    let bin = fs::read(dir.join("embeddings.bin")).map_err(|e| RavuError::from(e).context("embeddings.bin"))?;
    let records = builder::decode_embeddings(&bin, &read("embeddings.index.jsonl")?, &graph)?;
    let vectors_path = dir.join("frame_vectors.bin");
    let frame_vectors = if vectors_path.exists() {
        Some(decode_frame_vectors(&fs::read(&vectors_path)?, graph.num_frames())?)
    } else {
        None
    };
    Ok(Video {
        index: EmbeddingIndex::new(records)?,
        graph,
        frame_vectors,
    })
}

fn decode_frame_vectors(bin: &[u8], frames: usize) -> Result<Vec<EmbeddingVector>> {
    let header = |at: usize| {
        bin.get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()) as usize)
            .ok_or_else(|| RavuError::parse(0, "frame_vectors.bin", "truncated header"))
    };
    let (dim, count) = (header(0)?, header(4)?);
    if count != frames || bin.len() != 8 + dim * count * 4 {
        return Err(RavuError::parse(
            0,
            "frame_vectors.bin",
            format!("expected {frames} rows of {dim} floats"),
        ));
    }
    Ok(bin[8..]
        .chunks_exact(dim * 4)
        .map(|row| {
            EmbeddingVector(row.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        })
        .collect())
}

/// Everything produced while answering one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answered {
    /// Chosen option, when options were given.
    pub choice: Option<usize>,
    pub frames: FrameSet,
    pub plan: ReasoningPlan,
    pub breakdown_fallback: bool,
    /// Retrieval actually used: `plan` or `global`.
    pub route: RetrievalMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub execution: Option<Execution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hierarchical: Option<Hierarchical>,
    /// Whitespace tokens of every prompt sent for this question.
    pub tokens: usize,
}

fn is_global_plan(plan: &ReasoningPlan) -> bool {
    plan.steps.len() == 1 && plan.steps[0].function == Function::GetGlobalContext
}

/// Breakdown, retrieval, then the answer call. Blocked content is returned
/// as an error so callers can record it.
pub fn ask(
    video: &Video,
    question: &str,
    options: &[String],
    category: Option<Category>,
    backend: &dyn Backend,
    settings: &QaSettings,
) -> Result<Answered> {
    let metered = MeteredBackend::new(backend);
    let b = breakdown(question, &settings.library, &metered, settings.max_retries)?;
    let global = match settings.mode {
        RetrievalMode::Global => true,
        RetrievalMode::Plan => false,
        RetrievalMode::Auto => category == Some(Category::Global) || (!b.fallback && is_global_plan(&b.plan)),
    };
    let ctx = ExecContext {
        graph: &video.graph,
        index: &video.index,
        backend: &metered,
        max_retries: settings.max_retries,
        rerank_k: settings.rerank_k,
    };
    let mut hierarchical = None;
    if global {
        let top = settings.global_budget.min(settings.budget);
        match hierarchical_retrieve(
            question,
            &video.graph,
            &video.index,
            &metered,
            settings.per_event_candidates,
            top,
            settings.max_retries,
        ) {
            Ok(h) => hierarchical = Some(h),
            Err(e) if e.is_blocked() => return Err(e),
            Err(e) => tracing::warn!(error = %e, "hierarchical retrieval failed; running the plan"),
        }
    }
    let (frames, execution, route, notes) = match &hierarchical {
        Some(h) => {
            let frames: FrameSet = uniform_sample(h.frames.as_slice(), settings.budget).into_iter().collect();
            (frames, None, RetrievalMode::Global, Vec::new())
        }
        None => {
            let ex = execute(&b.plan, ctx, settings.budget)?;
            (ex.frames.clone(), Some(ex.clone()), RetrievalMode::Plan, ex.notes)
        }
    };
    let choice = if options.is_empty() {
        None
    } else {
        let refs: Vec<FrameRef> = frames
            .as_slice()
            .iter()
            .map(|&f| {
                let r = &video.graph.frames()[f];
                FrameRef {
                    frame_index: f,
                    source_ref: r.source_ref.clone(),
                    description: r.description.clone(),
                }
            })
            .collect();
        Some(backend::answer(&metered, question, options, refs, &notes, settings.max_retries)?)
    };
    Ok(Answered {
        choice,
        frames,
        plan: b.plan,
        breakdown_fallback: b.fallback,
        route,
        execution,
        hierarchical,
        tokens: metered.tokens(),
    })
}

/// [`ask`] for a dataset item. Option text is only used by the answer call.
pub fn answer_question(video: &Video, item: &McqItem, backend: &dyn Backend, settings: &QaSettings) -> Result<Answered> {
    if item.options.is_empty() {
        return Err(RavuError::InvalidArgument("question has no options".into()));
    }
    ask(video, &item.question, &item.options, Some(item.category), backend, settings)
}
