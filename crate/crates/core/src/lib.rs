//! Spatio-temporal video graphs as long-term memory, and compositional
//! retrieval over them for video question answering.
//!
//! The pipeline: [`ingest`] makes per-frame entity IDs consistent using
//! tracklets, [`builder`] turns the result into a [`graph::SpatioTemporalGraph`]
//! with relation edges, node descriptions, embeddings and entity events,
//! [`index`] retrieves nodes for grounding phrases, and [`reasoning`] breaks a
//! question into a plan of reasoning functions and executes it to pick frames.
//! [`harness`] ties it together for question answering, evaluation and
//! synthetic test worlds.

pub mod backend;
pub mod builder;
pub mod config;
pub mod error;
pub mod graph;
pub mod harness;
pub mod index;
pub mod ingest;
pub mod prompts;
pub mod reasoning;
pub mod text;

pub use backend::{Backend, EmbeddingVector, MockBackend, PromptBundle, Role};
pub use config::Config;
pub use error::{RavuError, Result};
pub use graph::{
    BoundingBox, EntityEvent, EntityId, EntityNode, FrameIndex, FrameRecord, NodeKey, RelationEdge,
    SpatioTemporalGraph,
};
pub use index::{Candidate, EmbeddingIndex};
pub use reasoning::{FrameSet, ReasoningPlan, ReasoningStep, StepValue};
