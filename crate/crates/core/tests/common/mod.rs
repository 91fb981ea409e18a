#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ravu_core::harness::{build_video, synth_corpus, Corpus, SynthParams, Video, VideoBuild};
use ravu_core::{Backend, Config, MockBackend};

pub const CORPUS_SEED: u64 = 42;
pub const CORPUS_VIDEOS: usize = 50;

pub fn mock() -> MockBackend {
    let c = Config::default();
    MockBackend::new(c.embed_dim, c.seed)
}

pub fn seed42_corpus() -> Corpus {
    synth_corpus(CORPUS_SEED, CORPUS_VIDEOS, SynthParams::default()).expect("corpus generates")
}

/// Builds every video from its serialized observation and tracklet documents.
pub fn build_corpus(corpus: &Corpus, backend: &dyn Backend) -> BTreeMap<String, VideoBuild> {
    let config = Config::default();
    corpus
        .videos
        .iter()
        .map(|w| {
            let docs = w.documents();
            let build = build_video(&docs["observations.jsonl"], &docs["tracklets.json"], backend, &config)
                .unwrap_or_else(|e| panic!("{}: {e}", w.video_id));
            (w.video_id.clone(), build)
        })
        .collect()
}

pub fn videos(builds: &BTreeMap<String, VideoBuild>) -> BTreeMap<String, Video> {
    builds
        .iter()
        .map(|(id, b)| (id.clone(), Video::from_build(&b.output).expect("index builds")))
        .collect()
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

/// Compares `actual` with the stored golden file, or rewrites it when
/// `RAVU_BLESS=1`.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_dir().join(name);
    if std::env::var("RAVU_BLESS").as_deref() == Ok("1") {
        fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        return Ok(());
    }
    let line = expected
        .lines()
        .zip(actual.lines())
        .position(|(a, b)| a != b)
        .map(|i| i + 1)
        .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()) + 1);
    Err(format!("{name} differs from golden at line {line}"))
}
