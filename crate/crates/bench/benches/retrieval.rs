use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ravu_core::builder::EmbeddingRecord;
use ravu_core::harness::{answer_question, build_video, synth_world, QaSettings, SynthParams, Video};
use ravu_core::reasoning::{execute, parse_plan, ExecContext};
use ravu_core::{Backend, Config, EmbeddingIndex, EmbeddingVector, MockBackend};

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    EmbeddingVector((0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
}

fn random_index(n: usize, dim: usize, rng: &mut ChaCha8Rng) -> EmbeddingIndex {
    let records = (0..n)
        .map(|i| EmbeddingRecord {
            entity_id: (i % 16) as u64,
            frame_index: i / 16,
            description: String::new(),
            vector: random_vector(rng, dim),
        })
        .collect();
    EmbeddingIndex::new(records).unwrap()
}

fn top_k(c: &mut Criterion) {
    let mut group = c.benchmark_group("top_k");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1_000, 10_000, 100_000] {
        let index = random_index(n, 256, &mut rng);
        let query = random_vector(&mut rng, 256);
        group.throughput(Throughput::Elements(n as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| index.top_k(black_box(&query), 10).unwrap())
        });
    }
    group.finish();
}

fn video(backend: &MockBackend, n_frames: usize, n_entities: usize) -> (Video, ravu_core::harness::SyntheticWorld) {
    let world = synth_world(7, SynthParams { n_frames, n_entities, n_questions: 8 }).unwrap();
    let docs = world.documents();
    let build = build_video(&docs["observations.jsonl"], &docs["tracklets.json"], backend, &Config::default()).unwrap();
    (Video::from_build(&build.output).unwrap(), world)
}

const PLAN: &str = "\
localize_node(query=\"dog running\")
analyze_events(query=\"when did the dog start running\", node=$1)
sample_entity_events(node=$1, sample_start_time=$2, events_to_sample=\"previous:1\")
";

fn on_video(c: &mut Criterion) {
    let backend = MockBackend::new(Config::default().embed_dim, Config::default().seed);
    let settings = QaSettings::default();
    for (frames, entities) in [(32, 4), (256, 10)] {
        let (video, world) = video(&backend, frames, entities);
        let label = format!("{frames}x{entities}");
        let phrase = world.questions[0].item.question.clone();

        c.bench_with_input(BenchmarkId::new("localize", &label), &video, |b, v| {
            b.iter(|| v.index.localize(black_box(&phrase), settings.rerank_k, &backend, settings.max_retries).unwrap())
        });

        let plan = parse_plan(PLAN).unwrap();
        let ctx = ExecContext {
            graph: &video.graph,
            index: &video.index,
            backend: &backend as &dyn Backend,
            max_retries: settings.max_retries,
            rerank_k: settings.rerank_k,
        };
        c.bench_with_input(BenchmarkId::new("execute", &label), &plan, |b, p| {
            b.iter(|| execute(black_box(p), ctx, settings.budget).unwrap())
        });

        c.bench_with_input(BenchmarkId::new("answer", &label), &world, |b, w| {
            b.iter(|| {
                for q in &w.questions {
                    black_box(answer_question(&video, &q.item, &backend, &settings).unwrap());
                }
            })
        });
    }
}

criterion_group!(benches, top_k, on_video);
criterion_main!(benches);
