mod common;

use std::collections::BTreeMap;

use ravu_core::harness::{
    answer_question, build_video, eval_localization, eval_qa, synth_world, Category, LocMethod, LocalizationAnnotation,
    McqItem, QaOutcome, QaSettings, SynthParams, Template, Video,
};
use ravu_core::ingest::{observations_to_jsonl, tracklets_to_json, FrameObservation, ObservedEntity, Tracklet};
use ravu_core::{BoundingBox, Config, RavuError};

fn entity(local_id: u64, appearance: &str, action: &str, x: f64) -> ObservedEntity {
    ObservedEntity {
        local_id,
        attributes: [("appearance", appearance), ("action", action), ("body_pose", "standing")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        bbox: BoundingBox::new(x, 10.0, x + 50.0, 60.0).unwrap(),
    }
}

/// Ten frames: a brown dog runs up the stairs (0-4), then sniffs the doormat
/// (5-9), while a grey cat sleeps throughout and a white owl blinks at 4.
fn doorstep() -> Video {
    let mut observations = Vec::new();
    let mut dog = Tracklet { track_id: 0, boxes: BTreeMap::new() };
    let mut cat = Tracklet { track_id: 1, boxes: BTreeMap::new() };
    for f in 0..10 {
        let action = if f < 5 { "running up the stairs" } else { "sniffing the doormat" };
        let mut entities = vec![entity(0, "brown dog", action, 0.0), entity(1, "grey cat", "sleeping on the sofa", 200.0)];
        let mut description = format!("[E0] is {action}. [E1] is sleeping on the sofa.");
        if f == 4 {
            entities.push(entity(2, "white owl", "blinking slowly", 400.0));
            description.push_str(" [E2] is blinking slowly.");
        }
        dog.boxes.insert(f, entities[0].bbox);
        cat.boxes.insert(f, entities[1].bbox);
        observations.push(FrameObservation {
            frame_index: f,
            description,
            entities,
            source_ref: format!("frame_{f:04}.jpg"),
        });
    }
    let build = build_video(
        &observations_to_jsonl(&observations),
        &tracklets_to_json(&[dog, cat]),
        &common::mock(),
        &Config::default(),
    )
    .unwrap();
    Video::from_build(&build.output).unwrap()
}

fn item(question: &str, options: &[&str], answer_index: usize, category: Category) -> McqItem {
    McqItem {
        video_id: "doorstep".into(),
        question: question.into(),
        options: options.iter().map(|s| s.to_string()).collect(),
        answer_index,
        category,
        subcategory: None,
    }
}

fn after_stairs() -> McqItem {
    item(
        "What did the dog do after running up the stairs?",
        &["chasing its tail", "sniffing the doormat", "eating from a bowl"],
        1,
        Category::Temporal,
    )
}

#[test]
fn after_question_answers_from_the_following_event() {
    let video = doorstep();
    let a = answer_question(&video, &after_stairs(), &common::mock(), &QaSettings::default()).unwrap();
    assert_eq!(a.choice, Some(1));
    let exec = a.execution.unwrap();
    let sampled = &exec.steps.last().unwrap().frames;
    assert!(!sampled.is_empty());
    assert!(sampled.iter().all(|f| (5..=9).contains(f)), "{sampled:?}");
    assert!(a.frames.len() <= 5);
}

#[test]
fn blocked_item_is_recorded_not_fatal() {
    let video = doorstep();
    let mut blocked = after_stairs();
    blocked.question.push_str(" [BLOCK]");
    let err = answer_question(&video, &blocked, &common::mock(), &QaSettings::default()).unwrap_err();
    assert!(err.is_blocked());

    let videos = BTreeMap::from([("doorstep".to_string(), video)]);
    let report = eval_qa(&[blocked, after_stairs()], &videos, &common::mock(), &QaSettings::default());
    assert_eq!(report.items[0].outcome, QaOutcome::Blocked);
    assert_eq!(report.items[1].outcome, QaOutcome::Correct);
    assert_eq!(report.overall.accuracy_non_blocked(), Some(1.0));
    assert_eq!(report.overall.accuracy_overall(), Some(0.5));
}

#[test]
fn missing_graph_marks_item_errored() {
    let videos = BTreeMap::from([("doorstep".to_string(), doorstep())]);
    let mut orphan = after_stairs();
    orphan.video_id = "elsewhere".into();
    let report = eval_qa(&[orphan, after_stairs()], &videos, &common::mock(), &QaSettings::default());
    let lost = report.items.iter().find(|r| r.video_id == "elsewhere").unwrap();
    assert_eq!(lost.outcome, QaOutcome::Errored);
    assert!(lost.error.is_some());
    assert_eq!(report.overall.errored, 1);
    assert_eq!(report.overall.accuracy_overall(), Some(1.0));
}

#[test]
fn budget_bounds_frames_in_every_mode() {
    let world = synth_world(5, SynthParams { n_questions: 8, ..SynthParams::default() }).unwrap();
    let docs = world.documents();
    let build = build_video(&docs["observations.jsonl"], &docs["tracklets.json"], &common::mock(), &Config::default()).unwrap();
    let video = Video::from_build(&build.output).unwrap();
    for mode in ["auto", "plan", "global"] {
        for budget in [1, 3, 5] {
            let settings = QaSettings { budget, mode: mode.parse().unwrap(), ..QaSettings::default() };
            for q in &world.questions {
                let a = answer_question(&video, &q.item, &common::mock(), &settings).unwrap();
                assert!(a.frames.len() <= budget, "{mode} {budget}: {:?}", a.frames);
            }
        }
    }
}

#[test]
fn synthetic_questions_are_answered_and_grounded() {
    let world = synth_world(11, SynthParams { n_questions: 8, ..SynthParams::default() }).unwrap();
    let docs = world.documents();
    let build = build_video(&docs["observations.jsonl"], &docs["tracklets.json"], &common::mock(), &Config::default()).unwrap();
    let video = Video::from_build(&build.output).unwrap();
    let videos = BTreeMap::from([(world.video_id.clone(), video)]);
    let report = eval_qa(&world.items(), &videos, &common::mock(), &QaSettings::default());
    for (q, r) in world.questions.iter().zip(&report.items) {
        if matches!(q.template, Template::Before | Template::After) {
            assert_eq!(r.outcome, QaOutcome::Correct, "{}", q.item.question);
            assert!(q.within_oracle_spans(&r.frames), "{}: {:?}", q.item.question, r.frames);
        }
    }
}

#[test]
fn category_rows_weight_back_to_overall() {
    let corpus = ravu_core::harness::synth_corpus(3, 4, SynthParams::default()).unwrap();
    let backend = common::mock();
    let videos = common::videos(&common::build_corpus(&corpus, &backend));
    let report = eval_qa(&corpus.items(), &videos, &backend, &QaSettings::default());
    let categories = ["causal", "temporal", "descriptive", "global"];
    let (mut weighted, mut n) = (0.0, 0usize);
    for c in categories {
        if let Some(t) = report.by_category.get(c) {
            let answered = t.items - t.errored;
            weighted += t.accuracy_overall().unwrap() * answered as f64;
            n += answered;
        }
    }
    let overall = report.overall.accuracy_overall().unwrap();
    assert!((weighted / n as f64 - overall).abs() < 1e-12);

    let csv = report.to_csv();
    assert!(csv.starts_with("category,metric,value\n"));
    assert!(csv.contains("overall,accuracy_overall,"));
}

#[test]
fn all_correct_set_scores_one() {
    let corpus = ravu_core::harness::synth_corpus(42, 6, SynthParams::default()).unwrap();
    let backend = common::mock();
    let videos = common::videos(&common::build_corpus(&corpus, &backend));
    let first = eval_qa(&corpus.items(), &videos, &backend, &QaSettings::default());
    let correct: Vec<McqItem> = corpus
        .items()
        .into_iter()
        .zip(&first.items)
        .filter(|(_, r)| r.outcome == QaOutcome::Correct)
        .map(|(i, _)| i)
        .take(10)
        .collect();
    assert_eq!(correct.len(), 10);
    let report = eval_qa(&correct, &videos, &backend, &QaSettings::default());
    assert_eq!(report.overall.accuracy_non_blocked(), Some(1.0));
    assert_eq!(report.overall.accuracy_overall(), Some(1.0));
}

fn annotation(question: &str, gt: std::ops::RangeInclusive<usize>) -> LocalizationAnnotation {
    LocalizationAnnotation {
        video_id: "doorstep".into(),
        question: question.into(),
        gt_frames: gt.collect(),
        category: Some(Category::Descriptive),
    }
}

#[test]
fn localization_is_correct_inside_ground_truth() {
    let videos = BTreeMap::from([("doorstep".to_string(), doorstep())]);
    let settings = QaSettings::default();
    let ann = [
        annotation("What did the dog do before sniffing the doormat?", 5..=9),
        annotation("What did the owl do before blinking slowly?", 5..=9),
    ];
    let report = eval_localization(&ann, &videos, LocMethod::Rerank, &common::mock(), &settings);
    let predicted: Vec<Option<usize>> = report.items.iter().map(|r| r.predicted).collect();
    assert!(matches!(predicted[0], Some(5..=9)), "{predicted:?}");
    assert_eq!(predicted[1], Some(4));
    assert_eq!(report.items[0].correct, Some(true));
    assert_eq!(report.items[1].correct, Some(false));
    assert_eq!(report.overall.accuracy(), Some(0.5));

    let raw = eval_localization(&ann, &videos, LocMethod::RawVector, &common::mock(), &settings);
    assert_eq!(raw.overall.skipped, 2);
    assert_eq!(raw.overall.accuracy(), None);
}

#[test]
fn synth_world_is_reproducible_and_frozen() {
    let a = synth_world(42, SynthParams::default()).unwrap().documents();
    let b = synth_world(42, SynthParams::default()).unwrap().documents();
    assert_eq!(a, b);
    for (name, text) in &a {
        common::check_golden(&format!("synth_seed42/{name}"), text).unwrap();
    }
}

#[test]
fn smallest_world_has_one_node_and_one_event() {
    let w = synth_world(9, SynthParams { n_frames: 1, n_entities: 1, n_questions: 1 }).unwrap();
    assert_eq!(w.ground_truth.nodes().len(), 1);
    assert_eq!(w.ground_truth.all_events().count(), 1);
    assert!(matches!(
        synth_world(9, SynthParams { n_frames: 0, n_entities: 1, n_questions: 1 }),
        Err(RavuError::InvalidArgument(_))
    ));
}
