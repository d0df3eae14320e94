use proptest::prelude::*;

use sgeval_core::importance::{ndcg_at, ImportanceConfig, ScoredRanking};
use sgeval_core::ingest::{parse_scene_graphs, scene_graphs_to_string};
use sgeval_core::metrics::{match_frame, video_outcome, EvalTask, Evaluator, ReportOptions};
use sgeval_core::synth::{generate, SynthConfig};
use sgeval_core::{parse_generation, BoundingBox, DocumentKind, Exec, FrameGraph, RelationFormat, SceneGraphDocument, ScoredTriplet, Triplet, Vocabulary};

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (0.0..50.0f64, 0.0..50.0f64, 1.0..30.0f64, 1.0..30.0f64).prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h).unwrap())
}

fn arb_triplet() -> impl Strategy<Value = ScoredTriplet> {
    (0..3usize, 0..2usize, 0..3usize, prop::option::weighted(0.9, (arb_box(), arb_box()))).prop_map(|(s, p, o, boxes)| {
        let t = Triplet::new(["person", "cup", "dog"][s], ["holding", "near"][p], ["person", "cup", "dog"][o]).unwrap();
        match boxes {
            Some((a, b)) => ScoredTriplet::boxed(t, a, b, 0),
            None => ScoredTriplet::unboxed(t, 0),
        }
    })
}

fn arb_frame(boxed: bool) -> impl Strategy<Value = FrameGraph> {
    prop::collection::vec(arb_triplet(), 0..8).prop_map(move |mut ts| {
        if boxed {
            for t in &mut ts {
                if !t.has_boxes() {
                    let b = BoundingBox::new(0.0, 0.0, 5.0, 5.0).unwrap();
                    t.subject_box = Some(b);
                    t.object_box = Some(b);
                }
            }
        }
        FrameGraph::new("f", ts)
    })
}

proptest! {
    #[test]
    fn ndcg_ignores_entries_past_p(rels in prop::collection::vec(0.0..=1.0f64, 1..10), extra in prop::collection::vec(0.0..=1.0f64, 0..5), gt in prop::collection::vec(0.0..=1.0f64, 0..10), p in 1usize..8) {
        let a = ScoredRanking::from_rels(&rels).unwrap();
        let mut longer = rels.clone();
        if longer.len() >= p {
            longer.extend(&extra);
        }
        let b = ScoredRanking::from_rels(&longer).unwrap();
        let g = ScoredRanking::from_rels(&gt).unwrap();
        let (x, y) = (ndcg_at(&a, &g, p).unwrap(), ndcg_at(&b, &g, p).unwrap());
        prop_assert_eq!(x, y);
        prop_assert!((0.0..=1.0).contains(&x));
    }

    #[test]
    fn importance_is_monotone(ti in 0.0..=1.0f64, td in 0.0..=1.0f64, step in 0.001..0.5f64, lambda in 0.01..0.99f64) {
        let cfg = ImportanceConfig::new(lambda, true).unwrap();
        let base = cfg.combine(ti, td);
        prop_assert!(cfg.combine(ti + step, td) > base);
        prop_assert!(cfg.combine(ti, td + step) > base);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn hits_grow_with_k_and_sgdet_never_beats_sgcls(pred in arb_frame(false), gt in arb_frame(true)) {
        let task = EvalTask::sgcls_star();
        let g = SceneGraphDocument::new("v", vec![gt], DocumentKind::GroundTruth).unwrap();
        let p = SceneGraphDocument::new("v", vec![pred], DocumentKind::Prediction).unwrap();
        let loose = video_outcome(&p, &g, &task).unwrap();
        let strict = video_outcome(&p, &g, &EvalTask::sgdet()).unwrap();
        let (l, s) = (&loose.frames[0], &strict.frames[0]);
        let mut last = 0;
        for k in 1..10 {
            prop_assert!(l.hits(k) >= last);
            last = l.hits(k);
            prop_assert!(s.hits(k) <= l.hits(k));
            prop_assert!(l.hits(k) <= l.returned(k).min(l.gt_count()));
        }
    }

    #[test]
    fn aggregated_matching_on_single_frames_is_framewise(pred in arb_frame(false), gt in arb_frame(true), thr in 0.05..1.0f64) {
        let g = SceneGraphDocument::new("v", vec![gt.clone()], DocumentKind::GroundTruth).unwrap();
        let p = SceneGraphDocument::new("v", vec![pred.clone()], DocumentKind::Prediction).unwrap();
        let frame = match_frame(&pred, &gt, &EvalTask::new(sgeval_core::TaskVariant::Sgdet, thr).unwrap());
        let agg = sgeval_core::metrics::aggregate_iou_match(&p, &g, thr).unwrap();
        prop_assert_eq!(&agg[0], &frame);
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,300}") {
        let (frames, report) = parse_generation(&text, RelationFormat::Triplet, &["a".to_string(), "b".to_string()]);
        prop_assert_eq!(frames.len(), 2);
        prop_assert_eq!(report.triplets_parsed, frames.iter().map(FrameGraph::len).sum::<usize>());
    }

    #[test]
    fn scene_graph_files_round_trip(frames in prop::collection::vec(arb_frame(true), 1..4)) {
        let frames: Vec<FrameGraph> = frames
            .into_iter()
            .enumerate()
            .map(|(i, f)| FrameGraph::new(format!("{i:03}"), f.triplets))
            .collect();
        let doc = SceneGraphDocument::new("v", frames, DocumentKind::GroundTruth).unwrap();
        let text = scene_graphs_to_string(std::slice::from_ref(&doc));
        prop_assert_eq!(parse_scene_graphs(&text, DocumentKind::GroundTruth).unwrap(), vec![doc]);
    }
}

#[test]
fn parallel_and_sequential_reports_agree() {
    let vocab = Vocabulary::synthetic(12, 6).unwrap();
    let cfg = SynthConfig {
        seed: 11,
        videos: 16,
        frames_per_video: 12,
        correct_k: 4,
        filler_k: 9,
        box_jitter: 0.2,
        ..SynthConfig::default()
    };
    let (gt, pred) = generate(&cfg, &vocab).unwrap();
    let opts = ReportOptions {
        per_class: true,
        entity: true,
    };
    for task in [EvalTask::sgcls_star(), EvalTask::sgdet(), EvalTask::sgdet_agg()] {
        let ev = Evaluator::new(task, &[1, 10, 20]).unwrap();
        let seq = ev.clone().with_exec(Exec::Sequential).report(&pred, &gt, opts).unwrap();
        let par = ev.with_exec(Exec::Parallel).report(&pred, &gt, opts).unwrap();
        assert_eq!(seq, par);
    }
}
