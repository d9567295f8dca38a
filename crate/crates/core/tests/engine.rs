mod common;

use std::collections::HashSet;

use ii20_core::engine::{
    Engine, EngineConfig, FeedbackBatch, NnMode, SortOrder, SuggestRequest, ViewSort,
};
use ii20_core::session::{Source, TransferMode};
use ii20_core::{BucketId, Error, ImageId, Target};

use common::{dataset, small_synth};

fn engine(n: usize, config: EngineConfig) -> (Engine, ii20_core::dataset::GroundTruth) {
    let (data, truth) = dataset(&small_synth(n, 4, 7), config.nn_mode == NnMode::Knn);
    (Engine::new(data, config).unwrap(), truth)
}

fn label_of(truth: &ii20_core::dataset::GroundTruth, id: ImageId) -> u32 {
    truth.labels_of(id)[0]
}

fn batch(pairs: &[(u32, Target)]) -> FeedbackBatch {
    let mut b = FeedbackBatch::default();
    for &(i, t) in pairs {
        b.push(ImageId(i), t);
    }
    b
}

/// Judge every suggestion truthfully: cluster 0 -> b1, cluster 1 -> b2, rest discarded.
fn truthful(
    truth: &ii20_core::dataset::GroundTruth,
    buckets: &[BucketId],
    suggestions: &[ii20_core::engine::Suggestion],
) -> FeedbackBatch {
    let mut fb = FeedbackBatch::default();
    for s in suggestions {
        let l = label_of(truth, s.image) as usize;
        let t = buckets.get(l).map(|&b| Target::Bucket(b)).unwrap_or(Target::Discard);
        fb.push(s.image, t);
    }
    fb
}

#[test]
fn fresh_bucket_gets_pure_explorer_output() {
    let (mut e, _) = engine(600, EngineConfig::default().with_seed(1));
    e.create_bucket("a").unwrap();
    let out = e.suggest(&SuggestRequest::default()).unwrap();
    assert_eq!(out.suggestions.len(), 5 + 2);
    for s in &out.suggestions {
        assert_eq!(s.source, Source::Explorer);
        assert_eq!(s.bucket, None);
        assert_eq!(s.confidence, None);
        assert!(!s.oracle);
    }
    assert!(e.session().bucket(BucketId(1)).unwrap().suggested.is_empty());
    assert_eq!(out.round, 1);
}

#[test]
fn suggest_without_active_bucket_is_refused() {
    let (mut e, _) = engine(300, EngineConfig::default());
    assert!(matches!(e.suggest(&SuggestRequest::default()), Err(Error::NoActiveBucket)));
}

#[test]
fn feedback_routes_positive_neutral_negative() {
    let (mut e, _) = engine(600, EngineConfig::default().with_seed(2));
    let b1 = e.create_bucket("b1").unwrap();
    let b2 = e.create_bucket("b2").unwrap();
    e.process_feedback(&batch(&[(0, b1.into()), (1, b2.into())])).unwrap();
    let out = e
        .suggest(&SuggestRequest {
            per_bucket_count: Some(4),
            extra_explore: Some(0),
            ..Default::default()
        })
        .unwrap();
    let for_b1: Vec<ImageId> = out.suggestions.iter().filter(|s| s.bucket == Some(b1)).map(|s| s.image).collect();
    let for_b2: Vec<ImageId> = out.suggestions.iter().filter(|s| s.bucket == Some(b2)).map(|s| s.image).collect();
    assert_eq!(for_b1.len(), 4);
    assert_eq!(for_b2.len(), 4);

    let mut fb = FeedbackBatch::default();
    fb.push(for_b1[0], b1.into()); // positive for b1
    fb.push(for_b1[1], b2.into()); // negative for b1, neutral for b2
    fb.push(for_b1[2], Target::Discard); // negative for b1
    fb.push(for_b2[0], b2.into()); // positive for b2
    fb.push(ImageId(500), b1.into()); // neutral
    let touched = e.process_feedback(&fb).unwrap();
    assert!(touched.contains(&Target::Bucket(b1)) && touched.contains(&Target::Bucket(b2)));
    assert!(touched.contains(&Target::Discard));

    let s = e.session();
    let bk1 = s.bucket(b1).unwrap();
    let bk2 = s.bucket(b2).unwrap();
    assert!(bk1.members.contains(for_b1[0]) && bk1.correct.contains(for_b1[0]));
    assert!(bk2.members.contains(for_b1[1]) && bk1.wrong.contains(for_b1[1]));
    assert!(!bk2.correct.contains(for_b1[1]), "not suggested for b2, so neutral there");
    assert!(s.discard().contains(for_b1[2]) && bk1.wrong.contains(for_b1[2]));
    assert!(bk2.correct.contains(for_b2[0]));
    assert!(bk1.members.contains(ImageId(500)));
    assert!(!bk1.correct.contains(ImageId(500)) && !bk1.wrong.contains(ImageId(500)));
    assert!(!bk1.correct.contains(for_b1[3]) && !bk1.wrong.contains(for_b1[3]));
    s.check_invariants().unwrap();
}

#[test]
fn feedback_batches_are_atomic() {
    let (mut e, _) = engine(300, EngineConfig::default());
    let b = e.create_bucket("b").unwrap();
    let before = e.state().clone();
    let err = e.process_feedback(&batch(&[(1, b.into()), (2, Target::Bucket(BucketId(9)))]));
    assert!(matches!(err, Err(Error::UnknownBucket(_))));
    assert_eq!(e.state(), &before);
    let err = e.process_feedback(&batch(&[(1, b.into()), (1, Target::Discard)]));
    assert!(matches!(err, Err(Error::DuplicateFeedback(_))));
    let err = e.process_feedback(&batch(&[(100_000, b.into())]));
    assert!(matches!(err, Err(Error::UnknownImage(_))));
    assert_eq!(e.state(), &before);
}

#[test]
fn accepted_classifier_rounds_keep_classifier_share() {
    let mut cfg = EngineConfig::default().with_seed(3);
    cfg.o = 0.0;
    let (mut e, truth) = engine(2000, cfg);
    let b = e.create_bucket("c0").unwrap();
    let seeds: Vec<u32> = (0..2000u32).filter(|&i| label_of(&truth, ImageId(i)) == 0).take(5).collect();
    e.process_feedback(&batch(&seeds.iter().map(|&i| (i, Target::Bucket(b))).collect::<Vec<_>>())).unwrap();
    for _ in 0..3 {
        let out = e.suggest(&SuggestRequest { extra_explore: Some(0), ..Default::default() }).unwrap();
        // accept every classifier suggestion, leave the rest unjudged
        let mut fb = FeedbackBatch::default();
        for s in &out.suggestions {
            if s.source == Source::Classifier {
                fb.push(s.image, b.into());
            }
        }
        e.process_feedback(&fb).unwrap();
    }
    let (p_class, _) = e.split(b).unwrap();
    assert_eq!(p_class, 1.0);
    let out = e.suggest(&SuggestRequest { extra_explore: Some(0), ..Default::default() }).unwrap();
    assert!(out.suggestions.iter().all(|s| s.source == Source::Classifier));
}

#[test]
fn long_session_never_repeats_or_reuses_processed() {
    let (mut e, truth) = engine(3000, EngineConfig::default().with_seed(4));
    let b1 = e.create_bucket("c0").unwrap();
    let b2 = e.create_bucket("c1").unwrap();
    let buckets = [b1, b2];
    let mut seen_per_bucket: Vec<HashSet<ImageId>> = vec![HashSet::new(); 2];
    for round in 0..200 {
        let before: Vec<usize> = buckets.iter().map(|&b| e.session().bucket(b).unwrap().suggested.len()).collect();
        let out = e
            .suggest(&SuggestRequest { per_bucket_count: Some(2), extra_explore: Some(1), ..Default::default() })
            .unwrap();
        let mut this_round = HashSet::new();
        for s in &out.suggestions {
            assert!(!e.session().is_processed(s.image), "round {round}: processed image suggested");
            assert!(this_round.insert(s.image), "round {round}: duplicate within round");
            if s.oracle {
                assert_eq!(s.source, Source::Classifier);
            }
            if let Some(b) = s.bucket {
                let idx = buckets.iter().position(|&x| x == b).unwrap();
                assert!(seen_per_bucket[idx].insert(s.image), "image suggested twice for {b}");
                let c = s.confidence.unwrap();
                assert!((0.0..=1.0).contains(&c));
            } else {
                assert_eq!(s.source, Source::Explorer);
            }
        }
        for (k, &b) in buckets.iter().enumerate() {
            let issued = out.suggestions.iter().filter(|s| s.bucket == Some(b)).count();
            assert_eq!(e.session().bucket(b).unwrap().suggested.len(), before[k] + issued);
        }
        // judge only half the images so unjudged suggestions also occur
        let mut fb = truthful(&truth, &buckets, &out.suggestions);
        fb.assignments.retain(|f| f.image.0 % 2 == 0 || f.target != Target::Discard);
        e.process_feedback(&fb).unwrap();
        e.session().check_invariants().unwrap();
    }
}

#[test]
fn oracle_replacement_rates() {
    for (o, lo, hi) in [(0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (0.2, 0.18, 0.22)] {
        let mut cfg = EngineConfig::default().with_seed(5);
        cfg.o = o;
        let (mut e, _) = engine(20_000, cfg);
        let b = e.create_bucket("b").unwrap();
        e.process_feedback(&batch(&[(0, b.into()), (1, b.into()), (2, Target::Discard)])).unwrap();
        // empty window: every slot goes to the classifier
        let out = e
            .suggest(&SuggestRequest { per_bucket_count: Some(10_000), extra_explore: Some(0), ..Default::default() })
            .unwrap();
        let class: Vec<_> = out.suggestions.iter().filter(|s| s.source == Source::Classifier).collect();
        assert_eq!(class.len(), 10_000);
        let frac = class.iter().filter(|s| s.oracle).count() as f64 / class.len() as f64;
        assert!(frac >= lo && frac <= hi, "o={o}: oracle fraction {frac}");
    }
}

#[test]
fn oracle_picks_the_boundary_image() {
    let mut cfg = EngineConfig::default().with_seed(6);
    cfg.o = 1.0;
    let (mut e, _) = engine(1000, cfg);
    let b = e.create_bucket("b").unwrap();
    e.process_feedback(&batch(&[(0, b.into()), (1, b.into()), (2, Target::Discard)])).unwrap();
    let out = e
        .suggest(&SuggestRequest { per_bucket_count: Some(1), extra_explore: Some(0), ..Default::default() })
        .unwrap();
    let s = &out.suggestions[0];
    assert!(s.oracle);
    let clf = e.classifier(b.into()).unwrap();
    let best = (0..1000u32)
        .map(ImageId)
        .filter(|&i| !e.session().is_processed(i))
        .map(|i| (clf.score_image(e.collection(), i).abs(), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .unwrap();
    assert_eq!(s.image, best.1);
}

#[test]
fn baseline_is_classifier_only() {
    let (mut e, truth) = engine(2000, EngineConfig::baseline(0.0).with_seed(7));
    let b = e.create_bucket("c0").unwrap();
    let first = e.suggest(&SuggestRequest::default()).unwrap();
    assert_eq!(first.suggestions.len(), 5);
    assert!(first.suggestions.iter().all(|s| s.bucket.is_none()));
    let seeds: Vec<u32> = (0..2000u32).filter(|&i| label_of(&truth, ImageId(i)) == 0).take(3).collect();
    e.process_feedback(&batch(&seeds.iter().map(|&i| (i, Target::Bucket(b))).collect::<Vec<_>>())).unwrap();
    for _ in 0..10 {
        let out = e.suggest(&SuggestRequest::default()).unwrap();
        assert!(out.suggestions.iter().all(|s| s.source == Source::Classifier && !s.oracle));
        let fb = truthful(&truth, &[b], &out.suggestions);
        e.process_feedback(&fb).unwrap();
    }
}

#[test]
fn knn_mode_runs_and_tags_nn() {
    let mut cfg = EngineConfig::default().with_seed(8);
    cfg.nn_mode = NnMode::Knn;
    let (mut e, truth) = engine(1500, cfg);
    let b = e.create_bucket("c0").unwrap();
    let seeds: Vec<u32> = (0..1500u32).filter(|&i| label_of(&truth, ImageId(i)) == 0).take(5).collect();
    e.process_feedback(&batch(&seeds.iter().map(|&i| (i, Target::Bucket(b))).collect::<Vec<_>>())).unwrap();
    let mut nn_seen = 0;
    for _ in 0..15 {
        let out = e.suggest(&SuggestRequest::default()).unwrap();
        nn_seen += out.suggestions.iter().filter(|s| s.source == Source::Nn).count();
        // reject everything so the split moves away from the classifier
        let mut fb = FeedbackBatch::default();
        for s in &out.suggestions {
            fb.push(s.image, Target::Discard);
        }
        e.process_feedback(&fb).unwrap();
    }
    assert!(nn_seen > 0);
}

#[test]
fn knn_mode_requires_a_matrix() {
    let (data, _) = dataset(&small_synth(300, 3, 1), false);
    let cfg = EngineConfig {
        nn_mode: NnMode::Knn,
        ..EngineConfig::default()
    };
    assert!(matches!(Engine::new(data, cfg), Err(Error::InvalidParameter(_))));
}

#[test]
fn replay_and_restore_are_bit_identical() {
    let run = |split_at: Option<usize>| {
        let (data, truth) = dataset(&small_synth(1500, 4, 9), false);
        let mut e = Engine::new(data.clone(), EngineConfig::default().with_seed(11)).unwrap();
        let buckets = [e.create_bucket("c0").unwrap(), e.create_bucket("c1").unwrap()];
        let mut log = Vec::new();
        for round in 0..25 {
            if Some(round) == split_at {
                let json = e.to_json().unwrap();
                e = Engine::from_json(data.clone(), &json).unwrap();
            }
            let out = e.suggest(&SuggestRequest::default()).unwrap();
            log.push(serde_json::to_string(&out).unwrap());
            let fb = truthful(&truth, &buckets, &out.suggestions);
            e.process_feedback(&fb).unwrap();
        }
        (log, e.to_json().unwrap())
    };
    let a = run(None);
    let b = run(None);
    let c = run(Some(12));
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn fast_forward_adds_members_for_review() {
    let (mut e, truth) = engine(2000, EngineConfig::default().with_seed(12));
    let b = e.create_bucket("c0").unwrap();
    assert!(matches!(e.fast_forward(b.into(), 5), Err(Error::NullClassifier(_))));
    let seeds: Vec<u32> = (0..2000u32).filter(|&i| label_of(&truth, ImageId(i)) == 0).take(5).collect();
    e.process_feedback(&batch(&seeds.iter().map(|&i| (i, Target::Bucket(b))).collect::<Vec<_>>())).unwrap();
    e.process_feedback(&batch(&[(1999, Target::Discard)])).unwrap_or_default();

    let added = e.fast_forward(b.into(), 25).unwrap();
    assert_eq!(added.len(), 25);
    assert_eq!(e.session().bucket(b).unwrap().members.len(), 30);
    let view = e.bucket_view(b.into(), ViewSort::Added, SortOrder::Asc).unwrap();
    assert!(view[..25].iter().all(|m| m.fast_forwarded));
    assert!(view[25..].iter().all(|m| !m.fast_forwarded));

    // the ranking is the classifier's: added images are the top unseen scores
    let clf = e.classifier(b.into()).unwrap().clone();
    let min_added = added.iter().map(|&i| clf.score_image(e.collection(), i)).fold(f64::INFINITY, f64::min);
    let best_rest = (0..2000u32)
        .map(ImageId)
        .filter(|&i| !e.session().is_processed(i))
        .map(|i| clf.score_image(e.collection(), i))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(min_added >= best_rest);

    // review: discard three, then commit the rest
    let rejects = &added[..3];
    e.transfer(rejects, b.into(), Target::Discard, TransferMode::Move).unwrap();
    assert_eq!(e.commit_fast_forward(b.into()).unwrap(), 22);
    let bucket = e.session().bucket(b).unwrap();
    assert_eq!(bucket.members.len(), 27);
    assert!(bucket.members.iter().all(|m| !m.fast_forwarded));
    assert!(rejects.iter().all(|&i| e.session().discard().contains(i)));
    assert!(e.is_stale(b.into()));
}

#[test]
fn fast_forward_on_discard_and_exhaustion() {
    let (mut e, truth) = engine(300, EngineConfig::default().with_seed(13));
    let b = e.create_bucket("c0").unwrap();
    let mut fb = FeedbackBatch::default();
    for i in 0..40u32 {
        let t = if label_of(&truth, ImageId(i)) == 0 { Target::Bucket(b) } else { Target::Discard };
        fb.push(ImageId(i), t);
    }
    e.process_feedback(&fb).unwrap();
    let added = e.fast_forward(Target::Discard, 10).unwrap();
    assert_eq!(added.len(), 10);
    assert!(added.iter().all(|&i| e.session().discard().contains(i)));
    let rest = e.fast_forward(b.into(), 10_000).unwrap();
    assert_eq!(rest.len(), 300 - 50);
    assert_eq!(e.session().processed_count(), 300);
    let out = e.suggest(&SuggestRequest::default()).unwrap();
    assert!(out.suggestions.is_empty() && out.exhausted);
}

#[test]
fn fast_forwarded_members_wait_for_commit_before_training() {
    let (mut e, truth) = engine(1000, EngineConfig::default().with_seed(14));
    let b = e.create_bucket("c0").unwrap();
    let seeds: Vec<u32> = (0..1000u32).filter(|&i| label_of(&truth, ImageId(i)) == 0).take(4).collect();
    e.process_feedback(&batch(&seeds.iter().map(|&i| (i, Target::Bucket(b))).collect::<Vec<_>>())).unwrap();
    e.fast_forward(b.into(), 10).unwrap();
    assert_eq!(e.training_set(b.into()).unwrap().positives.len(), 4);
    e.commit_fast_forward(b.into()).unwrap();
    assert_eq!(e.training_set(b.into()).unwrap().positives.len(), 14);
}

#[test]
fn negatives_fill_in_priority_order() {
    let (mut e, _) = engine(1000, EngineConfig::default().with_seed(15));
    let b = e.create_bucket("b").unwrap();
    let other = e.create_bucket("other").unwrap();
    e.process_feedback(&batch(&[(0, b.into()), (1, b.into()), (2, b.into()), (3, other.into())])).unwrap();
    let out = e
        .suggest(&SuggestRequest { per_bucket_count: Some(4), extra_explore: Some(0), ..Default::default() })
        .unwrap();
    let mine: Vec<ImageId> = out.suggestions.iter().filter(|s| s.bucket == Some(b)).map(|s| s.image).collect();
    let mut fb = FeedbackBatch::default();
    fb.push(mine[0], Target::Discard);
    fb.push(mine[1], other.into());
    for i in 900..904 {
        fb.push(ImageId(i), Target::Discard);
    }
    e.process_feedback(&fb).unwrap();

    let set = e.training_set(b.into()).unwrap();
    assert_eq!(set.positives, vec![ImageId(0), ImageId(1), ImageId(2)]);
    assert_eq!(set.negatives.from_wrong, vec![mine[0], mine[1]]);
    assert_eq!(set.negatives.from_discard.len(), 4);
    assert!(set.negatives.from_discard.iter().all(|&i| e.session().discard().contains(i)));
    assert!(set.negatives.from_collection.is_empty());
    assert_eq!(set.negatives.len(), 6);
    let negs: HashSet<ImageId> = set.negatives.all().into_iter().collect();
    assert!(set.positives.iter().all(|p| !negs.contains(p)));
}

#[test]
fn delete_bucket_drops_its_classifier() {
    let (mut e, _) = engine(500, EngineConfig::default().with_seed(16));
    let b = e.create_bucket("b").unwrap();
    let keep = e.create_bucket("keep").unwrap();
    e.process_feedback(&batch(&[(0, b.into()), (1, b.into()), (2, keep.into())])).unwrap();
    e.suggest(&SuggestRequest::default()).unwrap();
    assert!(e.classifier(b.into()).is_some());
    e.delete_bucket(b).unwrap();
    assert!(e.classifier(b.into()).is_none());
    assert!(e.session().discard().contains(ImageId(0)));
    assert!(e.is_stale(keep.into()));
}

#[test]
fn bucket_view_sorts_by_confidence() {
    let (mut e, truth) = engine(1000, EngineConfig::default().with_seed(17));
    let b = e.create_bucket("c0").unwrap();
    let mut fb = FeedbackBatch::default();
    for i in 0..60u32 {
        let t = if label_of(&truth, ImageId(i)) == 0 { Target::Bucket(b) } else { Target::Discard };
        fb.push(ImageId(i), t);
    }
    e.process_feedback(&fb).unwrap();
    e.ensure_trained(b.into()).unwrap();
    let desc = e.bucket_view(b.into(), ViewSort::Confidence, SortOrder::Desc).unwrap();
    let confs: Vec<f64> = desc.iter().map(|m| m.confidence.unwrap()).collect();
    assert!(confs.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(confs[0], 1.0);
    let asc = e.bucket_view(b.into(), ViewSort::Confidence, SortOrder::Asc).unwrap();
    let rev: Vec<ImageId> = asc.iter().rev().map(|m| m.image).collect();
    assert_eq!(rev, desc.iter().map(|m| m.image).collect::<Vec<_>>());
    assert_eq!(e.archetypes(b.into(), 1).unwrap()[0], desc[0].image);
}
