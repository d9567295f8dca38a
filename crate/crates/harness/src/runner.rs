use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use ii20_core::dataset::GroundTruth;
use ii20_core::engine::{Dataset, Engine, EngineConfig, FeedbackBatch, SuggestRequest};
use ii20_core::session::SessionState;
use ii20_core::BucketId;

use crate::actor::{Actor, ActorConfig, Judgment, Metaphor, Mistake};
use crate::metrics::{compute_metrics, MetricsLog, MetricsRow, TimingRow};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunOutcome {
    pub engine: String,
    pub actor: String,
    pub rounds: u64,
    pub shown: usize,
    pub log: MetricsLog,
    /// Final session, from which the last metrics row can be recomputed.
    pub session: SessionState,
}

/// How many images each bucket is asked for in one round, plus unattached
/// explorer picks. `rotation` spreads the remainder over the buckets.
pub fn round_plan(
    buckets: &[BucketId],
    images: usize,
    metaphor: Metaphor,
    extra_explore: usize,
    rotation: usize,
) -> (BTreeMap<BucketId, usize>, usize) {
    let mut plan: BTreeMap<BucketId, usize> = buckets.iter().map(|&b| (b, 0)).collect();
    if buckets.is_empty() || images == 0 {
        return (plan, 0);
    }
    if metaphor == Metaphor::Tetris && images == 1 {
        plan.insert(buckets[rotation % buckets.len()], 1);
        return (plan, 0);
    }
    let extra = if images > buckets.len() + extra_explore { extra_explore } else { 0 };
    let rest = images - extra;
    let k = buckets.len();
    for i in 0..k {
        let b = buckets[(rotation + i) % k];
        plan.insert(b, rest / k + usize::from(i < rest % k));
    }
    (plan, extra)
}

/// Drive an engine with a simulated actor until its image budget is spent
/// or the collection runs out of unseen images.
pub fn run_session(
    data: Dataset,
    engine_cfg: EngineConfig,
    truth: &GroundTruth,
    actor_cfg: &ActorConfig,
) -> anyhow::Result<RunOutcome> {
    actor_cfg.validate()?;
    anyhow::ensure!(
        truth.len() == data.collection.len(),
        "ground truth covers {} images but the collection has {}",
        truth.len(),
        data.collection.len()
    );
    let engine_id = engine_cfg.identifier();
    let extra_explore = engine_cfg.extra_explore;
    let mut engine = Engine::new(data, engine_cfg)?;

    let mut relevance = Vec::new();
    for label in &actor_cfg.relevance {
        let idx = truth
            .label_index(label)
            .with_context(|| format!("label {label:?} does not occur in the ground truth"))?;
        let b = engine.create_bucket(label.clone())?;
        relevance.push((idx, b));
    }
    let buckets: Vec<BucketId> = relevance.iter().map(|&(_, b)| b).collect();
    let mut actor = Actor::new(relevance.clone(), actor_cfg.err_a, actor_cfg.seed);

    let mut log = MetricsLog {
        labels: actor_cfg.relevance.clone(),
        ..MetricsLog::default()
    };
    let per_round = actor_cfg.images_per_round();
    let mut shown = 0usize;
    let mut rounds = 0u64;
    let mut elapsed = 0.0f64;

    while shown < actor_cfg.budget {
        let images = per_round.min(actor_cfg.budget - shown);
        let (per_bucket, extra) = round_plan(&buckets, images, actor_cfg.metaphor, extra_explore, rounds as usize);
        let req = SuggestRequest {
            per_bucket_count: Some(0),
            per_bucket,
            extra_explore: Some(extra),
        };
        let t0 = Instant::now();
        let batch = engine.suggest(&req)?;
        let suggest_secs = t0.elapsed().as_secs_f64();
        if batch.suggestions.is_empty() {
            log.ended_early = Some(format!("no unseen images left after {shown} shown"));
            break;
        }

        let mut feedback = FeedbackBatch::default();
        for s in &batch.suggestions {
            let (judgment, mistake) = actor.judge(s.image, truth, &buckets);
            log.mistakes.judgments += 1;
            match mistake {
                Some(Mistake::Ignore) => log.mistakes.ignore += 1,
                Some(Mistake::Flip) => log.mistakes.flip += 1,
                Some(Mistake::Confuse) => log.mistakes.confuse += 1,
                None => {}
            }
            if let Judgment::Assign(target) = judgment {
                feedback.push(s.image, target);
            }
        }
        let t1 = Instant::now();
        engine.process_feedback(&feedback)?;
        let feedback_secs = t1.elapsed().as_secs_f64();
        elapsed += suggest_secs + feedback_secs;

        shown += batch.suggestions.len();
        rounds += 1;
        log.rows.push(MetricsRow {
            round: batch.round,
            processed: shown,
            metrics: compute_metrics(engine.session(), truth, &relevance),
        });
        log.timings.push(TimingRow {
            round: batch.round,
            suggest_secs,
            feedback_secs,
            cumulative_secs: elapsed,
        });
        if batch.exhausted {
            log.ended_early = Some(format!("unseen pool exhausted after {shown} shown"));
            break;
        }
    }

    Ok(RunOutcome {
        engine: engine_id,
        actor: actor_cfg.identifier(),
        rounds,
        shown,
        log,
        session: engine.session().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_plan_fills_the_round() {
        let bs = [BucketId(1), BucketId(2)];
        let (plan, extra) = round_plan(&bs, 25, Metaphor::Grid, 2, 0);
        assert_eq!(extra, 2);
        assert_eq!(plan[&BucketId(1)], 12);
        assert_eq!(plan[&BucketId(2)], 11);
        let (plan, _) = round_plan(&bs, 25, Metaphor::Grid, 2, 1);
        assert_eq!(plan[&BucketId(1)], 11);
        assert_eq!(plan[&BucketId(2)], 12);
        // a short final round skips the extra picks
        let (plan, extra) = round_plan(&bs, 3, Metaphor::Grid, 2, 0);
        assert_eq!(extra, 0);
        assert_eq!(plan.values().sum::<usize>(), 3);
    }

    #[test]
    fn tetris_plan_rotates_buckets() {
        let bs = [BucketId(1), BucketId(2), BucketId(3)];
        for r in 0..6 {
            let (plan, extra) = round_plan(&bs, 1, Metaphor::Tetris, 2, r);
            assert_eq!(extra, 0);
            assert_eq!(plan[&bs[r % 3]], 1);
            assert_eq!(plan.values().sum::<usize>(), 1);
        }
    }
}
