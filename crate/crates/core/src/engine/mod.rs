//! The suggestion pipeline: feedback processing, lazy retraining, the
//! exploration-search split, suggestion filling and fast-forward.

mod config;
mod explore;
mod split;

pub use config::{EngineConfig, NnMode, SplitMode};
pub use explore::{candidate_pool_size, explore, DistanceCache};
pub use split::{compute_split, roulette_source, source_for_draw, windowed_precision};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    assemble_negatives, assemble_positives, confidence_ratio, BucketClassifier, Negatives,
};
use crate::dataset::Collection;
use crate::error::{Error, Result};
use crate::ids::{BucketId, ImageId, Target};
use crate::pq::{ann_search, knn_suggest, KnnMatrix, PqIndex};
use crate::sampling::sample_unseen;
use crate::session::{AssignmentOutcome, LedgerEntry, SessionState, Source, TransferMode};

pub const ENGINE_STATE_VERSION: u32 = 1;

/// Immutable data an engine runs over.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub collection: Arc<Collection>,
    pub index: Arc<PqIndex>,
    pub knn: Option<Arc<KnnMatrix>>,
}

impl Dataset {
    pub fn new(collection: Collection, index: PqIndex, knn: Option<KnnMatrix>) -> Result<Self> {
        if index.len() != collection.len() {
            return Err(Error::InvalidParameter(format!(
                "index covers {} images but the collection has {}",
                index.len(),
                collection.len()
            )));
        }
        if let Some(k) = &knn {
            if k.len() != collection.len() {
                return Err(Error::InvalidParameter(format!(
                    "kNN matrix covers {} images but the collection has {}",
                    k.len(),
                    collection.len()
                )));
            }
        }
        Ok(Dataset {
            collection: Arc::new(collection),
            index: Arc::new(index),
            knn: knn.map(Arc::new),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Feedback {
    pub image: ImageId,
    pub target: Target,
}

/// User judgments submitted for one round. Each image may appear once.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackBatch {
    pub assignments: Vec<Feedback>,
}

impl FeedbackBatch {
    pub fn push(&mut self, image: ImageId, target: Target) {
        self.assignments.push(Feedback { image, target });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub image: ImageId,
    /// Absent for explorer suggestions.
    pub bucket: Option<BucketId>,
    pub source: Source,
    pub oracle: bool,
    /// Bucket confidence; `None` where it is undefined.
    pub confidence: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuggestRequest {
    /// Count for every active bucket; defaults to `s_b`.
    pub per_bucket_count: Option<usize>,
    /// Per-bucket overrides.
    pub per_bucket: BTreeMap<BucketId, usize>,
    /// Unattached explorer suggestions; defaults to `extra_explore`.
    pub extra_explore: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestionBatch {
    pub round: u64,
    pub suggestions: Vec<Suggestion>,
    pub requested: usize,
    /// Fewer suggestions than requested: the unseen pool ran dry.
    pub exhausted: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewSort {
    Confidence,
    #[default]
    Added,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Asc,
    #[default]
    Desc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberView {
    pub image: ImageId,
    pub added_round: u64,
    pub fast_forwarded: bool,
    pub confidence: Option<f64>,
}

/// Positives and negatives the next training of a target would use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub positives: Vec<ImageId>,
    pub negatives: Negatives,
}

/// Everything needed to resume an engine, as one versioned document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    pub version: u32,
    pub config: EngineConfig,
    pub session: SessionState,
    pub classifiers: BTreeMap<Target, BucketClassifier>,
    pub stale: BTreeSet<Target>,
    pub rng: ChaCha8Rng,
}

/// Collection order by descending score and by ascending |score|.
#[derive(Debug)]
struct Ranking {
    scores: Vec<f64>,
    by_score: Vec<u32>,
    by_margin: Option<Vec<u32>>,
}

impl Ranking {
    fn new(scores: Vec<f64>) -> Self {
        let mut by_score: Vec<u32> = (0..scores.len() as u32).collect();
        by_score.par_sort_unstable_by(|&a, &b| {
            scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b))
        });
        Ranking {
            scores,
            by_score,
            by_margin: None,
        }
    }

    fn ensure_margin(&mut self) {
        if self.by_margin.is_some() {
            return;
        }
        let scores = &self.scores;
        let mut order: Vec<u32> = (0..scores.len() as u32).collect();
        order.par_sort_unstable_by(|&a, &b| {
            scores[a as usize]
                .abs()
                .total_cmp(&scores[b as usize].abs())
                .then(a.cmp(&b))
        });
        self.by_margin = Some(order);
    }
}

/// Walks a ranking, skipping excluded ids.
struct Cursor<'a> {
    order: &'a [u32],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(order: &'a [u32]) -> Self {
        Cursor { order, pos: 0 }
    }

    fn next(&mut self, excluded: impl Fn(ImageId) -> bool) -> Option<ImageId> {
        while self.pos < self.order.len() {
            let id = ImageId(self.order[self.pos]);
            self.pos += 1;
            if !excluded(id) {
                return Some(id);
            }
        }
        None
    }
}

/// One analytic session over a dataset.
pub struct Engine {
    data: Dataset,
    state: EngineState,
    rankings: HashMap<Target, Ranking>,
    distances: DistanceCache,
}

impl Engine {
    pub fn new(data: Dataset, config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let state = EngineState {
            version: ENGINE_STATE_VERSION,
            session: SessionState::new(data.collection.len()),
            classifiers: BTreeMap::new(),
            stale: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
        };
        Self::restore(data, state)
    }

    /// Resume from a saved state.
    pub fn restore(data: Dataset, state: EngineState) -> Result<Self> {
        if state.version != ENGINE_STATE_VERSION {
            return Err(Error::Version {
                what: "engine state",
                found: state.version,
            });
        }
        state.config.validate()?;
        if state.session.n_images() != data.collection.len() {
            return Err(Error::InvalidParameter(format!(
                "session was created for {} images but the collection has {}",
                state.session.n_images(),
                data.collection.len()
            )));
        }
        if state.config.nn_mode == NnMode::Knn && data.knn.is_none() {
            return Err(Error::InvalidParameter("kNN mode needs a kNN matrix".into()));
        }
        Ok(Engine {
            data,
            state,
            rankings: HashMap::new(),
            distances: DistanceCache::default(),
        })
    }

    pub fn from_json(data: Dataset, json: &str) -> Result<Self> {
        Self::restore(data, serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.state)?)
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn config(&self) -> &EngineConfig {
        &self.state.config
    }

    pub fn session(&self) -> &SessionState {
        &self.state.session
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn collection(&self) -> &Collection {
        &self.data.collection
    }

    pub fn classifier(&self, target: Target) -> Option<&BucketClassifier> {
        self.state.classifiers.get(&target)
    }

    pub fn is_stale(&self, target: Target) -> bool {
        self.state.stale.contains(&target)
    }

    fn mark_stale(&mut self, targets: impl IntoIterator<Item = Target>) {
        for t in targets {
            self.state.stale.insert(t);
            match t {
                // discard members are negatives of every bucket
                Target::Discard => {
                    let all: Vec<BucketId> = self.state.session.buckets().map(|b| b.id).collect();
                    self.state.stale.extend(all.into_iter().map(Target::Bucket));
                }
                // bucket members are negatives of the discard classifier
                Target::Bucket(_) => {
                    self.state.stale.insert(Target::Discard);
                }
            }
        }
    }

    // ----- bucket lifecycle -------------------------------------------------

    pub fn create_bucket(&mut self, name: impl Into<String>) -> Result<BucketId> {
        self.state.session.create_bucket(name, true)
    }

    pub fn create_bucket_with(&mut self, name: impl Into<String>, active: bool) -> Result<BucketId> {
        self.state.session.create_bucket(name, active)
    }

    pub fn rename_bucket(&mut self, id: BucketId, name: impl Into<String>) -> Result<()> {
        self.state.session.rename_bucket(id, name)
    }

    pub fn set_color(&mut self, id: BucketId, color: impl Into<String>) -> Result<()> {
        self.state.session.set_color(id, color)
    }

    pub fn set_active(&mut self, id: BucketId, active: bool) -> Result<()> {
        self.state.session.set_active(id, active)
    }

    pub fn delete_bucket(&mut self, id: BucketId) -> Result<()> {
        let outcome = self.state.session.delete_bucket(id)?;
        let t = Target::Bucket(id);
        self.state.classifiers.remove(&t);
        self.rankings.remove(&t);
        self.state.stale.remove(&t);
        self.mark_stale(outcome.retrain);
        self.state.stale.insert(Target::Discard);
        Ok(())
    }

    pub fn transfer(&mut self, images: &[ImageId], from: Target, to: Target, mode: TransferMode) -> Result<AssignmentOutcome> {
        let outcome = self.state.session.transfer(images, from, to, mode)?;
        self.mark_stale(outcome.retrain.iter().copied());
        Ok(outcome)
    }

    // ----- feedback ---------------------------------------------------------

    /// Apply a round of user judgments atomically. Returns every target whose
    /// members or ledgers changed.
    pub fn process_feedback(&mut self, batch: &FeedbackBatch) -> Result<BTreeSet<Target>> {
        let session = &self.state.session;
        let mut seen = HashSet::with_capacity(batch.assignments.len());
        for f in &batch.assignments {
            if f.image.index() >= session.n_images() {
                return Err(Error::UnknownImage(f.image));
            }
            if let Target::Bucket(b) = f.target {
                session.bucket(b)?;
            }
            if !seen.insert(f.image) {
                return Err(Error::DuplicateFeedback(f.image));
            }
        }
        let round = self.state.session.round();
        let mut touched = BTreeSet::new();
        for f in &batch.assignments {
            let judged = self.state.session.record_judgment(f.image, f.target);
            touched.extend(judged.into_iter().map(Target::Bucket));
            let outcome = self.state.session.assign(f.image, f.target, round)?;
            touched.extend(outcome.retrain);
        }
        self.mark_stale(touched.iter().copied());
        Ok(touched)
    }

    // ----- training ---------------------------------------------------------

    fn positives_pool(&self, target: Target) -> Result<Vec<ImageId>> {
        // fast-forwarded members join the training data only once committed
        Ok(self
            .state
            .session
            .pile(target)?
            .iter()
            .filter(|m| !m.fast_forwarded)
            .map(|m| m.image)
            .collect())
    }

    fn assemble(&self, target: Target, rng: &mut ChaCha8Rng) -> Result<TrainingSet> {
        let session = &self.state.session;
        let collection = &*self.data.collection;
        let pool = self.positives_pool(target)?;
        let positives = assemble_positives(
            &pool,
            self.state.classifiers.get(&target),
            collection,
            &self.state.config.training,
        );
        let ratio = self.state.config.training.negative_ratio;
        let n = collection.len();
        let negatives = match target {
            Target::Bucket(b) => {
                let bucket = session.bucket(b)?;
                let wrong: Vec<ImageId> = bucket.wrong.entries().iter().map(|e| e.image).collect();
                let discard = session.discard().ids();
                assemble_negatives(
                    positives.len(),
                    &wrong,
                    &discard,
                    |id| bucket.members.contains(id),
                    |id| session.is_processed(id) && !session.discard().contains(id),
                    n,
                    ratio,
                    rng,
                )
            }
            Target::Discard => {
                let members: Vec<ImageId> = session
                    .buckets()
                    .flat_map(|b| b.members.iter().map(|m| m.image))
                    .collect();
                assemble_negatives(
                    positives.len(),
                    &members,
                    &[],
                    |id| session.discard().contains(id),
                    |_| false,
                    n,
                    ratio,
                    rng,
                )
            }
        };
        Ok(TrainingSet { positives, negatives })
    }

    /// The training set the target would be trained on now. Does not advance
    /// the engine's random state.
    pub fn training_set(&self, target: Target) -> Result<TrainingSet> {
        let mut rng = self.state.rng.clone();
        self.assemble(target, &mut rng)
    }

    fn train_target(&mut self, target: Target) -> Result<()> {
        let mut rng = self.state.rng.clone();
        let set = self.assemble(target, &mut rng)?;
        let seed = rng.random::<u64>();
        self.state.rng = rng;
        self.rankings.remove(&target);
        self.state.stale.remove(&target);
        if set.positives.is_empty() {
            self.state.classifiers.remove(&target);
            return Ok(());
        }
        let clf = crate::classifier::train(
            &set.positives,
            &set.negatives.all(),
            &self.data.collection,
            &self.state.config.training,
            seed,
            self.state.session.round(),
        )?;
        log::debug!(
            "trained {target}: {} positives, {} negatives",
            clf.positive_count,
            clf.negative_count
        );
        self.state.classifiers.insert(target, clf);
        Ok(())
    }

    /// Retrain the target if its data changed since the last training.
    pub fn ensure_trained(&mut self, target: Target) -> Result<()> {
        let has_members = !self.positives_pool(target)?.is_empty();
        let has_clf = self.state.classifiers.contains_key(&target);
        if self.is_stale(target) || has_members != has_clf {
            self.train_target(target)?;
        }
        Ok(())
    }

    fn ensure_ranking(&mut self, target: Target, margin: bool) {
        if !self.rankings.contains_key(&target) {
            if let Some(clf) = self.state.classifiers.get(&target) {
                let scores = clf.score_collection(&self.data.collection);
                self.rankings.insert(target, Ranking::new(scores));
            }
        }
        if margin {
            if let Some(r) = self.rankings.get_mut(&target) {
                r.ensure_margin();
            }
        }
    }

    // ----- suggestions ------------------------------------------------------

    /// The windowed precisions of a bucket as of the last completed round.
    pub fn split(&self, bucket: BucketId) -> Result<(f64, f64)> {
        let b = self.state.session.bucket(bucket)?;
        Ok(compute_split(b, self.state.config.w, self.state.session.round()))
    }

    /// One interaction round: retrain flagged buckets and propose images for
    /// every active bucket, plus unattached explorer images.
    pub fn suggest(&mut self, req: &SuggestRequest) -> Result<SuggestionBatch> {
        for &b in req.per_bucket.keys() {
            self.state.session.bucket(b)?;
        }
        let active = self.state.session.active_buckets();
        if active.is_empty() {
            return Err(Error::NoActiveBucket);
        }
        let now = self.state.session.round();
        let round = self.state.session.advance_round();
        let mut chosen: HashSet<ImageId> = HashSet::new();
        let mut out = Vec::new();
        let mut requested = 0;
        for b in active {
            let count = req
                .per_bucket
                .get(&b)
                .copied()
                .or(req.per_bucket_count)
                .unwrap_or(self.state.config.s_b);
            if count == 0 {
                continue;
            }
            requested += count;
            self.suggest_for_bucket(b, count, round, now, &mut chosen, &mut out)?;
        }
        let extra = req.extra_explore.unwrap_or(self.state.config.extra_explore);
        requested += extra;
        let picks = self.explore_fill(extra, &chosen);
        for id in picks {
            chosen.insert(id);
            out.push(explorer_suggestion(id));
        }
        Ok(SuggestionBatch {
            round,
            exhausted: out.len() < requested,
            requested,
            suggestions: out,
        })
    }

    /// Explorer (or, for the classifier-only baseline, uniform random) picks.
    fn explore_fill(&mut self, count: usize, chosen: &HashSet<ImageId>) -> Vec<ImageId> {
        if count == 0 {
            return Vec::new();
        }
        let session = &self.state.session;
        let excluded = |id: ImageId| session.is_processed(id) || chosen.contains(&id);
        match self.state.config.split {
            SplitMode::ClassifierOnly => {
                sample_unseen(session.n_images(), count, |i| excluded(ImageId(i)), &mut self.state.rng)
                    .into_iter()
                    .map(ImageId)
                    .collect()
            }
            SplitMode::Adaptive => explore(
                &self.data.index,
                &mut self.distances,
                &session.processed(),
                excluded,
                count,
                self.state.config.explorer_multiplier,
                &mut self.state.rng,
            ),
        }
    }

    fn suggest_for_bucket(
        &mut self,
        b: BucketId,
        count: usize,
        round: u64,
        now: u64,
        chosen: &mut HashSet<ImageId>,
        out: &mut Vec<Suggestion>,
    ) -> Result<()> {
        let target = Target::Bucket(b);
        self.ensure_trained(target)?;
        if !self.state.classifiers.contains_key(&target) {
            for id in self.explore_fill(count, chosen) {
                chosen.insert(id);
                out.push(explorer_suggestion(id));
            }
            return Ok(());
        }

        let cfg = self.state.config.clone();
        let (p_class, p_nn) = match cfg.split {
            SplitMode::ClassifierOnly => (1.0, 0.0),
            SplitMode::Adaptive => compute_split(self.state.session.bucket(b)?, cfg.w, now),
        };
        let (mut n_class, mut n_nn, mut n_explore) = (0usize, 0usize, 0usize);
        for _ in 0..count {
            match roulette_source(p_class, p_nn, &mut self.state.rng) {
                Source::Classifier => n_class += 1,
                Source::Nn => n_nn += 1,
                Source::Explorer => n_explore += 1,
            }
        }
        self.ensure_ranking(target, n_class > 0 && cfg.o > 0.0);

        let mut picks: Vec<(ImageId, Source, bool)> = Vec::with_capacity(count);
        {
            let session = &self.state.session;
            let bucket = session.bucket(b)?;
            let ranking = &self.rankings[&target];
            let rng = &mut self.state.rng;

            let mut top = Cursor::new(&ranking.by_score);
            let mut margin = Cursor::new(ranking.by_margin.as_deref().unwrap_or(&[]));
            for _ in 0..n_class {
                let oracle = rng.random::<f64>() < cfg.o;
                let excluded = |id: ImageId| {
                    session.is_processed(id) || chosen.contains(&id) || bucket.suggested.contains(id)
                };
                let pick = if oracle { margin.next(excluded) } else { top.next(excluded) };
                match pick {
                    Some(id) => {
                        chosen.insert(id);
                        picks.push((id, Source::Classifier, oracle));
                    }
                    None => n_explore += 1,
                }
            }

            if n_nn > 0 {
                let members = bucket.members.ids();
                let excluded = |id: ImageId| {
                    session.is_processed(id) || chosen.contains(&id) || bucket.suggested.contains(id)
                };
                let found: Vec<ImageId> = match cfg.nn_mode {
                    NnMode::Knn => {
                        let knn = self.data.knn.as_ref().expect("checked at construction");
                        knn_suggest(&members, knn, n_nn, excluded, cfg.nn.knn_member_cap, rng)
                    }
                    NnMode::Ann => ann_search(
                        &members,
                        &self.data.collection,
                        &self.data.index,
                        n_nn,
                        excluded,
                        &cfg.nn,
                        rng,
                    )
                    .into_iter()
                    .map(|(id, _)| id)
                    .collect(),
                };
                n_explore += n_nn - found.len();
                for id in found {
                    chosen.insert(id);
                    picks.push((id, Source::Nn, false));
                }
            }
        }

        let clf = &self.state.classifiers[&target];
        let members = self.state.session.bucket(b)?.members.ids();
        let member_max = clf.member_max(&self.data.collection, &members).unwrap_or(0.0);
        let scores = &self.rankings[&target].scores;
        for &(id, source, oracle) in &picks {
            out.push(Suggestion {
                image: id,
                bucket: Some(b),
                source,
                oracle,
                confidence: Some(confidence_ratio(scores[id.index()], member_max)),
            });
        }
        for (id, source, oracle) in picks {
            self.state.session.record_suggestion(
                b,
                LedgerEntry {
                    image: id,
                    round,
                    source,
                    oracle,
                },
            )?;
        }

        for id in self.explore_fill(n_explore, chosen) {
            chosen.insert(id);
            out.push(explorer_suggestion(id));
        }
        Ok(())
    }

    // ----- fast-forward -----------------------------------------------------

    /// Add the top `n_ff` unseen images by classifier score straight into
    /// `target`, marked for review. Training picks them up on commit.
    pub fn fast_forward(&mut self, target: Target, n_ff: usize) -> Result<Vec<ImageId>> {
        if n_ff == 0 {
            return Err(Error::InvalidParameter("n_ff must be at least 1".into()));
        }
        self.ensure_trained(target)?;
        if !self.state.classifiers.contains_key(&target) {
            return Err(Error::NullClassifier(target));
        }
        let picks = self.fast_forward_candidates(target, n_ff);
        self.state.session.add_fast_forwarded(target, &picks)?;
        Ok(picks)
    }

    /// The selection step of a fast-forward: a trim of the cached ranking.
    pub fn fast_forward_candidates(&mut self, target: Target, n_ff: usize) -> Vec<ImageId> {
        self.ensure_ranking(target, false);
        let Some(ranking) = self.rankings.get(&target) else {
            return Vec::new();
        };
        let session = &self.state.session;
        let mut cursor = Cursor::new(&ranking.by_score);
        let mut picks = Vec::with_capacity(n_ff.min(session.n_images()));
        while picks.len() < n_ff {
            match cursor.next(|id| session.is_processed(id)) {
                Some(id) => picks.push(id),
                None => break,
            }
        }
        picks
    }

    /// Accept the remaining fast-forwarded members of `target`.
    pub fn commit_fast_forward(&mut self, target: Target) -> Result<usize> {
        let n = self.state.session.commit_fast_forward(target)?;
        if n > 0 {
            self.mark_stale([target]);
        }
        Ok(n)
    }

    // ----- read-side views --------------------------------------------------

    /// Bucket confidence of an image under the bucket's current classifier.
    pub fn confidence(&self, bucket: BucketId, image: ImageId) -> Result<Option<f64>> {
        let members = self.state.session.bucket(bucket)?.members.ids();
        Ok(crate::classifier::bucket_confidence(
            self.classifier(Target::Bucket(bucket)),
            &self.data.collection,
            image,
            &members,
        ))
    }

    /// Members of a bucket (or the discard pile) with confidences.
    /// Uncommitted fast-forwarded members come first.
    pub fn bucket_view(&self, target: Target, sort: ViewSort, order: SortOrder) -> Result<Vec<MemberView>> {
        let pile = self.state.session.pile(target)?;
        let collection = &*self.data.collection;
        let clf = self.classifier(target);
        let ids = pile.ids();
        let max = clf.and_then(|c| c.member_max(collection, &ids));
        let mut rows: Vec<(usize, f64, MemberView)> = pile
            .iter()
            .enumerate()
            .map(|(pos, m)| {
                let score = clf.map(|c| c.score_image(collection, m.image));
                let confidence = match (score, max) {
                    (Some(s), Some(mx)) => Some(confidence_ratio(s, mx)),
                    _ => None,
                };
                let view = MemberView {
                    image: m.image,
                    added_round: m.added_round,
                    fast_forwarded: m.fast_forwarded,
                    confidence,
                };
                (pos, score.unwrap_or(0.0), view)
            })
            .collect();
        rows.sort_by(|a, b| {
            let key = match sort {
                ViewSort::Confidence => a
                    .2
                    .confidence
                    .unwrap_or(0.0)
                    .total_cmp(&b.2.confidence.unwrap_or(0.0))
                    .then(a.1.total_cmp(&b.1)),
                ViewSort::Added => a.2.added_round.cmp(&b.2.added_round),
            }
            .then(a.0.cmp(&b.0));
            let key = match order {
                SortOrder::Asc => key,
                SortOrder::Desc => key.reverse(),
            };
            b.2.fast_forwarded.cmp(&a.2.fast_forwarded).then(key)
        });
        Ok(rows.into_iter().map(|r| r.2).collect())
    }

    pub fn archetypes(&self, target: Target, count: usize) -> Result<Vec<ImageId>> {
        let ids = self.state.session.pile(target)?.ids();
        Ok(crate::classifier::archetypes(
            &ids,
            self.classifier(target),
            &self.data.collection,
            count,
        ))
    }
}

fn explorer_suggestion(image: ImageId) -> Suggestion {
    Suggestion {
        image,
        bucket: None,
        source: Source::Explorer,
        oracle: false,
        confidence: None,
    }
}
