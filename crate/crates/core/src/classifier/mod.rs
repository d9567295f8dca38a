//! Per-bucket interactive classifier: training-set assembly, training,
//! collection scoring, bucket confidence and archetypes.

mod svm;

pub use svm::{train_svm, train_svm_weighted, SvmModel, SvmParams};

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Collection;
use crate::error::{Error, Result};
use crate::ids::ImageId;
use crate::sampling::{sample_slice, sample_unseen};
use crate::sparse::SparseRow;

/// How the positive training set is chosen from a large bucket.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pruning {
    #[default]
    All,
    /// Highest-scoring members under the previous classifier.
    Rf,
    /// Lowest-scoring members under the previous classifier.
    Al,
    /// Half of each.
    Hybrid,
}

impl Pruning {
    pub fn as_str(self) -> &'static str {
        match self {
            Pruning::All => "all",
            Pruning::Rf => "rf",
            Pruning::Al => "al",
            Pruning::Hybrid => "hybrid",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub pruning: Pruning,
    pub n_tr: usize,
    pub negative_ratio: usize,
    /// SVM regularization strength.
    pub c: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            pruning: Pruning::All,
            n_tr: 100,
            negative_ratio: 2,
            c: 1.0,
            tolerance: 0.01,
            max_epochs: 1000,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_tr < 2 {
            return Err(Error::InvalidParameter("n_tr must be at least 2".into()));
        }
        if self.negative_ratio < 1 {
            return Err(Error::InvalidParameter("negative_ratio must be at least 1".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter("c must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidParameter("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Linear decision function over the concept space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub trained_round: u64,
    pub positive_count: usize,
    pub negative_count: usize,
}

impl BucketClassifier {
    /// A classifier with given parameters and no training history.
    pub fn from_parts(weights: Vec<f64>, bias: f64) -> Self {
        BucketClassifier {
            weights,
            bias,
            trained_round: 0,
            positive_count: 1,
            negative_count: 0,
        }
    }

    pub fn score(&self, row: SparseRow<'_>) -> f64 {
        row.dot(&self.weights) + self.bias
    }

    pub fn score_image(&self, collection: &Collection, id: ImageId) -> f64 {
        self.score(collection.concept(id))
    }

    /// Raw decision value for every image, in id order.
    pub fn score_collection(&self, collection: &Collection) -> Vec<f64> {
        (0..collection.len() as u32)
            .into_par_iter()
            .with_min_len(4096)
            .map(|i| self.score_image(collection, ImageId(i)))
            .collect()
    }

    /// Largest score among the given members.
    pub fn member_max(&self, collection: &Collection, members: &[ImageId]) -> Option<f64> {
        members
            .iter()
            .map(|&m| self.score_image(collection, m))
            .max_by(f64::total_cmp)
    }
}

/// Clamped ratio of a score to the best member score; 0 when no member
/// scores positively.
pub fn confidence_ratio(score: f64, member_max: f64) -> f64 {
    if member_max <= 0.0 {
        return 0.0;
    }
    (score / member_max).clamp(0.0, 1.0)
}

/// Bucket confidence of an image, or `None` while the bucket has no classifier.
pub fn bucket_confidence(
    classifier: Option<&BucketClassifier>,
    collection: &Collection,
    image: ImageId,
    members: &[ImageId],
) -> Option<f64> {
    let clf = classifier?;
    let max = clf.member_max(collection, members)?;
    Some(confidence_ratio(clf.score_image(collection, image), max))
}

/// Descending by score, ties to the lower id.
pub fn by_score_desc(a: &(f64, ImageId), b: &(f64, ImageId)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

fn scored(members: &[ImageId], clf: &BucketClassifier, collection: &Collection) -> Vec<(f64, ImageId)> {
    members.iter().map(|&m| (clf.score_image(collection, m), m)).collect()
}

/// Positive training images for a bucket.
pub fn assemble_positives(
    members: &[ImageId],
    previous: Option<&BucketClassifier>,
    collection: &Collection,
    cfg: &TrainingConfig,
) -> Vec<ImageId> {
    let clf = match previous {
        Some(c) if cfg.pruning != Pruning::All && members.len() > cfg.n_tr => c,
        _ => return members.to_vec(),
    };
    let mut ranked = scored(members, clf, collection);
    ranked.sort_by(by_score_desc);
    let (top, bottom) = match cfg.pruning {
        Pruning::Rf => (cfg.n_tr, 0),
        Pruning::Al => (0, cfg.n_tr),
        Pruning::Hybrid => (cfg.n_tr - cfg.n_tr / 2, cfg.n_tr / 2),
        Pruning::All => unreachable!(),
    };
    let keep: HashSet<ImageId> = ranked[..top]
        .iter()
        .chain(ranked[ranked.len() - bottom..].iter())
        .map(|p| p.1)
        .collect();
    members.iter().copied().filter(|m| keep.contains(m)).collect()
}

/// Negatives split by where they came from, in priority order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Negatives {
    pub from_wrong: Vec<ImageId>,
    pub from_discard: Vec<ImageId>,
    pub from_collection: Vec<ImageId>,
}

impl Negatives {
    pub fn len(&self) -> usize {
        self.from_wrong.len() + self.from_discard.len() + self.from_collection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> Vec<ImageId> {
        let mut v = Vec::with_capacity(self.len());
        v.extend(&self.from_wrong);
        v.extend(&self.from_discard);
        v.extend(&self.from_collection);
        v
    }
}

/// Negative training images: every usable wrong suggestion, then a discard
/// sample, then a collection sample, until `ratio × positives` is reached.
///
/// `excluded` marks images that must never be negatives (at least the
/// positives' bucket members); the collection fill additionally skips
/// `fill_excluded` images.
#[allow(clippy::too_many_arguments)]
pub fn assemble_negatives<R: Rng + ?Sized>(
    positives: usize,
    wrong: &[ImageId],
    discard: &[ImageId],
    excluded: impl Fn(ImageId) -> bool,
    fill_excluded: impl Fn(ImageId) -> bool,
    n_images: usize,
    ratio: usize,
    rng: &mut R,
) -> Negatives {
    let need = positives.saturating_mul(ratio);
    let mut taken: HashSet<ImageId> = HashSet::new();
    let mut out = Negatives::default();
    for &id in wrong {
        if !excluded(id) && taken.insert(id) {
            out.from_wrong.push(id);
        }
    }
    if taken.len() < need {
        let mut open_seen = HashSet::new();
        let open: Vec<ImageId> = discard
            .iter()
            .copied()
            .filter(|&id| !excluded(id) && !taken.contains(&id) && open_seen.insert(id))
            .collect();
        out.from_discard = sample_slice(&open, need - taken.len(), rng);
        taken.extend(&out.from_discard);
    }
    if taken.len() < need {
        out.from_collection = sample_unseen(
            n_images,
            need - taken.len(),
            |i| {
                let id = ImageId(i);
                excluded(id) || fill_excluded(id) || taken.contains(&id)
            },
            rng,
        )
        .into_iter()
        .map(ImageId)
        .collect();
    }
    out
}

/// Fit a classifier on the given positives and negatives.
pub fn train(
    positives: &[ImageId],
    negatives: &[ImageId],
    collection: &Collection,
    cfg: &TrainingConfig,
    seed: u64,
    round: u64,
) -> Result<BucketClassifier> {
    if positives.is_empty() {
        return Err(Error::InvalidParameter("training needs at least one positive".into()));
    }
    // Repeated (image, label) pairs become one row with a proportionally
    // larger cost bound, scaled so that uniform repetition changes nothing.
    let mut index: HashMap<(ImageId, bool), usize> = HashMap::new();
    let mut unique: Vec<(ImageId, bool)> = Vec::new();
    let mut multiplicity: Vec<f64> = Vec::new();
    for (id, label) in positives.iter().map(|&p| (p, true)).chain(negatives.iter().map(|&n| (n, false))) {
        let slot = *index.entry((id, label)).or_insert_with(|| {
            unique.push((id, label));
            multiplicity.push(0.0);
            unique.len() - 1
        });
        multiplicity[slot] += 1.0;
    }
    let total = (positives.len() + negatives.len()) as f64;
    let scale = unique.len() as f64 / total;
    let costs: Vec<f64> = multiplicity.iter().map(|m| m * scale).collect();
    let rows: Vec<SparseRow<'_>> = unique.iter().map(|&(id, _)| collection.concept(id)).collect();
    let labels: Vec<bool> = unique.iter().map(|&(_, l)| l).collect();
    let params = SvmParams {
        c: cfg.c,
        tolerance: cfg.tolerance,
        max_epochs: cfg.max_epochs,
        bias_feature: 1.0,
        seed,
    };
    let model = train_svm_weighted(&rows, &labels, &costs, collection.concept_dim(), &params);
    Ok(BucketClassifier {
        weights: model.weights,
        bias: model.bias,
        trained_round: round,
        positive_count: positives.len(),
        negative_count: negatives.len(),
    })
}

/// Members that best represent the bucket: top by score, or the most
/// recently added ones while there is no classifier. `members` is in
/// insertion order.
pub fn archetypes(
    members: &[ImageId],
    classifier: Option<&BucketClassifier>,
    collection: &Collection,
    count: usize,
) -> Vec<ImageId> {
    match classifier {
        None => members.iter().rev().take(count).copied().collect(),
        Some(clf) => {
            let mut ranked = scored(members, clf, collection);
            ranked.sort_by(by_score_desc);
            ranked.into_iter().take(count).map(|p| p.1).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::CollectionBuilder;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line_collection(n: usize) -> Collection {
        // concept 0 carries value i/n, concept 1 is constant
        let mut b = CollectionBuilder::new(2, 2, 2);
        for i in 0..n {
            b.push_dense(&[i as f32, 0.0], &[i as f32 / n as f32, 0.5]).unwrap();
        }
        b.build().unwrap()
    }

    fn ids(v: &[u32]) -> Vec<ImageId> {
        v.iter().map(|&i| ImageId(i)).collect()
    }

    #[test]
    fn confidence_ratio_edges() {
        assert_eq!(confidence_ratio(2.0, 2.0), 1.0);
        assert_eq!(confidence_ratio(-0.5, 2.0), 0.0);
        assert_eq!(confidence_ratio(1.0, 2.0), 0.5);
        assert_eq!(confidence_ratio(5.0, 2.0), 1.0);
        assert_eq!(confidence_ratio(1.0, -1.0), 0.0);
        assert_eq!(confidence_ratio(1.0, 0.0), 0.0);
    }

    #[test]
    fn constant_classifier_scores() {
        let c = line_collection(10);
        let clf = BucketClassifier::from_parts(vec![0.0, 0.0], 0.3);
        assert!(clf.score_collection(&c).iter().all(|&s| s == 0.3));
    }

    #[test]
    fn pruning_strategies() {
        let c = line_collection(10);
        let clf = BucketClassifier::from_parts(vec![1.0, 0.0], 0.0);
        let members = ids(&[9, 1, 5, 3, 7, 0]);
        let mut cfg = TrainingConfig {
            n_tr: 2,
            ..Default::default()
        };
        cfg.pruning = Pruning::Rf;
        assert_eq!(assemble_positives(&members, Some(&clf), &c, &cfg), ids(&[9, 7]));
        cfg.pruning = Pruning::Al;
        assert_eq!(assemble_positives(&members, Some(&clf), &c, &cfg), ids(&[1, 0]));
        cfg.pruning = Pruning::Hybrid;
        assert_eq!(assemble_positives(&members, Some(&clf), &c, &cfg), ids(&[9, 0]));
        cfg.n_tr = 3;
        assert_eq!(assemble_positives(&members, Some(&clf), &c, &cfg), ids(&[9, 7, 0]));
        cfg.pruning = Pruning::Al;
        assert_eq!(assemble_positives(&members, None, &c, &cfg), members);
        cfg.n_tr = 6;
        assert_eq!(assemble_positives(&members, Some(&clf), &c, &cfg), members);
    }

    #[test]
    fn negatives_priority_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let wrong = ids(&(100..105).collect::<Vec<_>>());
        let discard = ids(&(200..300).collect::<Vec<_>>());
        let neg = assemble_negatives(10, &wrong, &discard, |_| false, |_| false, 1000, 2, &mut rng);
        assert_eq!(neg.from_wrong, wrong);
        assert_eq!(neg.from_discard.len(), 15);
        assert!(neg.from_discard.iter().all(|i| (200..300).contains(&i.0)));
        assert!(neg.from_collection.is_empty());

        let wrong = ids(&(100..130).collect::<Vec<_>>());
        let neg = assemble_negatives(10, &wrong, &discard, |_| false, |_| false, 1000, 2, &mut rng);
        assert_eq!(neg.len(), 30);
        assert!(neg.from_discard.is_empty());

        let neg = assemble_negatives(10, &[], &[], |i| i.0 < 10, |_| false, 1000, 2, &mut rng);
        assert_eq!(neg.from_collection.len(), 20);
        assert!(neg.from_collection.iter().all(|i| i.0 >= 10));
    }

    #[test]
    fn archetypes_by_score_and_recency() {
        let c = line_collection(10);
        let clf = BucketClassifier::from_parts(vec![1.0, 0.0], 0.0);
        let members = ids(&[2, 8, 5, 1]);
        assert_eq!(archetypes(&members, Some(&clf), &c, 1), ids(&[8]));
        assert_eq!(archetypes(&members, Some(&clf), &c, 10), ids(&[8, 5, 2, 1]));
        assert_eq!(archetypes(&members, None, &c, 3), ids(&[1, 5, 8]));
    }

    #[test]
    fn trained_classifier_separates_line() {
        let c = line_collection(40);
        let pos: Vec<ImageId> = (30..40).map(ImageId).collect();
        let neg: Vec<ImageId> = (0..20).map(ImageId).collect();
        let clf = train(&pos, &neg, &c, &TrainingConfig::default(), 3, 0).unwrap();
        assert!(clf.score_image(&c, ImageId(39)) > clf.score_image(&c, ImageId(0)));
        assert_eq!(clf.positive_count, 10);
        assert_eq!(clf.negative_count, 20);
    }
}
