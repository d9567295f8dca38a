use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ii20_core::dataset::GroundTruth;
use ii20_core::{BucketId, ImageId, Target};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metaphor {
    #[default]
    Grid,
    Tetris,
}

impl Metaphor {
    pub fn images_per_round(self) -> usize {
        match self {
            Metaphor::Grid => 25,
            Metaphor::Tetris => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metaphor::Grid => "grid",
            Metaphor::Tetris => "tetris",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActorConfig {
    /// Annotation labels the actor cares about, each becoming one bucket.
    /// Earlier entries win when an image carries several of them.
    pub relevance: Vec<String>,
    pub err_a: f64,
    pub metaphor: Metaphor,
    /// Overrides the metaphor's images per round.
    pub images_per_round: Option<usize>,
    /// Images shown before the session stops.
    pub budget: usize,
    pub seed: u64,
}

impl Default for ActorConfig {
    fn default() -> Self {
        ActorConfig {
            relevance: Vec::new(),
            err_a: 0.0,
            metaphor: Metaphor::Grid,
            images_per_round: None,
            budget: 2700,
            seed: 0,
        }
    }
}

impl ActorConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        anyhow::ensure!(
            (1..=7).contains(&self.relevance.len()),
            "an actor needs between 1 and 7 relevant labels, got {}",
            self.relevance.len()
        );
        anyhow::ensure!((0.0..=1.0).contains(&self.err_a), "err_a must lie in [0, 1]");
        anyhow::ensure!(self.images_per_round() >= 1, "images_per_round must be at least 1");
        Ok(())
    }

    pub fn images_per_round(&self) -> usize {
        self.images_per_round.unwrap_or(self.metaphor.images_per_round())
    }

    /// Short identifier such as `grid-err0.2`.
    pub fn identifier(&self) -> String {
        format!("{}-err{}", self.metaphor.as_str(), self.err_a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mistake {
    /// No feedback at all.
    Ignore,
    /// Relevant images are discarded, irrelevant ones put in a random bucket.
    Flip,
    /// A relevant image goes to a wrong bucket.
    Confuse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Judgment {
    Assign(Target),
    Ignore,
}

/// Simulated user with a fixed notion of relevance.
#[derive(Clone, Debug)]
pub struct Actor {
    /// `(label index, bucket)` in priority order.
    relevance: Vec<(u32, BucketId)>,
    err_a: f64,
    rng: ChaCha8Rng,
}

impl Actor {
    pub fn new(relevance: Vec<(u32, BucketId)>, err_a: f64, seed: u64) -> Self {
        Actor {
            relevance,
            err_a,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn relevance(&self) -> &[(u32, BucketId)] {
        &self.relevance
    }

    /// The error-free judgment.
    pub fn truthful(&self, image: ImageId, truth: &GroundTruth) -> Target {
        self.relevance
            .iter()
            .filter(|(label, _)| truth.has(image, *label))
            .min_by_key(|(label, _)| *label)
            .map(|&(_, b)| Target::Bucket(b))
            .unwrap_or(Target::Discard)
    }

    /// Judge an image, possibly making a mistake. `buckets` are the active
    /// buckets a mistake may land in.
    pub fn judge(&mut self, image: ImageId, truth: &GroundTruth, buckets: &[BucketId]) -> (Judgment, Option<Mistake>) {
        let correct = self.truthful(image, truth);
        if self.rng.random::<f64>() >= self.err_a {
            return (Judgment::Assign(correct), None);
        }
        let relevant = matches!(correct, Target::Bucket(_));
        let mistake = if relevant && buckets.len() >= 2 {
            [Mistake::Ignore, Mistake::Flip, Mistake::Confuse][self.rng.random_range(0..3)]
        } else {
            [Mistake::Ignore, Mistake::Flip][self.rng.random_range(0..2)]
        };
        let judgment = match mistake {
            Mistake::Ignore => Judgment::Ignore,
            Mistake::Flip if relevant => Judgment::Assign(Target::Discard),
            Mistake::Flip => match buckets {
                [] => Judgment::Assign(Target::Discard),
                _ => Judgment::Assign(Target::Bucket(buckets[self.rng.random_range(0..buckets.len())])),
            },
            Mistake::Confuse => {
                let others: Vec<BucketId> = buckets.iter().copied().filter(|&b| Target::Bucket(b) != correct).collect();
                Judgment::Assign(Target::Bucket(others[self.rng.random_range(0..others.len())]))
            }
        };
        (judgment, Some(mistake))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> GroundTruth {
        let mut t = GroundTruth::new(4);
        t.add(ImageId(0), "a").unwrap();
        t.add(ImageId(1), "b").unwrap();
        t.add(ImageId(2), "a").unwrap();
        t.add(ImageId(2), "b").unwrap();
        t.add(ImageId(3), "z").unwrap();
        t
    }

    #[test]
    fn error_free_actor_is_truthful() {
        let t = truth();
        let a = t.label_index("a").unwrap();
        let b = t.label_index("b").unwrap();
        let mut actor = Actor::new(vec![(b, BucketId(2)), (a, BucketId(1))], 0.0, 1);
        let buckets = [BucketId(1), BucketId(2)];
        assert_eq!(actor.judge(ImageId(0), &t, &buckets).0, Judgment::Assign(Target::Bucket(BucketId(1))));
        assert_eq!(actor.judge(ImageId(1), &t, &buckets).0, Judgment::Assign(Target::Bucket(BucketId(2))));
        // both labels: the lower label index wins
        assert_eq!(actor.judge(ImageId(2), &t, &buckets).0, Judgment::Assign(Target::Bucket(BucketId(1))));
        assert_eq!(actor.judge(ImageId(3), &t, &buckets).0, Judgment::Assign(Target::Discard));
    }

    #[test]
    fn mistakes_follow_their_definitions() {
        let t = truth();
        let a = t.label_index("a").unwrap();
        let b = t.label_index("b").unwrap();
        let mut actor = Actor::new(vec![(a, BucketId(1)), (b, BucketId(2))], 1.0, 2);
        let buckets = [BucketId(1), BucketId(2)];
        for _ in 0..500 {
            let (j, m) = actor.judge(ImageId(0), &t, &buckets);
            match m.unwrap() {
                Mistake::Ignore => assert_eq!(j, Judgment::Ignore),
                Mistake::Flip => assert_eq!(j, Judgment::Assign(Target::Discard)),
                Mistake::Confuse => assert_eq!(j, Judgment::Assign(Target::Bucket(BucketId(2)))),
            }
            let (j, m) = actor.judge(ImageId(3), &t, &buckets);
            match m.unwrap() {
                Mistake::Ignore => assert_eq!(j, Judgment::Ignore),
                Mistake::Flip => assert!(matches!(j, Judgment::Assign(Target::Bucket(_)))),
                Mistake::Confuse => panic!("confusion needs a relevant image"),
            }
        }
        // a single bucket rules out confusion
        for _ in 0..200 {
            let (_, m) = actor.judge(ImageId(0), &t, &[BucketId(1)]);
            assert_ne!(m, Some(Mistake::Confuse));
        }
    }
}
