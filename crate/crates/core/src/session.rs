//! Mutable analytic-session state: buckets, the discard pile, per-bucket
//! suggestion ledgers and the interaction-round counter.
//!
//! Invariants maintained by every operation:
//!
//! - the processed set is exactly the union of all bucket members and the
//!   discard pile;
//! - an image is never in a bucket and the discard pile at once, and outside
//!   copy transfers it is in at most one bucket;
//! - at most [`MAX_ACTIVE_BUCKETS`] buckets are active;
//! - within each bucket, the correct and wrong ledgers are disjoint subsets
//!   of the suggestion ledger.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::{BucketId, ImageId, Target};

pub const MAX_ACTIVE_BUCKETS: usize = 7;
pub const SESSION_VERSION: u32 = 1;

const PALETTE: [&str; 8] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#9a6324",
];

/// Which component produced a suggestion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Classifier,
    Nn,
    Explorer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub image: ImageId,
    pub added_round: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fast_forwarded: bool,
}

/// Insertion-ordered set of members.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Member>", into = "Vec<Member>")]
pub struct Pile {
    members: IndexMap<ImageId, Member>,
}

impl From<Vec<Member>> for Pile {
    fn from(v: Vec<Member>) -> Self {
        Pile {
            members: v.into_iter().map(|m| (m.image, m)).collect(),
        }
    }
}

impl From<Pile> for Vec<Member> {
    fn from(p: Pile) -> Self {
        p.members.into_values().collect()
    }
}

impl Pile {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: ImageId) -> bool {
        self.members.contains_key(&id)
    }

    pub fn get(&self, id: ImageId) -> Option<&Member> {
        self.members.get(&id)
    }

    /// Members in insertion order.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Member> + ExactSizeIterator {
        self.members.values()
    }

    pub fn ids(&self) -> Vec<ImageId> {
        self.members.keys().copied().collect()
    }

    fn insert(&mut self, member: Member) -> bool {
        if self.members.contains_key(&member.image) {
            return false;
        }
        self.members.insert(member.image, member);
        true
    }

    fn remove(&mut self, id: ImageId) -> Option<Member> {
        self.members.shift_remove(&id)
    }

    fn get_mut(&mut self, id: ImageId) -> Option<&mut Member> {
        self.members.get_mut(&id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub image: ImageId,
    /// Round the suggestion was issued in.
    pub round: u64,
    pub source: Source,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub oracle: bool,
}

/// Append-only, duplicate-free list of suggestion records.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<LedgerEntry>", into = "Vec<LedgerEntry>")]
pub struct Ledger {
    entries: Vec<LedgerEntry>,
    index: HashMap<ImageId, usize>,
}

impl PartialEq for Ledger {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl From<Vec<LedgerEntry>> for Ledger {
    fn from(v: Vec<LedgerEntry>) -> Self {
        let mut l = Ledger::default();
        for e in v {
            l.push(e);
        }
        l
    }
}

impl From<Ledger> for Vec<LedgerEntry> {
    fn from(l: Ledger) -> Self {
        l.entries
    }
}

impl Ledger {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn contains(&self, id: ImageId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: ImageId) -> Option<&LedgerEntry> {
        self.index.get(&id).map(|&i| &self.entries[i])
    }

    /// Returns false (and changes nothing) when the image is already recorded.
    pub fn push(&mut self, entry: LedgerEntry) -> bool {
        if self.index.contains_key(&entry.image) {
            return false;
        }
        self.index.insert(entry.image, self.entries.len());
        self.entries.push(entry);
        true
    }

    /// Entries issued in the last `w` rounds up to `now`.
    pub fn window(&self, w: u64, now: u64) -> impl Iterator<Item = &LedgerEntry> {
        window(&self.entries, w, now)
    }

    pub fn count_window(&self, source: Source, w: u64, now: u64) -> usize {
        self.window(w, now).filter(|e| e.source == source).count()
    }
}

/// Sliding-window operator: entries with `now - w < round <= now`.
pub fn window(entries: &[LedgerEntry], w: u64, now: u64) -> impl Iterator<Item = &LedgerEntry> {
    let floor = i128::from(now) - i128::from(w);
    entries
        .iter()
        .filter(move |e| i128::from(e.round) > floor && e.round <= now)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub id: BucketId,
    pub name: String,
    pub color: String,
    pub active: bool,
    pub members: Pile,
    /// Every image suggested for this bucket (S_b).
    pub suggested: Ledger,
    /// Suggestions the user then added to this bucket (C_b).
    pub correct: Ledger,
    /// Suggestions the user discarded or put elsewhere (W_b).
    pub wrong: Ledger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    Move,
    Copy,
}

/// Buckets (or the discard pile) whose training data changed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentOutcome {
    pub retrain: BTreeSet<Target>,
}

impl AssignmentOutcome {
    pub fn merge(&mut self, other: AssignmentOutcome) {
        self.retrain.extend(other.retrain);
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Holding {
    discard: bool,
    buckets: BTreeSet<BucketId>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SessionDoc {
    version: u32,
    n_images: usize,
    round: u64,
    next_bucket: u32,
    buckets: Vec<Bucket>,
    discard: Pile,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SessionDoc", into = "SessionDoc")]
pub struct SessionState {
    n_images: usize,
    round: u64,
    next_bucket: u32,
    buckets: BTreeMap<BucketId, Bucket>,
    discard: Pile,
    holders: HashMap<ImageId, Holding>,
}

impl PartialEq for SessionState {
    fn eq(&self, other: &Self) -> bool {
        self.n_images == other.n_images
            && self.round == other.round
            && self.next_bucket == other.next_bucket
            && self.buckets == other.buckets
            && self.discard == other.discard
    }
}

impl From<SessionState> for SessionDoc {
    fn from(s: SessionState) -> Self {
        SessionDoc {
            version: SESSION_VERSION,
            n_images: s.n_images,
            round: s.round,
            next_bucket: s.next_bucket,
            buckets: s.buckets.into_values().collect(),
            discard: s.discard,
        }
    }
}

impl TryFrom<SessionDoc> for SessionState {
    type Error = String;

    fn try_from(doc: SessionDoc) -> std::result::Result<Self, String> {
        if doc.version != SESSION_VERSION {
            return Err(format!("unsupported session version {}", doc.version));
        }
        let mut s = SessionState {
            n_images: doc.n_images,
            round: doc.round,
            next_bucket: doc.next_bucket,
            buckets: doc.buckets.into_iter().map(|b| (b.id, b)).collect(),
            discard: doc.discard,
            holders: HashMap::new(),
        };
        s.rebuild_holders();
        s.check_invariants()?;
        Ok(s)
    }
}

impl SessionState {
    pub fn new(n_images: usize) -> Self {
        SessionState {
            n_images,
            round: 0,
            next_bucket: 1,
            buckets: BTreeMap::new(),
            discard: Pile::default(),
            holders: HashMap::new(),
        }
    }

    fn rebuild_holders(&mut self) {
        self.holders.clear();
        for b in self.buckets.values() {
            for m in b.members.iter() {
                self.holders.entry(m.image).or_default().buckets.insert(b.id);
            }
        }
        for m in self.discard.iter() {
            self.holders.entry(m.image).or_default().discard = true;
        }
    }

    pub fn n_images(&self) -> usize {
        self.n_images
    }

    /// Number of completed suggestion rounds.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn advance_round(&mut self) -> u64 {
        self.round += 1;
        self.round
    }

    pub fn buckets(&self) -> impl Iterator<Item = &Bucket> {
        self.buckets.values()
    }

    pub fn bucket(&self, id: BucketId) -> Result<&Bucket> {
        self.buckets.get(&id).ok_or(Error::UnknownBucket(id))
    }

    pub(crate) fn bucket_mut(&mut self, id: BucketId) -> Result<&mut Bucket> {
        self.buckets.get_mut(&id).ok_or(Error::UnknownBucket(id))
    }

    pub fn active_buckets(&self) -> Vec<BucketId> {
        self.buckets.values().filter(|b| b.active).map(|b| b.id).collect()
    }

    pub fn active_count(&self) -> usize {
        self.buckets.values().filter(|b| b.active).count()
    }

    pub fn discard(&self) -> &Pile {
        &self.discard
    }

    /// Members of a bucket, or the discard pile.
    pub fn pile(&self, target: Target) -> Result<&Pile> {
        match target {
            Target::Bucket(b) => Ok(&self.bucket(b)?.members),
            Target::Discard => Ok(&self.discard),
        }
    }

    fn pile_mut(&mut self, target: Target) -> Result<&mut Pile> {
        match target {
            Target::Bucket(b) => Ok(&mut self.bucket_mut(b)?.members),
            Target::Discard => Ok(&mut self.discard),
        }
    }

    pub fn is_processed(&self, id: ImageId) -> bool {
        self.holders.contains_key(&id)
    }

    pub fn processed_count(&self) -> usize {
        self.holders.len()
    }

    /// The processed set P, sorted.
    pub fn processed(&self) -> Vec<ImageId> {
        let mut v: Vec<ImageId> = self.holders.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Dense processed mask indexed by image id.
    pub fn processed_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_images];
        for id in self.holders.keys() {
            mask[id.index()] = true;
        }
        mask
    }

    /// Current holders of an image, discard pile last.
    pub fn holders_of(&self, id: ImageId) -> Vec<Target> {
        match self.holders.get(&id) {
            None => Vec::new(),
            Some(h) => {
                let mut v: Vec<Target> = h.buckets.iter().map(|&b| Target::Bucket(b)).collect();
                if h.discard {
                    v.push(Target::Discard);
                }
                v
            }
        }
    }

    fn check_image(&self, id: ImageId) -> Result<()> {
        if id.index() < self.n_images {
            Ok(())
        } else {
            Err(Error::UnknownImage(id))
        }
    }

    fn check_target(&self, t: Target) -> Result<()> {
        match t {
            Target::Bucket(b) => self.bucket(b).map(|_| ()),
            Target::Discard => Ok(()),
        }
    }

    pub fn create_bucket(&mut self, name: impl Into<String>, active: bool) -> Result<BucketId> {
        if active && self.active_count() >= MAX_ACTIVE_BUCKETS {
            return Err(Error::TooManyActive {
                max: MAX_ACTIVE_BUCKETS,
            });
        }
        let id = BucketId(self.next_bucket);
        self.next_bucket += 1;
        let color = PALETTE[(id.0 as usize - 1) % PALETTE.len()].to_owned();
        self.buckets.insert(
            id,
            Bucket {
                id,
                name: name.into(),
                color,
                active,
                members: Pile::default(),
                suggested: Ledger::default(),
                correct: Ledger::default(),
                wrong: Ledger::default(),
            },
        );
        Ok(id)
    }

    pub fn rename_bucket(&mut self, id: BucketId, name: impl Into<String>) -> Result<()> {
        self.bucket_mut(id)?.name = name.into();
        Ok(())
    }

    pub fn set_color(&mut self, id: BucketId, color: impl Into<String>) -> Result<()> {
        self.bucket_mut(id)?.color = color.into();
        Ok(())
    }

    /// Activate or deactivate a bucket. Deactivation keeps members and
    /// ledgers untouched. The last active bucket cannot be deactivated.
    pub fn set_active(&mut self, id: BucketId, active: bool) -> Result<()> {
        let current = self.bucket(id)?.active;
        if current == active {
            return Ok(());
        }
        if active && self.active_count() >= MAX_ACTIVE_BUCKETS {
            return Err(Error::TooManyActive {
                max: MAX_ACTIVE_BUCKETS,
            });
        }
        if !active && self.active_count() == 1 {
            return Err(Error::NoActiveBucket);
        }
        self.bucket_mut(id)?.active = active;
        Ok(())
    }

    /// Remove a bucket; members not held by another bucket move to the discard pile.
    pub fn delete_bucket(&mut self, id: BucketId) -> Result<AssignmentOutcome> {
        let bucket = self.buckets.remove(&id).ok_or(Error::UnknownBucket(id))?;
        let mut outcome = AssignmentOutcome::default();
        for m in bucket.members.iter() {
            let holding = self.holders.get_mut(&m.image).expect("member has a holding");
            holding.buckets.remove(&id);
            if holding.buckets.is_empty() {
                holding.discard = true;
                self.discard.insert(Member {
                    image: m.image,
                    added_round: self.round,
                    fast_forwarded: false,
                });
                outcome.retrain.insert(Target::Discard);
            }
        }
        Ok(outcome)
    }

    /// Place an image in `target`, removing it from every previous holder.
    pub fn assign(&mut self, image: ImageId, target: Target, round: u64) -> Result<AssignmentOutcome> {
        self.check_image(image)?;
        self.check_target(target)?;
        let mut outcome = AssignmentOutcome::default();
        let previous = self.holders_of(image);
        if previous == [target] {
            return Ok(outcome);
        }
        for holder in previous {
            self.remove_from(image, holder);
            outcome.retrain.insert(holder);
        }
        self.insert_into(image, target, round, false);
        outcome.retrain.insert(target);
        Ok(outcome)
    }

    /// Move or copy images that are members of `from` into `to`.
    pub fn transfer(
        &mut self,
        images: &[ImageId],
        from: Target,
        to: Target,
        mode: TransferMode,
    ) -> Result<AssignmentOutcome> {
        self.check_target(from)?;
        self.check_target(to)?;
        if mode == TransferMode::Copy && (from == Target::Discard || to == Target::Discard) {
            return Err(Error::DiscardImmutable("a copy source or destination"));
        }
        let source = self.pile(from)?;
        for &image in images {
            self.check_image(image)?;
            if !source.contains(image) {
                return Err(Error::NotAMember { image, holder: from });
            }
        }
        let mut outcome = AssignmentOutcome::default();
        if from == to || images.is_empty() {
            return Ok(outcome);
        }
        let round = self.round;
        for &image in images {
            match (mode, to) {
                (TransferMode::Move, Target::Discard) => {
                    outcome.merge(self.assign(image, Target::Discard, round)?);
                }
                (TransferMode::Move, _) => {
                    self.remove_from(image, from);
                    self.insert_into(image, to, round, false);
                    outcome.retrain.extend([from, to]);
                }
                (TransferMode::Copy, _) => {
                    if self.insert_into(image, to, round, false) {
                        outcome.retrain.insert(to);
                    }
                }
            }
        }
        Ok(outcome)
    }

    fn remove_from(&mut self, image: ImageId, holder: Target) {
        let removed = self.pile_mut(holder).ok().and_then(|p| p.remove(image)).is_some();
        if !removed {
            return;
        }
        if let Some(h) = self.holders.get_mut(&image) {
            match holder {
                Target::Bucket(b) => {
                    h.buckets.remove(&b);
                }
                Target::Discard => h.discard = false,
            }
            if !h.discard && h.buckets.is_empty() {
                self.holders.remove(&image);
            }
        }
    }

    fn insert_into(&mut self, image: ImageId, target: Target, round: u64, fast_forwarded: bool) -> bool {
        let member = Member {
            image,
            added_round: round,
            fast_forwarded,
        };
        let inserted = match self.pile_mut(target) {
            Ok(p) => p.insert(member),
            Err(_) => false,
        };
        if inserted {
            let h = self.holders.entry(image).or_default();
            match target {
                Target::Bucket(b) => {
                    h.buckets.insert(b);
                }
                Target::Discard => h.discard = true,
            }
        }
        inserted
    }

    /// Add images straight into `target`, flagged as fast-forwarded.
    pub(crate) fn add_fast_forwarded(&mut self, target: Target, images: &[ImageId]) -> Result<AssignmentOutcome> {
        let mut outcome = AssignmentOutcome::default();
        for &image in images {
            outcome.merge(self.assign(image, target, self.round)?);
            if let Some(m) = self.pile_mut(target)?.get_mut(image) {
                m.fast_forwarded = true;
            }
        }
        Ok(outcome)
    }

    /// Clear fast-forward marks on a pile, turning them into regular members.
    pub fn commit_fast_forward(&mut self, target: Target) -> Result<usize> {
        let pile = self.pile_mut(target)?;
        let ids: Vec<ImageId> = pile.iter().filter(|m| m.fast_forwarded).map(|m| m.image).collect();
        for id in &ids {
            if let Some(m) = pile.get_mut(*id) {
                m.fast_forwarded = false;
            }
        }
        Ok(ids.len())
    }

    /// Record that `image` was suggested for `bucket`. Returns false if it
    /// was already suggested for that bucket.
    pub(crate) fn record_suggestion(&mut self, bucket: BucketId, entry: LedgerEntry) -> Result<bool> {
        Ok(self.bucket_mut(bucket)?.suggested.push(entry))
    }

    /// Judge pending suggestions of `image` against the user's choice:
    /// the suggesting bucket that received it logs a correct suggestion, every
    /// other suggesting bucket a wrong one. Returns the buckets touched.
    pub(crate) fn record_judgment(&mut self, image: ImageId, target: Target) -> BTreeSet<BucketId> {
        let mut touched = BTreeSet::new();
        for b in self.buckets.values_mut() {
            let Some(entry) = b.suggested.get(image).cloned() else {
                continue;
            };
            if b.correct.contains(image) || b.wrong.contains(image) {
                continue;
            }
            if target == Target::Bucket(b.id) {
                b.correct.push(entry);
            } else {
                b.wrong.push(entry);
            }
            touched.insert(b.id);
        }
        touched
    }

    /// Full invariant check, used by tests and on deserialization.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut expected: HashMap<ImageId, Holding> = HashMap::new();
        for b in self.buckets.values() {
            for m in b.members.iter() {
                expected.entry(m.image).or_default().buckets.insert(b.id);
            }
            for ledger in [&b.correct, &b.wrong] {
                for e in ledger.entries() {
                    if !b.suggested.contains(e.image) {
                        return Err(format!("{}: judged {} was never suggested", b.id, e.image));
                    }
                }
            }
            if let Some(e) = b.correct.entries().iter().find(|e| b.wrong.contains(e.image)) {
                return Err(format!("{}: {} is both correct and wrong", b.id, e.image));
            }
            for ledger in [&b.suggested, &b.correct, &b.wrong] {
                if let Some(e) = ledger.entries().iter().find(|e| e.round > self.round) {
                    return Err(format!("{}: ledger entry from future round {}", b.id, e.round));
                }
            }
        }
        for m in self.discard.iter() {
            let h = expected.entry(m.image).or_default();
            if !h.buckets.is_empty() {
                return Err(format!("{} is in a bucket and in the discard pile", m.image));
            }
            h.discard = true;
        }
        if expected != self.holders {
            return Err("processed index out of sync with members".into());
        }
        if let Some(id) = self.holders.keys().find(|id| id.index() >= self.n_images) {
            return Err(format!("{id} is outside the collection"));
        }
        if self.active_count() > MAX_ACTIVE_BUCKETS {
            return Err("too many active buckets".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(image: u32, round: u64) -> LedgerEntry {
        LedgerEntry {
            image: ImageId(image),
            round,
            source: Source::Classifier,
            oracle: false,
        }
    }

    #[test]
    fn eighth_active_bucket_is_refused() {
        let mut s = SessionState::new(10);
        for i in 0..7 {
            s.create_bucket(format!("b{i}"), true).unwrap();
        }
        assert!(matches!(s.create_bucket("b8", true), Err(Error::TooManyActive { .. })));
        let inactive = s.create_bucket("b8", false).unwrap();
        assert!(matches!(s.set_active(inactive, true), Err(Error::TooManyActive { .. })));
        s.set_active(BucketId(1), false).unwrap();
        s.set_active(inactive, true).unwrap();
        assert_eq!(s.active_count(), 7);
    }

    #[test]
    fn deactivate_preserves_everything() {
        let mut s = SessionState::new(10);
        let b = s.create_bucket("cats", true).unwrap();
        s.create_bucket("dogs", true).unwrap();
        s.assign(ImageId(1), b.into(), 0).unwrap();
        s.record_suggestion(b, entry(2, 0)).unwrap();
        let before = s.bucket(b).unwrap().clone();
        s.set_active(b, false).unwrap();
        s.set_active(b, true).unwrap();
        assert_eq!(s.bucket(b).unwrap(), &before);
    }

    #[test]
    fn last_active_bucket_stays_active() {
        let mut s = SessionState::new(10);
        let b = s.create_bucket("only", true).unwrap();
        assert!(matches!(s.set_active(b, false), Err(Error::NoActiveBucket)));
    }

    #[test]
    fn reassignment_moves_and_flags_both() {
        let mut s = SessionState::new(10);
        let b1 = s.create_bucket("b1", true).unwrap();
        let b2 = s.create_bucket("b2", true).unwrap();
        s.assign(ImageId(3), b1.into(), 0).unwrap();
        let out = s.assign(ImageId(3), b2.into(), 1).unwrap();
        assert!(!s.bucket(b1).unwrap().members.contains(ImageId(3)));
        assert!(s.bucket(b2).unwrap().members.contains(ImageId(3)));
        assert_eq!(out.retrain, BTreeSet::from([Target::Bucket(b1), Target::Bucket(b2)]));
    }

    #[test]
    fn discard_and_restore() {
        let mut s = SessionState::new(10);
        let b = s.create_bucket("b", true).unwrap();
        s.assign(ImageId(4), Target::Discard, 0).unwrap();
        assert!(s.discard().contains(ImageId(4)));
        s.assign(ImageId(4), b.into(), 1).unwrap();
        assert!(!s.discard().contains(ImageId(4)));
        assert!(s.bucket(b).unwrap().members.contains(ImageId(4)));
        s.check_invariants().unwrap();
    }

    #[test]
    fn same_assignment_twice_is_idempotent() {
        let mut s = SessionState::new(10);
        let b = s.create_bucket("b", true).unwrap();
        s.assign(ImageId(4), b.into(), 0).unwrap();
        let before = s.clone();
        let out = s.assign(ImageId(4), b.into(), 5).unwrap();
        assert!(out.retrain.is_empty());
        assert_eq!(s, before);
    }

    #[test]
    fn discard_cannot_be_deleted_or_copied_into() {
        let mut s = SessionState::new(10);
        let b = s.create_bucket("b", true).unwrap();
        s.assign(ImageId(1), b.into(), 0).unwrap();
        assert!(matches!(
            s.transfer(&[ImageId(1)], b.into(), Target::Discard, TransferMode::Copy),
            Err(Error::DiscardImmutable(_))
        ));
    }

    #[test]
    fn move_and_copy_cardinalities() {
        let mut s = SessionState::new(20);
        let b1 = s.create_bucket("b1", true).unwrap();
        let b2 = s.create_bucket("b2", true).unwrap();
        let b3 = s.create_bucket("b3", true).unwrap();
        for i in 0..10 {
            s.assign(ImageId(i), b1.into(), 0).unwrap();
        }
        let five: Vec<ImageId> = (0..5).map(ImageId).collect();
        let out = s.transfer(&five, b1.into(), b2.into(), TransferMode::Move).unwrap();
        assert_eq!(out.retrain, BTreeSet::from([b1.into(), b2.into()]));
        assert_eq!(s.bucket(b1).unwrap().members.len(), 5);
        assert_eq!(s.bucket(b2).unwrap().members.len(), 5);

        let rest: Vec<ImageId> = (5..10).map(ImageId).collect();
        s.transfer(&rest, b1.into(), b3.into(), TransferMode::Copy).unwrap();
        assert_eq!(s.bucket(b1).unwrap().members.len(), 5);
        assert_eq!(s.bucket(b3).unwrap().members.len(), 5);
        assert_eq!(s.holders_of(ImageId(7)), vec![b1.into(), b3.into()]);
        assert_eq!(s.processed_count(), 10);
        s.check_invariants().unwrap();

        // moving a copied image to the discard pile takes it out of every bucket
        s.transfer(&[ImageId(7)], b1.into(), Target::Discard, TransferMode::Move).unwrap();
        assert_eq!(s.holders_of(ImageId(7)), vec![Target::Discard]);
        s.check_invariants().unwrap();
    }

    #[test]
    fn split_by_moving_everything() {
        let mut s = SessionState::new(20);
        let b1 = s.create_bucket("all", true).unwrap();
        for i in 0..6 {
            s.assign(ImageId(i), b1.into(), 0).unwrap();
        }
        let fresh = s.create_bucket("split", true).unwrap();
        let ids = s.bucket(b1).unwrap().members.ids();
        s.transfer(&ids, b1.into(), fresh.into(), TransferMode::Move).unwrap();
        assert!(s.bucket(b1).unwrap().members.is_empty());
        assert_eq!(s.bucket(fresh).unwrap().members.ids(), ids);
    }

    #[test]
    fn transfer_rejects_non_members() {
        let mut s = SessionState::new(20);
        let b1 = s.create_bucket("b1", true).unwrap();
        let b2 = s.create_bucket("b2", true).unwrap();
        assert!(matches!(
            s.transfer(&[ImageId(3)], b1.into(), b2.into(), TransferMode::Move),
            Err(Error::NotAMember { .. })
        ));
        assert!(matches!(
            s.transfer(&[], BucketId(99).into(), b2.into(), TransferMode::Move),
            Err(Error::UnknownBucket(_))
        ));
    }

    #[test]
    fn delete_moves_members_to_discard() {
        let mut s = SessionState::new(20);
        let b1 = s.create_bucket("b1", true).unwrap();
        let b2 = s.create_bucket("b2", true).unwrap();
        s.assign(ImageId(1), b1.into(), 0).unwrap();
        s.assign(ImageId(2), b1.into(), 0).unwrap();
        s.transfer(&[ImageId(2)], b1.into(), b2.into(), TransferMode::Copy).unwrap();
        s.delete_bucket(b1).unwrap();
        assert!(s.discard().contains(ImageId(1)));
        assert!(!s.discard().contains(ImageId(2)));
        assert!(s.bucket(b1).is_err());
        s.check_invariants().unwrap();
    }

    #[test]
    fn window_operator() {
        let entries: Vec<LedgerEntry> = (1..=10).map(|r| entry(r as u32, r)).collect();
        let rounds: Vec<u64> = window(&entries, 5, 10).map(|e| e.round).collect();
        assert_eq!(rounds, vec![6, 7, 8, 9, 10]);
        assert_eq!(window(&[], 5, 10).count(), 0);
        assert_eq!(window(&entries, 50, 10).count(), 10);
    }

    #[test]
    fn judgments_split_correct_and_wrong() {
        let mut s = SessionState::new(20);
        let b1 = s.create_bucket("b1", true).unwrap();
        let b2 = s.create_bucket("b2", true).unwrap();
        s.advance_round();
        s.record_suggestion(b1, entry(5, 1)).unwrap();
        s.record_suggestion(b2, entry(5, 1)).unwrap();
        let touched = s.record_judgment(ImageId(5), b1.into());
        assert_eq!(touched, BTreeSet::from([b1, b2]));
        assert!(s.bucket(b1).unwrap().correct.contains(ImageId(5)));
        assert!(s.bucket(b2).unwrap().wrong.contains(ImageId(5)));
        // a judgment is recorded once
        assert!(s.record_judgment(ImageId(5), b2.into()).is_empty());
    }

    #[test]
    fn json_round_trip_keeps_everything() {
        let mut s = SessionState::new(30);
        let b1 = s.create_bucket("b1", true).unwrap();
        s.create_bucket("b2", false).unwrap();
        s.advance_round();
        s.assign(ImageId(1), b1.into(), 1).unwrap();
        s.assign(ImageId(2), Target::Discard, 1).unwrap();
        s.record_suggestion(b1, entry(1, 1)).unwrap();
        s.record_judgment(ImageId(1), b1.into());
        let json = serde_json::to_string(&s).unwrap();
        let back: SessionState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.processed(), s.processed());
        assert!(json.contains("\"version\":1"));
    }
}
