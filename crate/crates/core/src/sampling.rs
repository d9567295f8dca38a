//! Uniform sampling without replacement, used by every randomized component.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

/// Draw up to `amount` distinct ids from `0..n` that are not `excluded`,
/// uniformly without replacement. Returned in random order.
pub fn sample_unseen<R: Rng + ?Sized>(
    n: usize,
    amount: usize,
    excluded: impl Fn(u32) -> bool,
    rng: &mut R,
) -> Vec<u32> {
    if amount == 0 || n == 0 {
        return Vec::new();
    }
    // Dense request: enumerate and shuffle.
    if amount.saturating_mul(4) >= n {
        let eligible: Vec<u32> = (0..n as u32).filter(|&i| !excluded(i)).collect();
        return sample_slice(&eligible, amount, rng);
    }

    let mut seen = HashSet::with_capacity(amount * 2);
    let mut out = Vec::with_capacity(amount);
    let mut budget = amount.saturating_mul(16) + 256;
    while out.len() < amount && budget > 0 {
        budget -= 1;
        let id = rng.random_range(0..n as u32);
        if excluded(id) || !seen.insert(id) {
            continue;
        }
        out.push(id);
    }
    if out.len() < amount {
        // Mostly-excluded universe: fall back to enumeration.
        let eligible: Vec<u32> = (0..n as u32).filter(|&i| !excluded(i)).collect();
        return sample_slice(&eligible, amount, rng);
    }
    out
}

/// Up to `amount` distinct elements of `items`, uniformly, in random order.
pub fn sample_slice<T: Copy, R: Rng + ?Sized>(items: &[T], amount: usize, rng: &mut R) -> Vec<T> {
    let amount = amount.min(items.len());
    index::sample(rng, items.len(), amount)
        .into_iter()
        .map(|i| items[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn respects_exclusion_and_uniqueness() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(n, amount) in &[(1000, 10), (1000, 600), (50, 100)] {
            let out = sample_unseen(n, amount, |i| i % 3 == 0, &mut rng);
            let eligible = (0..n).filter(|i| i % 3 != 0).count();
            assert_eq!(out.len(), amount.min(eligible));
            let set: HashSet<_> = out.iter().collect();
            assert_eq!(set.len(), out.len());
            assert!(out.iter().all(|i| i % 3 != 0));
        }
    }

    #[test]
    fn mostly_excluded_falls_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = sample_unseen(100_000, 5, |i| i != 77 && i != 99_999, &mut rng);
        let mut out = out;
        out.sort();
        assert_eq!(out, vec![77, 99_999]);
    }

    #[test]
    fn roughly_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = vec![0u32; 100];
        for _ in 0..20_000 {
            for id in sample_unseen(100, 5, |_| false, &mut rng) {
                hits[id as usize] += 1;
            }
        }
        // expected 1000 per id
        assert!(hits.iter().all(|&h| (850..1150).contains(&h)), "{hits:?}");
    }
}
