//! Codeword loads against a bit-level simulation of random cache placement.

use faircache::caching::{codeword_load, enumerate_segments, total_load, CacheParams, FileTag, SegmentSizes};
use faircache::subset::{all_subsets, SubsetIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fraction of user `k`'s file routed to `target` when `group` is combined,
/// measured by caching every bit independently at every user.
fn simulated_load(memory: f64, k_users: usize, group: SubsetIndex, target: SubsetIndex, bits: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    let mut trials = 0usize;
    for owner in target.users() {
        for _ in 0..bits {
            let mut cached_at = 0u32;
            for u in 0..k_users {
                if rng.gen::<f64>() < memory {
                    cached_at |= 1 << u;
                }
            }
            // The owner lacks the bit and the other target members hold it,
            // nobody else in the group does.
            let inside = cached_at & group.mask();
            if inside == target.mask() & !(1 << owner) {
                hits += 1;
            }
            trials += 1;
        }
    }
    hits as f64 / trials as f64
}

#[test]
fn monte_carlo_placement_matches_loads() {
    let bits = 100_000;
    for k in [2usize, 3, 4] {
        for m in [0.3, 0.5, 0.6] {
            let full = SubsetIndex::full(k);
            for target in full.subsets() {
                let exact = codeword_load(m, full, target).unwrap();
                let sim = simulated_load(m, k, full, target, bits / target.len(), 7 + k as u64);
                let rel = (sim - exact).abs() / exact;
                // The rarest events at K=4, m=0.3 still see over a thousand hits.
                assert!(rel < 0.05, "K={k} m={m} I={target:?}: {sim} vs {exact}");
            }
        }
    }
}

#[test]
fn loads_add_up_to_uncached_fraction() {
    for k in 1..=6 {
        for m in [0.1, 0.4, 0.6, 0.9] {
            for group in all_subsets(k) {
                for user in group.users() {
                    let mass: f64 = group
                        .subsets()
                        .filter(|t| t.contains(user))
                        .map(|t| codeword_load(m, group, t).unwrap())
                        .sum();
                    assert!((mass - (1.0 - m)).abs() < 1e-12);
                }
            }
            let total: f64 = SubsetIndex::full(k)
                .subsets()
                .map(|t| codeword_load(m, SubsetIndex::full(k), t).unwrap())
                .sum();
            assert!((total - total_load(m, k).unwrap()).abs() < 1e-12);
        }
    }
}

#[test]
fn pair_and_single_feed_three_queues() {
    // Three users; a pair combination for users 1 and 2 and a single request
    // of user 1.
    let cache = CacheParams::new(0.6, 1000, 3).unwrap();
    let sizes = SegmentSizes::new(&cache);
    let pair = SubsetIndex::from_users(&[0, 1], 3).unwrap();
    let single = SubsetIndex::singleton(0);
    let mut fed: Vec<SubsetIndex> = enumerate_segments(pair, &[(0, FileTag(1)), (1, FileTag(8))], &sizes)
        .unwrap()
        .into_iter()
        .chain(enumerate_segments(single, &[(0, FileTag(4))], &sizes).unwrap())
        .filter(|s| s.bits > 0)
        .map(|s| s.target)
        .collect();
    fed.sort();
    fed.dedup();
    let expected = vec![
        SubsetIndex::singleton(0),
        SubsetIndex::singleton(1),
        pair,
    ];
    assert_eq!(fed, expected);
}
