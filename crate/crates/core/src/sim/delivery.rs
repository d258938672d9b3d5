//! Physical bookkeeping behind the queue counters: which files exist, which
//! codeword segments carry them, and when a file's last segment drains.

use std::collections::VecDeque;

use crate::caching::{enumerate_segments, CacheParams, FileTag, SegmentSizes};
use crate::lyapunov::SlotDecision;
use crate::subset::{full_mask, SubsetIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct FileRecord {
    pub owner: usize,
    pub tag: FileTag,
    pub admitted_slot: u64,
    pub delivered_slot: Option<u64>,
    outstanding_segments: u32,
    pub drained_bits: u64,
}

#[derive(Debug, Clone)]
struct QueuedSegment {
    id: u64,
    bits_remaining: u64,
    bits: u64,
    files: Vec<usize>,
}

/// Delivery statistics accumulated by the tracker.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeliveryStats {
    pub files_created: Vec<u64>,
    pub files_delivered: Vec<u64>,
    /// Delivered files whose drained bits differed from the uncached size.
    pub conservation_violations: u64,
    /// Combination attempts with no member holding a file.
    pub phantom_combinations: u64,
    /// Combinations formed over a strict subset of the fired group.
    pub partial_combinations: u64,
    /// Segments that left a queue ahead of an older one.
    pub fifo_violations: u64,
}

/// What the tracker did in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotDelivery {
    /// Files completed per user.
    pub delivered: Vec<u64>,
    /// Codeword bits generated per queue, indexed by mask.
    pub arrivals: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct DeliveryTracker {
    sizes: SegmentSizes,
    file_target_bits: u64,
    files: Vec<FileRecord>,
    waiting: Vec<VecDeque<usize>>,
    admitted_mass: Vec<f64>,
    queues: Vec<VecDeque<QueuedSegment>>,
    last_drained: Vec<Option<u64>>,
    next_tag: u64,
    next_segment: u64,
    stats: DeliveryStats,
}

impl DeliveryTracker {
    pub fn new(cache: &CacheParams) -> Self {
        let k = cache.num_users();
        let n = full_mask(k) as usize + 1;
        Self {
            sizes: SegmentSizes::new(cache),
            file_target_bits: cache.uncached_bits(),
            files: Vec::new(),
            waiting: vec![VecDeque::new(); k],
            admitted_mass: vec![0.0; k],
            queues: vec![VecDeque::new(); n],
            last_drained: vec![None; n],
            next_tag: 0,
            next_segment: 0,
            stats: DeliveryStats {
                files_created: vec![0; k],
                files_delivered: vec![0; k],
                ..Default::default()
            },
        }
    }

    pub fn stats(&self) -> &DeliveryStats {
        &self.stats
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Whole files waiting to be combined, per user.
    pub fn waiting_files(&self, user: usize) -> usize {
        self.waiting[user].len()
    }

    /// Bits physically queued for subset `mask`.
    pub fn queued_bits(&self, mask: usize) -> u64 {
        self.queues[mask].iter().map(|s| s.bits_remaining).sum()
    }

    /// Applies one slot: drain served bits, emit segments for the
    /// combinations that real files support, then materialize admissions.
    pub fn apply(&mut self, decision: &SlotDecision, slot: u64) -> SlotDelivery {
        let mut delivered = vec![0u64; self.waiting.len()];
        let mut arrivals = vec![0u64; self.queues.len()];
        for (mask, &served) in decision.served_bits.iter().enumerate() {
            if served > 0 {
                self.drain(mask, served, slot, &mut delivered);
            }
        }
        for c in &decision.combinations {
            for _ in 0..c.count {
                let contributors: Vec<usize> = c
                    .group
                    .users()
                    .filter_map(|u| self.waiting[u].pop_front())
                    .collect();
                if contributors.is_empty() {
                    self.stats.phantom_combinations += 1;
                    break;
                }
                let tagged: Vec<(usize, FileTag)> = contributors
                    .iter()
                    .map(|&f| (self.files[f].owner, self.files[f].tag))
                    .collect();
                // Members without a waiting file drop out: the combination
                // is formed over the members that have one.
                let users: Vec<usize> = tagged.iter().map(|(u, _)| *u).collect();
                if users.len() < c.group.len() {
                    self.stats.partial_combinations += 1;
                }
                let group = SubsetIndex::from_users(&users, self.waiting.len()).expect("members of the group");
                let segments = enumerate_segments(group, &tagged, &self.sizes)
                    .expect("one distinct file per member");
                for seg in segments {
                    // File records are stored at the index of their tag.
                    let ids: Vec<usize> = seg.files.iter().map(|(_, t)| t.0 as usize).collect();
                    if seg.bits == 0 {
                        continue;
                    }
                    for &f in &ids {
                        self.files[f].outstanding_segments += 1;
                    }
                    arrivals[seg.target.mask() as usize] += seg.bits;
                    let id = self.next_segment;
                    self.next_segment += 1;
                    self.queues[seg.target.mask() as usize].push_back(QueuedSegment {
                        id,
                        bits_remaining: seg.bits,
                        bits: seg.bits,
                        files: ids,
                    });
                }
                for &f in &contributors {
                    if self.files[f].outstanding_segments == 0 {
                        self.complete(f, slot, &mut delivered);
                    }
                }
            }
        }
        for (user, &a) in decision.admissions.iter().enumerate() {
            self.admit(user, a, slot);
        }
        SlotDelivery { delivered, arrivals }
    }

    fn admit(&mut self, user: usize, amount: f64, slot: u64) {
        self.admitted_mass[user] += amount;
        let whole = (self.admitted_mass[user] + 1e-9).floor() as u64;
        while self.stats.files_created[user] < whole {
            let idx = self.files.len();
            self.files.push(FileRecord {
                owner: user,
                tag: FileTag(self.next_tag),
                admitted_slot: slot,
                delivered_slot: None,
                outstanding_segments: 0,
                drained_bits: 0,
            });
            self.next_tag += 1;
            self.waiting[user].push_back(idx);
            self.stats.files_created[user] += 1;
        }
    }

    fn drain(&mut self, mask: usize, mut budget: u64, slot: u64, delivered: &mut [u64]) {
        while budget > 0 {
            let Some(head) = self.queues[mask].front_mut() else {
                break;
            };
            let take = budget.min(head.bits_remaining);
            head.bits_remaining -= take;
            budget -= take;
            if head.bits_remaining > 0 {
                break;
            }
            let seg = self.queues[mask].pop_front().expect("front exists");
            if self.last_drained[mask].is_some_and(|last| last > seg.id) {
                self.stats.fifo_violations += 1;
            }
            self.last_drained[mask] = Some(seg.id);
            for &f in &seg.files {
                let rec = &mut self.files[f];
                rec.drained_bits += seg.bits;
                rec.outstanding_segments -= 1;
                if rec.outstanding_segments == 0 {
                    self.complete(f, slot, delivered);
                }
            }
        }
    }

    fn complete(&mut self, f: usize, slot: u64, delivered: &mut [u64]) {
        let rec = &mut self.files[f];
        rec.delivered_slot = Some(slot);
        if rec.drained_bits != self.file_target_bits {
            self.stats.conservation_violations += 1;
        }
        delivered[rec.owner] += 1;
        self.stats.files_delivered[rec.owner] += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc_capacity::RateAllocation;
    use crate::lyapunov::Combination;

    fn decision(k: usize, admissions: Vec<f64>, combos: Vec<(u32, u32)>, served: Vec<(usize, u64)>) -> SlotDecision {
        let mut served_bits = vec![0; full_mask(k) as usize + 1];
        for (m, b) in served {
            served_bits[m] = b;
        }
        SlotDecision {
            admissions,
            virtual_arrivals: vec![0.0; k],
            combinations: combos
                .into_iter()
                .map(|(m, count)| Combination {
                    group: SubsetIndex::from_mask(m, k).unwrap(),
                    count,
                    margin: 1.0,
                })
                .collect(),
            schedule: RateAllocation::idle(k),
            served_bits,
        }
    }

    impl DeliveryTracker {
        fn apply_delivered(&mut self, decision: &SlotDecision, slot: u64) -> Vec<u64> {
            self.apply(decision, slot).delivered
        }
    }

    #[test]
    fn fractional_admissions_materialize_whole_files() {
        let cache = CacheParams::new(0.6, 1000, 1).unwrap();
        let mut t = DeliveryTracker::new(&cache);
        for slot in 0..5 {
            t.apply(&decision(1, vec![0.4], vec![], vec![]), slot);
        }
        assert_eq!(t.stats().files_created, vec![2]);
        assert_eq!(t.waiting_files(0), 2);
    }

    #[test]
    fn pair_combination_delivers_after_all_segments_drain() {
        let cache = CacheParams::new(0.6, 1000, 2).unwrap();
        let mut t = DeliveryTracker::new(&cache);
        t.apply(&decision(2, vec![1.0, 1.0], vec![], vec![]), 0);
        t.apply(&decision(2, vec![0.0, 0.0], vec![(0b11, 1)], vec![]), 1);
        assert_eq!(t.queued_bits(0b01), 160);
        assert_eq!(t.queued_bits(0b10), 160);
        assert_eq!(t.queued_bits(0b11), 240);
        let d = t.apply_delivered(&decision(2, vec![0.0, 0.0], vec![], vec![(0b11, 240), (0b01, 100)]), 2);
        assert_eq!(d, vec![0, 0]);
        let d = t.apply_delivered(&decision(2, vec![0.0, 0.0], vec![], vec![(0b01, 60), (0b10, 500)]), 3);
        assert_eq!(d, vec![1, 1]);
        assert_eq!(t.stats().conservation_violations, 0);
        assert!(t.files().iter().all(|f| f.drained_bits == 400));
    }

    #[test]
    fn missing_member_drops_out_of_the_combination() {
        let cache = CacheParams::new(0.6, 1000, 2).unwrap();
        let mut t = DeliveryTracker::new(&cache);
        t.apply(&decision(2, vec![1.0, 0.0], vec![], vec![]), 0);
        t.apply(&decision(2, vec![0.0, 0.0], vec![(0b11, 3)], vec![]), 1);
        assert_eq!(t.queued_bits(0b10), 0);
        assert_eq!(t.queued_bits(0b11), 0);
        assert_eq!(t.queued_bits(0b01), 400);
        assert_eq!(t.stats().partial_combinations, 1);
        assert_eq!(t.stats().phantom_combinations, 1);
    }

    #[test]
    fn segments_leave_in_creation_order() {
        let cache = CacheParams::new(0.0, 10, 1).unwrap();
        let mut t = DeliveryTracker::new(&cache);
        t.apply(&decision(1, vec![3.0], vec![], vec![]), 0);
        t.apply(&decision(1, vec![0.0], vec![(1, 3)], vec![]), 1);
        let d = t.apply_delivered(&decision(1, vec![0.0], vec![], vec![(1, 25)]), 2);
        assert_eq!(d, vec![2]);
        let order: Vec<_> = t.files().iter().map(|f| f.delivered_slot).collect();
        assert_eq!(order, vec![Some(2), Some(2), None]);
        assert_eq!(t.stats().fifo_violations, 0);
    }
}
