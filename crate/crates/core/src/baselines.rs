//! Comparison policies: unicast opportunistic scheduling with local caching
//! gain only, and round-based coded caching over TDMA multicast.

use crate::caching::{enumerate_segments, CacheParams, FileTag, SegmentSizes};
use crate::subset::{SubsetIndex, all_subsets};

/// Initial running-average rate, bits per channel use.
pub const INITIAL_AVG_RATE: f64 = 1e-3;

#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Per-user state of the opportunistic unicast scheduler.
#[derive(Debug, Clone, PartialEq)]
pub struct OpportunisticState {
    served_rate_sum: Vec<f64>,
    slots: u64,
    /// Bits still owed on each user's in-flight file.
    pub residual_bits: Vec<u64>,
    pub delivered: Vec<u64>,
    pub delivered_bits: Vec<u64>,
    file_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpportunisticOutcome {
    pub served_user: usize,
    pub bits: u64,
    pub files_completed: u64,
}

impl OpportunisticState {
    pub fn new(cache: &CacheParams) -> Self {
        let k = cache.num_users();
        let file_bits = cache.uncached_bits();
        Self {
            served_rate_sum: vec![0.0; k],
            slots: 0,
            residual_bits: vec![file_bits; k],
            delivered: vec![0; k],
            delivered_bits: vec![0; k],
            file_bits,
        }
    }

    /// Empirical mean rate of user `k` over past slots, floored at the seed.
    pub fn average_rate(&self, k: usize) -> f64 {
        if self.slots == 0 {
            INITIAL_AVG_RATE
        } else {
            (self.served_rate_sum[k] / self.slots as f64).max(INITIAL_AVG_RATE)
        }
    }

    /// Files started so far: delivered plus the one in flight per user.
    pub fn started(&self, k: usize) -> u64 {
        self.delivered[k] + 1
    }

    pub fn step(&mut self, gains: &[f64], power: f64, alpha: f64, slot_length: u32) -> OpportunisticOutcome {
        let mut served_user = 0;
        let mut best = f64::NEG_INFINITY;
        for (k, &h) in gains.iter().enumerate() {
            let score = log2_1p(h * power) / self.average_rate(k).powf(alpha);
            if score > best {
                best = score;
                served_user = k;
            }
        }
        let rate = log2_1p(gains[served_user] * power);
        let mut bits = (slot_length as f64 * rate).floor() as u64;
        let total = bits;
        let mut files_completed = 0;
        if self.file_bits == 0 {
            // Everything is cached: each slot completes one file.
            files_completed = 1;
        } else {
            while bits > 0 {
                let take = bits.min(self.residual_bits[served_user]);
                self.residual_bits[served_user] -= take;
                self.delivered_bits[served_user] += take;
                bits -= take;
                if self.residual_bits[served_user] == 0 {
                    files_completed += 1;
                    self.residual_bits[served_user] = self.file_bits;
                }
            }
        }
        self.delivered[served_user] += files_completed;
        self.served_rate_sum[served_user] += rate;
        self.slots += 1;
        OpportunisticOutcome {
            served_user,
            bits: total,
            files_completed,
        }
    }
}

/// One round of standard coded caching: every subset codeword is sent in turn
/// at the rate of its weakest member.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmaRoundState {
    /// Codewords of the current round with their residual bits.
    pub pending: Vec<(SubsetIndex, u64)>,
    head: usize,
    pub rounds_completed: u64,
    round_template: Vec<(SubsetIndex, u64)>,
    num_users: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdmaOutcome {
    pub bits: u64,
    pub files_delivered: u64,
}

impl TdmaRoundState {
    pub fn new(cache: &CacheParams) -> Self {
        let k = cache.num_users();
        let sizes = SegmentSizes::new(cache);
        let files: Vec<(usize, FileTag)> = (0..k).map(|u| (u, FileTag(u as u64))).collect();
        let mut template: Vec<(SubsetIndex, u64)> =
            enumerate_segments(SubsetIndex::full(k), &files, &sizes)
                .expect("one distinct tag per user")
                .into_iter()
                .map(|s| (s.target, s.bits))
                .collect();
        template.sort_by_key(|(s, _)| (s.len(), s.mask()));
        debug_assert_eq!(template.len(), all_subsets(k).count());
        Self {
            pending: template.clone(),
            head: 0,
            rounds_completed: 0,
            round_template: template,
            num_users: k,
        }
    }

    /// Bits of one full round.
    pub fn round_bits(&self) -> u64 {
        self.round_template.iter().map(|(_, b)| b).sum()
    }

    pub fn residual_bits(&self) -> u64 {
        self.pending[self.head..].iter().map(|(_, b)| b).sum()
    }

    /// Sends codewords for `slot_length` channel uses, time-sharing the slot
    /// when a codeword finishes early.
    pub fn step(&mut self, gains: &[f64], power: f64, slot_length: u32) -> TdmaOutcome {
        let mut uses_left = slot_length as f64;
        let mut bits = 0u64;
        let mut files_delivered = 0u64;
        // A round of zero bits would spin forever.
        let zero_round = self.round_bits() == 0;
        loop {
            if self.head == self.pending.len() {
                self.rounds_completed += 1;
                files_delivered += self.num_users as u64;
                self.pending.clone_from(&self.round_template);
                self.head = 0;
                if zero_round {
                    break;
                }
            }
            if uses_left <= 0.0 {
                break;
            }
            let (group, residual) = self.pending[self.head];
            if residual == 0 {
                self.head += 1;
                continue;
            }
            let weakest = group.users().map(|u| gains[u]).fold(f64::INFINITY, f64::min);
            let rate = log2_1p(power * weakest);
            let capacity = (uses_left * rate).floor() as u64;
            if capacity >= residual {
                bits += residual;
                uses_left -= residual as f64 / rate;
                self.pending[self.head].1 = 0;
                self.head += 1;
            } else {
                bits += capacity;
                self.pending[self.head].1 -= capacity;
                break;
            }
        }
        TdmaOutcome { bits, files_delivered }
    }
}
