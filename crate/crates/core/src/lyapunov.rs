//! Online admission, routing and scheduling controller.
//!
//! Three families of queues are advanced one slot at a time:
//!
//! * `S_k` — admitted files of user `k` not yet combined (files),
//! * `Q_I` — coded bits waiting for multicast to subset `I` (bits),
//! * `U_k` — virtual counters whose arrivals follow the utility gradient.
//!
//! Every decision of a slot reads the state at the start of that slot. Bit
//! queues enter the backpressure comparisons divided by the file size, so
//! both sides of each routing test are in files.

use serde::{Deserialize, Serialize};

use crate::bc_capacity::{max_weighted_rate, RateAllocation, WeightVector};
use crate::caching::{load_by_size, CacheParams, SegmentSizes};
use crate::error::{Error, Result};
use crate::subset::{full_mask, SubsetIndex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub alpha: f64,
    pub v: f64,
    pub d: f64,
    pub gamma_max: f64,
    pub sigma_max: u32,
}

impl PolicyParams {
    pub fn new(alpha: f64, v: f64, d: f64, gamma_max: f64, sigma_max: u32) -> Result<Self> {
        let p = Self {
            alpha,
            v,
            d,
            gamma_max,
            sigma_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::param("alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if !(self.v.is_finite() && self.v > 0.0) {
            return Err(Error::param("V", format!("must be > 0, got {}", self.v)));
        }
        if !(self.d.is_finite() && self.d > 0.0) {
            return Err(Error::param("d", format!("must be > 0, got {}", self.d)));
        }
        if !(self.gamma_max.is_finite() && self.gamma_max >= 0.0) {
            return Err(Error::param(
                "gamma_max",
                format!("must be >= 0, got {}", self.gamma_max),
            ));
        }
        if self.sigma_max == 0 {
            return Err(Error::param("sigma_max", "must be at least 1"));
        }
        Ok(())
    }
}

/// Alpha-fair utility shifted by `d` so that it is finite at zero.
pub fn utility_g(x: f64, alpha: f64, d: f64) -> f64 {
    if alpha == 1.0 {
        (x / d).ln_1p()
    } else {
        (d + x).powf(1.0 - alpha) / (1.0 - alpha)
    }
}

/// Maximizer of `V g(x) - U x` over `[0, gamma_max]`.
pub fn virtual_arrival(backlog: f64, params: &PolicyParams) -> f64 {
    let cap = params.gamma_max;
    if backlog <= 0.0 {
        return cap;
    }
    if params.alpha == 0.0 {
        // Linear objective: all or nothing.
        return if params.v > backlog { cap } else { 0.0 };
    }
    let x = (params.v / backlog).powf(1.0 / params.alpha) - params.d;
    x.clamp(0.0, cap)
}

/// On-off admission: admit `gamma_max` files when `U_k >= S_k`.
pub fn admission_decide(pending: f64, virtual_backlog: f64, params: &PolicyParams) -> f64 {
    if virtual_backlog >= pending {
        params.gamma_max
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    /// Admitted, uncombined files per user.
    pub pending: Vec<f64>,
    /// Codeword backlog in bits, indexed by subset mask.
    pub codeword_bits: Vec<u64>,
    /// Virtual utility queues per user.
    pub virtual_queue: Vec<f64>,
}

impl QueueState {
    pub fn empty(num_users: usize) -> Self {
        Self {
            pending: vec![0.0; num_users],
            codeword_bits: vec![0; full_mask(num_users) as usize + 1],
            virtual_queue: vec![0.0; num_users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.pending.len()
    }

    pub fn total_pending(&self) -> f64 {
        self.pending.iter().sum()
    }

    pub fn total_codeword_bits(&self) -> u64 {
        self.codeword_bits.iter().sum()
    }

    pub fn total_virtual(&self) -> f64 {
        self.virtual_queue.iter().sum()
    }
}

/// Routing decision for one subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub group: SubsetIndex,
    pub count: u32,
    /// Pending files minus weighted codeword backlog, in files.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotDecision {
    pub admissions: Vec<f64>,
    pub virtual_arrivals: Vec<f64>,
    /// Subsets with a positive combination count, by decreasing margin.
    pub combinations: Vec<Combination>,
    pub schedule: RateAllocation,
    /// Bits drained from each codeword queue, indexed by subset mask.
    pub served_bits: Vec<u64>,
}

impl SlotDecision {
    pub fn combination_count(&self, group: SubsetIndex) -> u32 {
        self.combinations
            .iter()
            .find(|c| c.group == group)
            .map_or(0, |c| c.count)
    }
}

/// Sum of `S_k` over the members of every subset, indexed by mask.
fn subset_sums(values: &[f64]) -> Vec<f64> {
    let n = full_mask(values.len()) as usize + 1;
    let mut out = vec![0.0; n];
    for mask in 1..n {
        let low = mask.trailing_zeros() as usize;
        out[mask] = out[mask & (mask - 1)] + values[low];
    }
    out
}

/// Weighted codeword backlog `sum_{I in J} b_{J,I} Q_I / F` for every `J`.
fn routing_thresholds(codeword_bits: &[u64], cache: &CacheParams) -> Vec<f64> {
    let k = cache.num_users();
    let n = full_mask(k) as usize + 1;
    let m = cache.memory();
    let f = cache.file_bits() as f64;
    let mut out = vec![0.0; n];
    if m >= 1.0 {
        return out;
    }
    if m <= 0.0 {
        // Only private queues receive load.
        for mask in 1..n {
            let low = mask.trailing_zeros();
            out[mask] = out[mask & (mask - 1)] + codeword_bits[1 << low] as f64 / f;
        }
        return out;
    }
    // b_{J,I} = (1-m)^{|J|+1}/m * (m/(1-m))^{|I|}: a subset-sum of scaled Q.
    let ratio = m / (1.0 - m);
    for (mask, slot) in out.iter_mut().enumerate().skip(1) {
        *slot = codeword_bits[mask] as f64 * ratio.powi(mask.count_ones() as i32);
    }
    for bit in 0..k {
        for mask in 0..n {
            if mask >> bit & 1 == 1 {
                out[mask] += out[mask ^ (1 << bit)];
            }
        }
    }
    for (mask, slot) in out.iter_mut().enumerate().skip(1) {
        let size = mask.count_ones() as i32;
        *slot *= (1.0 - m).powi(size + 1) / m / f;
    }
    out
}

/// Backpressure routing: combine `sigma_max` requests of `J` when its
/// members' pending files strictly exceed its weighted codeword backlog.
pub fn routing_decide(state: &QueueState, params: &PolicyParams, cache: &CacheParams) -> Vec<Combination> {
    let lhs = subset_sums(&state.pending);
    let rhs = routing_thresholds(&state.codeword_bits, cache);
    let k = state.num_users();
    let mut fired: Vec<Combination> = (1..lhs.len())
        .filter(|&mask| lhs[mask] > rhs[mask])
        .map(|mask| Combination {
            group: SubsetIndex::from_mask(mask as u32, k).expect("mask in range"),
            count: params.sigma_max,
            margin: lhs[mask] - rhs[mask],
        })
        .collect();
    fired.sort_by(|a, b| b.margin.total_cmp(&a.margin).then(a.group.cmp(&b.group)));
    fired
}

/// Queue-weighted scheduling over the instantaneous rate region.
pub fn schedule_decide(codeword_bits: &[u64], gains: &[f64], power: f64) -> Result<RateAllocation> {
    let weights: Vec<f64> = codeword_bits.iter().map(|&q| q as f64).collect();
    let weights = WeightVector::from_dense(gains.len(), weights)?;
    max_weighted_rate(gains, power, &weights)
}

/// The controller with its fixed parameters.
#[derive(Debug, Clone)]
pub struct LyapunovController {
    params: PolicyParams,
    cache: CacheParams,
    sizes: SegmentSizes,
    power: f64,
    slot_length: u32,
}

impl LyapunovController {
    pub fn new(params: PolicyParams, cache: CacheParams, power: f64, slot_length: u32) -> Result<Self> {
        params.validate()?;
        if !(power.is_finite() && power > 0.0) {
            return Err(Error::param("P", format!("must be positive, got {power}")));
        }
        if slot_length == 0 {
            return Err(Error::param("T_slot", "must be at least 1"));
        }
        Ok(Self {
            params,
            sizes: SegmentSizes::new(&cache),
            cache,
            power,
            slot_length,
        })
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn cache(&self) -> &CacheParams {
        &self.cache
    }

    pub fn segment_sizes(&self) -> &SegmentSizes {
        &self.sizes
    }

    pub fn slot_length(&self) -> u32 {
        self.slot_length
    }

    /// Decides all controls from `state` without modifying it.
    pub fn decide(&self, state: &QueueState, gains: &[f64]) -> Result<SlotDecision> {
        let k = self.cache.num_users();
        if state.num_users() != k || gains.len() != k {
            return Err(Error::param("K", "state, gains and cache disagree on K"));
        }
        let virtual_arrivals = state
            .virtual_queue
            .iter()
            .map(|&u| virtual_arrival(u, &self.params))
            .collect();
        let admissions = state
            .pending
            .iter()
            .zip(&state.virtual_queue)
            .map(|(&s, &u)| admission_decide(s, u, &self.params))
            .collect();
        let combinations = routing_decide(state, &self.params, &self.cache);
        let schedule = schedule_decide(&state.codeword_bits, gains, self.power)?;
        let t = self.slot_length as f64;
        let served_bits = schedule
            .subset_rates
            .iter()
            .map(|r| (t * r).floor() as u64)
            .collect();
        Ok(SlotDecision {
            admissions,
            virtual_arrivals,
            combinations,
            schedule,
            served_bits,
        })
    }

    /// Codeword bits each queue receives if every fired combination is
    /// fully backed by files, indexed by mask.
    pub fn nominal_arrivals(&self, decision: &SlotDecision) -> Vec<u64> {
        let mut arrivals = vec![0u64; decision.served_bits.len()];
        for c in &decision.combinations {
            let n = c.group.len();
            for target in c.group.subsets() {
                arrivals[target.mask() as usize] += c.count as u64 * self.sizes.bits(n, target.len());
            }
        }
        arrivals
    }

    /// Applies the queue updates of `decision` to `state`, assuming every
    /// fired combination is fully backed by files.
    pub fn apply(&self, state: &mut QueueState, decision: &SlotDecision) {
        let arrivals = self.nominal_arrivals(decision);
        self.apply_with_arrivals(state, decision, &arrivals);
    }

    /// Applies the queue updates with the codeword bits that were actually
    /// generated this slot.
    pub fn apply_with_arrivals(&self, state: &mut QueueState, decision: &SlotDecision, arrivals: &[u64]) {
        let k = state.num_users();
        let mut combined = vec![0.0; k];
        for c in &decision.combinations {
            for user in c.group.users() {
                combined[user] += c.count as f64;
            }
        }
        for user in 0..k {
            state.pending[user] = (state.pending[user] - combined[user]).max(0.0) + decision.admissions[user];
            state.virtual_queue[user] = (state.virtual_queue[user] - decision.admissions[user]).max(0.0)
                + decision.virtual_arrivals[user];
        }
        for ((q, served), arrived) in state
            .codeword_bits
            .iter_mut()
            .zip(&decision.served_bits)
            .zip(arrivals)
        {
            *q = q.saturating_sub(*served) + arrived;
        }
    }

    /// One slot: decide from the current state, then update it.
    pub fn step(&self, state: &QueueState, gains: &[f64]) -> Result<(QueueState, SlotDecision)> {
        let decision = self.decide(state, gains)?;
        let mut next = state.clone();
        self.apply(&mut next, &decision);
        Ok((next, decision))
    }

    /// Codeword load `b_{J,I}` in files, exposed for diagnostics.
    pub fn load(&self, group: SubsetIndex, target: SubsetIndex) -> f64 {
        load_by_size(self.cache.memory(), group.len(), target.len())
    }
}
