//! Degraded Gaussian broadcast channel with one independent message per
//! nonempty user subset.
//!
//! Users are layered by decreasing gain: the strongest user sits at position
//! 0. A message for subset `J` is decoded at the level of its weakest member,
//! so the rate region is a stack of per-level sum-rate constraints, one per
//! position, coupled only through the power split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subset::{full_mask, submasks, SubsetIndex};

/// Slack allowed when testing region membership.
pub const REGION_TOLERANCE: f64 = 1e-9;

/// One nonnegative weight per subset, indexed by subset mask (index 0 unused).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn zeros(num_users: usize) -> Self {
        WeightVector(vec![0.0; full_mask(num_users) as usize + 1])
    }

    pub fn from_dense(num_users: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != full_mask(num_users) as usize + 1 {
            return Err(Error::param(
                "weights",
                format!("expected {} entries, got {}", full_mask(num_users) + 1, weights.len()),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("weights", "weights must be finite and nonnegative"));
        }
        let mut weights = weights;
        weights[0] = 0.0;
        Ok(WeightVector(weights))
    }

    pub fn num_users(&self) -> usize {
        (self.0.len() as u32).trailing_zeros() as usize
    }

    pub fn get(&self, subset: SubsetIndex) -> f64 {
        self.0[subset.mask() as usize]
    }

    pub fn set(&mut self, subset: SubsetIndex, weight: f64) {
        assert!(weight.is_finite() && weight >= 0.0);
        self.0[subset.mask() as usize] = weight;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        WeightVector(self.0.iter().map(|w| w * factor).collect())
    }
}

/// Positions of users by decreasing gain, ties broken by user id.
pub fn gain_order(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    order
}

/// Capacity of level `position` given the cumulative power below and at it.
#[inline]
fn level_capacity(gain: f64, power_below: f64, power_through: f64) -> f64 {
    ((gain * power_through).ln_1p() - (gain * power_below).ln_1p()) / std::f64::consts::LN_2
}

/// Whether `rates` (bits per channel use, indexed by subset mask) is
/// supported by the power split `alphas` (one fraction per position in
/// decreasing-gain order).
pub fn region_contains(gains: &[f64], power: f64, rates: &[f64], alphas: &[f64]) -> bool {
    let k = gains.len();
    if alphas.len() != k || rates.len() != full_mask(k) as usize + 1 {
        return false;
    }
    if alphas.iter().any(|a| *a < -REGION_TOLERANCE)
        || alphas.iter().sum::<f64>() > 1.0 + REGION_TOLERANCE
    {
        return false;
    }
    if rates[1..].iter().any(|r| !(*r >= -REGION_TOLERANCE)) {
        return false;
    }

    let order = gain_order(gains);
    let mut position = vec![0usize; k];
    for (pos, &user) in order.iter().enumerate() {
        position[user] = pos;
    }
    let mut level_load = vec![0.0; k];
    for (mask, rate) in rates.iter().enumerate().skip(1) {
        let weakest = SubsetIndex::from_mask(mask as u32, k)
            .expect("mask in range")
            .users()
            .map(|u| position[u])
            .max()
            .expect("nonempty");
        level_load[weakest] += rate;
    }

    let mut below = 0.0;
    for pos in 0..k {
        let through = below + alphas[pos] * power;
        let cap = level_capacity(gains[order[pos]], below, through);
        if level_load[pos] > cap + REGION_TOLERANCE {
            return false;
        }
        below = through;
    }
    true
}

/// Per-level weights: for each position, the best subset that has this
/// position's user as its weakest member.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedWeights {
    /// Largest weight per position.
    pub weights: Vec<f64>,
    /// Achieving subset per position.
    pub argmax: Vec<SubsetIndex>,
}

/// Collapses the subset weights onto the `K` decoding levels.
///
/// Ties prefer the subset of smallest cardinality, then the smallest mask.
pub fn reduce_weights(weights: &WeightVector, order: &[usize]) -> ReducedWeights {
    let w = weights.as_slice();
    let mut out = ReducedWeights {
        weights: Vec::with_capacity(order.len()),
        argmax: Vec::with_capacity(order.len()),
    };
    let mut stronger = 0u32;
    for &user in order {
        let own = 1u32 << user;
        let mut best_mask = own;
        let mut best = w[own as usize];
        for s in submasks(stronger) {
            let cand = s | own;
            let val = w[cand as usize];
            if val > best
                || (val == best
                    && (cand.count_ones(), cand) < (best_mask.count_ones(), best_mask))
            {
                best = val;
                best_mask = cand;
            }
        }
        out.weights.push(best);
        out.argmax.push(SubsetIndex::from_mask(best_mask, order.len()).expect("nonempty"));
        stronger |= own;
    }
    out
}

/// Power split and per-level rates for one weighted-sum-rate problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Power fraction per position.
    pub alphas: Vec<f64>,
    /// Rate of each decoding level in bits per channel use.
    pub level_rates: Vec<f64>,
    /// Lagrange multiplier of the power constraint.
    pub multiplier: f64,
}

/// Maximizes `sum_k w_k R_k` over the power simplex.
///
/// `gains` must be sorted in decreasing order. The optimal split gives the
/// power increment at cumulative level `z` to the user maximizing
/// `w_k / (1/h_k + z)`. Any two such curves cross at most once, so sweeping
/// the pairwise crossings inside `[0, P]` recovers the envelope exactly.
pub fn solve_power_allocation(gains: &[f64], power: f64, weights: &[f64]) -> Result<PowerAllocation> {
    let k = gains.len();
    if weights.len() != k {
        return Err(Error::param("weights", "one weight per user is required"));
    }
    if gains.windows(2).any(|p| p[0] < p[1]) {
        return Err(Error::UnsortedGains);
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::param("P", format!("must be positive, got {power}")));
    }

    let active: Vec<usize> = (0..k).filter(|&i| weights[i] > 0.0 && gains[i] > 0.0).collect();
    let mut alphas = vec![0.0; k];
    if active.is_empty() {
        return Ok(PowerAllocation {
            alphas,
            level_rates: vec![0.0; k],
            multiplier: 0.0,
        });
    }

    let offset = |i: usize| 1.0 / gains[i];
    let utility = |i: usize, z: f64| weights[i] / (offset(i) + z);

    let mut breaks = vec![0.0, power];
    for (a, &i) in active.iter().enumerate() {
        for &j in &active[a + 1..] {
            let dw = weights[j] - weights[i];
            if dw != 0.0 {
                let z = (weights[i] * offset(j) - weights[j] * offset(i)) / dw;
                if z > 0.0 && z < power {
                    breaks.push(z);
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    for seg in breaks.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let mut winner = active[0];
        let mut best = utility(winner, mid);
        for &i in &active[1..] {
            let u = utility(i, mid);
            if u > best {
                best = u;
                winner = i;
            }
        }
        alphas[winner] += (hi - lo) / power;
    }

    let multiplier = active
        .iter()
        .map(|&i| utility(i, power))
        .fold(f64::NEG_INFINITY, f64::max);
    let level_rates = level_rates(gains, power, &alphas);
    Ok(PowerAllocation {
        alphas,
        level_rates,
        multiplier,
    })
}

/// Per-level rates of a power split over sorted gains.
pub fn level_rates(gains: &[f64], power: f64, alphas: &[f64]) -> Vec<f64> {
    let mut below = 0.0;
    gains
        .iter()
        .zip(alphas)
        .map(|(&h, &a)| {
            let through = below + a * power;
            let r = if a > 0.0 { level_capacity(h, below, through) } else { 0.0 };
            below = through;
            r
        })
        .collect()
}

/// The weighted sum of level rates for a power split over sorted gains.
pub fn level_objective(gains: &[f64], power: f64, weights: &[f64], alphas: &[f64]) -> f64 {
    level_rates(gains, power, alphas)
        .iter()
        .zip(weights)
        .map(|(r, w)| r * w)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    /// User ids by decreasing gain.
    pub order: Vec<usize>,
    /// Power fraction per position of `order`.
    pub power_fractions: Vec<f64>,
    /// Bits per channel use, indexed by subset mask.
    pub subset_rates: Vec<f64>,
    /// Weighted sum rate achieved.
    pub objective: f64,
}

impl RateAllocation {
    pub fn idle(num_users: usize) -> Self {
        Self {
            order: (0..num_users).collect(),
            power_fractions: vec![0.0; num_users],
            subset_rates: vec![0.0; full_mask(num_users) as usize + 1],
            objective: 0.0,
        }
    }

    pub fn rate(&self, subset: SubsetIndex) -> f64 {
        self.subset_rates[subset.mask() as usize]
    }

    pub fn total_rate(&self) -> f64 {
        self.subset_rates.iter().sum()
    }
}

/// Picks the point of the rate region maximizing `sum_J w_J r_J`.
pub fn max_weighted_rate(gains: &[f64], power: f64, weights: &WeightVector) -> Result<RateAllocation> {
    let k = gains.len();
    if weights.as_slice().len() != full_mask(k) as usize + 1 {
        return Err(Error::param("weights", "weight vector does not match K"));
    }
    let order = gain_order(gains);
    let reduced = reduce_weights(weights, &order);
    let sorted: Vec<f64> = order.iter().map(|&u| gains[u]).collect();
    let mut level_weights = reduced.weights;
    for (w, h) in level_weights.iter_mut().zip(&sorted) {
        if *h <= 0.0 {
            *w = 0.0;
        }
    }

    let alloc = solve_power_allocation(&sorted, power, &level_weights)?;
    let mut subset_rates = vec![0.0; full_mask(k) as usize + 1];
    let mut objective = 0.0;
    for pos in 0..k {
        let r = alloc.level_rates[pos];
        if r > 0.0 {
            subset_rates[reduced.argmax[pos].mask() as usize] += r;
            objective += level_weights[pos] * r;
        }
    }
    Ok(RateAllocation {
        order,
        power_fractions: alloc.alphas,
        subset_rates,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log2_1p(x: f64) -> f64 {
        x.ln_1p() / std::f64::consts::LN_2
    }

    #[test]
    fn origin_is_feasible() {
        let rates = vec![0.0; 8];
        assert!(region_contains(&[3.0, 1.0, 0.5], 10.0, &rates, &[0.0, 0.0, 0.0]));
    }

    #[test]
    fn single_user_capacity_is_tight() {
        let h = [2.0];
        let cap = log2_1p(2.0 * 5.0);
        assert!(region_contains(&h, 5.0, &[0.0, cap], &[1.0]));
        assert!(!region_contains(&h, 5.0, &[0.0, cap + 1e-6], &[1.0]));
    }

    #[test]
    fn two_user_boundary_point() {
        // h = (4, 1), P = 1, even split.
        let h = [4.0, 1.0];
        let r1 = 3f64.log2();
        let second_level = (2.0f64 / 1.5).log2();
        let mut rates = vec![0.0; 4];
        rates[0b01] = r1;
        rates[0b10] = 0.5 * second_level;
        rates[0b11] = 0.5 * second_level;
        assert!(region_contains(&h, 1.0, &rates, &[0.5, 0.5]));
        rates[0b11] += 1e-6;
        assert!(!region_contains(&h, 1.0, &rates, &[0.5, 0.5]));
    }

    #[test]
    fn excess_power_rejected() {
        assert!(!region_contains(&[1.0, 1.0], 1.0, &[0.0; 4], &[0.7, 0.7]));
    }

    #[test]
    fn reduce_two_users() {
        let mut w = WeightVector::zeros(2);
        w.set(SubsetIndex::singleton(0), 5.0);
        w.set(SubsetIndex::singleton(1), 1.0);
        w.set(SubsetIndex::full(2), 3.0);
        let r = reduce_weights(&w, &[0, 1]);
        assert_eq!(r.weights, vec![5.0, 3.0]);
        assert_eq!(r.argmax, vec![SubsetIndex::singleton(0), SubsetIndex::full(2)]);
    }

    #[test]
    fn equal_weights_pick_singletons() {
        let mut w = WeightVector::zeros(4);
        for m in 1..16u32 {
            w.set(SubsetIndex::from_mask(m, 4).unwrap(), 2.0);
        }
        let order = vec![2, 0, 3, 1];
        let r = reduce_weights(&w, &order);
        assert!(r.weights.iter().all(|x| *x == 2.0));
        for (pos, &u) in order.iter().enumerate() {
            assert_eq!(r.argmax[pos], SubsetIndex::singleton(u));
        }
    }

    #[test]
    fn single_level_gets_all_power() {
        let a = solve_power_allocation(&[3.0], 2.0, &[1.0]).unwrap();
        assert_eq!(a.alphas, vec![1.0]);
        assert!((a.level_rates[0] - log2_1p(6.0)).abs() < 1e-12);
    }

    #[test]
    fn equal_weights_favor_strongest() {
        let a = solve_power_allocation(&[5.0, 2.0, 0.5], 10.0, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(a.alphas, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn one_crossing_split() {
        // 1/(1+z) and 3/(4+z) cross at z = 0.5.
        let a = solve_power_allocation(&[1.0, 0.25], 10.0, &[1.0, 3.0]).unwrap();
        assert!((a.alphas[0] - 0.05).abs() < 1e-12);
        assert!((a.alphas[1] - 0.95).abs() < 1e-12);
        assert!((a.multiplier - 3.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn unsorted_and_idle_inputs() {
        assert!(matches!(
            solve_power_allocation(&[1.0, 2.0], 1.0, &[1.0, 1.0]),
            Err(Error::UnsortedGains)
        ));
        let idle = solve_power_allocation(&[2.0, 1.0], 1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(idle.alphas, vec![0.0, 0.0]);
        assert_eq!(idle.level_rates, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_gain_users_are_skipped() {
        let mut w = WeightVector::zeros(3);
        for m in 1..8u32 {
            w.set(SubsetIndex::from_mask(m, 3).unwrap(), m as f64);
        }
        let alloc = max_weighted_rate(&[0.0, 1.5, 0.7], 10.0, &w).unwrap();
        for m in 1..8u32 {
            if m & 1 == 1 {
                assert_eq!(alloc.subset_rates[m as usize], 0.0);
            }
        }
        assert!(alloc.total_rate() > 0.0);
        assert!(region_contains(&[0.0, 1.5, 0.7], 10.0, &alloc.subset_rates, &alloc.power_fractions));
    }

    #[test]
    fn single_subset_weight_serves_its_weakest_level() {
        let gains = [0.3, 2.0, 1.1];
        let mut w = WeightVector::zeros(3);
        let j = SubsetIndex::from_users(&[0, 1], 3).unwrap();
        w.set(j, 4.0);
        let alloc = max_weighted_rate(&gains, 10.0, &w).unwrap();
        assert!((alloc.rate(j) - log2_1p(3.0)).abs() < 1e-12);
        assert!((alloc.total_rate() - alloc.rate(j)).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_give_zero_rates() {
        let alloc = max_weighted_rate(&[1.0, 2.0], 10.0, &WeightVector::zeros(2)).unwrap();
        assert_eq!(alloc.total_rate(), 0.0);
    }
}
