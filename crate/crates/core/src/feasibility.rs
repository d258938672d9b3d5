//! Static randomized policies and the stability conditions they must meet.
//!
//! A static policy admits at fixed mean rates, combines each subset at a
//! fixed mean rate, and in every slot picks one of a few rate tuples of the
//! instantaneous region with fixed probabilities. It keeps the queues stable
//! iff combining outpaces admission for every user and every codeword queue
//! is served faster than it is fed.
//!
//! The fading law is continuous, so mean service rates are estimated by
//! sampling and reported with standard errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bc_capacity::{max_weighted_rate, region_contains, WeightVector};
use crate::caching::{load_by_size, CacheParams, SegmentSizes};
use crate::channel::{ChannelParams, FadingChannel};
use crate::error::{Error, Result};
use crate::subset::{all_subsets, full_mask, SubsetIndex};

/// Rate tuples drawn per slot: each component is the max-weighted-rate point
/// of its weight vector for the current gains.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMixture {
    pub components: Vec<WeightVector>,
    pub probabilities: Vec<f64>,
}

impl RateMixture {
    pub fn new(components: Vec<WeightVector>, probabilities: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != probabilities.len() {
            return Err(Error::param(
                "mixture",
                "need one probability per component and at least one component",
            ));
        }
        if probabilities.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::param("mixture", "probabilities must be nonnegative"));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param("mixture", format!("probabilities sum to {total}")));
        }
        let k = components[0].num_users();
        if components.iter().any(|c| c.num_users() != k) {
            return Err(Error::param("mixture", "components disagree on K"));
        }
        Ok(Self {
            components,
            probabilities,
        })
    }

    /// Uniform over the `K` single-user corners and the equal-weight point.
    pub fn corners(num_users: usize) -> Self {
        let mut components: Vec<WeightVector> = (0..num_users)
            .map(|k| {
                let mut w = WeightVector::zeros(num_users);
                w.set(SubsetIndex::singleton(k), 1.0);
                w
            })
            .collect();
        let mut equal = WeightVector::zeros(num_users);
        for s in all_subsets(num_users) {
            equal.set(s, 1.0);
        }
        components.push(equal);
        let p = 1.0 / components.len() as f64;
        Self {
            probabilities: vec![p; components.len()],
            components,
        }
    }

    pub fn num_users(&self) -> usize {
        self.components[0].num_users()
    }

    /// Mixture-averaged rates for one channel state, indexed by mask.
    pub fn expected_rates(&self, gains: &[f64], power: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; full_mask(gains.len()) as usize + 1];
        for (w, &p) in self.components.iter().zip(&self.probabilities) {
            if p == 0.0 {
                continue;
            }
            let alloc = max_weighted_rate(gains, power, w)?;
            debug_assert!(region_contains(gains, power, &alloc.subset_rates, &alloc.power_fractions));
            for (o, r) in out.iter_mut().zip(&alloc.subset_rates) {
                *o += p * r;
            }
        }
        Ok(out)
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probabilities.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticPolicySpec {
    /// Mean admitted files per slot, per user.
    pub admissions: Vec<f64>,
    /// Mean combinations per slot, indexed by mask.
    pub combinations: Vec<f64>,
    pub sigma_max: u32,
    pub mixture: RateMixture,
}

impl StaticPolicySpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.admissions.len();
        if k == 0 || self.mixture.num_users() != k {
            return Err(Error::param("admissions", "one admission rate per user"));
        }
        if self.combinations.len() != full_mask(k) as usize + 1 {
            return Err(Error::param("combinations", "one rate per subset mask"));
        }
        if self.admissions.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::param("admissions", "must be nonnegative"));
        }
        let cap = self.sigma_max as f64;
        if self.combinations[1..].iter().any(|s| !(*s >= 0.0 && *s <= cap)) {
            return Err(Error::param("combinations", format!("must lie in [0, {cap}]")));
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.admissions.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageRates {
    /// Bits per channel use, indexed by mask.
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub samples: usize,
}

/// Monte-Carlo estimate of the mean service rate of `mixture`.
pub fn monte_carlo_avg_rate(
    mixture: &RateMixture,
    channel: &ChannelParams,
    samples: usize,
    seed: u64,
) -> Result<AverageRates> {
    if samples == 0 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    if mixture.num_users() != channel.num_users() {
        return Err(Error::param("mixture", "mixture and channel disagree on K"));
    }
    let n_sub = full_mask(channel.num_users()) as usize + 1;
    let mut sum = vec![0.0; n_sub];
    let mut sum_sq = vec![0.0; n_sub];
    let mut fading = FadingChannel::new(channel.clone(), seed);
    for _ in 0..samples {
        let h = fading.sample_slot();
        let r = mixture.expected_rates(&h.gains, channel.power())?;
        for i in 0..n_sub {
            sum[i] += r[i];
            sum_sq[i] += r[i] * r[i];
        }
    }
    let n = samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = if samples > 1 {
        sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
            .collect()
    } else {
        vec![f64::INFINITY; n_sub]
    };
    Ok(AverageRates {
        mean,
        std_error,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    /// Combining rate minus admission rate, files per slot, per user.
    pub combine_slack: Vec<f64>,
    /// Service minus codeword arrivals, bits per slot, indexed by mask.
    pub transmit_slack: Vec<f64>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.combine_slack.iter().all(|s| *s >= 0.0) && self.transmit_slack[1..].iter().all(|s| *s >= 0.0)
    }

    pub fn min_slack(&self) -> f64 {
        self.combine_slack
            .iter()
            .chain(&self.transmit_slack[1..])
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Slack of every stability constraint for `spec` served at `avg_rates`.
pub fn check_feasibility(
    spec: &StaticPolicySpec,
    avg_rates: &[f64],
    cache: &CacheParams,
    slot_length: u32,
) -> Result<FeasibilityReport> {
    spec.validate()?;
    let k = spec.num_users();
    if cache.num_users() != k || avg_rates.len() != spec.combinations.len() {
        return Err(Error::param("K", "spec, rates and cache disagree on K"));
    }
    let combine_slack = (0..k)
        .map(|user| {
            let combined: f64 = all_subsets(k)
                .filter(|j| j.contains(user))
                .map(|j| spec.combinations[j.mask() as usize])
                .sum();
            combined - spec.admissions[user]
        })
        .collect();
    let f = cache.file_bits() as f64;
    let full = SubsetIndex::full(k).mask();
    let mut transmit_slack = vec![0.0; avg_rates.len()];
    for target in all_subsets(k) {
        let t = target.mask();
        let mut arrivals = 0.0;
        // Supersets of the target.
        let free = full & !t;
        let mut extra = free;
        loop {
            let group = SubsetIndex::from_mask(t | extra, k).expect("nonempty");
            arrivals += load_by_size(cache.memory(), group.len(), target.len()) * f
                * spec.combinations[group.mask() as usize];
            if extra == 0 {
                break;
            }
            extra = (extra - 1) & free;
        }
        transmit_slack[t as usize] = slot_length as f64 * avg_rates[t as usize] - arrivals;
    }
    Ok(FeasibilityReport {
        combine_slack,
        transmit_slack,
    })
}

/// Total queue length (files plus codeword bits over `F`) per slot of a
/// static policy run.
pub fn simulate_static(
    spec: &StaticPolicySpec,
    channel: &ChannelParams,
    cache: &CacheParams,
    slots: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let k = spec.num_users();
    if channel.num_users() != k || cache.num_users() != k {
        return Err(Error::param("K", "spec, channel and cache disagree on K"));
    }
    let sizes = SegmentSizes::new(cache);
    let mut fading = FadingChannel::new(channel.clone(), seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(u32::MAX));
    let n_sub = full_mask(k) as usize + 1;
    let mut pending = vec![0.0; k];
    let mut bits = vec![0u64; n_sub];
    let f = cache.file_bits() as f64;
    let t = channel.slot_length() as f64;
    let cap = spec.sigma_max as f64;
    let mut totals = Vec::with_capacity(slots as usize);
    for _ in 0..slots {
        let h = fading.sample_slot();
        let component = spec.mixture.draw(&mut rng);
        let alloc = max_weighted_rate(&h.gains, channel.power(), &spec.mixture.components[component])?;
        let mut combined = vec![0.0; k];
        let mut arrivals = vec![0u64; n_sub];
        for group in all_subsets(k) {
            let p = spec.combinations[group.mask() as usize] / cap;
            if p > 0.0 && rng.gen::<f64>() < p {
                for u in group.users() {
                    combined[u] += cap;
                }
                for target in group.subsets() {
                    arrivals[target.mask() as usize] +=
                        spec.sigma_max as u64 * sizes.bits(group.len(), target.len());
                }
            }
        }
        for u in 0..k {
            pending[u] = (pending[u] - combined[u]).max(0.0) + spec.admissions[u];
        }
        for i in 1..n_sub {
            let served = (t * alloc.subset_rates[i]).floor() as u64;
            bits[i] = bits[i].saturating_sub(served) + arrivals[i];
        }
        totals.push(pending.iter().sum::<f64>() + bits.iter().sum::<u64>() as f64 / f);
    }
    Ok(totals)
}

/// Least-squares line through `(i, y_i)`: `(slope, r_squared)`.
pub fn linear_fit(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return (0.0, 0.0);
    }
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 0.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(k: usize, admissions: Vec<f64>, combos: &[(u32, f64)]) -> StaticPolicySpec {
        let mut combinations = vec![0.0; full_mask(k) as usize + 1];
        for &(m, s) in combos {
            combinations[m as usize] = s;
        }
        StaticPolicySpec {
            admissions,
            combinations,
            sigma_max: 1,
            mixture: RateMixture::corners(k),
        }
    }

    #[test]
    fn no_admissions_leave_service_as_slack() {
        let cache = CacheParams::new(0.6, 1000, 2).unwrap();
        let s = spec(2, vec![0.0, 0.0], &[]);
        let rates = vec![0.0, 1.0, 0.5, 0.25];
        let r = check_feasibility(&s, &rates, &cache, 100).unwrap();
        assert!(r.is_feasible());
        assert_eq!(r.transmit_slack, vec![0.0, 100.0, 50.0, 25.0]);
        assert_eq!(r.combine_slack, vec![0.0, 0.0]);
    }

    #[test]
    fn admissions_without_combining_violate() {
        let cache = CacheParams::new(0.6, 1000, 2).unwrap();
        let s = spec(2, vec![0.1, 0.0], &[]);
        let r = check_feasibility(&s, &[0.0, 1.0, 1.0, 1.0], &cache, 100).unwrap();
        assert!(!r.is_feasible());
        assert!((r.combine_slack[0] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn pair_combinations_load_all_three_queues() {
        let cache = CacheParams::new(0.6, 1000, 2).unwrap();
        let s = spec(2, vec![0.3, 0.3], &[(0b11, 0.4)]);
        let r = check_feasibility(&s, &[0.0, 1.0, 1.0, 2.0], &cache, 100).unwrap();
        assert!((r.transmit_slack[1] - (100.0 - 160.0 * 0.4)).abs() < 1e-9);
        assert!((r.transmit_slack[3] - (200.0 - 240.0 * 0.4)).abs() < 1e-9);
        assert!((r.combine_slack[1] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn idle_mixture_has_zero_rate() {
        let ch = ChannelParams::new(vec![1.0, 0.5], 10.0, 100).unwrap();
        let mix = RateMixture::new(vec![WeightVector::zeros(2)], vec![1.0]).unwrap();
        let est = monte_carlo_avg_rate(&mix, &ch, 200, 3).unwrap();
        assert!(est.mean.iter().all(|m| *m == 0.0));
    }

    #[test]
    fn mixture_validation() {
        assert!(RateMixture::new(vec![WeightVector::zeros(2)], vec![0.5]).is_err());
        assert!(RateMixture::new(vec![], vec![]).is_err());
        let mut s = spec(2, vec![0.1, 0.1], &[(0b11, 2.0)]);
        assert!(s.validate().is_err());
        s.combinations[3] = 0.5;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn fit_recovers_line() {
        let ys: Vec<f64> = (0..100).map(|i| 3.0 + 0.5 * i as f64).collect();
        let (slope, r2) = linear_fit(&ys);
        assert!((slope - 0.5).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
