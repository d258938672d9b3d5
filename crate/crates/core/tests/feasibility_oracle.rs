//! Monte-Carlo service rates against numerical integration, and slack
//! bookkeeping of the stability conditions.

use faircache::bc_capacity::WeightVector;
use faircache::feasibility::{check_feasibility, monte_carlo_avg_rate, RateMixture, StaticPolicySpec};
use faircache::subset::SubsetIndex;
use faircache::{CacheParams, ChannelParams};

/// E[log2(1 + beta^2 X P)] for X ~ Exp(1), by composite Simpson on [0, 60].
fn ergodic_rate(beta: f64, power: f64) -> f64 {
    let n = 600_000;
    let hi = 60.0;
    let h = hi / n as f64;
    let f = |x: f64| (1.0 + beta * beta * x * power).log2() * (-x).exp();
    let mut acc = f(0.0) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * h);
    }
    acc * h / 3.0
}

fn full_power_single_user() -> RateMixture {
    let mut w = WeightVector::zeros(1);
    w.set(SubsetIndex::singleton(0), 1.0);
    RateMixture::new(vec![w], vec![1.0]).unwrap()
}

#[test]
fn single_user_rate_matches_quadrature() {
    for (beta, power) in [(1.0, 10.0), (0.2, 10.0), (0.7, 3.0)] {
        let channel = ChannelParams::new(vec![beta], power, 100).unwrap();
        let est = monte_carlo_avg_rate(&full_power_single_user(), &channel, 200_000, 3).unwrap();
        let exact = ergodic_rate(beta, power);
        let err = (est.mean[1] - exact).abs();
        assert!(err < 4.0 * est.std_error[1], "beta={beta}: {} vs {exact} (se {})", est.mean[1], est.std_error[1]);
    }
}

#[test]
fn standard_error_shrinks_as_root_n() {
    let channel = ChannelParams::new(vec![1.0], 10.0, 100).unwrap();
    let small = monte_carlo_avg_rate(&full_power_single_user(), &channel, 10_000, 1).unwrap();
    let large = monte_carlo_avg_rate(&full_power_single_user(), &channel, 40_000, 1).unwrap();
    let ratio = large.std_error[1] / small.std_error[1];
    assert!((ratio - 0.5).abs() < 0.05, "ratio {ratio}");
}

#[test]
fn zero_weights_give_zero_rates() {
    let channel = ChannelParams::new(vec![1.0, 0.5], 10.0, 100).unwrap();
    let idle = RateMixture::new(vec![WeightVector::zeros(2)], vec![1.0]).unwrap();
    let est = monte_carlo_avg_rate(&idle, &channel, 1000, 1).unwrap();
    assert!(est.mean.iter().all(|r| *r == 0.0));
}

#[test]
fn slack_signs() {
    let cache = CacheParams::new(0.6, 1000, 2).unwrap();
    let rates = vec![0.0, 1.0, 0.5, 0.8];
    let idle = StaticPolicySpec {
        admissions: vec![0.0, 0.0],
        combinations: vec![0.0; 4],
        sigma_max: 1,
        mixture: RateMixture::corners(2),
    };
    let report = check_feasibility(&idle, &rates, &cache, 100).unwrap();
    assert!(report.is_feasible());
    assert_eq!(report.transmit_slack, vec![0.0, 100.0, 50.0, 80.0]);

    let starving = StaticPolicySpec {
        admissions: vec![0.3, 0.0],
        ..idle
    };
    let report = check_feasibility(&starving, &rates, &cache, 100).unwrap();
    assert!(!report.is_feasible());
    assert!((report.combine_slack[0] + 0.3).abs() < 1e-12);
}
