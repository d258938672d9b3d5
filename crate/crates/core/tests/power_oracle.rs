//! Max-weighted-rate scheduling against a brute-force power grid.

use faircache::bc_capacity::{
    gain_order, level_objective, max_weighted_rate, reduce_weights, region_contains, solve_power_allocation,
    WeightVector,
};
use faircache::subset::full_mask;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best objective over power splits on the grid `alpha_k = i_k / steps`
/// with all power used.
fn grid_best(sorted_gains: &[f64], power: f64, weights: &[f64], steps: usize) -> f64 {
    fn walk(pos: usize, left: usize, alphas: &mut Vec<f64>, steps: usize, eval: &mut dyn FnMut(&[f64])) {
        if pos + 1 == alphas.len() {
            alphas[pos] = left as f64 / steps as f64;
            eval(alphas);
            return;
        }
        for i in 0..=left {
            alphas[pos] = i as f64 / steps as f64;
            walk(pos + 1, left - i, alphas, steps, eval);
        }
    }
    let mut best = f64::NEG_INFINITY;
    let mut alphas = vec![0.0; sorted_gains.len()];
    walk(0, steps, &mut alphas, steps, &mut |a| {
        best = best.max(level_objective(sorted_gains, power, weights, a));
    });
    best
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

#[test]
fn solver_beats_grid_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 2..=4usize {
        for _ in 0..25 {
            let gains: Vec<f64> = (0..k).map(|_| log_uniform(&mut rng, 0.01, 10.0)).collect();
            let theta: Vec<f64> = (0..=full_mask(k)).map(|m| if m == 0 { 0.0 } else { rng.gen() }).collect();
            let weights = WeightVector::from_dense(k, theta).unwrap();
            let power = 10.0;

            let alloc = max_weighted_rate(&gains, power, &weights).unwrap();
            assert!(region_contains(&gains, power, &alloc.subset_rates, &alloc.power_fractions));

            let order = gain_order(&gains);
            let sorted: Vec<f64> = order.iter().map(|&u| gains[u]).collect();
            let reduced = reduce_weights(&weights, &order);
            let oracle = grid_best(&sorted, power, &reduced.weights, 100);
            assert!(
                alloc.objective >= oracle * (1.0 - 1e-3),
                "K={k} gains={gains:?}: solver {} < grid {oracle}",
                alloc.objective
            );
        }
    }
}

#[test]
fn single_crossing_example() {
    let pa = solve_power_allocation(&[1.0, 0.25], 10.0, &[1.0, 3.0]).unwrap();
    assert!((pa.alphas[0] - 0.05).abs() < 1e-12);
    assert!((pa.alphas[1] - 0.95).abs() < 1e-12);
    let oracle = grid_best(&[1.0, 0.25], 10.0, &[1.0, 3.0], 10_000);
    let f = level_objective(&[1.0, 0.25], 10.0, &[1.0, 3.0], &pa.alphas);
    assert!(f >= oracle - 1e-3);
}

#[test]
fn single_queue_gets_full_weakest_level_rate() {
    let gains = [3.0, 0.5, 1.2];
    let mut w = WeightVector::zeros(3);
    let group = faircache::SubsetIndex::from_users(&[0, 2], 3).unwrap();
    w.set(group, 7.0);
    let alloc = max_weighted_rate(&gains, 10.0, &w).unwrap();
    let expected = (1.0f64 + 1.2 * 10.0).log2();
    assert!((alloc.rate(group) - expected).abs() < 1e-9);
    assert!((alloc.total_rate() - expected).abs() < 1e-9);
}
