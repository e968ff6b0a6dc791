#![allow(dead_code)]

use nrm_core::model::{InstanceSpec, QueryType, RewardDistribution};
use rand::Rng;

/// A random continuous reward law with support inside `[0, 3]`.
pub fn random_law<R: Rng>(rng: &mut R) -> RewardDistribution {
    let lower = rng.gen_range(0.0..1.0);
    let width = rng.gen_range(0.2..2.0);
    if rng.gen_bool(0.5) {
        RewardDistribution::uniform(lower, lower + width).unwrap()
    } else {
        let f0 = rng.gen_range(0.05..1.95) / width;
        RewardDistribution::truncated_linear(lower, lower + width, f0).unwrap()
    }
}

/// A random instance with `m` resources and `n` types; every type consumes
/// at least one resource. Point masses appear when `atoms` is set.
pub fn random_instance<R: Rng>(rng: &mut R, m: usize, n: usize, atoms: bool, horizon: usize) -> InstanceSpec {
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let types = weights
        .iter()
        .map(|w| {
            let mut a: Vec<f64> = (0..m).map(|_| [0.0, 0.5, 1.0, 2.0][rng.gen_range(0..4)]).collect();
            if a.iter().all(|&x| x == 0.0) {
                a[rng.gen_range(0..m)] = 1.0;
            }
            let reward = if atoms && rng.gen_bool(0.3) {
                RewardDistribution::point_mass(rng.gen_range(0.1..2.0)).unwrap()
            } else {
                random_law(rng)
            };
            QueryType::new(a, w / total, reward)
        })
        .collect();
    let ratios = (0..m).map(|_| rng.gen_range(0.05..1.5)).collect();
    InstanceSpec::new(types, ratios, horizon).unwrap()
}
