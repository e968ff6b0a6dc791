//! Sample paths drawn from a counter-based generator.
//!
//! The generator is ChaCha8 keyed by the experiment seed, with the
//! replication index as stream id and the period as block position: period
//! `t` of replication `k` always consumes words `4t..4t+4` of stream `k`.
//! Paths are therefore independent of evaluation order and can be rebuilt in
//! any thread, and every policy evaluated on replication `k` sees the same
//! arrivals.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::distribution::RewardDistribution;
use super::instance::InstanceSpec;
use crate::error::Result;

const WORDS_PER_PERIOD: u128 = 4;

/// Realized arrivals `(r_t, j_t)` of one replication plus per-type suffix counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    rewards: Vec<f64>,
    types: Vec<usize>,
    type_count: usize,
    /// Row `t` holds `d̃_{j,t}` for all `j`; row `T` is all zeros.
    suffix: Vec<u32>,
}

impl SamplePath {
    /// Builds a path from explicit arrivals.
    pub fn from_arrivals(rewards: Vec<f64>, types: Vec<usize>, type_count: usize) -> SamplePath {
        assert_eq!(rewards.len(), types.len(), "rewards and types must align");
        let len = rewards.len();
        let mut suffix = vec![0u32; (len + 1) * type_count];
        for t in (0..len).rev() {
            let (head, tail) = suffix.split_at_mut((t + 1) * type_count);
            let row = &mut head[t * type_count..];
            row.copy_from_slice(&tail[..type_count]);
            row[types[t]] += 1;
        }
        SamplePath {
            rewards,
            types,
            type_count,
            suffix,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn type_count(&self) -> usize {
        self.type_count
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn types(&self) -> &[usize] {
        &self.types
    }

    pub fn reward(&self, t: usize) -> f64 {
        self.rewards[t]
    }

    pub fn type_at(&self, t: usize) -> usize {
        self.types[t]
    }

    /// Number of arrivals of each type in periods `t..T` (0-based; `t = T` gives zeros).
    pub fn suffix_counts(&self, t: usize) -> &[u32] {
        &self.suffix[t * self.type_count..(t + 1) * self.type_count]
    }

    /// The arrivals from period `t` on, as a path of its own.
    pub fn suffix(&self, t: usize) -> SamplePath {
        SamplePath {
            rewards: self.rewards[t..].to_vec(),
            types: self.types[t..].to_vec(),
            type_count: self.type_count,
            suffix: self.suffix[t * self.type_count..].to_vec(),
        }
    }
}

fn unit_interval(bits: u64) -> f64 {
    // 53 random bits, centred in their cell so 0 and 1 are never produced.
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn generator(seed: u64, stream: u64, period: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(WORDS_PER_PERIOD * period as u128);
    rng
}

/// The two uniforms `(type draw, reward draw)` consumed by `period` of `stream`.
pub fn period_uniforms(seed: u64, stream: u64, period: usize) -> (f64, f64) {
    let mut rng = generator(seed, stream, period);
    let a = unit_interval(rng.next_u64());
    let b = unit_interval(rng.next_u64());
    (a, b)
}

fn pick_type(cumulative: &[f64], u: f64) -> usize {
    cumulative
        .iter()
        .position(|&c| u < c)
        .unwrap_or(cumulative.len() - 1)
}

/// Draws `len` i.i.d. queries from `spec` on stream `stream` of `seed`.
pub fn sample_queries(spec: &InstanceSpec, seed: u64, stream: u64, len: usize) -> Result<SamplePath> {
    spec.validate()?;
    let mut cumulative = Vec::with_capacity(spec.type_count());
    let mut acc = 0.0;
    for ty in &spec.types {
        acc += ty.probability;
        cumulative.push(acc);
    }
    let laws: Vec<&RewardDistribution> = spec.types.iter().map(|t| &t.reward).collect();
    let mut rng = generator(seed, stream, 0);
    let mut rewards = Vec::with_capacity(len);
    let mut types = Vec::with_capacity(len);
    for _ in 0..len {
        let j = pick_type(&cumulative, unit_interval(rng.next_u64()));
        let r = laws[j].sample_from_uniform(unit_interval(rng.next_u64()));
        types.push(j);
        rewards.push(r);
    }
    Ok(SamplePath::from_arrivals(rewards, types, spec.type_count()))
}

/// Draws the `T`-period path of `replication`.
pub fn sample_path(spec: &InstanceSpec, seed: u64, replication: u64) -> Result<SamplePath> {
    sample_queries(spec, seed, replication, spec.horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QueryType, RewardLaw};

    fn two_type(horizon: usize) -> InstanceSpec {
        InstanceSpec::new(
            vec![
                QueryType::new(vec![1.0], 0.3, RewardDistribution::uniform(0.0, 1.0).unwrap()),
                QueryType::new(vec![1.0], 0.7, RewardDistribution::uniform(0.5, 2.0).unwrap()),
            ],
            vec![0.5],
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn point_mass_path() {
        let spec = InstanceSpec::new(
            vec![QueryType::new(vec![1.0], 1.0, RewardDistribution::point_mass(0.7).unwrap())],
            vec![1.0],
            3,
        )
        .unwrap();
        let path = sample_path(&spec, 9, 0).unwrap();
        assert_eq!(path.rewards(), &[0.7, 0.7, 0.7]);
        assert_eq!(path.types(), &[0, 0, 0]);
    }

    #[test]
    fn deterministic_and_replication_dependent() {
        let spec = two_type(200);
        let a = sample_path(&spec, 42, 3).unwrap();
        let b = sample_path(&spec, 42, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_path(&spec, 42, 4).unwrap());
        assert_ne!(a, sample_path(&spec, 43, 3).unwrap());
    }

    #[test]
    fn random_access_matches_sequential_draws() {
        let spec = two_type(50);
        let path = sample_path(&spec, 7, 11).unwrap();
        for t in [0usize, 1, 17, 49] {
            let (ut, ur) = period_uniforms(7, 11, t);
            let j = if ut < 0.3 { 0 } else { 1 };
            assert_eq!(path.type_at(t), j);
            assert_eq!(path.reward(t), spec.types[j].reward.quantile(ur).unwrap());
        }
    }

    #[test]
    fn type_frequency_concentrates() {
        let t = 10_000;
        let spec = two_type(t);
        let path = sample_path(&spec, 2024, 0).unwrap();
        let freq = path.suffix_counts(0)[0] as f64 / t as f64;
        let band = 3.0 * (0.3f64 * 0.7 / t as f64).sqrt();
        assert!((freq - 0.3).abs() <= band, "frequency {freq}");
    }

    #[test]
    fn suffix_counts_recursion() {
        let spec = two_type(300);
        let path = sample_path(&spec, 1, 1).unwrap();
        let total: u32 = path.suffix_counts(0).iter().sum();
        assert_eq!(total as usize, 300);
        assert!(path.suffix_counts(300).iter().all(|&c| c == 0));
        for t in 0..300 {
            for j in 0..2 {
                let here = path.suffix_counts(t)[j];
                let next = path.suffix_counts(t + 1)[j];
                assert_eq!(here, next + u32::from(path.type_at(t) == j));
            }
        }
        let tail = path.suffix(100);
        assert_eq!(tail.len(), 200);
        assert_eq!(tail.suffix_counts(0), path.suffix_counts(100));
    }

    #[test]
    fn invalid_spec_is_a_config_error() {
        let mut spec = two_type(10);
        spec.types[0].probability = 0.31;
        assert!(matches!(
            sample_path(&spec, 0, 0),
            Err(crate::Error::Config(_))
        ));
    }
}
