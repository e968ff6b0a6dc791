//! Monte-Carlo experiments.
//!
//! Replications run in parallel on the current rayon pool; their results are
//! collected in replication order and folded sequentially, so every table is
//! bit-identical regardless of the number of workers.

pub mod dualconv;
pub mod fit;
pub mod myopic;
pub mod regret;

pub use dualconv::{dual_convergence_experiment, DualConvRow};
pub use fit::{fit_growth, fit_power_law, GrowthFit};
pub use myopic::{myopic_decay_experiment, myopic_loss, MyopicRow};
pub use regret::{estimate_regret, regret_cell, PolicyEntry, RegretRow, RegretTable};

use crate::error::{Error, Result};

/// Derives an independent seed for experiment cell `tag` (SplitMix64 finalizer).
pub fn mix_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sample mean and its standard error `sd/√n`.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn check_replications(reps: usize) -> Result<()> {
    if reps < 2 {
        return Err(Error::Config(format!("at least 2 replications are required, got {reps}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_of_known_sample() {
        let (m, se) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn seeds_differ_by_tag() {
        assert_ne!(mix_seed(1, 1000), mix_seed(1, 2000));
        assert_ne!(mix_seed(1, 1000), mix_seed(2, 1000));
        assert_eq!(mix_seed(7, 9), mix_seed(7, 9));
    }
}
