//! One-period (myopic) loss of the boundary-attracted fluid policy.
//!
//! At state `(c, s)` with realized counts `d̃` of the next `s` arrivals, the
//! myopic loss is
//!
//! `V(c, d̃) − r·x − V(c − a·x, d̃ − e_j)`,
//!
//! with `V` the semi-fluid value and `(r, j)` the current query. Given `d̃`,
//! the current type is `j` with probability `d̃_j/s` and `r ~ F_j`, so the
//! expectation over the current query is computed exactly; only `d̃` is
//! sampled.

use rayon::prelude::*;

use super::{check_replications, mean_and_stderr, mix_seed};
use crate::error::{Error, Result};
use crate::model::{sample_queries, InstanceSpec, RewardLaw};
use crate::policies::{log2_thresholds, CAPACITY_TOL};
use crate::solvers::solve_semifluid;

#[derive(Debug, Clone, PartialEq)]
pub struct MyopicRow {
    pub s: usize,
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
}

/// Expected myopic loss at capacities `c` given counts `d` (summing to `s`),
/// for the thresholds `thresholds`.
pub fn myopic_loss(spec: &InstanceSpec, c: &[f64], counts: &[f64], thresholds: &[f64]) -> Result<f64> {
    let s: f64 = counts.iter().sum();
    if s <= 0.0 {
        return Err(Error::Domain("myopic loss needs at least one remaining query".into()));
    }
    let now = solve_semifluid(spec, counts, c)?.objective;
    let mut loss = 0.0;
    for (j, ty) in spec.types.iter().enumerate() {
        if counts[j] <= 0.0 {
            continue;
        }
        let mut rest = counts.to_vec();
        rest[j] -= 1.0;
        let fits = ty.consumption.iter().zip(c).all(|(a, c)| c + CAPACITY_TOL >= *a);
        let accept = if fits { ty.reward.prob_at_least(thresholds[j]) } else { 0.0 };
        let reject_value = solve_semifluid(spec, &rest, c)?.objective;
        let mut term = now - (1.0 - accept) * reject_value;
        if accept > 0.0 {
            let reduced: Vec<f64> = c
                .iter()
                .zip(&ty.consumption)
                .map(|(c, a)| (c - a).max(0.0))
                .collect();
            term -= ty.reward.top_mean(accept)? + accept * solve_semifluid(spec, &rest, &reduced)?.objective;
        }
        loss += counts[j] / s * term;
    }
    Ok(loss)
}

/// Myopic loss along the fluid trajectory `c = ρ·s` for each `s` in the grid.
pub fn myopic_decay_experiment(
    spec: &InstanceSpec,
    kappa1: f64,
    s_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<Vec<MyopicRow>> {
    check_replications(replications)?;
    spec.validate()?;
    let mut grid = s_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut rows = Vec::with_capacity(grid.len());
    for &s in &grid {
        if s == 0 {
            return Err(Error::Config("myopic experiment needs s ≥ 1".into()));
        }
        let c: Vec<f64> = spec.capacity_ratio.iter().map(|r| r * s as f64).collect();
        let thresholds = log2_thresholds(spec, &c, s, kappa1);
        let cell_seed = mix_seed(seed, s as u64);
        let losses: Vec<f64> = (0..replications as u64)
            .into_par_iter()
            .map(|k| {
                let path = sample_queries(spec, cell_seed, k, s)?;
                let counts: Vec<f64> = path.suffix_counts(0).iter().map(|&d| f64::from(d)).collect();
                myopic_loss(spec, &c, &counts, &thresholds)
            })
            .collect::<Result<_>>()?;
        let (mean, stderr) = mean_and_stderr(&losses);
        rows.push(MyopicRow {
            s,
            mean,
            stderr,
            replications,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_half_has_closed_form_loss() {
        // V(c, s) = s·top_mean(c/s) for one uniform type; the loss is 1/(8(s−1)).
        let spec = InstanceSpec::single_resource_uniform(0.5, 1).unwrap();
        for s in [250usize, 1000, 8000] {
            let c = [0.5 * s as f64];
            let loss = myopic_loss(&spec, &c, &[s as f64], &[0.5]).unwrap();
            let exact = 0.125 / (s as f64 - 1.0);
            assert!((loss - exact).abs() < 1e-9, "s={s}: {loss} vs {exact}");
        }
    }

    #[test]
    fn exhausted_capacity_costs_nothing() {
        let spec = InstanceSpec::degenerate_triangle(0.1, 1).unwrap();
        let thresholds = log2_thresholds(&spec, &[0.0; 3], 500, 1.0);
        let loss = myopic_loss(&spec, &[0.0; 3], &[70.0, 360.0, 70.0], &thresholds).unwrap();
        assert_eq!(loss, 0.0);
    }
}
