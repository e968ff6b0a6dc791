//! Convergence of sample duals to the population dual.
//!
//! For each `s`, the population dual `μ̂` at capacities `c = ρ·(s−1)` is
//! compared with the sample dual `μ̃` of `s − 1` i.i.d. queries at the same
//! capacities; the squared bid-price gap `(a_jᵀ(μ̃ − μ̂))²` is averaged over
//! replications.

use rayon::prelude::*;

use super::{check_replications, mean_and_stderr, mix_seed};
use crate::error::{Error, Result};
use crate::model::{sample_queries, InstanceSpec};
use crate::solvers::{minimize_dual, DualMode};

#[derive(Debug, Clone, PartialEq)]
pub struct DualConvRow {
    pub s: usize,
    /// Gap averaged over types with weights `p_j`.
    pub mean: f64,
    pub stderr: f64,
    pub per_type_mean: Vec<f64>,
    pub per_type_stderr: Vec<f64>,
    pub replications: usize,
    pub population_dual: Vec<f64>,
}

pub fn dual_convergence_experiment(
    spec: &InstanceSpec,
    capacity_ratio: &[f64],
    s_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<Vec<DualConvRow>> {
    check_replications(replications)?;
    spec.validate()?;
    if capacity_ratio.len() != spec.resources() {
        return Err(Error::Config("one capacity ratio per resource is required".into()));
    }
    let mut grid = s_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let n = spec.type_count();
    let mut rows = Vec::with_capacity(grid.len());
    for &s in &grid {
        if s < 2 {
            return Err(Error::Config(format!("dual convergence needs s ≥ 2, got {s}")));
        }
        let c: Vec<f64> = capacity_ratio.iter().map(|r| r * (s - 1) as f64).collect();
        let mu_hat = minimize_dual(spec, &c, s, DualMode::Population)?.mu;
        let cell_seed = mix_seed(seed, s as u64);
        let gaps: Vec<Vec<f64>> = (0..replications as u64)
            .into_par_iter()
            .map(|k| {
                let path = sample_queries(spec, cell_seed, k, s - 1)?;
                let mu = minimize_dual(spec, &c, s, DualMode::Sample(&path))?.mu;
                let diff: Vec<f64> = mu.iter().zip(&mu_hat).map(|(a, b)| a - b).collect();
                Ok(spec.types.iter().map(|t| t.price(&diff).powi(2)).collect())
            })
            .collect::<Result<_>>()?;
        let weighted: Vec<f64> = gaps
            .iter()
            .map(|g| g.iter().zip(&spec.types).map(|(v, t)| v * t.probability).sum())
            .collect();
        let (mean, stderr) = mean_and_stderr(&weighted);
        let (per_type_mean, per_type_stderr) = (0..n)
            .map(|j| mean_and_stderr(&gaps.iter().map(|g| g[j]).collect::<Vec<_>>()))
            .unzip();
        rows.push(DualConvRow {
            s,
            mean,
            stderr,
            per_type_mean,
            per_type_stderr,
            replications,
            population_dual: mu_hat,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_dual_is_half_for_uniform() {
        let spec = InstanceSpec::single_resource_uniform(0.5, 1).unwrap();
        let rows = dual_convergence_experiment(&spec, &[0.5], &[11, 101, 1001], 20, 3).unwrap();
        for row in &rows {
            assert!((row.population_dual[0] - 0.5).abs() < 1e-12);
            assert!(row.mean >= 0.0);
        }
        assert!(dual_convergence_experiment(&spec, &[0.5], &[1], 20, 3).is_err());
    }
}
