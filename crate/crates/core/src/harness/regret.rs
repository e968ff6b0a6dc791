//! Regret against the hindsight benchmarks.
//!
//! Each replication draws one path (common to all policies), solves the
//! hindsight LP once at the initial capacities and, when tractable, the
//! integral hindsight problem, then runs every policy along the path.

use rayon::prelude::*;

use super::{check_replications, mean_and_stderr, mix_seed};
use crate::error::{Error, Result};
use crate::model::{sample_path, InstanceSpec};
use crate::offline::{offline_integer, offline_lp_only, EXHAUSTIVE_MAX_PERIODS};
use crate::policies::{policy_reward, EstimatorConfig};

/// A named policy configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEntry {
    pub id: String,
    pub config: EstimatorConfig,
}

impl PolicyEntry {
    pub fn new(id: impl Into<String>, config: EstimatorConfig) -> Self {
        PolicyEntry {
            id: id.into(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretRow {
    pub policy: String,
    pub horizon: usize,
    /// Mean of `V̄^Off − V^π` over replications.
    pub mean: f64,
    pub stderr: f64,
    pub replications: usize,
    /// Mean and standard error of `V^off − V^π` when the integral optimum is tractable.
    pub vs_integer: Option<(f64, f64)>,
    /// Mean hindsight LP value.
    pub benchmark: f64,
    /// Solver failures summed over replications.
    pub solver_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTable {
    /// Ordered by policy (as configured), then by horizon.
    pub rows: Vec<RegretRow>,
}

impl RegretTable {
    pub fn rows_for<'a>(&'a self, policy: &'a str) -> impl Iterator<Item = &'a RegretRow> + 'a {
        self.rows.iter().filter(move |r| r.policy == policy)
    }
}

struct Replication {
    lp: f64,
    integer: Option<f64>,
    rewards: Vec<f64>,
    failures: Vec<usize>,
}

fn integer_tractable(spec: &InstanceSpec) -> bool {
    spec.is_single_resource_unit_demand() || spec.horizon <= EXHAUSTIVE_MAX_PERIODS
}

fn replicate(spec: &InstanceSpec, policies: &[PolicyEntry], seed: u64, rep: u64) -> Result<Replication> {
    let path = sample_path(spec, seed, rep)?;
    let capacity = spec.capacities();
    let lp = offline_lp_only(spec, &path, &capacity)?.lp_value;
    let integer = if integer_tractable(spec) {
        Some(offline_integer(spec, &path, &capacity)?)
    } else {
        None
    };
    let mut rewards = Vec::with_capacity(policies.len());
    let mut failures = Vec::with_capacity(policies.len());
    for entry in policies {
        let run = policy_reward(&entry.config, spec, &path)?;
        if run.reward > lp + 1e-9 * lp.abs().max(1.0) {
            return Err(Error::Internal(format!(
                "policy {} collected {} above the hindsight LP value {lp}",
                entry.id, run.reward
            )));
        }
        rewards.push(run.reward);
        failures.push(run.solver_failures);
    }
    Ok(Replication {
        lp,
        integer,
        rewards,
        failures,
    })
}

/// Regret rows of every policy at one horizon, in policy order.
pub fn regret_cell(
    spec: &InstanceSpec,
    policies: &[PolicyEntry],
    horizon: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<RegretRow>> {
    check_replications(replications)?;
    for entry in policies {
        entry.config.validate()?;
    }
    let spec = spec.with_horizon(horizon);
    spec.validate()?;
    let cell_seed = mix_seed(seed, horizon as u64);
    let reps: Vec<Replication> = (0..replications as u64)
        .into_par_iter()
        .map(|k| {
            replicate(&spec, policies, cell_seed, k).map_err(|e| match e {
                Error::Internal(msg) => Error::Internal(format!("T={horizon}, replication {k}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let lp: Vec<f64> = reps.iter().map(|r| r.lp).collect();
    let benchmark = mean_and_stderr(&lp).0;
    let rows = policies
        .iter()
        .enumerate()
        .map(|(p, entry)| {
            let regret: Vec<f64> = reps.iter().map(|r| r.lp - r.rewards[p]).collect();
            let (mean, stderr) = mean_and_stderr(&regret);
            let vs_integer = reps
                .iter()
                .map(|r| r.integer.map(|v| v - r.rewards[p]))
                .collect::<Option<Vec<f64>>>()
                .map(|v| mean_and_stderr(&v));
            RegretRow {
                policy: entry.id.clone(),
                horizon,
                mean,
                stderr,
                replications,
                vs_integer,
                benchmark,
                solver_failures: reps.iter().map(|r| r.failures[p]).sum(),
            }
        })
        .collect();
    Ok(rows)
}

/// Regret of every policy over the horizon grid.
pub fn estimate_regret(
    spec: &InstanceSpec,
    policies: &[PolicyEntry],
    horizons: &[usize],
    replications: usize,
    seed: u64,
) -> Result<RegretTable> {
    let mut grid = horizons.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut cells = Vec::with_capacity(grid.len());
    for &t in &grid {
        cells.push(regret_cell(spec, policies, t, replications, seed)?);
    }
    let mut rows = Vec::with_capacity(grid.len() * policies.len());
    for p in 0..policies.len() {
        for cell in &cells {
            rows.push(cell[p].clone());
        }
    }
    Ok(RegretTable { rows })
}
