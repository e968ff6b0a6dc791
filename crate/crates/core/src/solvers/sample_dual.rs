//! Dual functions of the hindsight relaxation and of its population limit.
//!
//! With `s − 1` queries still to come and capacities `c`, both duals read
//! `L(μ) = (c/(s−1))ᵀμ + avg[(r − aᵀμ)⁺]`, the average taken either under
//! the arrival law (population mode) or over a realized suffix (sample mode).
//! The sample dual is piecewise linear and its minimizers are exactly the
//! optimal prices of the hindsight LP, so sample mode solves that LP: a sort
//! for one resource, the grouped simplex otherwise.

use super::grouped_lp::{solve_grouped_lp, ItemGroup};
use super::population::{DualMinimum, DualOptions, PopulationDual};
use crate::error::{Error, Result};
use crate::model::{DualDomain, InstanceSpec, SamplePath};

/// Which average defines the dual.
#[derive(Debug, Clone, Copy)]
pub enum DualMode<'a> {
    Population,
    /// The realized suffix; its length plays the role of `s − 1`.
    Sample(&'a SamplePath),
}

/// `L(μ)` of the sample dual over `path` at capacities `c`.
pub fn sample_dual_value(spec: &InstanceSpec, path: &SamplePath, c: &[f64], mu: &[f64]) -> f64 {
    let len = path.len().max(1) as f64;
    let prices: Vec<f64> = spec.types.iter().map(|t| t.price(mu)).collect();
    let excess: f64 = path
        .rewards()
        .iter()
        .zip(path.types())
        .map(|(r, &j)| (r - prices[j]).max(0.0))
        .sum();
    let linear: f64 = c.iter().zip(mu).map(|(c, m)| c * m).sum();
    (linear + excess) / len
}

/// Groups the periods of `path` by query type for the grouped simplex.
///
/// Returns the groups (rewards sorted in decreasing order) and, for each
/// group, the periods in that same order.
pub fn hindsight_groups(spec: &InstanceSpec, path: &SamplePath) -> (Vec<ItemGroup>, Vec<Vec<usize>>) {
    let n = spec.type_count();
    let mut periods: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, &j) in path.types().iter().enumerate() {
        periods[j].push(t);
    }
    let rewards = path.rewards();
    for list in &mut periods {
        list.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]).then(a.cmp(&b)));
    }
    let groups = spec
        .types
        .iter()
        .zip(&periods)
        .map(|(ty, list)| ItemGroup {
            column: ty.consumption.clone(),
            rewards: list.iter().map(|&t| rewards[t]).collect(),
        })
        .collect();
    (groups, periods)
}

/// Hindsight LP for one resource by sorting on reward per unit consumed.
/// Returns `(value, smallest optimal price)`.
fn single_resource_lp(spec: &InstanceSpec, path: &SamplePath, capacity: f64) -> (f64, f64) {
    let mut value = 0.0;
    let mut items: Vec<(f64, f64, f64)> = Vec::with_capacity(path.len());
    for (&r, &j) in path.rewards().iter().zip(path.types()) {
        let a = spec.types[j].consumption[0];
        if a == 0.0 {
            value += r.max(0.0);
        } else if r > 0.0 {
            items.push((r / a, r, a));
        }
    }
    items.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut used = 0.0;
    for &(ratio, r, a) in &items {
        if used + a > capacity {
            value += r * ((capacity - used) / a).max(0.0);
            return (value, ratio);
        }
        used += a;
        value += r;
    }
    (value, 0.0)
}

/// Minimizes the population or sample dual over the dual domain of `spec`.
///
/// Population mode uses `s − 1` periods, floored at one. Sample mode expects
/// `s − 1` to equal the suffix length; its residual is the duality gap against
/// the hindsight LP, per query.
pub fn minimize_dual(
    spec: &InstanceSpec,
    c: &[f64],
    periods_left: usize,
    mode: DualMode<'_>,
) -> Result<DualMinimum> {
    let m = spec.resources();
    if c.len() != m {
        return Err(Error::Domain(format!("expected {m} capacities, got {}", c.len())));
    }
    if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain("capacities must be finite and nonnegative".into()));
    }
    let domain = DualDomain::for_spec(spec);
    match mode {
        DualMode::Population => {
            let scale = periods_left.saturating_sub(1).max(1) as f64;
            let kappa: Vec<f64> = c.iter().map(|v| v / scale).collect();
            let weights: Vec<f64> = spec.types.iter().map(|t| t.probability).collect();
            PopulationDual {
                types: &spec.types,
                weights: &weights,
                kappa: &kappa,
                domain: &domain,
            }
            .minimize(None, &DualOptions::default())
        }
        DualMode::Sample(path) => {
            if periods_left != path.len() + 1 {
                return Err(Error::Domain(format!(
                    "sample dual with {periods_left} periods left needs {} queries, got {}",
                    periods_left.saturating_sub(1),
                    path.len()
                )));
            }
            if path.is_empty() {
                return Ok(DualMinimum {
                    mu: vec![0.0; m],
                    value: 0.0,
                    residual: 0.0,
                    iterations: 0,
                });
            }
            let (lp_value, mut mu, iterations) = if m == 1 {
                let (v, mu) = single_resource_lp(spec, path, c[0]);
                (v, vec![mu], path.len())
            } else {
                let (groups, _) = hindsight_groups(spec, path);
                let sol = solve_grouped_lp(&groups, c)?;
                (sol.value, sol.duals, sol.iterations)
            };
            domain.project(&mut mu);
            let value = sample_dual_value(spec, path, c, &mu);
            let residual = (value - lp_value / path.len() as f64).abs();
            Ok(DualMinimum {
                mu,
                value,
                residual,
                iterations,
            })
        }
    }
}
