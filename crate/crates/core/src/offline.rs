//! Hindsight benchmarks on a realized sample path.
//!
//! `offline_lp` solves the fractional relaxation of the hindsight problem
//! `max Σ r_t x_t  s.t.  Σ a_t x_t ≤ c, x ∈ [0,1]` together with optimal
//! resource prices; `offline_integer` computes the integral hindsight optimum
//! where that is tractable.

use crate::error::{Error, Result};
use crate::model::{DualDomain, InstanceSpec, SamplePath};
use crate::solvers::{hindsight_groups, sample_dual_value, solve_grouped_lp};

/// Exhaustive search is limited to paths of at most this many periods.
pub const EXHAUSTIVE_MAX_PERIODS: usize = 20;

const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineResult {
    pub lp_value: f64,
    /// Fractional acceptance of each period.
    pub primal: Vec<f64>,
    /// Optimal resource prices `μ̃`.
    pub dual: Vec<f64>,
    /// Integral optimum when tractable.
    pub integer_value: Option<f64>,
    /// `|dual objective − lp_value|` at `dual`.
    pub duality_gap: f64,
}

fn check_capacity(spec: &InstanceSpec, c: &[f64]) -> Result<()> {
    if c.len() != spec.resources() {
        return Err(Error::Domain(format!(
            "expected {} capacities, got {}",
            spec.resources(),
            c.len()
        )));
    }
    if c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Domain("capacities must be finite and nonnegative".into()));
    }
    Ok(())
}

/// LP value, primal and dual of the hindsight relaxation over `path` at `c`.
pub fn offline_lp(spec: &InstanceSpec, path: &SamplePath, c: &[f64]) -> Result<OfflineResult> {
    let result = offline_lp_only(spec, path, c)?;
    let integer_value = match offline_integer(spec, path, c) {
        Ok(v) => Some(v),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(OfflineResult {
        integer_value,
        ..result
    })
}

/// As [`offline_lp`] without attempting the integral optimum.
pub fn offline_lp_only(spec: &InstanceSpec, path: &SamplePath, c: &[f64]) -> Result<OfflineResult> {
    check_capacity(spec, c)?;
    let (groups, periods) = hindsight_groups(spec, path);
    let sol = solve_grouped_lp(&groups, c)?;
    let mut primal = vec![0.0; path.len()];
    for (g, list) in periods.iter().enumerate() {
        for &t in &list[..sol.full[g]] {
            primal[t] = 1.0;
        }
        if sol.partial[g] > 0.0 {
            primal[list[sol.full[g]]] = sol.partial[g];
        }
    }

    let m = spec.resources();
    let mut used = vec![0.0; m];
    let mut lp_value = 0.0;
    for (t, &x) in primal.iter().enumerate() {
        if x > 0.0 {
            lp_value += path.reward(t) * x;
            for (u, a) in used.iter_mut().zip(&spec.types[path.type_at(t)].consumption) {
                *u += a * x;
            }
        }
    }
    for i in 0..m {
        if used[i] > c[i] + FEASIBILITY_TOL * c[i].max(1.0) {
            return Err(Error::Internal(format!(
                "hindsight primal uses {} of resource {i} with capacity {}",
                used[i], c[i]
            )));
        }
    }

    let mut dual = sol.duals;
    DualDomain::for_spec(spec).project(&mut dual);
    let scale = path.len().max(1) as f64;
    let duality_gap = (sample_dual_value(spec, path, c, &dual) * scale - lp_value).abs();
    Ok(OfflineResult {
        lp_value,
        primal,
        dual,
        integer_value: None,
        duality_gap,
    })
}

/// Integral hindsight optimum `V^off`.
///
/// Exact for single-resource unit-demand instances (top `⌊C⌋` rewards) and
/// by exhaustive search for paths of at most [`EXHAUSTIVE_MAX_PERIODS`]
/// periods; anything else is [`Error::Unsupported`].
pub fn offline_integer(spec: &InstanceSpec, path: &SamplePath, c: &[f64]) -> Result<f64> {
    check_capacity(spec, c)?;
    if spec.is_single_resource_unit_demand() {
        let k = (c[0] + FEASIBILITY_TOL).floor() as usize;
        let rewards = path.rewards();
        let mut order: Vec<usize> = (0..path.len()).filter(|&t| rewards[t] > 0.0).collect();
        order.sort_by(|&a, &b| rewards[b].total_cmp(&rewards[a]).then(a.cmp(&b)));
        order.truncate(k);
        order.sort_unstable();
        return Ok(order.iter().map(|&t| rewards[t]).sum());
    }
    if path.len() > EXHAUSTIVE_MAX_PERIODS {
        return Err(Error::Unsupported(format!(
            "integral optimum needs a single unit-demand resource or at most {EXHAUSTIVE_MAX_PERIODS} periods, got {}",
            path.len()
        )));
    }
    let columns: Vec<&[f64]> = path
        .types()
        .iter()
        .map(|&j| spec.types[j].consumption.as_slice())
        .collect();
    let mut best = 0.0;
    let mut remaining = c.to_vec();
    let mut chosen = Vec::with_capacity(path.len());
    search(path.rewards(), &columns, 0, &mut remaining, &mut chosen, &mut best);
    Ok(best)
}

fn search(
    rewards: &[f64],
    columns: &[&[f64]],
    t: usize,
    remaining: &mut [f64],
    chosen: &mut Vec<usize>,
    best: &mut f64,
) {
    if t == rewards.len() {
        let value: f64 = chosen.iter().map(|&k| rewards[k]).sum();
        if value > *best {
            *best = value;
        }
        return;
    }
    let fits = columns[t]
        .iter()
        .zip(remaining.iter())
        .all(|(a, c)| *a <= c + FEASIBILITY_TOL);
    if fits && rewards[t] > 0.0 {
        for (c, a) in remaining.iter_mut().zip(columns[t]) {
            *c -= a;
        }
        chosen.push(t);
        search(rewards, columns, t + 1, remaining, chosen, best);
        chosen.pop();
        for (c, a) in remaining.iter_mut().zip(columns[t]) {
            *c += a;
        }
    }
    search(rewards, columns, t + 1, remaining, chosen, best);
}

/// Bounds on the marginal value of the capacity `a` consumed by one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    /// `aᵀμ̃₁`, prices at capacity `c`.
    pub lower: f64,
    /// `V̄(c) − V̄(c − a)`.
    pub marginal: f64,
    /// `aᵀμ̃₂`, prices at capacity `c − a`.
    pub upper: f64,
}

/// Evaluates the dual sandwich `aᵀμ̃(c) ≤ V̄(c) − V̄(c−a) ≤ aᵀμ̃(c−a)`.
pub fn dual_sandwich_check(spec: &InstanceSpec, path: &SamplePath, c: &[f64], a: &[f64]) -> Result<Sandwich> {
    check_capacity(spec, c)?;
    if a.len() != c.len() || a.iter().zip(c).any(|(a, c)| !(*a >= 0.0) || a > c) {
        return Err(Error::Domain("consumption must satisfy 0 ≤ a ≤ c".into()));
    }
    let reduced: Vec<f64> = c.iter().zip(a).map(|(c, a)| (c - a).max(0.0)).collect();
    let at_c = offline_lp_only(spec, path, c)?;
    let at_reduced = offline_lp_only(spec, path, &reduced)?;
    let price = |mu: &[f64]| a.iter().zip(mu).map(|(a, m)| a * m).sum::<f64>();
    Ok(Sandwich {
        lower: price(&at_c.dual),
        marginal: at_c.lp_value - at_reduced.lp_value,
        upper: price(&at_reduced.dual),
    })
}
