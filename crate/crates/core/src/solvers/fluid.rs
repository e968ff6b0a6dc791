//! Fluid and semi-fluid relaxations solved through their duals.
//!
//! Both programs have the form
//!
//! `max Σ_j w_j·top_mean_j(q_j)  s.t.  Σ_j w_j a_{j,i} q_j ≤ c_i,  q ∈ [0,1]ⁿ`
//!
//! with `w_j = p_j·s` (fluid) or `w_j = d_j` (semi-fluid). An optimal
//! acceptance fraction is a reward threshold: `q_j = P(r_j > a_jᵀμ*)` for an
//! optimal price vector `μ*`. When `a_jᵀμ*` coincides with a point mass the
//! threshold leaves `q_j` undetermined; those tied types share the remaining
//! capacity through a small LP.

use super::population::{DualMinimum, DualOptions, PopulationDual};
use super::simplex::{solve_bounded_lp, BoundedLp};
use crate::error::{Error, Result};
use crate::model::{DualDomain, InstanceSpec, QueryType, RewardLaw};

/// Optimal acceptance fractions with their prices and a KKT certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    pub quantiles: Vec<f64>,
    pub dual: Vec<f64>,
    /// Largest violation among primal feasibility, complementary slackness,
    /// dual stationarity and tie consistency, in per-unit-weight terms.
    pub kkt_residual: f64,
    pub objective: f64,
}

/// Reusable solver for one family of query types. Keeps the previous prices
/// as a warm start; confine an instance to one thread.
#[derive(Debug, Clone)]
pub struct ThresholdSolver {
    types: Vec<QueryType>,
    domain: DualDomain,
    options: DualOptions,
    warm: Option<Vec<f64>>,
}

impl ThresholdSolver {
    pub fn new(types: Vec<QueryType>, domain: DualDomain) -> Self {
        ThresholdSolver {
            types,
            domain,
            options: DualOptions::default(),
            warm: None,
        }
    }

    pub fn for_spec(spec: &InstanceSpec) -> Self {
        Self::new(spec.types.clone(), DualDomain::for_spec(spec))
    }

    pub fn types(&self) -> &[QueryType] {
        &self.types
    }

    pub fn domain(&self) -> &DualDomain {
        &self.domain
    }

    /// Starting prices for the next solve.
    pub fn set_warm_start(&mut self, mu: Vec<f64>) {
        self.warm = Some(mu);
    }

    /// Solves the program with type weights `weights` and capacities `capacity`.
    pub fn solve(&mut self, weights: &[f64], capacity: &[f64]) -> Result<FluidSolution> {
        let n = self.types.len();
        let m = self.domain.upper.len();
        if weights.len() != n || capacity.len() != m {
            return Err(Error::Internal("weight or capacity length mismatch".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain("type weights must be finite and nonnegative".into()));
        }
        if capacity.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Domain("capacities must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Ok(FluidSolution {
                quantiles: vec![0.0; n],
                dual: vec![0.0; m],
                kkt_residual: 0.0,
                objective: 0.0,
            });
        }
        let mix: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let kappa: Vec<f64> = capacity.iter().map(|c| c / total).collect();
        let dual = PopulationDual {
            types: &self.types,
            weights: &mix,
            kappa: &kappa,
            domain: &self.domain,
        };
        let min = dual.minimize(self.warm.as_deref(), &self.options)?;
        self.warm = Some(min.mu.clone());
        recover_primal(&self.types, &mix, &kappa, &min, total)
    }
}

/// Tolerance for declaring `a_jᵀμ` equal to a point-mass reward; covers the
/// final smoothing width of the dual minimizer.
fn tie_tol(types: &[QueryType]) -> f64 {
    let u_max = types.iter().map(|t| t.reward.support().1).fold(0.0, f64::max);
    2e-7 * u_max.max(1.0)
}

fn recover_primal(
    types: &[QueryType],
    mix: &[f64],
    kappa: &[f64],
    min: &DualMinimum,
    total: f64,
) -> Result<FluidSolution> {
    let n = types.len();
    let m = kappa.len();
    let tol = tie_tol(types);
    let mu = &min.mu;
    let mut q = vec![0.0; n];
    let mut tied = Vec::new();
    for (j, ty) in types.iter().enumerate() {
        if mix[j] <= 0.0 {
            continue;
        }
        if ty.consumes_nothing() {
            q[j] = 1.0;
            continue;
        }
        let theta = ty.price(mu);
        if ty.reward.is_point_mass() {
            let v = ty.reward.support().0;
            if v > theta + tol {
                q[j] = 1.0;
            } else if v >= theta - tol {
                tied.push(j);
            }
        } else {
            q[j] = ty.reward.prob_above(theta);
        }
    }

    // Per-unit-weight usage of the untied types.
    let mut used = vec![0.0; m];
    for j in 0..n {
        if q[j] > 0.0 {
            for i in 0..m {
                used[i] += mix[j] * types[j].consumption[i] * q[j];
            }
        }
    }
    if !tied.is_empty() {
        let lp = BoundedLp {
            objective: tied
                .iter()
                .map(|&j| mix[j] * types[j].reward.support().0)
                .collect(),
            rows: (0..m)
                .map(|i| tied.iter().map(|&j| mix[j] * types[j].consumption[i]).collect())
                .collect(),
            rhs: (0..m).map(|i| (kappa[i] - used[i]).max(0.0)).collect(),
            upper: vec![1.0; tied.len()],
        };
        let sol = solve_bounded_lp(&lp)?;
        for (k, &j) in tied.iter().enumerate() {
            q[j] = sol.x[k];
            for i in 0..m {
                used[i] += mix[j] * types[j].consumption[i] * q[j];
            }
        }
    }

    let mut residual = min.residual;
    for i in 0..m {
        residual = residual.max(used[i] - kappa[i]);
        residual = residual.max(mu[i] * (kappa[i] - used[i]).abs());
    }
    for &j in &tied {
        if q[j] > 0.0 && q[j] < 1.0 {
            residual = residual.max((types[j].price(mu) - types[j].reward.support().0).abs());
        }
    }
    let mut objective = 0.0;
    for j in 0..n {
        if mix[j] > 0.0 && q[j] > 0.0 {
            objective += mix[j] * total * types[j].reward.top_mean(q[j])?;
        }
    }
    Ok(FluidSolution {
        quantiles: q,
        dual: mu.clone(),
        kkt_residual: residual.max(0.0),
        objective,
    })
}

/// Fluid relaxation with `s` periods remaining and capacities `c`.
pub fn solve_fluid(spec: &InstanceSpec, capacity: &[f64], periods_left: usize) -> Result<FluidSolution> {
    if periods_left == 0 {
        return Err(Error::Domain("fluid relaxation needs at least one period".into()));
    }
    let weights: Vec<f64> = spec
        .types
        .iter()
        .map(|t| t.probability * periods_left as f64)
        .collect();
    ThresholdSolver::for_spec(spec).solve(&weights, capacity)
}

/// Semi-fluid relaxation with realized type counts `d` and capacities `c`.
pub fn solve_semifluid(spec: &InstanceSpec, counts: &[f64], capacity: &[f64]) -> Result<FluidSolution> {
    if counts.len() != spec.type_count() {
        return Err(Error::Domain("one count per query type is required".into()));
    }
    ThresholdSolver::for_spec(spec).solve(counts, capacity)
}
