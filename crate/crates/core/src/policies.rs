//! Online accept/reject policies.
//!
//! Every policy follows the same template: before period `t` it estimates a
//! reward threshold `M̂_j` for each query type and accepts the arriving query
//! `(r, j)` iff `r ≥ M̂_j` and the remaining capacity covers `a_j`. Policies
//! differ only in the estimator:
//!
//! - `log2_fluid` re-solves the fluid relaxation and snaps acceptance
//!   fractions within `θ(s) = 3κ₁√(ln s / s)` of 0 or 1 to always-reject or
//!   always-accept;
//! - `resolve_plain` is the same without snapping (`θ ≡ 0`);
//! - `log_dual` prices capacity with the population dual over the remaining
//!   `s − 1` periods;
//! - `static_bidprice` solves the fluid dual once at the start;
//! - `greedy` accepts whatever fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DualDomain, InstanceSpec, QueryType, RewardLaw, SamplePath};
use crate::solvers::{DualOptions, PopulationDual, ThresholdSolver};

/// Slack allowed when comparing remaining capacity with consumption.
pub const CAPACITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Log2Fluid,
    LogDual,
    StaticBidprice,
    ResolvePlain,
    Greedy,
}

impl PolicyKind {
    pub fn id(self) -> &'static str {
        match self {
            PolicyKind::Log2Fluid => "log2_fluid",
            PolicyKind::LogDual => "log_dual",
            PolicyKind::StaticBidprice => "static_bidprice",
            PolicyKind::ResolvePlain => "resolve_plain",
            PolicyKind::Greedy => "greedy",
        }
    }
}

fn default_kappa1() -> f64 {
    1.0
}

/// Estimator selection and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: PolicyKind,
    /// Boundary constant of `log2_fluid`.
    #[serde(default = "default_kappa1")]
    pub kappa1: f64,
    /// Periods between re-solves. Defaults to every period, except for
    /// `static_bidprice`, which never re-solves unless this is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolve_every: Option<usize>,
}

impl EstimatorConfig {
    pub fn new(kind: PolicyKind) -> Self {
        EstimatorConfig {
            kind,
            kappa1: default_kappa1(),
            resolve_every: None,
        }
    }

    pub fn with_kappa1(mut self, kappa1: f64) -> Self {
        self.kappa1 = kappa1;
        self
    }

    pub fn with_resolve_every(mut self, every: usize) -> Self {
        self.resolve_every = Some(every);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa1.is_finite() && self.kappa1 > 0.0) {
            return Err(Error::Config(format!("kappa1 must be positive, got {}", self.kappa1)));
        }
        if self.resolve_every == Some(0) {
            return Err(Error::Config("resolve_every must be at least 1".into()));
        }
        Ok(())
    }

    fn period_gap(&self) -> usize {
        match (self.resolve_every, self.kind) {
            (Some(k), _) => k,
            (None, PolicyKind::StaticBidprice) => usize::MAX,
            (None, _) => 1,
        }
    }
}

/// `θ(s) = 3κ₁√(ln s / s)`, or `1/2` when `s ≤ 2`.
pub fn boundary_width(periods_left: usize, kappa1: f64) -> f64 {
    if periods_left <= 2 {
        return 0.5;
    }
    let s = periods_left as f64;
    3.0 * kappa1 * (s.ln() / s).sqrt()
}

/// Threshold implementing acceptance fraction `q` with boundary width `θ`.
pub fn quantile_threshold(ty: &QueryType, q: f64, theta: f64) -> f64 {
    let (lower, upper) = ty.reward.support();
    if q >= 1.0 - theta {
        lower
    } else if q <= theta {
        upper
    } else {
        ty.reward.quantile(1.0 - q).unwrap_or(upper)
    }
}

fn fluid_thresholds(solver: &mut ThresholdSolver, spec: &InstanceSpec, c: &[f64], s: usize, theta: f64) -> Result<Vec<f64>> {
    let weights: Vec<f64> = spec.types.iter().map(|t| t.probability * s as f64).collect();
    let sol = solver.solve(&weights, c)?;
    Ok(spec
        .types
        .iter()
        .zip(&sol.quantiles)
        .map(|(ty, &q)| quantile_threshold(ty, q, theta))
        .collect())
}

fn dual_prices(spec: &InstanceSpec, domain: &DualDomain, c: &[f64], s: usize, warm: Option<&[f64]>) -> Result<Vec<f64>> {
    let scale = s.saturating_sub(1).max(1) as f64;
    let kappa: Vec<f64> = c.iter().map(|v| v / scale).collect();
    let weights: Vec<f64> = spec.types.iter().map(|t| t.probability).collect();
    let min = PopulationDual {
        types: &spec.types,
        weights: &weights,
        kappa: &kappa,
        domain,
    }
    .minimize(warm, &DualOptions::default())?;
    Ok(min.mu)
}

/// Boundary-attracted fluid thresholds of all types with `s` periods left.
/// Falls back to the always-reject thresholds `u_j` if the solver fails.
pub fn log2_thresholds(spec: &InstanceSpec, c: &[f64], periods_left: usize, kappa1: f64) -> Vec<f64> {
    let mut solver = ThresholdSolver::for_spec(spec);
    let theta = boundary_width(periods_left, kappa1);
    fluid_thresholds(&mut solver, spec, c, periods_left, theta)
        .unwrap_or_else(|_| spec.types.iter().map(|t| t.reward.support().1).collect())
}

/// Boundary-attracted fluid threshold for type `j` with `s` periods left.
pub fn estimate_log2(spec: &InstanceSpec, c: &[f64], periods_left: usize, j: usize, kappa1: f64) -> f64 {
    log2_thresholds(spec, c, periods_left, kappa1)[j]
}

/// Dual bid price `a_jᵀμ̂` for type `j` with `s` periods left.
/// Falls back to the always-reject threshold `u_j` if the solver fails.
pub fn estimate_log(spec: &InstanceSpec, c: &[f64], periods_left: usize, j: usize) -> f64 {
    match dual_prices(spec, &DualDomain::for_spec(spec), c, periods_left, None) {
        Ok(mu) => spec.types[j].price(&mu),
        Err(_) => spec.types[j].reward.support().1,
    }
}

/// One step of a decision trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// 1-based period.
    pub period: usize,
    pub query_type: usize,
    pub reward: f64,
    /// `None` when the query did not fit and no threshold was needed.
    pub threshold: Option<f64>,
    pub accept: bool,
    /// Remaining capacity before the decision.
    pub capacity: Vec<f64>,
}

/// A policy bound to one instance, holding the state of one run.
#[derive(Debug, Clone)]
pub struct Policy {
    config: EstimatorConfig,
    spec: InstanceSpec,
    solver: ThresholdSolver,
    domain: DualDomain,
    capacity: Vec<f64>,
    period: usize,
    thresholds: Vec<f64>,
    solved_at: Option<usize>,
    warm: Option<Vec<f64>>,
    solver_failures: usize,
}

impl Policy {
    pub fn new(config: EstimatorConfig, spec: &InstanceSpec) -> Result<Self> {
        config.validate()?;
        spec.validate()?;
        Ok(Policy {
            solver: ThresholdSolver::for_spec(spec),
            domain: DualDomain::for_spec(spec),
            capacity: spec.capacities(),
            thresholds: vec![0.0; spec.type_count()],
            spec: spec.clone(),
            config,
            period: 0,
            solved_at: None,
            warm: None,
            solver_failures: 0,
        })
    }

    /// Restores the initial state.
    pub fn reset(&mut self) {
        self.capacity = self.spec.capacities();
        self.period = 0;
        self.solved_at = None;
        self.warm = None;
        self.solver_failures = 0;
    }

    pub fn capacity(&self) -> &[f64] {
        &self.capacity
    }

    /// Number of queries decided so far.
    pub fn period(&self) -> usize {
        self.period
    }

    pub fn solver_failures(&self) -> usize {
        self.solver_failures
    }

    fn periods_left(&self) -> usize {
        self.spec.horizon.saturating_sub(self.period).max(1)
    }

    fn refresh(&mut self) {
        let s = self.periods_left();
        let result = match self.config.kind {
            PolicyKind::Greedy => Ok(vec![f64::NEG_INFINITY; self.spec.type_count()]),
            PolicyKind::Log2Fluid | PolicyKind::ResolvePlain => {
                let theta = if self.config.kind == PolicyKind::Log2Fluid {
                    boundary_width(s, self.config.kappa1)
                } else {
                    0.0
                };
                fluid_thresholds(&mut self.solver, &self.spec, &self.capacity, s, theta)
            }
            PolicyKind::LogDual => dual_prices(&self.spec, &self.domain, &self.capacity, s, self.warm.as_deref())
                .map(|mu| {
                    let m = self.spec.types.iter().map(|t| t.price(&mu)).collect();
                    self.warm = Some(mu);
                    m
                }),
            PolicyKind::StaticBidprice => {
                let weights: Vec<f64> = self.spec.types.iter().map(|t| t.probability * s as f64).collect();
                self.solver
                    .solve(&weights, &self.capacity)
                    .map(|sol| self.spec.types.iter().map(|t| t.price(&sol.dual)).collect())
            }
        };
        self.thresholds = result.unwrap_or_else(|_| {
            self.solver_failures += 1;
            self.spec.types.iter().map(|t| t.reward.support().1).collect()
        });
        self.solved_at = Some(self.period);
    }

    /// `M̂_j` at the current state.
    pub fn threshold(&mut self, j: usize) -> f64 {
        let stale = match self.solved_at {
            None => true,
            Some(at) => self.period - at >= self.config.period_gap(),
        };
        if stale {
            self.refresh();
        }
        self.thresholds[j]
    }

    fn fits(&self, j: usize) -> bool {
        self.spec.types[j]
            .consumption
            .iter()
            .zip(&self.capacity)
            .all(|(a, c)| c + CAPACITY_TOL >= *a)
    }

    /// Decides query `(reward, j)` and advances the state. Returns the
    /// threshold used (if the query fit) and the decision.
    pub fn decide(&mut self, reward: f64, j: usize) -> (Option<f64>, bool) {
        let (threshold, accept) = if self.fits(j) {
            let m = self.threshold(j);
            (Some(m), reward >= m)
        } else {
            (None, false)
        };
        if accept {
            for (c, a) in self.capacity.iter_mut().zip(&self.spec.types[j].consumption) {
                *c = (*c - a).max(0.0);
            }
        }
        self.period += 1;
        (threshold, accept)
    }
}

/// Outcome of running a policy along one sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub reward: f64,
    /// Empty unless requested.
    pub trace: Vec<TraceEntry>,
    pub solver_failures: usize,
}

fn simulate(config: &EstimatorConfig, spec: &InstanceSpec, path: &SamplePath, record: bool) -> Result<PolicyRun> {
    let mut policy = Policy::new(config.clone(), spec)?;
    let mut reward = 0.0;
    let mut trace = Vec::with_capacity(if record { path.len() } else { 0 });
    for t in 0..path.len() {
        let (r, j) = (path.reward(t), path.type_at(t));
        let before = if record { policy.capacity.clone() } else { Vec::new() };
        let (threshold, accept) = policy.decide(r, j);
        if accept {
            reward += r;
        }
        if record {
            trace.push(TraceEntry {
                period: t + 1,
                query_type: j,
                reward: r,
                threshold,
                accept,
                capacity: before,
            });
        }
    }
    Ok(PolicyRun {
        reward,
        trace,
        solver_failures: policy.solver_failures,
    })
}

/// Runs a fresh policy along `path` and records every decision.
pub fn run_policy(config: &EstimatorConfig, spec: &InstanceSpec, path: &SamplePath) -> Result<PolicyRun> {
    simulate(config, spec, path, true)
}

/// As [`run_policy`] without the trace.
pub fn policy_reward(config: &EstimatorConfig, spec: &InstanceSpec, path: &SamplePath) -> Result<PolicyRun> {
    simulate(config, spec, path, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack() -> (InstanceSpec, SamplePath) {
        let spec = InstanceSpec::single_resource_uniform(2.0 / 3.0, 3).unwrap();
        let path = SamplePath::from_arrivals(vec![0.9, 0.2, 0.7], vec![0, 0, 0], 1);
        (spec, path)
    }

    #[test]
    fn boundary_width_values() {
        let theta = boundary_width(10_000, 1.0);
        assert!((theta - 3.0 * (10_000f64.ln() / 10_000.0).sqrt()).abs() < 1e-15);
        assert!((theta - 0.0910).abs() < 1e-4);
        assert_eq!(boundary_width(2, 1.0), 0.5);
        assert_eq!(boundary_width(1, 7.0), 0.5);
    }

    #[test]
    fn log2_estimates() {
        let spec = InstanceSpec::single_resource_uniform(0.5, 10_000).unwrap();
        assert!((estimate_log2(&spec, &[5_000.0], 10_000, 0, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(estimate_log2(&spec, &[9_990.0], 10_000, 0, 1.0), 0.0);
        assert_eq!(estimate_log2(&spec, &[0.0], 10_000, 0, 1.0), 1.0);
    }

    #[test]
    fn log_estimates() {
        let spec = InstanceSpec::single_resource_uniform(0.5, 100).unwrap();
        assert!((estimate_log(&spec, &[49.5], 100, 0) - 0.5).abs() < 1e-12);
        assert_eq!(estimate_log(&spec, &[99.0], 100, 0), 0.0);

        let tri = InstanceSpec::degenerate_triangle(0.1, 1000).unwrap();
        let c = tri.capacities();
        // The dual scales capacity by the 999 periods after the first.
        let c: Vec<f64> = c.iter().map(|v| v * 999.0 / 1000.0).collect();
        assert!((estimate_log(&tri, &c, 1000, 1) - 0.9).abs() < 1e-9);
    }

    #[test]
    fn decision_rule() {
        let (spec, _) = knapsack();
        let mut policy = Policy::new(EstimatorConfig::new(PolicyKind::ResolvePlain), &spec).unwrap();
        policy.thresholds = vec![0.5];
        policy.solved_at = Some(0);
        policy.config.resolve_every = Some(usize::MAX);
        assert_eq!(policy.decide(0.7, 0), (Some(0.5), true));
        policy.capacity = vec![0.0];
        assert_eq!(policy.decide(0.7, 0), (None, false));
        policy.capacity = vec![1.0];
        policy.thresholds = vec![1.0];
        assert_eq!(policy.decide(0.999, 0), (Some(1.0), false));
    }

    #[test]
    fn greedy_and_static_runs() {
        let (spec, path) = knapsack();
        let greedy = run_policy(&EstimatorConfig::new(PolicyKind::Greedy), &spec, &path).unwrap();
        assert!((greedy.reward - 1.1).abs() < 1e-15);
        assert_eq!(
            greedy.trace.iter().map(|e| e.accept).collect::<Vec<_>>(),
            vec![true, true, false]
        );
        let fixed = run_policy(&EstimatorConfig::new(PolicyKind::StaticBidprice), &spec, &path).unwrap();
        assert!((fixed.reward - 1.6).abs() < 1e-15);
        let thresholds: Vec<_> = fixed.trace.iter().map(|e| e.threshold.unwrap()).collect();
        assert!(thresholds.iter().all(|&m| (m - 1.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn invalid_config_rejected() {
        let spec = InstanceSpec::single_resource_uniform(0.5, 10).unwrap();
        let bad = EstimatorConfig::new(PolicyKind::Log2Fluid).with_kappa1(0.0);
        assert!(matches!(Policy::new(bad, &spec), Err(Error::Config(_))));
        let bad = EstimatorConfig::new(PolicyKind::LogDual).with_resolve_every(0);
        assert!(Policy::new(bad, &spec).is_err());
    }
}
