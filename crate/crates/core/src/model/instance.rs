use serde::{Deserialize, Serialize};

use super::distribution::{RewardDistribution, RewardLaw};
use crate::error::{Error, Result};

/// Probabilities must sum to one within this tolerance.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// One query type: a consumption vector, an arrival probability and a reward law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryType {
    pub consumption: Vec<f64>,
    pub probability: f64,
    pub reward: RewardDistribution,
}

impl QueryType {
    pub fn new(consumption: Vec<f64>, probability: f64, reward: RewardDistribution) -> Self {
        QueryType {
            consumption,
            probability,
            reward,
        }
    }

    /// `a_jᵀμ`.
    pub fn price(&self, mu: &[f64]) -> f64 {
        self.consumption.iter().zip(mu).map(|(a, m)| a * m).sum()
    }

    pub fn consumes_nothing(&self) -> bool {
        self.consumption.iter().all(|&a| a == 0.0)
    }
}

/// A network revenue management instance with horizon `T` and capacities `C = ρ·T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub types: Vec<QueryType>,
    pub capacity_ratio: Vec<f64>,
    pub horizon: usize,
}

impl InstanceSpec {
    pub fn new(types: Vec<QueryType>, capacity_ratio: Vec<f64>, horizon: usize) -> Result<Self> {
        let spec = InstanceSpec {
            types,
            capacity_ratio,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn resources(&self) -> usize {
        self.capacity_ratio.len()
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    /// Initial capacities `C_i = ρ_i·T`.
    pub fn capacities(&self) -> Vec<f64> {
        self.capacity_ratio
            .iter()
            .map(|r| r * self.horizon as f64)
            .collect()
    }

    pub fn with_horizon(&self, horizon: usize) -> InstanceSpec {
        InstanceSpec {
            horizon,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.resources();
        if m == 0 {
            return Err(Error::Config("instance needs at least one resource".into()));
        }
        if self.types.is_empty() {
            return Err(Error::Config("instance needs at least one query type".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        for (i, r) in self.capacity_ratio.iter().enumerate() {
            if !(r.is_finite() && *r > 0.0) {
                return Err(Error::Config(format!(
                    "capacity ratio {i} must be positive and finite, got {r}"
                )));
            }
        }
        let mut total = 0.0;
        for (j, ty) in self.types.iter().enumerate() {
            if ty.consumption.len() != m {
                return Err(Error::Config(format!(
                    "type {j} consumption has length {}, expected {m}",
                    ty.consumption.len()
                )));
            }
            if ty.consumption.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(Error::Config(format!(
                    "type {j} consumption must be nonnegative and finite"
                )));
            }
            if !(ty.probability > 0.0 && ty.probability <= 1.0) {
                return Err(Error::Config(format!(
                    "type {j} probability must lie in (0, 1], got {}",
                    ty.probability
                )));
            }
            ty.reward
                .validate()
                .map_err(|e| Error::Config(format!("type {j} reward: {e}")))?;
            total += ty.probability;
        }
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::Config(format!(
                "type probabilities sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    /// True when there is one resource and every type consumes exactly one unit.
    pub fn is_single_resource_unit_demand(&self) -> bool {
        self.resources() == 1 && self.types.iter().all(|t| t.consumption[0] == 1.0)
    }

    pub fn max_reward(&self) -> f64 {
        self.types
            .iter()
            .map(|t| t.reward.support().1)
            .fold(0.0, f64::max)
    }

    /// Single resource, one type with unit demand and uniform(0, 1) rewards.
    pub fn single_resource_uniform(capacity_ratio: f64, horizon: usize) -> Result<Self> {
        InstanceSpec::new(
            vec![QueryType::new(
                vec![1.0],
                1.0,
                RewardDistribution::uniform(0.0, 1.0)?,
            )],
            vec![capacity_ratio],
            horizon,
        )
    }

    /// Three resources and three types whose fluid relaxation is degenerate:
    /// every constraint binds while one optimal price is zero.
    pub fn degenerate_triangle(epsilon: f64, horizon: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let denom = 1.0 + 5.0 * epsilon;
        let side = 2.0 * epsilon / denom;
        let centre = 1.0 - 2.0 * side;
        let ratio = 2.0 * epsilon * (1.0 + epsilon) / denom;
        let u01 = RewardDistribution::uniform(0.0, 1.0)?;
        InstanceSpec::new(
            vec![
                QueryType::new(vec![0.0, 1.0, 1.0], side, u01.clone()),
                QueryType::new(vec![1.0, 0.0, 1.0], centre, u01.clone()),
                QueryType::new(vec![1.0, 1.0, 0.0], side, u01),
            ],
            vec![ratio; 3],
            horizon,
        )
    }
}

/// Box `[0, γ]^m` in which dual prices are sought.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualDomain {
    pub upper: Vec<f64>,
}

impl DualDomain {
    /// `γ_i = 2·max_{j : a_{j,i} > 0} u_j / a_{j,i}`.
    pub fn for_types(types: &[QueryType], resources: usize) -> DualDomain {
        Self::scaled(types, resources, 2.0)
    }

    pub fn scaled(types: &[QueryType], resources: usize, factor: f64) -> DualDomain {
        let mut upper = vec![0.0f64; resources];
        for ty in types {
            let u = ty.reward.support().1;
            for (g, &a) in upper.iter_mut().zip(&ty.consumption) {
                if a > 0.0 {
                    *g = g.max(factor * u / a);
                }
            }
        }
        DualDomain { upper }
    }

    pub fn for_spec(spec: &InstanceSpec) -> DualDomain {
        Self::for_types(&spec.types, spec.resources())
    }

    pub fn project(&self, mu: &mut [f64]) {
        for (m, g) in mu.iter_mut().zip(&self.upper) {
            *m = m.clamp(0.0, *g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_sum_is_checked() {
        let u = RewardDistribution::uniform(0.0, 1.0).unwrap();
        let bad = InstanceSpec::new(
            vec![
                QueryType::new(vec![1.0], 0.5, u.clone()),
                QueryType::new(vec![1.0], 0.6, u),
            ],
            vec![0.5],
            10,
        );
        assert!(matches!(bad, Err(Error::Config(_))));
    }

    #[test]
    fn consumption_length_must_match() {
        let u = RewardDistribution::uniform(0.0, 1.0).unwrap();
        let bad = InstanceSpec::new(vec![QueryType::new(vec![1.0, 1.0], 1.0, u)], vec![0.5], 10);
        assert!(bad.is_err());
    }

    #[test]
    fn triangle_instance_data() {
        let spec = InstanceSpec::degenerate_triangle(0.1, 100).unwrap();
        let p: Vec<f64> = spec.types.iter().map(|t| t.probability).collect();
        assert!((p[0] - 0.2 / 1.5).abs() < 1e-15);
        assert!((p[1] - 1.1 / 1.5).abs() < 1e-15);
        assert!((spec.capacity_ratio[0] - 0.22 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn dual_domain_bounds_and_projection() {
        let spec = InstanceSpec::degenerate_triangle(0.1, 100).unwrap();
        let dom = DualDomain::for_spec(&spec);
        assert_eq!(dom.upper, vec![2.0; 3]);
        let mut mu = vec![-1.0, 0.5, 7.0];
        dom.project(&mut mu);
        assert_eq!(mu, vec![0.0, 0.5, 2.0]);
        let again = mu.clone();
        dom.project(&mut mu);
        assert_eq!(mu, again);
    }
}
