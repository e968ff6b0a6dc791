//! Run configuration: JSON schema, validation and conversion to core types.

use serde::{Deserialize, Serialize};

use nrm_core::model::{InstanceSpec, QueryType, RewardDistribution, RewardLaw};
use nrm_core::policies::{EstimatorConfig, PolicyKind};

use crate::error::CliError;

/// Probabilities within this distance of summing to one are renormalized.
pub const PROBABILITY_SUM_TOL: f64 = 1e-9;

pub const DEFAULT_REPLICATIONS: usize = 1000;
pub const DEFAULT_DUALCONV_REPLICATIONS: usize = 500;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub instance: InstanceConfig,
    pub experiment: ExperimentConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory.
    #[serde(default = "default_output")]
    pub output: String,
    /// Worker threads; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_output() -> String {
    "results".into()
}

/// Either a preset (`preset`, `epsilon`) or an explicit instance
/// (`resources`, `capacity_ratios`, `types`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_ratios: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<Vec<TypeConfig>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Example2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeConfig {
    pub a: Vec<f64>,
    pub p: f64,
    pub reward: RewardConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    Uniform,
    TruncatedLinear,
    PointMass,
}

/// Reward law on `[l, u]`. `density_lower` is the density at `l` for the
/// truncated-linear kind; `alpha`/`beta`, when given, are declared density
/// bounds checked against the law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub kind: RewardKind,
    pub l: f64,
    pub u: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    /// Column value in `results.csv`; defaults to the kind name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kind: PolicyKind,
    #[serde(default = "default_kappa1")]
    pub kappa1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolve_every: Option<usize>,
}

impl PolicyConfig {
    pub fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.kind.id().to_string())
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            kind: self.kind,
            kappa1: self.kappa1,
            resolve_every: self.resolve_every,
        }
    }
}

/// Selected by the `kind` field.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentConfig {
    /// Regret of each policy at one horizon.
    Simulate {
        policies: Vec<PolicyConfig>,
        horizon: usize,
        #[serde(default = "default_replications")]
        replications: usize,
    },
    /// Regret over a horizon grid with power-law fits.
    Sweep {
        policies: Vec<PolicyConfig>,
        horizons: Vec<usize>,
        #[serde(default = "default_replications")]
        replications: usize,
    },
    /// Mean squared gap between sample and population duals.
    Dualconv {
        s_grid: Vec<usize>,
        #[serde(default = "default_dualconv_replications")]
        replications: usize,
    },
    /// One-period loss of the boundary-attracted fluid policy.
    Myopic {
        s_grid: Vec<usize>,
        #[serde(default = "default_replications")]
        replications: usize,
        #[serde(default = "default_kappa1")]
        kappa1: f64,
    },
    /// Fluid relaxation at capacities `ρ·s` with `s` periods left.
    Solve { periods_left: usize },
}

// Serde buffers internally tagged enums, which hides the location of errors
// inside them. The experiment is therefore read through this externally
// tagged mirror, with `kind` moved into the tag.
#[derive(Deserialize)]
#[serde(remote = "ExperimentConfig", rename_all = "snake_case", deny_unknown_fields)]
enum ExperimentDef {
    Simulate {
        policies: Vec<PolicyConfig>,
        horizon: usize,
        #[serde(default = "default_replications")]
        replications: usize,
    },
    Sweep {
        policies: Vec<PolicyConfig>,
        horizons: Vec<usize>,
        #[serde(default = "default_replications")]
        replications: usize,
    },
    Dualconv {
        s_grid: Vec<usize>,
        #[serde(default = "default_dualconv_replications")]
        replications: usize,
    },
    Myopic {
        s_grid: Vec<usize>,
        #[serde(default = "default_replications")]
        replications: usize,
        #[serde(default = "default_kappa1")]
        kappa1: f64,
    },
    Solve {
        periods_left: usize,
    },
}

#[derive(Deserialize)]
struct Tagged(#[serde(with = "ExperimentDef")] ExperimentConfig);

/// Prefix of error messages that carry a path relative to the field being
/// deserialized; [`parse_config`] joins it to the outer path.
const NESTED_PATH: char = '\u{1f}';

impl<'de> Deserialize<'de> for ExperimentConfig {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        use serde_json::Value;

        let mut body = serde_json::Map::deserialize(deserializer)?;
        let kind = match body.remove("kind") {
            Some(Value::String(kind)) => kind,
            Some(other) => return Err(D::Error::custom(format!("{NESTED_PATH}kind: expected a string, got {other}"))),
            None => return Err(D::Error::missing_field("kind")),
        };
        let mut tagged = serde_json::Map::new();
        tagged.insert(kind.clone(), Value::Object(body));
        serde_path_to_error::deserialize::<_, Tagged>(Value::Object(tagged))
            .map(|t| t.0)
            .map_err(|e| {
                let path = e.path().to_string();
                let inner = e.into_inner();
                let rest = path.strip_prefix(kind.as_str()).unwrap_or("");
                match rest.strip_prefix('.') {
                    Some(rel) => D::Error::custom(format!("{NESTED_PATH}{rel}: {inner}")),
                    None if rest.is_empty() && path != "." => D::Error::custom(inner),
                    None => D::Error::custom(format!("{NESTED_PATH}kind: {inner}")),
                }
            })
    }
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_dualconv_replications() -> usize {
    DEFAULT_DUALCONV_REPLICATIONS
}

fn default_kappa1() -> f64 {
    1.0
}

impl ExperimentConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Simulate { .. } => "simulate",
            ExperimentConfig::Sweep { .. } => "sweep",
            ExperimentConfig::Dualconv { .. } => "dualconv",
            ExperimentConfig::Myopic { .. } => "myopic",
            ExperimentConfig::Solve { .. } => "solve",
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.into_inner().to_string();
        match msg.strip_prefix(NESTED_PATH) {
            Some(rest) => CliError::Config(format!("{path}.{rest}")),
            None => CliError::Config(format!("{path}: {msg}")),
        }
    })?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    /// Checks everything not expressed by the schema itself.
    pub fn validate(&self) -> Result<(), CliError> {
        self.instance.to_spec(1)?;
        let bad = |path: &str, msg: String| Err(CliError::Config(format!("experiment.{path}: {msg}")));
        match &self.experiment {
            ExperimentConfig::Simulate {
                policies,
                horizon,
                replications,
            } => {
                check_policies(policies)?;
                if *horizon == 0 {
                    return bad("horizon", "must be at least 1".into());
                }
                check_reps(*replications)?;
            }
            ExperimentConfig::Sweep {
                policies,
                horizons,
                replications,
            } => {
                check_policies(policies)?;
                if horizons.is_empty() || horizons.contains(&0) {
                    return bad("horizons", "must be a nonempty list of positive horizons".into());
                }
                check_reps(*replications)?;
            }
            ExperimentConfig::Dualconv { s_grid, replications } => {
                if s_grid.is_empty() || s_grid.iter().any(|&s| s < 2) {
                    return bad("s_grid", "must be a nonempty list of values ≥ 2".into());
                }
                check_reps(*replications)?;
            }
            ExperimentConfig::Myopic {
                s_grid,
                replications,
                kappa1,
            } => {
                if s_grid.is_empty() || s_grid.contains(&0) {
                    return bad("s_grid", "must be a nonempty list of positive values".into());
                }
                check_reps(*replications)?;
                if !(kappa1.is_finite() && *kappa1 > 0.0) {
                    return bad("kappa1", format!("must be positive, got {kappa1}"));
                }
            }
            ExperimentConfig::Solve { periods_left } => {
                if *periods_left == 0 {
                    return bad("periods_left", "must be at least 1".into());
                }
            }
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers: must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_reps(reps: usize) -> Result<(), CliError> {
    if reps < 2 {
        return Err(CliError::Config(format!(
            "experiment.replications: at least 2 are required, got {reps}"
        )));
    }
    Ok(())
}

fn check_policies(policies: &[PolicyConfig]) -> Result<(), CliError> {
    if policies.is_empty() {
        return Err(CliError::Config("experiment.policies: at least one policy is required".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for (k, p) in policies.iter().enumerate() {
        p.estimator()
            .validate()
            .map_err(|e| CliError::Config(format!("experiment.policies[{k}]: {e}")))?;
        if !seen.insert(p.label()) {
            return Err(CliError::Config(format!(
                "experiment.policies[{k}]: duplicate policy id {:?}",
                p.label()
            )));
        }
    }
    Ok(())
}

impl InstanceConfig {
    pub fn example2(epsilon: f64) -> Self {
        InstanceConfig {
            preset: Some(Preset::Example2),
            epsilon: Some(epsilon),
            ..Default::default()
        }
    }

    /// Builds the instance with horizon `horizon`.
    pub fn to_spec(&self, horizon: usize) -> Result<InstanceSpec, CliError> {
        let err = |path: &str, msg: String| CliError::Config(format!("instance.{path}: {msg}"));
        match self.preset {
            Some(Preset::Example2) => {
                for (key, present) in [
                    ("resources", self.resources.is_some()),
                    ("capacity_ratios", self.capacity_ratios.is_some()),
                    ("types", self.types.is_some()),
                ] {
                    if present {
                        return Err(err(key, "not allowed together with a preset".into()));
                    }
                }
                let eps = self.epsilon.ok_or_else(|| err("epsilon", "required by preset example2".into()))?;
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(err("epsilon", format!("must lie in (0, 1), got {eps}")));
                }
                InstanceSpec::degenerate_triangle(eps, horizon).map_err(|e| err("epsilon", e.to_string()))
            }
            None => {
                if self.epsilon.is_some() {
                    return Err(err("epsilon", "only valid with a preset".into()));
                }
                let missing = |key: &str| err(key, "missing field".into());
                ExplicitInstance {
                    resources: self.resources.ok_or_else(|| missing("resources"))?,
                    capacity_ratios: self.capacity_ratios.clone().ok_or_else(|| missing("capacity_ratios"))?,
                    types: self.types.clone().ok_or_else(|| missing("types"))?,
                }
                .to_spec(horizon)
            }
        }
    }
}

struct ExplicitInstance {
    resources: usize,
    capacity_ratios: Vec<f64>,
    types: Vec<TypeConfig>,
}

impl ExplicitInstance {
    fn to_spec(&self, horizon: usize) -> Result<InstanceSpec, CliError> {
        let err = |path: String, msg: String| CliError::Config(format!("instance.{path}: {msg}"));
        if self.resources == 0 {
            return Err(err("resources".into(), "must be at least 1".into()));
        }
        if self.capacity_ratios.len() != self.resources {
            return Err(err(
                "capacity_ratios".into(),
                format!("expected {} entries, got {}", self.resources, self.capacity_ratios.len()),
            ));
        }
        if self.types.is_empty() {
            return Err(err("types".into(), "at least one type is required".into()));
        }
        let total: f64 = self.types.iter().map(|t| t.p).sum();
        if !((total - 1.0).abs() <= PROBABILITY_SUM_TOL) {
            return Err(err("types[].p".into(), format!("probabilities sum to {total}, expected 1")));
        }
        let mut types = Vec::with_capacity(self.types.len());
        for (j, ty) in self.types.iter().enumerate() {
            if ty.a.len() != self.resources {
                return Err(err(
                    format!("types[{j}].a"),
                    format!("expected {} entries, got {}", self.resources, ty.a.len()),
                ));
            }
            if !(ty.p > 0.0 && ty.p <= 1.0) {
                return Err(err(format!("types[{j}].p"), format!("must lie in (0, 1], got {}", ty.p)));
            }
            let reward = ty
                .reward
                .to_distribution()
                .map_err(|msg| err(format!("types[{j}].reward"), msg))?;
            types.push(QueryType::new(ty.a.clone(), ty.p / total, reward));
        }
        InstanceSpec::new(types, self.capacity_ratios.clone(), horizon)
            .map_err(|e| CliError::Config(format!("instance: {e}")))
    }
}

impl RewardConfig {
    fn to_distribution(&self) -> Result<RewardDistribution, String> {
        let law = match self.kind {
            RewardKind::Uniform => RewardDistribution::uniform(self.l, self.u),
            RewardKind::TruncatedLinear => {
                let f0 = self
                    .density_lower
                    .ok_or("truncated_linear requires density_lower")?;
                RewardDistribution::truncated_linear(self.l, self.u, f0)
            }
            RewardKind::PointMass => {
                if self.l != self.u {
                    return Err(format!("point_mass requires l = u, got {} and {}", self.l, self.u));
                }
                RewardDistribution::point_mass(self.l)
            }
        }
        .map_err(|e| e.to_string())?;
        if self.kind != RewardKind::TruncatedLinear && self.density_lower.is_some() {
            return Err("density_lower applies only to truncated_linear".into());
        }
        let tol = 1e-9;
        if let Some(alpha) = self.alpha {
            if alpha > law.density_floor() * (1.0 + tol) + tol {
                return Err(format!(
                    "alpha {alpha} exceeds the density lower bound {} of the law",
                    law.density_floor()
                ));
            }
        }
        if let Some(beta) = self.beta {
            if beta < law.density_ceiling() * (1.0 - tol) - tol {
                return Err(format!(
                    "beta {beta} is below the density upper bound {} of the law",
                    law.density_ceiling()
                ));
            }
        }
        Ok(law)
    }
}
