//! Instances, reward laws and reproducible sample paths.

pub mod distribution;
pub mod instance;
pub mod path;

pub use distribution::{RewardDistribution, RewardLaw};
pub use instance::{DualDomain, InstanceSpec, QueryType};
pub use path::{sample_path, sample_queries, period_uniforms, SamplePath};
