//! Solvers for the fluid, semi-fluid and hindsight programs and their duals.

pub mod fluid;
pub mod grouped_lp;
pub mod linalg;
pub mod population;
pub mod sample_dual;
pub mod simplex;

pub use fluid::{solve_fluid, solve_semifluid, FluidSolution, ThresholdSolver};
pub use grouped_lp::{solve_grouped_lp, GroupedSolution, ItemGroup};
pub use population::{DualMinimum, DualOptions, PopulationDual};
pub use sample_dual::{hindsight_groups, minimize_dual, sample_dual_value, DualMode};
pub use simplex::{solve_bounded_lp, BoundedLp, LpSolution};
