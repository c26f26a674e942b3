//! Outer problems: the nodal limit profile, the outer family and its expansion.

mod family;
mod limit;
mod nondegen;
mod nonlinearity;
mod scalar;

pub use family::{compute_corrections, solve_outer_family, BoundaryData, OuterExpansion, OuterFamily, OuterGrids};
pub use limit::{shoot, shooting_oracle, solve_limit_problem, Domain, LimitForm, LimitGridSpec, LimitInit, NodalSolution};
pub use nondegen::{check_nondegeneracy, linearized_operator, sigma_min, NondegeneracyReport};
pub use nonlinearity::{LimitReaction, Nonlinearity};
pub use scalar::{solve_polished, tight, ScalarProblem};
