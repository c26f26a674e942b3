//! Radial grids, the discrete radial Laplacian, banded LU and a damped Newton driver.

mod banded;
mod grid;
mod interp;
mod newton;
mod ops;

pub use banded::{BandedLu, BandedMatrix};
pub use grid::{build_grid, build_grid_with_breaks, GridFunction, RadialGrid, RefinementZone};
pub use interp::{eval_local, eval_on, fornberg, interp_and_derivatives, window5};
pub use newton::{
    jacobian_mismatch, newton_polished, newton_solve, residual_measure, NewtonOptions, NewtonReport, NonlinearSystem, ResidualReference,
};
pub use ops::{radial_laplacian, Bc, RadialLaplacian, Stencil};
