//! Segregated radial solutions of the two-component system
//!
//! ```text
//! −Δu + f(u) + g·u·v² = 0,   −Δv + h(v) + g·v·u² = 0
//! ```
//!
//! in the strong-coupling limit g → ∞, built by matching an outer nodal
//! profile to the universal blow-up layer, then polished by Newton.

// `!(x >= lo)` is the NaN-rejecting form of a bound check
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// banded and stencil loops index several arrays in step
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod blowup;
pub mod construction;
pub mod error;
pub mod fit;
pub mod ladder;
pub mod matching;
pub mod outer;
pub mod radial;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
