//! The blow-up layer: profile `(U, V)`, the linearised solver and the inner corrections.

mod growth;
mod inner;
mod profile;

pub use growth::{check_decay, solve_linearized_growth, GrowthOperator, GrowthSolution, FIT_WINDOW};
pub use inner::{compute_phi0, smoothstep, z_profile, Curvature, Gauge, InnerCorrections, LayerPoint, PeeledPiece, Phi1Params, Piece};
pub use profile::{nodal_derivative, solve_profile, BlowupProfile, LineGrid, MIN_NODES, MIN_T};
