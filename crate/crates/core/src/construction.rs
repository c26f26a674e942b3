//! Everything the construction needs that does not depend on `g`: the nodal
//! limit profile, the outer expansion, the blow-up profile and its corrections.

use serde::{Deserialize, Serialize};

use crate::blowup::{solve_profile, BlowupProfile, InnerCorrections};
use crate::error::{Error, Result};
use crate::matching::{match_parameters, verify_s2_s3, ExpansionReport, MatchingInputs, MatchingParameters};
use crate::outer::{
    check_nondegeneracy, compute_corrections, solve_limit_problem, Domain, LimitForm, LimitGridSpec, LimitInit, NodalSolution, NondegeneracyReport,
    Nonlinearity, OuterExpansion, OuterGrids,
};
use crate::radial::RefinementZone;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionSpec {
    pub limit: LimitGridSpec,
    /// Outer-expansion grid: base count and a refinement zone at `r₀`.
    pub outer_base: usize,
    pub outer_zone_half_width: f64,
    pub outer_zone_spacing: f64,
    pub profile_t: f64,
    pub profile_nodes: usize,
}

impl Default for ConstructionSpec {
    fn default() -> Self {
        Self {
            limit: LimitGridSpec::default(),
            outer_base: 16000,
            outer_zone_half_width: 0.05,
            outer_zone_spacing: 1e-5,
            profile_t: 8.0,
            profile_nodes: 16001,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Construction {
    pub f: Nonlinearity,
    pub h: Nonlinearity,
    pub dim: usize,
    pub domain: Domain,
    pub limit: NodalSolution,
    pub outer: OuterExpansion,
    pub nondegeneracy: NondegeneracyReport,
    pub profile: BlowupProfile,
    pub inner: InnerCorrections,
}

impl Construction {
    /// Runs every g-independent stage; all preflight gates are enforced here.
    pub fn build(f: Nonlinearity, h: Nonlinearity, dim: usize, domain: Domain, init: &LimitInit, spec: &ConstructionSpec) -> Result<Self> {
        let limit = solve_limit_problem(f, h, dim, domain, init, &spec.limit, LimitForm::Split)?;
        let zone = RefinementZone::new(limit.r0, spec.outer_zone_half_width, spec.outer_zone_spacing);
        let grids = OuterGrids::around(&limit, spec.outer_base, Some(zone))?;
        let outer = compute_corrections(&limit, &grids)?;
        let nondegeneracy = check_nondegeneracy(&limit, &outer)?;
        let profile = solve_profile(limit.psi0, spec.profile_t, spec.profile_nodes)?;
        let inner = InnerCorrections::compute(&profile, limit.r0, dim)?;
        Ok(Self { f, h, dim, domain, limit, outer, nondegeneracy, profile, inner })
    }

    pub fn r0(&self) -> f64 {
        self.limit.r0
    }

    pub fn psi0(&self) -> f64 {
        self.limit.psi0
    }

    pub fn matching_inputs(&self, g: f64) -> Result<MatchingInputs> {
        MatchingInputs::new(&self.outer.data, self.psi0(), self.profile.k, self.inner.b0, self.r0(), self.dim, self.f.df(0.0), self.h.df(0.0), g)
    }

    pub fn match_at(&self, g: f64) -> Result<MatchingParameters> {
        let prm = match_parameters(&self.matching_inputs(g)?, &self.inner)?;
        if prm.mu() <= 0.0 {
            return Err(Error::Gate(format!("matching gives mu = {} at g = {g}: g is too small", prm.mu())));
        }
        Ok(prm)
    }

    pub fn expansion_check(&self, prm: &MatchingParameters) -> Result<ExpansionReport> {
        Ok(verify_s2_s3(&self.matching_inputs(prm.g)?, prm, &self.inner))
    }
}

#[cfg(test)]
pub(crate) mod fixture {
    use std::sync::OnceLock;

    use super::*;

    /// The default cubic ball construction, built once per test binary.
    pub fn cubic() -> &'static Construction {
        static C: OnceLock<Construction> = OnceLock::new();
        C.get_or_init(|| {
            let f = Nonlinearity::Power { lambda: 0.0, p: 1.0 };
            Construction::build(f, f, 3, Domain::Ball, &LimitInit::Bracket(-20.0, -50.0), &ConstructionSpec::default()).expect("default construction")
        })
    }
}
