//! One ladder point end to end: matching, gluing, remainder and overlap reports,
//! then Newton and the linear probe. Points are independent, so callers may run
//! [`ConstructedPoint::build`] and [`ConstructedPoint::solve`] in parallel and
//! hand the outcomes to [`complete_ladder`], which repairs cold Newton failures
//! by continuation from the next smaller converged `g`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, ApproximateSolution, AssemblyOptions, OverlapReport, RemainderReport};
use crate::construction::Construction;
use crate::error::{Error, Result};
use crate::matching::{ExpansionReport, MatchingParameters};
use crate::solver::{linear_probe, newton_continued, newton_full, GPSolution, ProbeReport, ProbeSpec, SolverOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LadderOptions {
    pub assembly: AssemblyOptions,
    pub solver: SolverOptions,
    pub probe: ProbeSpec,
}

/// Everything before the Newton solve.
#[derive(Clone, Debug)]
pub struct ConstructedPoint {
    pub g: f64,
    pub params: MatchingParameters,
    pub expansion: ExpansionReport,
    pub ap: ApproximateSolution,
    pub remainder: RemainderReport,
    pub overlap: OverlapReport,
    pub build_seconds: f64,
}

/// A cold Newton attempt and its wall time.
#[derive(Debug)]
pub struct ColdSolve {
    pub result: Result<GPSolution>,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct LadderPoint {
    pub constructed: ConstructedPoint,
    pub solution: GPSolution,
    pub probe: ProbeReport,
    pub solve_seconds: f64,
    pub probe_seconds: f64,
}

impl ConstructedPoint {
    /// Matching and gluing at `g`; every preflight gate fails here.
    pub fn build(c: &Construction, g: f64, opts: &LadderOptions) -> Result<Self> {
        let clock = Instant::now();
        let params = c.match_at(g)?;
        let expansion = c.expansion_check(&params)?;
        let ap = assemble(c, &params, &opts.assembly)?;
        let remainder = ap.compute_remainder();
        let overlap = ap.overlap();
        Ok(Self { g, params, expansion, ap, remainder, overlap, build_seconds: clock.elapsed().as_secs_f64() })
    }

    /// Newton from the glued seed.
    pub fn solve(&self, c: &Construction, opts: &LadderOptions) -> ColdSolve {
        let clock = Instant::now();
        let result = newton_full(c, &self.ap, &opts.solver);
        ColdSolve { result, seconds: clock.elapsed().as_secs_f64() }
    }

    pub fn finish(self, solution: GPSolution, solve_seconds: f64, opts: &LadderOptions) -> Result<LadderPoint> {
        solution.check_positive()?;
        let clock = Instant::now();
        let probe = linear_probe(&self.ap, &opts.probe)?;
        Ok(LadderPoint { constructed: self, solution, probe, solve_seconds, probe_seconds: clock.elapsed().as_secs_f64() })
    }
}

/// Cold Newton is retried by continuation only when it failed to converge;
/// every other error (a gate, a singular pivot) is final.
fn retryable(e: &Error) -> bool {
    matches!(e, Error::NoConvergence { .. })
}

/// Assemble a ladder from cold solves (in ascending `g`). A point whose cold
/// Newton diverged is re-solved by continuation from its predecessor.
pub fn complete_ladder(c: &Construction, points: Vec<(ConstructedPoint, ColdSolve)>, opts: &LadderOptions) -> Result<Vec<LadderPoint>> {
    if points.windows(2).any(|w| w[1].0.g <= w[0].0.g) {
        return Err(Error::InvalidInput("ladder g values must be strictly increasing".into()));
    }
    let mut out: Vec<LadderPoint> = Vec::with_capacity(points.len());
    for (cp, cold) in points {
        let mut seconds = cold.seconds;
        let sol = match cold.result {
            Ok(s) => s,
            Err(e) if retryable(&e) => match out.last() {
                Some(prev) => {
                    let clock = Instant::now();
                    let s = newton_continued(c, &cp.ap, &prev.solution, &opts.solver)?;
                    seconds += clock.elapsed().as_secs_f64();
                    s
                }
                None => return Err(e),
            },
            Err(e) => return Err(e),
        };
        out.push(cp.finish(sol, seconds, opts)?);
    }
    Ok(out)
}

/// Sequential convenience driver.
pub fn run_ladder(c: &Construction, gs: &[f64], opts: &LadderOptions) -> Result<Vec<LadderPoint>> {
    let mut pts = Vec::with_capacity(gs.len());
    for &g in gs {
        let cp = ConstructedPoint::build(c, g, opts)?;
        let sol = cp.solve(c, opts);
        pts.push((cp, sol));
    }
    complete_ladder(c, pts, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::fixture::cubic;

    #[test]
    fn ladder_order_is_enforced() {
        let c = cubic();
        let opts = LadderOptions::default();
        let a = ConstructedPoint::build(c, 1e5, &opts).unwrap();
        let b = ConstructedPoint::build(c, 1e4, &opts).unwrap();
        let fail = |m: &str| ColdSolve { result: Err(Error::Gate(m.into())), seconds: 0.0 };
        let pts = vec![(a, fail("x")), (b, fail("y"))];
        assert!(matches!(complete_ladder(c, pts, &opts), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn diverged_point_is_recovered_by_continuation() {
        let c = cubic();
        let opts = LadderOptions::default();
        let lo = ConstructedPoint::build(c, 1e4, &opts).unwrap();
        let hi = ConstructedPoint::build(c, 1e5, &opts).unwrap();
        let cold_lo = lo.solve(c, &opts);
        let direct = hi.solve(c, &opts).result.unwrap();
        let fake = ColdSolve { result: Err(Error::NoConvergence { report: direct.report.clone() }), seconds: 0.0 };
        let pts = complete_ladder(c, vec![(lo, cold_lo), (hi, fake)], &opts).unwrap();
        let rec = &pts[1].solution;
        assert!(rec.continued);
        let gap = rec.u.values().iter().zip(direct.u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-8 * direct.u.sup_norm(), "{gap}");
        // a gate is never retried
        let lo = ConstructedPoint::build(c, 1e4, &opts).unwrap();
        let gate = ColdSolve { result: Err(Error::Gate("positivity".into())), seconds: 0.0 };
        assert!(matches!(complete_ladder(c, vec![(lo, gate)], &opts), Err(Error::Gate(_))));
    }
}
