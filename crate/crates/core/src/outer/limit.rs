use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{build_grid, eval_local, eval_on, Bc, GridFunction, NewtonReport, RefinementZone};

use super::nonlinearity::{LimitReaction, Nonlinearity};
use super::scalar::{solve_polished, ScalarProblem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Ball,
    Annulus { inner: f64 },
}

impl Domain {
    pub fn inner_radius(&self) -> f64 {
        match *self {
            Domain::Ball => 0.0,
            Domain::Annulus { inner } => inner,
        }
    }

    pub fn left_bc(&self) -> Bc {
        match self {
            Domain::Ball => Bc::Regularity,
            Domain::Annulus { .. } => Bc::Dirichlet(0.0),
        }
    }
}

/// How to find the one-node branch.
#[derive(Clone, Debug)]
pub enum LimitInit {
    /// Bracket on the shooting parameter: `w(0)` for the ball, `w'(a)` for an annulus.
    Bracket(f64, f64),
    /// Nodal initial guess for Newton.
    Guess(GridFunction),
}

/// Which form of the limit equation to discretise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitForm {
    /// `Δw = f(w⁺) − h(−w⁻)`
    Split,
    /// `Δw = f(w)`; only meaningful when `f = h` is odd.
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitGridSpec {
    pub base_count: usize,
    /// Half-width and spacing of the refinement zone placed at the interface.
    pub zone_half_width: f64,
    pub zone_spacing: f64,
}

impl Default for LimitGridSpec {
    fn default() -> Self {
        Self { base_count: 16000, zone_half_width: 0.05, zone_spacing: 2e-5 }
    }
}

#[derive(Clone, Debug)]
pub struct NodalSolution {
    pub w: GridFunction,
    pub r0: f64,
    pub psi0: f64,
    pub psi0_left: f64,
    pub psi0_right: f64,
    pub f: Nonlinearity,
    pub h: Nonlinearity,
    pub dim: usize,
    pub domain: Domain,
    pub report: NewtonReport,
}

impl NodalSolution {
    /// Relative gap between the one-sided interface slopes.
    pub fn slope_gap(&self) -> f64 {
        (self.psi0_left - self.psi0_right).abs() / self.psi0
    }

    pub fn reaction(&self) -> LimitReaction {
        LimitReaction { f: self.f, h: self.h }
    }

    /// `w` at any radius (local quartic).
    pub fn w_at(&self, r: f64) -> f64 {
        eval_local(self.w.nodes(), self.w.values(), r, 0)
    }
}

const SHOOT_STEPS: usize = 20000;

/// RK4 trajectory of `w'' = F(w) − (N−1)/r·w'` on `[a, 1]`; returns `(r, w, w')` samples.
pub fn shoot(react: &LimitReaction, dim: usize, domain: Domain, param: f64) -> Vec<(f64, f64, f64)> {
    let nm1 = dim as f64 - 1.0;
    let a = domain.inner_radius();
    let (mut r, mut y) = match domain {
        Domain::Ball => {
            // series start off the singular point
            let eps = 1e-6;
            let c = react.value(param) / (2.0 * dim as f64);
            (eps, [param + c * eps * eps, 2.0 * c * eps])
        }
        Domain::Annulus { .. } => (a, [0.0, param]),
    };
    let h = (1.0 - r) / SHOOT_STEPS as f64;
    let rhs = |r: f64, y: [f64; 2]| [y[1], react.value(y[0]) - nm1 / r * y[1]];
    let mut out = Vec::with_capacity(SHOOT_STEPS + 1);
    out.push((r, y[0], y[1]));
    for _ in 0..SHOOT_STEPS {
        let k1 = rhs(r, y);
        let k2 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        r += h;
        if !y[0].is_finite() {
            break;
        }
        out.push((r, y[0], y[1]));
    }
    out
}

fn sign_changes(traj: &[(f64, f64, f64)]) -> usize {
    traj.windows(2).skip(1).filter(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0) && w[1].1 != 0.0).count()
}

/// Bisection on the shooting parameter for `w(1) = 0`; returns the parameter and its trajectory.
pub fn shooting_oracle(react: &LimitReaction, dim: usize, domain: Domain, lo: f64, hi: f64) -> Result<(f64, Vec<(f64, f64, f64)>)> {
    let end = |p: f64| shoot(react, dim, domain, p).last().map(|s| s.1).unwrap_or(f64::NAN);
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (end(a), end(b));
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::Shooting(format!("no sign change of w(1) over bracket [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if end(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    let p = 0.5 * (a + b);
    let traj = shoot(react, dim, domain, p);
    match sign_changes(&traj) {
        0 => Err(Error::Shooting("bracket converged to a solution without sign change".into())),
        1 => Ok((p, traj)),
        k => Err(Error::Shooting(format!("bracket converged to a solution with {k} sign changes"))),
    }
}

fn hermite(traj: &[(f64, f64, f64)], r: f64) -> f64 {
    let i = traj.partition_point(|s| s.0 <= r).clamp(1, traj.len() - 1) - 1;
    let (r0, w0, d0) = traj[i];
    let (r1, w1, d1) = traj[i + 1];
    let h = r1 - r0;
    let t = ((r - r0) / h).clamp(-1.0, 2.0);
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * w0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * w1 + (t3 - t2) * h * d1
}

pub fn solve_limit_problem(
    f: Nonlinearity,
    h: Nonlinearity,
    dim: usize,
    domain: Domain,
    init: &LimitInit,
    spec: &LimitGridSpec,
    form: LimitForm,
) -> Result<NodalSolution> {
    if f.f(0.0) != 0.0 || h.f(0.0) != 0.0 {
        return Err(Error::InvalidInput("nonlinearities must vanish at 0".into()));
    }
    let react = LimitReaction { f, h };
    let a = domain.inner_radius();
    let (seed_r0, seed): (f64, Box<dyn Fn(f64) -> f64>) = match init {
        LimitInit::Bracket(lo, hi) => {
            let (_, traj) = shooting_oracle(&react, dim, domain, *lo, *hi)?;
            let k = traj.windows(2).skip(1).position(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0)).unwrap() + 1;
            let (ra, wa, _) = traj[k];
            let (rb, wb, _) = traj[k + 1];
            let r0 = ra - wa * (rb - ra) / (wb - wa);
            (r0, Box::new(move |r| hermite(&traj, r)))
        }
        LimitInit::Guess(g) => {
            let xs = g.nodes().to_vec();
            let ys = g.values().to_vec();
            let k =
                ys.windows(2).position(|w| (w[0] < 0.0) != (w[1] < 0.0)).ok_or_else(|| Error::Shooting("initial guess has no sign change".into()))?;
            let r0 = xs[k] - ys[k] * (xs[k + 1] - xs[k]) / (ys[k + 1] - ys[k]);
            (r0, Box::new(move |r| eval_local(&xs, &ys, r.clamp(xs[0], xs[xs.len() - 1]), 0)))
        }
    };
    let zone = RefinementZone::new(seed_r0, spec.zone_half_width, spec.zone_spacing).clipped(a, 1.0);
    let grid = Arc::new(build_grid(a, 1.0, spec.base_count, &zone.into_iter().collect::<Vec<_>>(), dim)?);
    let x0: Vec<f64> = grid.nodes().iter().map(|&r| if r >= 1.0 || (a > 0.0 && r <= a) { 0.0 } else { seed(r) }).collect();

    let reaction = move |_: usize, w: f64| match form {
        LimitForm::Split => (react.value(w), react.slope(w)),
        LimitForm::Reduced => (f.f(w), f.df(w)),
    };
    let problem = ScalarProblem::new(grid.clone(), domain.left_bc(), Bc::Dirichlet(0.0), &reaction, None)?;
    let (w, report) = solve_polished(&problem, &x0)?;
    let w = GridFunction::new(grid.clone(), w)?;
    finish(w, f, h, dim, domain, report)
}

fn finish(w: GridFunction, f: Nonlinearity, h: Nonlinearity, dim: usize, domain: Domain, report: NewtonReport) -> Result<NodalSolution> {
    let xs = w.nodes();
    let ys = w.values();
    let n = xs.len();
    let changes: Vec<usize> = (1..n - 2).filter(|&i| (ys[i] < 0.0) != (ys[i + 1] < 0.0)).collect();
    if changes.is_empty() {
        return Err(Error::Shooting("limit solution has no sign change".into()));
    }
    if changes.len() > 1 {
        return Err(Error::Shooting(format!("limit solution has {} sign changes", changes.len())));
    }
    let k = changes[0];
    // quartic refinement of the root inside [x_k, x_{k+1}]
    let (mut lo, mut hi) = (xs[k], xs[k + 1]);
    let s = k.saturating_sub(1).min(n - 5);
    let p = |r: f64| eval_on(xs, ys, s, r, 0);
    let plo = p(lo);
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if m == lo || m == hi {
            break;
        }
        if (p(m) < 0.0) == (plo < 0.0) {
            lo = m;
        } else {
            hi = m;
        }
    }
    let r0 = 0.5 * (lo + hi);
    if k < 4 || k + 5 >= n {
        return Err(Error::Shooting("interface too close to the boundary for one-sided fits".into()));
    }
    let left = eval_on(xs, ys, k - 4, r0, 1);
    let right = eval_on(xs, ys, k + 1, r0, 1);
    let psi0 = 0.5 * (left + right);
    if !(psi0 > 1e-8) {
        return Err(Error::Degenerate(format!("interface slope {psi0:.3e} is not positive")));
    }
    Ok(NodalSolution { w, r0, psi0, psi0_left: left, psi0_right: right, f, h, dim, domain, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> Nonlinearity {
        Nonlinearity::Power { lambda: 0.0, p: 1.0 }
    }

    #[test]
    fn nodal_solution_matches_shooting_oracle() {
        let f = cubic();
        let sol = solve_limit_problem(f, f, 3, Domain::Ball, &LimitInit::Bracket(-20.0, -50.0), &LimitGridSpec::default(), LimitForm::Split).unwrap();
        let (p, traj) = shooting_oracle(&LimitReaction { f, h: f }, 3, Domain::Ball, -20.0, -50.0).unwrap();
        let w0 = sol.w.values()[0];
        assert!((w0 - p).abs() / p.abs() < 1e-6, "{w0} vs {p}");
        let k = traj.windows(2).position(|w| (w[0].1 < 0.0) != (w[1].1 < 0.0)).unwrap();
        let r0_shoot = traj[k].0 - traj[k].1 * (traj[k + 1].0 - traj[k].0) / (traj[k + 1].1 - traj[k].1);
        assert!((sol.r0 - r0_shoot).abs() < 1e-6);
        assert!(sol.slope_gap() < 1e-6, "{}", sol.slope_gap());
        for (&r, &w) in sol.w.nodes().iter().zip(sol.w.values()) {
            if (r - sol.r0).abs() > 1e-3 && r < 1.0 {
                assert!((r - sol.r0) * w > 0.0);
            }
        }
    }

    #[test]
    fn reduced_form_agrees() {
        let f = cubic();
        let spec = LimitGridSpec { base_count: 800, zone_half_width: 0.05, zone_spacing: 5e-4 };
        let a = solve_limit_problem(f, f, 3, Domain::Ball, &LimitInit::Bracket(-20.0, -50.0), &spec, LimitForm::Split).unwrap();
        let b = solve_limit_problem(f, f, 3, Domain::Ball, &LimitInit::Bracket(-20.0, -50.0), &spec, LimitForm::Reduced).unwrap();
        let gap = a.w.values().iter().zip(b.w.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn empty_bracket_rejected() {
        let f = cubic();
        let r = solve_limit_problem(f, f, 3, Domain::Ball, &LimitInit::Bracket(-20.0, -21.0), &LimitGridSpec::default(), LimitForm::Split);
        assert!(matches!(r, Err(Error::Shooting(_))));
    }

    #[test]
    fn annulus_pipeline() {
        let f = cubic();
        // scan the slope for a bracket; the first root of w(1) is the one-signed branch
        let react = LimitReaction { f, h: f };
        let dom = Domain::Annulus { inner: 0.5 };
        let ends: Vec<(f64, f64)> = (1..150).map(|i| -4.0 * i as f64).map(|s| (s, shoot(&react, 3, dom, s).last().unwrap().1)).collect();
        let two = ends.windows(2).find(|w| w[0].1.signum() != w[1].1.signum() && sign_changes(&shoot(&react, 3, dom, w[0].0)) == 1).unwrap();
        let spec = LimitGridSpec { base_count: 800, zone_half_width: 0.02, zone_spacing: 2e-4 };
        let sol = solve_limit_problem(f, f, 3, dom, &LimitInit::Bracket(two[0].0, two[1].0), &spec, LimitForm::Split).unwrap();
        assert!(sol.r0 > 0.5 && sol.r0 < 1.0 && sol.psi0 > 0.0);
        assert_eq!(sol.w.values()[0], 0.0);
    }
}
