//! The full coupled system at finite `g`: its linearization about the glued
//! approximation, the quadratic remainder, Picard and Newton solves, and the
//! diagnostics the rate fits consume.

mod probe;
mod rates;
mod system;
mod tail;

use serde::{Deserialize, Serialize};

use crate::assembly::{ApproximateSolution, WeightKind};
use crate::construction::Construction;
use crate::error::{Error, Result};
use crate::radial::{eval_local, newton_solve, residual_measure, GridFunction, NewtonOptions, NewtonReport};

pub use probe::{linear_probe, ProbeReport, ProbeSpec};
pub use rates::{fit_rate, verify_rates, RateReport};
pub use system::{interleave, quadratic_part, split, GpSystem};
pub use tail::{left_tail, right_tail, LogTail};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Scaled residual target (each row divided by the size of its terms).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 20 }
    }
}

impl ApproximateSolution {
    pub fn system(&self) -> GpSystem {
        GpSystem::new(self.grid.clone(), self.f, self.h, self.g)
    }

    pub fn interleaved(&self) -> Vec<f64> {
        interleave(self.u.values(), self.v.values())
    }
}

fn check_pair(ap: &ApproximateSolution, a: &[f64], b: &[f64]) -> Result<()> {
    let n = ap.grid.len();
    for len in [a.len(), b.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    Ok(())
}

/// `𝓛(φ,ψ)` about `(u_ap, v_ap)`; Dirichlet nodes return the boundary values.
pub fn linearized_apply(ap: &ApproximateSolution, phi: &[f64], psi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(ap, phi, psi)?;
    Ok(split(&ap.system().apply_operator(&ap.interleaved(), &interleave(phi, psi))))
}

/// Solve `𝓛(φ,ψ) = (F,H)`. At Dirichlet nodes the entries of `(F,H)` are the
/// boundary values of `(φ,ψ)`; the ball's centre row carries the equation.
pub fn linearized_solve(ap: &ApproximateSolution, rhs_u: &[f64], rhs_v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(ap, rhs_u, rhs_v)?;
    let lu = ap.system().factor(&ap.interleaved())?;
    Ok(split(&lu.solve(&interleave(rhs_u, rhs_v))))
}

/// `N(φ,ψ)` about `(u_ap, v_ap)`.
pub fn nonlinear_residual_n(ap: &ApproximateSolution, phi: &[f64], psi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    quadratic_part(ap.u.values(), ap.v.values(), phi, psi, &ap.f, &ap.h, ap.g)
}

/// The remainder of the discrete system at `(u_ap, v_ap)`, signed so that the
/// correction solves `𝓛c = −R_h − N(c)` on every row.
pub fn discrete_remainder(ap: &ApproximateSolution) -> (Vec<f64>, Vec<f64>) {
    use crate::radial::NonlinearSystem;
    let sys = ap.system();
    let x = ap.interleaved();
    let mut r = vec![0.0; x.len()];
    sys.residual(&x, &mut r);
    for (k, v) in r.iter_mut().enumerate() {
        if !sys.is_pinned(k / 2) {
            *v = -*v;
        }
    }
    split(&r)
}

/// The map `(φ,ψ) ↦ (φ̄,ψ̄)` with `𝓛(φ̄,ψ̄) = −R_h − N(φ,ψ)`, factored once.
pub struct PicardMap<'a> {
    ap: &'a ApproximateSolution,
    lu: crate::radial::BandedLu,
    remainder: (Vec<f64>, Vec<f64>),
    pinned: Vec<bool>,
}

impl<'a> PicardMap<'a> {
    pub fn new(ap: &'a ApproximateSolution) -> Result<Self> {
        let sys = ap.system();
        let lu = sys.factor(&ap.interleaved())?;
        let pinned = (0..ap.grid.len()).map(|i| sys.is_pinned(i)).collect();
        Ok(Self { ap, lu, remainder: discrete_remainder(ap), pinned })
    }

    pub fn step(&self, phi: &[f64], psi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n1, n2) = nonlinear_residual_n(self.ap, phi, psi)?;
        let (r1, r2) = &self.remainder;
        let mut b = Vec::with_capacity(2 * phi.len());
        for i in 0..phi.len() {
            let q = if self.pinned[i] { 0.0 } else { 1.0 };
            b.push(-r1[i] - q * n1[i]);
            b.push(-r2[i] - q * n2[i]);
        }
        self.lu.solve_in_place(&mut b);
        Ok(split(&b))
    }
}

pub fn picard_step(ap: &ApproximateSolution, phi: &[f64], psi: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    PicardMap::new(ap)?.step(phi, psi)
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardReport {
    pub iterations: usize,
    pub converged: bool,
    /// Sup of the last update (absolute).
    pub last_update: f64,
    #[serde(skip)]
    pub phi: Vec<f64>,
    #[serde(skip)]
    pub psi: Vec<f64>,
}

/// Iterate the Picard map from zero until the sup of the update drops below
/// `tol` times the sup of `(u_ap, v_ap)`.
pub fn picard_solve(ap: &ApproximateSolution, tol: f64, max_iter: usize) -> Result<PicardReport> {
    let map = PicardMap::new(ap)?;
    let tol = tol * ap.u.sup_norm().max(ap.v.sup_norm());
    let n = ap.grid.len();
    let (mut phi, mut psi) = (vec![0.0; n], vec![0.0; n]);
    let mut last = f64::INFINITY;
    for it in 1..=max_iter {
        let (p, q) = map.step(&phi, &psi)?;
        last = p.iter().zip(&phi).chain(q.iter().zip(&psi)).fold(0.0, |m, (a, b)| m.max((a - b).abs()));
        (phi, psi) = (p, q);
        if !last.is_finite() {
            break;
        }
        if last <= tol {
            return Ok(PicardReport { iterations: it, converged: true, last_update: last, phi, psi });
        }
    }
    Ok(PicardReport { iterations: max_iter, converged: false, last_update: last, phi, psi })
}

/// Sign of the converged components over the nodes that are not Dirichlet nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Positivity {
    /// Minima of the stored values (zero where a tail underflows).
    pub min_u: f64,
    pub min_v: f64,
    /// `log₁₀` of the minima, from the logarithmic tails; finite means positive.
    pub log10_min_u: f64,
    pub log10_min_v: f64,
    pub negative_u: usize,
    pub negative_v: usize,
    /// Nodes whose value is positive but below the double range.
    pub underflow_u: usize,
    pub underflow_v: usize,
    /// Every pivot of both tail sweeps was positive.
    pub tails_certified: bool,
    /// `(r, value)` of the most negative node, if any.
    pub most_negative: Option<(f64, f64)>,
}

impl Positivity {
    fn scan(nodes: &[f64], ln_u: &[f64], ln_v: &[f64], u: &[f64], v: &[f64], certified: bool, interior: impl Fn(usize) -> bool) -> Self {
        let mut p = Positivity {
            min_u: f64::INFINITY,
            min_v: f64::INFINITY,
            log10_min_u: f64::INFINITY,
            log10_min_v: f64::INFINITY,
            negative_u: 0,
            negative_v: 0,
            underflow_u: 0,
            underflow_v: 0,
            tails_certified: certified,
            most_negative: None,
        };
        let l10 = std::f64::consts::LN_10;
        for i in (0..nodes.len()).filter(|&i| interior(i)) {
            let (a, b) = (u[i], v[i]);
            p.min_u = p.min_u.min(a);
            p.min_v = p.min_v.min(b);
            p.negative_u += (a < 0.0) as usize;
            p.negative_v += (b < 0.0) as usize;
            p.underflow_u += (a == 0.0 && ln_u[i].is_finite()) as usize;
            p.underflow_v += (b == 0.0 && ln_v[i].is_finite()) as usize;
            let log10 = |x: f64, l: f64| if x > 0.0 || (x == 0.0 && l.is_finite()) { l / l10 } else { f64::NEG_INFINITY };
            p.log10_min_u = p.log10_min_u.min(log10(a, ln_u[i]));
            p.log10_min_v = p.log10_min_v.min(log10(b, ln_v[i]));
            let m = a.min(b);
            if m < 0.0 && p.most_negative.is_none_or(|(_, x)| m < x) {
                p.most_negative = Some((nodes[i], m));
            }
        }
        p
    }

    /// Positive at every interior node, counting certified tail values below the double range.
    pub fn positive(&self) -> bool {
        self.negative_u == 0 && self.negative_v == 0 && self.tails_certified && self.log10_min_u.is_finite() && self.log10_min_v.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `sup|u_g − w⁺|`, `sup|v_g − w⁻|` over the nodes (`w⁻ = max(−w, 0)`).
    pub sup_err_u: f64,
    pub sup_err_v: f64,
    /// `sup |u_g − g^{-1/4}U(g^{1/4}(r − r₀ − ξ))|·g^{-1/2}/(g^{-1/2} + (r − r₀)²)`
    /// over `|r − r₀| ≤ |ln g|g^{-1/4}`: the profile error measured against its
    /// bound, with the quadratic part of the bound divided out.
    pub inner_profile_err: f64,
    /// Where `u_g − v_g` changes sign, and its distance from `r₀ + ξ`.
    pub interface: f64,
    pub interface_shift: f64,
    pub positivity: Positivity,
    /// `‖(u_g − u_ap, v_g − v_ap)‖₁`.
    pub correction_norm: f64,
    /// Scaled residual of the stored pair (after the tails are rebuilt).
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GPSolution {
    pub g: f64,
    #[serde(skip)]
    pub u: GridFunction,
    #[serde(skip)]
    pub v: GridFunction,
    pub report: NewtonReport,
    pub diagnostics: Diagnostics,
    /// The seed came from a neighbouring solution rather than the glued approximation.
    pub continued: bool,
}

impl GPSolution {
    /// Fails with the most negative node when positivity is lost.
    pub fn check_positive(&self) -> Result<()> {
        let p = &self.diagnostics.positivity;
        match p.most_negative {
            Some((r, x)) => Err(Error::Gate(format!(
                "positivity lost at g = {:e}: {} negative u nodes, {} negative v nodes, most negative {x:e} at r = {r}",
                self.g, p.negative_u, p.negative_v
            ))),
            None => Ok(()),
        }
    }
}

/// Newton on the full system seeded at `(u_ap, v_ap)`.
pub fn newton_full(c: &Construction, ap: &ApproximateSolution, opts: &SolverOptions) -> Result<GPSolution> {
    let (x, report) = newton_solve(&ap.system(), &ap.interleaved(), &newton_options(opts))?;
    finish(c, ap, x, report, false)
}

/// Steps in `g` per decade for [`newton_continued`].
const CONTINUATION_STEPS: f64 = 8.0;

/// Natural-parameter continuation from a solution at a smaller `g`: the previous
/// solution is interpolated onto `ap`'s grid and carried up a geometric ladder
/// of intermediate couplings on that grid, finishing at `ap.g`.
pub fn newton_continued(c: &Construction, ap: &ApproximateSolution, prev: &GPSolution, opts: &SolverOptions) -> Result<GPSolution> {
    if !(prev.g < ap.g) {
        return Err(Error::InvalidInput(format!("continuation runs upwards in g: {:e} -> {:e}", prev.g, ap.g)));
    }
    let at = |gf: &GridFunction| -> Vec<f64> { ap.nodes().iter().map(|&r| eval_local(gf.nodes(), gf.values(), r, 0)).collect() };
    let (mut u, mut v) = (at(&prev.u), at(&prev.v));
    let last = u.len() - 1;
    u[last] = 0.0;
    v[last] = 0.0;
    if !ap.grid.has_origin() {
        u[0] = 0.0;
        v[0] = 0.0;
    }
    let mut x = interleave(&u, &v);
    let steps = ((ap.g / prev.g).log10() * CONTINUATION_STEPS).ceil().max(1.0) as usize;
    let mut iterations = 0;
    for k in 1..=steps {
        let g = if k == steps { ap.g } else { prev.g * (ap.g / prev.g).powf(k as f64 / steps as f64) };
        let sys = GpSystem::new(ap.grid.clone(), ap.f, ap.h, g);
        let (y, rep) = newton_solve(&sys, &x, &newton_options(opts))?;
        iterations += rep.iterations;
        x = y;
        if k == steps {
            let report = NewtonReport { iterations, ..rep };
            return finish(c, ap, x, report, true);
        }
    }
    unreachable!("the last continuation step returns")
}

fn newton_options(opts: &SolverOptions) -> NewtonOptions {
    NewtonOptions { max_iter: opts.max_iter, ..NewtonOptions::absolute(opts.tol) }
}

/// Values below this fraction of a component's maximum are rebuilt from the tail sweep.
const TAIL_THRESHOLD: f64 = 1e-8;

fn finish(c: &Construction, ap: &ApproximateSolution, x: Vec<f64>, report: NewtonReport, continued: bool) -> Result<GPSolution> {
    let sys = ap.system();
    let (mut u, mut v) = split(&x);
    let g = ap.g;
    let k = crossing(&u, &v).ok_or_else(|| Error::Gate(format!("no crossing of u and v at g = {g:e}")))?;
    let umax = u.iter().cloned().fold(0.0, f64::max);
    let vmax = v.iter().cloned().fold(0.0, f64::max);
    let ua = (0..k).rev().find(|&i| u[i] < TAIL_THRESHOLD * umax).unwrap_or(0);
    let va = (k..u.len()).find(|&i| v[i] < TAIL_THRESHOLD * vmax).unwrap_or(u.len() - 1);
    let op = sys.laplacian();
    let tu = tail::left_tail(op, &u, &v, &ap.f, g, ua, !ap.grid.has_origin());
    let tv = tail::right_tail(op, &v, &u, &ap.h, g, va);
    for i in 0..ua {
        u[i] = tu.ln[i].exp();
    }
    for i in va + 1..v.len() {
        v[i] = tv.ln[i].exp();
    }
    let positivity = Positivity::scan(ap.nodes(), &tu.ln, &tv.ln, &u, &v, tu.certified && tv.certified, |i| !sys.is_pinned(i));
    let post = residual_measure(&sys, &interleave(&u, &v));
    let diagnostics = diagnose(c, ap, &u, &v, k, positivity, post)?;
    Ok(GPSolution { g, u: GridFunction::new(ap.grid.clone(), u)?, v: GridFunction::new(ap.grid.clone(), v)?, report, diagnostics, continued })
}

/// First node `i` with `u_{i−1} < v_{i−1}` and `u_i ≥ v_i`.
fn crossing(u: &[f64], v: &[f64]) -> Option<usize> {
    (1..u.len()).find(|&i| u[i - 1] < v[i - 1] && u[i] >= v[i])
}

fn diagnose(
    c: &Construction,
    ap: &ApproximateSolution,
    u: &[f64],
    v: &[f64],
    k: usize,
    positivity: Positivity,
    residual: f64,
) -> Result<Diagnostics> {
    let nodes = ap.nodes();
    let (g, r0, xi) = (ap.g, ap.r0, ap.params.xi);
    let (q, e) = (g.powf(0.25), g.powf(-0.25));
    let zone = g.ln() * e;
    let (mut eu, mut ev, mut inner): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for (i, &r) in nodes.iter().enumerate() {
        let w = c.limit.w_at(r);
        eu = eu.max((u[i] - w.max(0.0)).abs());
        ev = ev.max((v[i] - (-w).max(0.0)).abs());
        let s = r - r0;
        if s.abs() <= zone {
            let err = (u[i] - e * c.profile.u_at(q * (s - xi))).abs();
            inner = inner.max(err * e * e / (e * e + s * s));
        }
    }
    let (d0, d1) = (u[k - 1] - v[k - 1], u[k] - v[k]);
    let interface = nodes[k - 1] + d0 / (d0 - d1) * (nodes[k] - nodes[k - 1]);
    let (du, dv): (Vec<f64>, Vec<f64>) = (0..nodes.len()).map(|i| (u[i] - ap.u.values()[i], v[i] - ap.v.values()[i])).unzip();
    Ok(Diagnostics {
        sup_err_u: eu,
        sup_err_v: ev,
        inner_profile_err: inner,
        interface,
        interface_shift: (interface - r0 - xi).abs(),
        positivity,
        correction_norm: ap.norm(WeightKind::W1, 0.5, &du, &dv)?,
        residual,
    })
}
