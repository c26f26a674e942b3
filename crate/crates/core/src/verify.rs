//! The acceptance checks on a finished construction and ladder. Each check
//! returns its measured numbers, a pass flag on those numbers, and the wall
//! time it took against its budget (kept out of the serialized form so that
//! identical inputs give identical reports).

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::Serialize;

use crate::blowup::{solve_profile, GrowthOperator};
use crate::construction::{Construction, ConstructionSpec};
use crate::error::Result;
use crate::fit::affine;
use crate::ladder::LadderPoint;
use crate::matching::{order1_closed_form, solve_order1, MatchingInputs};
use crate::outer::{solve_outer_family, BoundaryData, Nonlinearity};
use crate::radial::{GridFunction, RadialLaplacian};
use crate::solver::{fit_rate, verify_rates, RateReport};

#[derive(Clone, Debug, Serialize)]
pub struct Criterion {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub values: BTreeMap<String, f64>,
    pub note: String,
    #[serde(skip)]
    pub seconds: f64,
    #[serde(skip)]
    pub budget: f64,
}

impl Criterion {
    fn new(id: u8, name: &str, budget: f64) -> Self {
        Self { id, name: name.into(), pass: true, values: BTreeMap::new(), note: String::new(), seconds: 0.0, budget }
    }

    fn set(&mut self, key: &str, v: f64) -> f64 {
        self.values.insert(key.into(), v);
        v
    }

    fn require(&mut self, ok: bool) {
        self.pass &= ok;
    }

    fn timed(mut self, clock: Instant) -> Self {
        self.seconds = clock.elapsed().as_secs_f64();
        self
    }

    pub fn within_budget(&self) -> bool {
        self.seconds <= self.budget
    }

    /// One line: verdict, id, name, the measured values and the runtime.
    pub fn line(&self) -> String {
        let verdict = match (self.pass, self.within_budget()) {
            (true, true) => "PASS",
            (true, false) => "FAIL (runtime)",
            _ => "FAIL",
        };
        let vals: Vec<String> = self.values.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
        let mut s = format!("{verdict} [{:>2}] {}: {} ({:.1}s / {:.0}s)", self.id, self.name, vals.join(" "), self.seconds, self.budget);
        if !self.note.is_empty() {
            s.push_str(" -- ");
            s.push_str(&self.note);
        }
        s
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let d = a.abs().max(b.abs());
    if d == 0.0 {
        0.0
    } else {
        (a - b).abs() / d
    }
}

/// Symmetry `U(−t) = V(t)`, positive phase, and phase stability under a doubled
/// window (same spacing) and a halved spacing.
pub fn profile_symmetry_and_phase(psi0: f64, spec: &ConstructionSpec) -> Result<Criterion> {
    let clock = Instant::now();
    let mut c = Criterion::new(1, "profile symmetry and phase", 5.0);
    let (t, n) = (spec.profile_t, spec.profile_nodes);
    let base = solve_profile(psi0, t, n)?;
    let wide = solve_profile(psi0, 2.0 * t, 2 * (n - 1) + 1)?;
    let fine = solve_profile(psi0, t, 2 * (n - 1) + 1)?;
    let sym = c.set("symmetry", base.symmetry_defect);
    let k = c.set("k", base.k);
    let dw = c.set("k_rel_window", rel(base.k, wide.k));
    let df = c.set("k_rel_spacing", rel(base.k, fine.k));
    c.require(sym <= 1e-8 && k > 0.0 && dw <= 1e-7 && df <= 1e-7);
    Ok(c.timed(clock))
}

/// The profile with slope `2` against the rescaled unit-slope profile. The
/// family `μU(μt)` has slope `μ²`, so slope 2 is `√2·U₁(√2t)`; the gap to
/// `2·U₁(2t)` (the slope-4 member) is recorded alongside.
pub fn scaling_covariance() -> Result<Criterion> {
    let clock = Instant::now();
    let mut c = Criterion::new(2, "profile scaling covariance", 10.0);
    let one = solve_profile(1.0, 24.0, 24001)?;
    let two = solve_profile(2.0, 8.0, 8001)?;
    let gap_at = |mu: f64| -> f64 {
        two.grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, &t)| (two.u[i] - mu * one.u_at(mu * t)).abs().max((two.v[i] - mu * one.v_at(mu * t)).abs()))
            .fold(0.0, f64::max)
    };
    let gap = c.set("gap_sqrt2", gap_at(2f64.sqrt()));
    c.set("gap_literal_2", gap_at(2.0));
    c.require(gap <= 1e-6);
    c.note = "slope-2 member of the family is sqrt2*U1(sqrt2 t)".into();
    Ok(c.timed(clock))
}

/// Fitted growth slope `b` and intercept sum `a₊ + a₋` against their integral
/// formulas, for seeded random decaying right-hand sides.
pub fn growth_formulas(cons: &Construction, seed: u64) -> Result<Criterion> {
    let clock = Instant::now();
    let mut c = Criterion::new(3, "linearized growth formulas", 10.0);
    let p = &cons.profile;
    let op = GrowthOperator::new(p)?;
    let mut rng = SplitMix64::seed_from_u64(seed);
    let ts = p.grid.nodes();
    let (mut b_gap, mut a_gap, mut a_gap_parts): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..5 {
        let mut bump = || {
            let (a, m, w) = (rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(0.2..=0.5));
            ts.iter().map(move |t| a * (-((t - m) / w).powi(2)).exp()).collect::<Vec<f64>>()
        };
        let (hh, ht) = (bump(), bump());
        let s = op.solve(&hh, &ht, (0.0, 0.0))?;
        let sum = s.a_plus + s.a_minus;
        b_gap = b_gap.max((s.b - s.b_integral).abs());
        a_gap = a_gap.max((sum - s.a_sum_stated(p.psi0)).abs());
        a_gap_parts = a_gap_parts.max((sum - s.a_sum_by_parts(p.psi0)).abs());
    }
    c.set("b_gap", b_gap);
    c.set("a_sum_gap", a_gap);
    c.set("a_sum_gap_opposite_sign", a_gap_parts);
    c.require(b_gap <= 1e-6 && a_gap <= 1e-6);
    if a_gap > 1e-6 && a_gap_parts <= 1e-6 {
        c.note = "a+ + a- matches the integral formula only with the opposite sign".into();
    }
    Ok(c.timed(clock))
}

/// Largest scaled defect of the coefficient equations
/// `Δu₁ = f′u₁`, `Δu₂ = f′u₂ + ½f″u₁²`, `Δu₃ = f′u₃ + f″u₁u₂ + ⅙f‴u₁³`
/// on one branch (every row but the Dirichlet ends).
fn series_defect(c: &[GridFunction; 4], nl: &Nonlinearity) -> f64 {
    let op = RadialLaplacian::new(c[0].grid());
    let [u0, u1, u2, u3] = [0, 1, 2, 3].map(|k| c[k].values());
    let n = u0.len();
    let first = if c[0].grid().has_origin() { 0 } else { 1 };
    let mut worst: f64 = 0.0;
    for i in first..n - 1 {
        let (f1, f2, f3) = (nl.df(u0[i]), nl.d2f(u0[i]), nl.d3f(u0[i]));
        let src = [0.0, 0.5 * f2 * u1[i] * u1[i], f2 * u1[i] * u2[i] + f3 / 6.0 * u1[i].powi(3)];
        for (k, x) in [u1, u2, u3].into_iter().enumerate() {
            let d = op.apply_at(x, i) - f1 * x[i] - src[k];
            let scale = (op.magnitude_at(x, i) + (f1 * x[i]).abs() + src[k].abs()).max(1.0);
            worst = worst.max(d.abs() / scale);
        }
    }
    worst
}

/// `‖u_δ − Σ₀³δⁱuᵢ‖∞` (and the same for `v`) against `δ ∈ [1e−3, 1e−1]`, with
/// the coefficient equations certified at round-off so the family solve (which
/// uses them to cancel terms exactly) is not checked against itself.
pub fn outer_expansion_order(cons: &Construction) -> Result<Criterion> {
    let clock = Instant::now();
    let mut c = Criterion::new(4, "outer expansion order", 30.0);
    let ds: Vec<f64> = (0..5).map(|k| 10f64.powf(-3.0 + 0.5 * k as f64)).collect();
    let (mut eu, mut ev) = (Vec::new(), Vec::new());
    for &d in &ds {
        let fam = solve_outer_family(&cons.limit, &cons.outer, d, d)?;
        let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        eu.push(sup(&fam.du, &cons.outer.u_increment(d, 3)));
        ev.push(sup(&fam.dv, &cons.outer.v_increment(d, 3)));
    }
    let ln = |v: &[f64]| v.iter().map(|x| x.ln()).collect::<Vec<f64>>();
    let su = c.set("slope_u", affine(&ln(&ds), &ln(&eu))?.slope);
    let sv = c.set("slope_v", affine(&ln(&ds), &ln(&ev))?.slope);
    c.set("err_u_at_1e-3", eu[0]);
    c.set("err_v_at_1e-3", ev[0]);
    c.set("err_u_at_1e-1", eu[4]);
    c.set("err_v_at_1e-1", ev[4]);
    let defect = c.set("series_defect", series_defect(&cons.outer.u, &cons.f).max(series_defect(&cons.outer.v, &cons.h)));
    c.require(su >= 3.7 && sv >= 3.7 && defect <= 1e-12);
    Ok(c.timed(clock))
}

/// Numeric first-order matching against the closed forms at seeded random inputs.
pub fn matching_closed_forms(seed: u64) -> Result<Criterion> {
    let clock = Instant::now();
    let mut c = Criterion::new(5, "first-order matching closed forms", 1.0);
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let u1p = rng.gen_range(-20.0..20.0);
        let data = BoundaryData { u1p, v1p: u1p - rng.gen_range(1.0..20.0), ..Default::default() };
        let (psi0, k, b0, r0) = (rng.gen_range(1.0..100.0), rng.gen_range(0.1..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(0.1..0.9));
        let g = 10f64.powf(rng.gen_range(4.0..8.0));
        let i = MatchingInputs::new(&data, psi0, k, b0, r0, 3, 0.0, 0.0, g)?;
        let (n, f) = (solve_order1(&i)?, order1_closed_form(&i));
        for (a, b) in [(n.delta1, f.delta1), (n.delta_tilde1, f.delta_tilde1), (n.mu1, f.mu1), (n.xi, f.xi)] {
            worst = worst.max(rel(a, b));
        }
    }
    c.set("max_rel_gap", worst);
    c.require(worst <= 1e-12);
    Ok(c.timed(clock))
}

fn slope(c: &mut Criterion, key: &str, gs: &[f64], ys: &[f64], target: f64, tol: f64) -> Result<RateReport> {
    let r = fit_rate(key, gs, ys, target, tol)?;
    c.set(key, r.fitted_slope);
    c.require(r.pass);
    Ok(r)
}

fn gs(pts: &[LadderPoint]) -> Vec<f64> {
    pts.iter().map(|p| p.constructed.g).collect()
}

fn build_time(pts: &[LadderPoint]) -> f64 {
    pts.iter().map(|p| p.constructed.build_seconds).sum()
}

/// `|δ₁|, |δ₂|, |δ₃|` against `g`.
pub fn matching_magnitudes(pts: &[LadderPoint]) -> Result<Criterion> {
    let mut c = Criterion::new(6, "matching magnitude laws", 60.0);
    let g = gs(pts);
    for (j, want) in [(0usize, -0.25), (1, -0.5), (2, -0.75)] {
        let ys: Vec<f64> = pts.iter().map(|p| p.constructed.params.delta[j].abs()).collect();
        slope(&mut c, &format!("slope_delta{}", j + 1), &g, &ys, want, 0.05)?;
    }
    c.seconds = build_time(pts);
    Ok(c)
}

/// Blend-zone gap between the pieces, divided by `|ln g|⁴`.
pub fn overlap_estimate(pts: &[LadderPoint]) -> Result<Criterion> {
    let mut c = Criterion::new(7, "overlap estimate", 60.0);
    let ys: Vec<f64> = pts.iter().map(|p| p.constructed.overlap.u_gap_normalized.max(p.constructed.overlap.v_gap_normalized)).collect();
    slope(&mut c, "slope_gap_over_ln4", &gs(pts), &ys, -1.0, 0.15)?;
    c.seconds = build_time(pts);
    Ok(c)
}

/// Inner-zone remainder over `|ln g|⁴`, and the remainder where `ζ ≡ 1`.
pub fn remainder_scaling(pts: &[LadderPoint], solver_tol: f64) -> Result<Criterion> {
    let mut c = Criterion::new(8, "remainder scaling", 120.0);
    let ys: Vec<f64> = pts.iter().map(|p| p.constructed.remainder.sup_inner_weighted * p.constructed.g.powf(-0.5)).collect();
    slope(&mut c, "slope_inner_over_ln4", &gs(pts), &ys, -0.5, 0.1)?;
    let outside = pts.iter().map(|p| p.constructed.remainder.zero_outside).fold(0.0, f64::max);
    c.set("max_outside", outside);
    c.require(outside <= 10.0 * solver_tol);
    c.seconds = build_time(pts);
    Ok(c)
}

/// Newton from the glued seed at every ladder point.
pub fn newton_convergence(pts: &[LadderPoint]) -> Criterion {
    let mut c = Criterion::new(9, "newton convergence from the seed", 600.0);
    let iters = pts.iter().map(|p| p.solution.report.iterations).max().unwrap_or(0);
    let res = pts.iter().map(|p| p.solution.diagnostics.residual).fold(0.0, f64::max);
    let positive = pts.iter().all(|p| p.solution.diagnostics.positivity.positive());
    let cold = pts.iter().all(|p| !p.solution.continued && p.solution.report.converged);
    c.set("max_iterations", iters as f64);
    c.set("max_residual", res);
    c.set("all_positive", positive as u8 as f64);
    c.set("all_cold", cold as u8 as f64);
    c.require(iters <= 6 && res <= 1e-9 && positive && cold);
    c.seconds = pts.iter().map(|p| p.solve_seconds).sum();
    c
}

/// Sup-error rates against the limit profile and the inner-profile rate.
pub fn solution_rates(pts: &[LadderPoint]) -> Result<(Criterion, [RateReport; 3])> {
    let mut c = Criterion::new(10, "solution rates", 600.0);
    let sols: Vec<_> = pts.iter().map(|p| p.solution.clone()).collect();
    // the fit residual is reported, not gated: a pre-asymptotic ladder shows up as a slope miss
    let reps = verify_rates(&sols, f64::INFINITY)?;
    for (r, key) in reps.iter().zip(["slope_u", "slope_v", "slope_inner_profile"]) {
        c.set(key, r.fitted_slope);
        c.require(r.pass);
    }
    c.seconds = pts.iter().map(|p| p.solve_seconds).sum();
    Ok((c, reps))
}

/// The final Newton correction `‖u_g − u_ap‖₁` against `g`.
pub fn correction_ball(pts: &[LadderPoint]) -> Result<Criterion> {
    let mut c = Criterion::new(11, "final correction ball", 600.0);
    let ys: Vec<f64> = pts.iter().map(|p| p.solution.diagnostics.correction_norm).collect();
    slope(&mut c, "slope_correction", &gs(pts), &ys, -0.75, 0.15)?;
    c.seconds = pts.iter().map(|p| p.solve_seconds).sum();
    Ok(c)
}

/// Probe ratio at the largest `g` over its value at the smallest.
pub fn linear_probe_bound(pts: &[LadderPoint]) -> Criterion {
    let mut c = Criterion::new(12, "linear a-priori probe", 300.0);
    let (first, last) = (&pts[0].probe, &pts[pts.len() - 1].probe);
    c.set("max_ratio_smallest_g", first.max_ratio);
    c.set("max_ratio_largest_g", last.max_ratio);
    let q = c.set("growth", last.max_ratio / first.max_ratio);
    c.require(q <= 2.0);
    c.seconds = pts.iter().map(|p| p.probe_seconds).sum();
    c
}

/// Every ladder criterion; the ladder must have at least four points over two decades.
pub fn ladder_criteria(pts: &[LadderPoint], solver_tol: f64) -> Result<(Vec<Criterion>, [RateReport; 3])> {
    let (rates, reps) = solution_rates(pts)?;
    let cs = vec![
        matching_magnitudes(pts)?,
        overlap_estimate(pts)?,
        remainder_scaling(pts, solver_tol)?,
        newton_convergence(pts),
        rates,
        correction_ball(pts)?,
        linear_probe_bound(pts),
    ];
    Ok((cs, reps))
}

/// The `g`-independent criteria.
pub fn static_criteria(cons: &Construction, spec: &ConstructionSpec, seed: u64) -> Result<Vec<Criterion>> {
    Ok(vec![
        profile_symmetry_and_phase(cons.psi0(), spec)?,
        scaling_covariance()?,
        growth_formulas(cons, seed)?,
        outer_expansion_order(cons)?,
        matching_closed_forms(seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::fixture::cubic;

    #[test]
    fn closed_forms_hold_and_lines_are_formatted() {
        let c = matching_closed_forms(7).unwrap();
        assert!(c.pass, "{}", c.line());
        assert!(c.line().starts_with("PASS [ 5]"));
        let mut bad = Criterion::new(1, "x", 0.0);
        bad.seconds = 1.0;
        assert!(bad.line().starts_with("FAIL (runtime)"));
    }

    #[test]
    fn growth_slope_formula_holds_on_the_default_profile() {
        let c = growth_formulas(cubic(), 1).unwrap();
        assert!(c.values["b_gap"] <= 1e-6, "{}", c.line());
        assert!(c.values["a_sum_gap_opposite_sign"] <= 1e-6, "{}", c.line());
    }
}
