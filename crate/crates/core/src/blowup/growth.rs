use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{affine, AffineFit};
use crate::radial::{eval_local, BandedLu, BandedMatrix};

use super::profile::{nodal_derivative, BlowupProfile, LineGrid};

/// Width of the affine-fit windows at each end.
pub const FIT_WINDOW: f64 = 2.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthSolution {
    pub grid: LineGrid,
    pub phi: Vec<f64>,
    pub phi_tilde: Vec<f64>,
    pub a_plus: f64,
    pub a_minus: f64,
    /// Gauge-independent slope, the mean of the two fitted end slopes.
    pub b: f64,
    pub gauge: (f64, f64),
    pub fit_plus: AffineFit,
    pub fit_minus: AffineFit,
    /// `−(1/2ψ₀)∫(U'H + V'H̃)`.
    pub b_integral: f64,
    /// `∫((tU'+U)H + (tV'+V)H̃)`, so that `a₊ + a₋ = ±a_sum_moment/(2ψ₀)`.
    pub a_sum_moment: f64,
    /// `|Φ̃(T)|` and `|Φ(−T)|`.
    pub tail: f64,
}

impl GrowthSolution {
    fn local(&self, ys: &[f64], t: f64, order: usize) -> f64 {
        let g = &self.grid;
        let n = g.len();
        let j = ((t / g.h).round() as i64 + g.center as i64).clamp(2, n as i64 - 3) as usize;
        let xs: Vec<f64> = (j - 2..=j + 2).map(|i| g.t(i)).collect();
        eval_local(&xs, &ys[j - 2..=j + 2], t, order)
    }

    /// `(Φ, Φ̃)` at `t`, continued by the affine fits (and 0) outside `[−T, T]`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let tm = self.grid.t_max;
        if t > tm {
            (self.fit_plus.at(t), 0.0)
        } else if t < -tm {
            (0.0, self.fit_minus.at(t))
        } else {
            (self.local(&self.phi, t, 0), self.local(&self.phi_tilde, t, 0))
        }
    }

    pub fn derivative_at(&self, t: f64) -> (f64, f64) {
        let tm = self.grid.t_max;
        if t > tm {
            (self.fit_plus.slope, 0.0)
        } else if t < -tm {
            (0.0, self.fit_minus.slope)
        } else {
            (self.local(&self.phi, t, 1), self.local(&self.phi_tilde, t, 1))
        }
    }

    /// The sum formula as usually stated, `−(1/2ψ₀)∫(K₂·H)`; integration by parts gives the opposite sign (see [`Self::a_sum_by_parts`]).
    pub fn a_sum_stated(&self, psi0: f64) -> f64 {
        -self.a_sum_moment / (2.0 * psi0)
    }

    /// Sum formula from integrating `K₂·L(Φ,Φ̃)` by parts: `+(1/2ψ₀)∫(K₂·H)`.
    pub fn a_sum_by_parts(&self, psi0: f64) -> f64 {
        self.a_sum_moment / (2.0 * psi0)
    }

    pub fn nodal_derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        (nodal_derivative(&self.phi, self.grid.h), nodal_derivative(&self.phi_tilde, self.grid.h))
    }
}

#[derive(Clone, Copy, Debug)]
struct Ends {
    plus: AffineFit,
    minus: AffineFit,
}

/// Factored linearisation `L` about a profile, with its discrete kernel basis.
pub struct GrowthOperator<'a> {
    pub profile: &'a BlowupProfile,
    lu: BandedLu,
    e1: Vec<f64>,
    e2: Vec<f64>,
    ends1: Ends,
    ends2: Ends,
}

const W: [f64; 3] = [1.0, 10.0, 1.0];
const A: [f64; 3] = [1.0, -2.0, 1.0];

impl<'a> GrowthOperator<'a> {
    pub fn new(profile: &'a BlowupProfile) -> Result<Self> {
        let g = &profile.grid;
        let m = g.len();
        let (u, v) = (&profile.u, &profile.v);
        let h = g.h;
        let q = h * h / 12.0;
        let r = h / 6.0;
        let mut a = BandedMatrix::zeros(2 * m, 3, 3);
        for i in 1..m - 1 {
            for (s, j) in (i - 1..=i + 1).enumerate() {
                // Φ'' = V²Φ + 2UVΦ̃ − H
                a.add(2 * i, 2 * j, A[s] - q * W[s] * v[j] * v[j]);
                a.add(2 * i, 2 * j + 1, -q * W[s] * 2.0 * u[j] * v[j]);
                // Φ̃'' = U²Φ̃ + 2UVΦ − H̃
                a.add(2 * i + 1, 2 * j + 1, A[s] - q * W[s] * u[j] * u[j]);
                a.add(2 * i + 1, 2 * j, -q * W[s] * 2.0 * u[j] * v[j]);
            }
        }
        // Φ' − VΦ = 0 at −T
        a.add(0, 0, -1.0 / h - r * 2.0 * v[0] * v[0] - v[0]);
        a.add(0, 1, -r * 4.0 * u[0] * v[0]);
        a.add(0, 2, 1.0 / h - r * v[1] * v[1]);
        a.add(0, 3, -r * 2.0 * u[1] * v[1]);
        // pin Φ̃(−T)
        a.add(1, 1, 1.0);
        // pin Φ(T)
        let n = m - 1;
        a.add(2 * n, 2 * n, 1.0);
        // Φ̃' + UΦ̃ = 0 at +T
        a.add(2 * n + 1, 2 * n + 1, 1.0 / h + r * 2.0 * u[n] * u[n] + u[n]);
        a.add(2 * n + 1, 2 * n, r * 4.0 * u[n] * v[n]);
        a.add(2 * n + 1, 2 * n - 1, -1.0 / h + r * u[n - 1] * u[n - 1]);
        a.add(2 * n + 1, 2 * n - 2, r * 2.0 * u[n - 1] * v[n - 1]);
        let lu = a.lu()?;
        let pinned = |p1: f64, p2: f64| {
            let mut b = vec![0.0; 2 * m];
            b[2 * n] = p1;
            b[1] = p2;
            lu.solve(&b)
        };
        let e1 = pinned(1.0, 0.0);
        let e2 = pinned(0.0, 1.0);
        let ends1 = fit_ends(g, &e1)?;
        let ends2 = fit_ends(g, &e2)?;
        Ok(Self { profile, lu, e1, e2, ends1, ends2 })
    }

    /// Kernel elements `(U', V')` and `(tU'+U, tV'+V)` in the discrete basis.
    pub fn kernel(&self) -> (Vec<f64>, Vec<f64>) {
        let p = self.profile;
        let m = p.grid.len();
        let tm = p.grid.t_max;
        let (k1p, k1m) = (p.du[m - 1], p.dv[0]);
        let (k2p, k2m) = (tm * p.du[m - 1] + p.u[m - 1], -tm * p.dv[0] + p.v[0]);
        let k1 = self.e1.iter().zip(&self.e2).map(|(a, b)| k1p * a + k1m * b).collect();
        let k2 = self.e1.iter().zip(&self.e2).map(|(a, b)| k2p * a + k2m * b).collect();
        (k1, k2)
    }

    /// Solve `L(Φ, Φ̃) = (H, H̃)` in the canonical gauge (equal end slopes, equal
    /// intercepts), then add `A·(U',V') + B·(tU'+U, tV'+V)`.
    pub fn solve(&self, hh: &[f64], ht: &[f64], gauge: (f64, f64)) -> Result<GrowthSolution> {
        let p = self.profile;
        let g = &p.grid;
        let m = g.len();
        if hh.len() != m || ht.len() != m {
            return Err(Error::LengthMismatch { expected: m, got: hh.len().min(ht.len()) });
        }
        check_decay(g, hh, ht)?;
        let (u, v) = (&p.u, &p.v);
        let h = g.h;
        let q = h * h / 12.0;
        let r = h / 6.0;
        let n = m - 1;
        let mut b = vec![0.0; 2 * m];
        for i in 1..m - 1 {
            b[2 * i] = -q * (hh[i - 1] + 10.0 * hh[i] + hh[i + 1]);
            b[2 * i + 1] = -q * (ht[i - 1] + 10.0 * ht[i] + ht[i + 1]);
        }
        b[0] = -r * (2.0 * hh[0] + hh[1]);
        b[2 * n + 1] = r * (2.0 * ht[n] + ht[n - 1]);
        let part = self.lu.solve(&b);
        let ep = fit_ends(g, &part)?;
        // equal slopes and equal intercepts
        let (e1, e2) = (self.ends1, self.ends2);
        let m11 = e1.plus.slope - e1.minus.slope;
        let m12 = e2.plus.slope - e2.minus.slope;
        let m21 = e1.plus.intercept - e1.minus.intercept;
        let m22 = e2.plus.intercept - e2.minus.intercept;
        let r1 = -(ep.plus.slope - ep.minus.slope);
        let r2 = -(ep.plus.intercept - ep.minus.intercept);
        let det = m11 * m22 - m12 * m21;
        if det.abs() < 1e-14 * (m11.abs() + m12.abs()) * (m21.abs() + m22.abs()) {
            return Err(Error::Singular { row: 0, pivot: det });
        }
        let alpha = (r1 * m22 - m12 * r2) / det;
        let beta = (m11 * r2 - m21 * r1) / det;
        let (k1, k2) = self.kernel();
        let (ga, gb) = gauge;
        let y: Vec<f64> = (0..2 * m).map(|j| part[j] + alpha * self.e1[j] + beta * self.e2[j] + ga * k1[j] + gb * k2[j]).collect();
        let ends = fit_ends(g, &y)?;
        let canonical_b = ep.plus.slope + alpha * e1.plus.slope + beta * e2.plus.slope;
        let phi: Vec<f64> = (0..m).map(|i| y[2 * i]).collect();
        let phi_tilde: Vec<f64> = (0..m).map(|i| y[2 * i + 1]).collect();
        let ts = g.nodes();
        let w = |i: usize| if i == 0 || i == n { 0.5 * h } else { h };
        let mut bi = 0.0;
        let mut am = 0.0;
        for i in 0..m {
            bi += w(i) * (p.du[i] * hh[i] + p.dv[i] * ht[i]);
            am += w(i) * ((ts[i] * p.du[i] + u[i]) * hh[i] + (ts[i] * p.dv[i] + v[i]) * ht[i]);
        }
        let b_integral = -bi / (2.0 * p.psi0);
        let tail = phi_tilde[n].abs().max(phi[0].abs());
        let sol = GrowthSolution {
            grid: g.clone(),
            phi,
            phi_tilde,
            a_plus: ends.plus.intercept,
            a_minus: ends.minus.intercept,
            b: canonical_b,
            gauge,
            fit_plus: ends.plus,
            fit_minus: ends.minus,
            b_integral,
            a_sum_moment: am,
            tail,
        };
        let scale = 1.0 + sol.b.abs().max(sol.b_integral.abs());
        if (sol.b - sol.b_integral).abs() > 1e-6 * scale {
            return Err(Error::Gate(format!("fitted slope {} and integral formula {} disagree", sol.b, sol.b_integral)));
        }
        Ok(sol)
    }
}

fn fit_ends(g: &LineGrid, y: &[f64]) -> Result<Ends> {
    let tm = g.t_max;
    let rp = g.range(tm - FIT_WINDOW, tm);
    let rm = g.range(-tm, -tm + FIT_WINDOW);
    let tp: Vec<f64> = rp.clone().map(|i| g.t(i)).collect();
    let yp: Vec<f64> = rp.map(|i| y[2 * i]).collect();
    let tmn: Vec<f64> = rm.clone().map(|i| g.t(i)).collect();
    let ym: Vec<f64> = rm.map(|i| y[2 * i + 1]).collect();
    Ok(Ends { plus: affine(&tp, &yp)?, minus: affine(&tmn, &ym)? })
}

/// Right-hand sides must be negligible on `|t| ≥ T/2`.
pub fn check_decay(g: &LineGrid, hh: &[f64], ht: &[f64]) -> Result<()> {
    let peak = hh.iter().chain(ht).fold(0.0f64, |m, v| m.max(v.abs()));
    let tm = g.t_max;
    let tail = g.range(-tm, -0.5 * tm).chain(g.range(0.5 * tm, tm)).map(|i| hh[i].abs() + ht[i].abs()).fold(0.0f64, f64::max);
    if tail > 1e-10 * peak.max(1.0) {
        return Err(Error::Gate(format!("right-hand side does not decay: tail {tail:.3e} against peak {peak:.3e}")));
    }
    Ok(())
}

/// Convenience wrapper building the operator for a single solve.
pub fn solve_linearized_growth(profile: &BlowupProfile, hh: &[f64], ht: &[f64], gauge: (f64, f64)) -> Result<GrowthSolution> {
    GrowthOperator::new(profile)?.solve(hh, ht, gauge)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::solve_profile;

    fn bumps(g: &LineGrid, c: [f64; 4]) -> (Vec<f64>, Vec<f64>) {
        let ts = g.nodes();
        let h = ts.iter().map(|t| c[0] * (-4.0 * (t - c[1]).powi(2)).exp()).collect();
        let ht = ts.iter().map(|t| c[2] * (-6.0 * (t - c[3]).powi(2)).exp()).collect();
        (h, ht)
    }

    #[test]
    fn homogeneous_and_kernel_gauges() {
        let p = solve_profile(2.0, 8.0, 4001).unwrap();
        let op = GrowthOperator::new(&p).unwrap();
        let z = vec![0.0; p.grid.len()];
        let s = op.solve(&z, &z, (0.0, 0.0)).unwrap();
        assert!(s.phi.iter().chain(&s.phi_tilde).all(|x| x.abs() < 1e-12));
        assert_eq!(s.b, 0.0);
        let s = op.solve(&z, &z, (1.0, 0.0)).unwrap();
        assert!((s.a_plus - 2.0).abs() < 1e-8 && s.fit_plus.slope.abs() < 1e-8);
        assert!((s.a_minus + 2.0).abs() < 1e-8);
        // and (Φ, Φ̃) = (U', V') on the grid
        let e = s.phi.iter().zip(&p.du).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn slope_is_gauge_independent() {
        let p = solve_profile(2.0, 8.0, 4001).unwrap();
        let op = GrowthOperator::new(&p).unwrap();
        let (h, ht) = bumps(&p.grid, [1.0, 0.3, -0.5, -0.2]);
        let base = op.solve(&h, &ht, (0.0, 0.0)).unwrap();
        let (a, b) = (0.7, -0.4);
        let s = op.solve(&h, &ht, (a, b)).unwrap();
        assert!((s.b - base.b).abs() < 1e-12);
        assert!((s.a_plus - base.a_plus - a * p.psi0 - b * p.k).abs() < 1e-7);
        assert!((s.a_minus - base.a_minus + a * p.psi0 - b * p.k).abs() < 1e-7);
        assert!((s.fit_plus.slope - base.b - 2.0 * b * p.psi0).abs() < 1e-7);
        assert!((s.fit_minus.slope - base.b + 2.0 * b * p.psi0).abs() < 1e-7);
    }

    #[test]
    fn slope_and_intercept_sum_identities() {
        let p = solve_profile(2.0, 8.0, 4001).unwrap();
        let op = GrowthOperator::new(&p).unwrap();
        for c in [[1.0, 0.3, -0.5, -0.2], [-2.0, -0.6, 0.4, 0.9], [0.3, 1.2, 1.1, 0.0]] {
            let (h, ht) = bumps(&p.grid, c);
            let s = op.solve(&h, &ht, (0.0, 0.0)).unwrap();
            assert!((s.b - s.b_integral).abs() < 1e-6);
            assert!((s.a_plus + s.a_minus - s.a_sum_by_parts(p.psi0)).abs() < 1e-6);
            assert!(s.fit_plus.residual < 1e-6 && s.fit_minus.residual < 1e-6);
            assert!(s.tail < 1e-8);
        }
    }

    #[test]
    fn non_decaying_input_is_rejected() {
        let p = solve_profile(1.0, 8.0, 4001).unwrap();
        let h = vec![1.0; p.grid.len()];
        assert!(matches!(solve_linearized_growth(&p, &h, &h, (0.0, 0.0)), Err(Error::Gate(_))));
    }
}
