//! Matching of the outer family with the inner layer: three 4×4 systems in
//! the powers `g^{-1/4}`, `g^{-1/2}`, `g^{-3/4}`, and the `s²`/`s³` check.

mod system;

use serde::{Deserialize, Serialize};

use crate::blowup::{Gauge, InnerCorrections, Phi1Params};
use crate::error::{Error, Result};
use crate::outer::BoundaryData;

pub use system::{LinearSystem, Row, Term, MAX_CONDITION};

/// Every scalar the three systems read.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingInputs {
    pub psi0: f64,
    pub k: f64,
    pub b0: f64,
    /// Constant of `φ₁` at `+∞`.
    pub a1: f64,
    /// Constant of `φ̃₁` at `−∞`.
    pub a1_tilde: f64,
    pub b1: f64,
    pub u1p: f64,
    pub u2p: f64,
    pub u3p: f64,
    pub v1p: f64,
    pub v2p: f64,
    pub v3p: f64,
    pub u0pp: f64,
    pub v0pp: f64,
    pub u0ppp: f64,
    pub v0ppp: f64,
    pub u1pp: f64,
    pub v1pp: f64,
    pub f_prime0: f64,
    pub h_prime0: f64,
    pub r0: f64,
    pub dim: usize,
    pub g: f64,
}

impl MatchingInputs {
    /// Inputs with the `φ₁` constants still unset. Second and third interface
    /// derivatives are taken from the differentiated outer equations rather
    /// than from `data`, whose finite-difference values are far less accurate.
    #[allow(clippy::too_many_arguments)]
    pub fn new(data: &BoundaryData, psi0: f64, k: f64, b0: f64, r0: f64, dim: usize, f_prime0: f64, h_prime0: f64, g: f64) -> Result<Self> {
        if !(psi0 > 0.0) {
            return Err(Error::InvalidInput(format!("psi0 must be positive, got {psi0}")));
        }
        if !(g > 1.0 && g.is_finite()) {
            return Err(Error::InvalidInput(format!("g must exceed 1, got {g}")));
        }
        let d = data;
        let c1 = (dim as f64 - 1.0) / r0;
        let c2 = c1 / r0;
        Ok(Self {
            psi0,
            k,
            b0,
            a1: 0.0,
            a1_tilde: 0.0,
            b1: 0.0,
            u1p: d.u1p,
            u2p: d.u2p,
            u3p: d.u3p,
            v1p: d.v1p,
            v2p: d.v2p,
            v3p: d.v3p,
            u0pp: -c1 * psi0,
            v0pp: c1 * psi0,
            u0ppp: (c2 + c1 * c1 + f_prime0) * psi0,
            v0ppp: -(c2 + c1 * c1 + h_prime0) * psi0,
            u1pp: f_prime0 - c1 * d.u1p,
            v1pp: h_prime0 - c1 * d.v1p,
            f_prime0,
            h_prime0,
            r0,
            dim,
            g,
        })
    }

    /// `(N−1)/r₀`
    pub fn c1(&self) -> f64 {
        (self.dim as f64 - 1.0) / self.r0
    }

    /// `(N−1)/r₀²`
    pub fn c2(&self) -> f64 {
        self.c1() / self.r0
    }

    /// `g^{-1/4}`
    pub fn eps(&self) -> f64 {
        self.g.powf(-0.25)
    }

    fn check_gap(&self) -> Result<()> {
        if (self.u1p - self.v1p).abs() < 1e-10 {
            return Err(Error::Degenerate(format!("u1'(r0) = v1'(r0) = {:.6e}: first-order matching is singular", self.u1p)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Order1 {
    pub delta1: f64,
    pub delta_tilde1: f64,
    pub mu1: f64,
    pub xi: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Order2 {
    pub delta2: f64,
    pub delta_tilde2: f64,
    pub a0: f64,
    pub b0: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Order3 {
    pub delta3: f64,
    pub delta_tilde3: f64,
    pub a1: f64,
    pub b1: f64,
}

pub fn order1_system(i: &MatchingInputs) -> LinearSystem {
    let (p, e, c1) = (i.psi0, i.eps(), i.c1());
    LinearSystem {
        unknowns: ["delta1", "delta_tilde1", "mu1", "xi"],
        rows: [
            Row::new("u value", [1.0, 0.0, 0.0, p]).term("g^{-1/4} k", e * i.k),
            Row::new("u slope", [i.u1p, 0.0, -2.0 * p, -c1 * p]).term("b0 g^{-1/4}", i.b0 * e),
            Row::new("v value", [0.0, 1.0, 0.0, -p]).term("g^{-1/4} k", e * i.k),
            Row::new("v slope", [0.0, i.v1p, 2.0 * p, c1 * p]).term("b0 g^{-1/4}", i.b0 * e),
        ],
    }
}

pub fn solve_order1(i: &MatchingInputs) -> Result<Order1> {
    i.check_gap()?;
    let x = order1_system(i).solve()?;
    Ok(Order1 { delta1: x[0], delta_tilde1: x[1], mu1: x[2], xi: x[3] })
}

/// The four displayed closed forms for the first-order parameters.
pub fn order1_closed_form(i: &MatchingInputs) -> Order1 {
    let (u, v, p, k, b0, e, c1) = (i.u1p, i.v1p, i.psi0, i.k, i.b0, i.eps(), i.c1());
    let d = u - v;
    let xi = (u + v) / d / p * e * k - 2.0 / p * b0 * e / d;
    let mu1 = -c1 / 2.0 * (u + v) / d / p * e * k - u * v / d / p * e * k + c1 / p / d * e * b0 + (u + v) / (2.0 * d) / p * e * b0;
    let delta1 = -2.0 * e * k * v / d + 2.0 / d * e * b0;
    let delta_tilde1 = 2.0 * e * k * u / d - 2.0 / d * e * b0;
    Order1 { delta1, delta_tilde1, mu1, xi }
}

pub fn order2_system(i: &MatchingInputs, o1: &Order1) -> LinearSystem {
    let (p, e, c1, c2, k, b0) = (i.psi0, i.eps(), i.c1(), i.c2(), i.k, i.b0);
    let e2 = e * e;
    let Order1 { delta1, delta_tilde1, mu1, xi } = *o1;
    let slope_b = 2.0 * e * p * mu1 + 2.0 * e * p + 2.0 * c1 * xi * e * p;
    let (fp, hp) = (i.f_prime0, i.h_prime0);
    let gq = 1.0 / e;
    LinearSystem {
        unknowns: ["delta2", "delta_tilde2", "A0", "B0"],
        rows: [
            Row::new("u value", [1.0, 0.0, -e2 * p, -(e2 * k - 2.0 * p * e * xi)])
                .term("mu1 g^{-1/4} k", mu1 * e * k)
                .term("-2 psi0 mu1 xi", -2.0 * p * mu1 * xi)
                .term("-(N-1)/(2r0) psi0 xi^2", -c1 / 2.0 * p * xi * xi)
                .term("-b0 g^{-1/4} xi", -b0 * e * xi),
            Row::new("u slope", [i.u1p, 0.0, 0.0, -slope_b])
                .term("-delta1^2 u2'", -delta1 * delta1 * i.u2p)
                .term("psi0 mu1^2", p * mu1 * mu1)
                .term("2 mu1 (N-1)/r0 psi0 xi", 2.0 * mu1 * c1 * p * xi)
                .term("b0 mu1 g^{-1/4}", b0 * mu1 * e)
                .term("-(N-1)/r0^2 xi^2 psi0", -c2 * xi * xi * p)
                .term("((N-1)/r0^2 + ((N-1)/r0)^2) psi0 xi^2/2", (c2 + c1 * c1) * p * xi * xi / 2.0)
                .term("(N-1)/r0 xi g^{-1/4} b0", c1 * xi * e * b0)
                .term("g^{-1/4} f'(0) (-k xi + g^{1/4} psi0 xi^2/2)", e * fp * (-k * xi + gq * p * xi * xi / 2.0))
                .term("g^{-1/2} b1", e2 * i.b1),
            Row::new("v value", [0.0, 1.0, e2 * p, -(e2 * k + 2.0 * p * e * xi)])
                .term("mu1 g^{-1/4} k", mu1 * e * k)
                .term("2 psi0 mu1 xi", 2.0 * p * mu1 * xi)
                .term("(N-1)/(2r0) psi0 xi^2", c1 / 2.0 * p * xi * xi)
                .term("-b0 g^{-1/4} xi", -b0 * e * xi),
            Row::new("v slope", [0.0, i.v1p, 0.0, slope_b])
                .term("-delta_tilde1^2 v2'", -delta_tilde1 * delta_tilde1 * i.v2p)
                .term("-psi0 mu1^2", -p * mu1 * mu1)
                .term("-2 mu1 (N-1)/r0 psi0 xi", -2.0 * mu1 * c1 * p * xi)
                .term("b0 mu1 g^{-1/4}", b0 * mu1 * e)
                .term("(N-1)/r0^2 xi^2 psi0", c2 * xi * xi * p)
                .term("-((N-1)/r0^2 + ((N-1)/r0)^2) psi0 xi^2/2", -(c2 + c1 * c1) * p * xi * xi / 2.0)
                .term("(N-1)/r0 xi g^{-1/4} b0", c1 * xi * e * b0)
                .term("g^{-1/4} h'(0) (-k xi - g^{1/4} psi0 xi^2/2)", e * hp * (-k * xi - gq * p * xi * xi / 2.0))
                .term("g^{-1/2} b1", e2 * i.b1),
        ],
    }
}

/// The displayed two-term determinant of the second system (unknowns scaled
/// so that the `A₀` column carries no `g^{-1/2}ψ₀`).
pub fn order2_determinant_formula(i: &MatchingInputs) -> f64 {
    let (u, v, p, k, b0, e, c1) = (i.u1p, i.v1p, i.psi0, i.k, i.b0, i.eps(), i.c1());
    2.0 * p * (u - v) * e + 2.0 * (c1 / 2.0 * (u + v) * k + ((u + v) / 2.0 - c1) * b0) * e * e
}

/// Determinant of the assembled second system in the normalisation of
/// [`order2_determinant_formula`].
pub fn order2_determinant(i: &MatchingInputs, o1: &Order1) -> f64 {
    let e = i.eps();
    -order2_system(i, o1).determinant() / (e * e * i.psi0)
}

pub fn solve_order2(i: &MatchingInputs, o1: &Order1) -> Result<Order2> {
    i.check_gap()?;
    let x = order2_system(i, o1).solve()?;
    Ok(Order2 { delta2: x[0], delta_tilde2: x[1], a0: x[2], b0: x[3] })
}

pub fn order3_system(i: &MatchingInputs, o1: &Order1, o2: &Order2) -> LinearSystem {
    let (p, e, c1, c2, k, b0) = (i.psi0, i.eps(), i.c1(), i.c2(), i.k, i.b0);
    let (e2, e3) = (e * e, e * e * e);
    let Order1 { delta1, delta_tilde1, mu1, xi } = *o1;
    let Order2 { delta2, delta_tilde2, b0: bb0, .. } = *o2;
    let (fp, hp) = (i.f_prime0, i.h_prime0);
    let gq = 1.0 / e;
    let cc = c2 + c1 * c1;
    let slope_b = 2.0 * e2 * p * mu1 + 2.0 * p * e2;
    let (xi2, xi3) = (xi * xi, xi * xi * xi);
    LinearSystem {
        unknowns: ["delta3", "delta_tilde3", "A1", "B1"],
        rows: [
            Row::new("u value", [1.0, 0.0, -e3 * p, -(e3 * k - 2.0 * e2 * p * xi)])
                .term("-(N-1)/r0 psi0 mu1 xi^2", -c1 * p * mu1 * xi2)
                .term("(N-1)/(2r0^2) xi^3 psi0", c2 / 2.0 * xi3 * p)
                .term("-((N-1)/r0^2 + ((N-1)/r0)^2) psi0 xi^3/6", -cc * p * xi3 / 6.0)
                .term("-(N-1)/(2r0) xi^2 g^{-1/4} (b0 + 2B0 psi0)", -c1 / 2.0 * xi2 * e * (b0 + 2.0 * bb0 * p))
                .term("g^{-1/4} f'(0) (k xi^2/2 - g^{1/4} psi0 xi^3/6)", e * fp * (k * xi2 / 2.0 - gq * p * xi3 / 6.0))
                .term("-g^{-1/2} b1 xi", -e2 * i.b1 * xi)
                .term("g^{-3/4} a1", e3 * i.a1)
                .term("-g^{-1/4} mu1 xi (b0 + 2B0 psi0)", -e * mu1 * xi * (b0 + 2.0 * bb0 * p))
                .term("-psi0 mu1^2 xi", -p * mu1 * mu1 * xi),
            Row::new("u slope", [i.u1p, 0.0, 0.0, -slope_b])
                .term("-2 delta1 delta2 u2'", -2.0 * delta1 * delta2 * i.u2p)
                .term("-delta1^3 u3'", -delta1 * delta1 * delta1 * i.u3p)
                .term("(N-1)/r0 psi0 mu1^2 xi", c1 * p * mu1 * mu1 * xi)
                .term("-2 (N-1)/r0^2 xi^2 psi0 mu1", -2.0 * c2 * xi2 * p * mu1)
                .term("((N-1)/r0^2 + ((N-1)/r0)^2) mu1 psi0 xi^2", cc * mu1 * p * xi2)
                .term("(N-1)/r0 mu1 xi g^{-1/4} (b0 + 2B0 psi0)", c1 * mu1 * xi * e * (b0 + 2.0 * bb0 * p))
                .term("mu1 g^{-1/4} f'(0) (-k xi + g^{1/4} psi0 xi^2)", mu1 * e * fp * (-k * xi + gq * p * xi2))
                .term("g^{-1/2} mu1 b1", e2 * mu1 * i.b1),
            Row::new("v value", [0.0, 1.0, e3 * p, -(e3 * k + 2.0 * e2 * p * xi)])
                .term("(N-1)/r0 psi0 mu1 xi^2", c1 * p * mu1 * xi2)
                .term("-(N-1)/(2r0^2) xi^3 psi0", -c2 / 2.0 * xi3 * p)
                .term("((N-1)/r0^2 + ((N-1)/r0)^2) psi0 xi^3/6", cc * p * xi3 / 6.0)
                .term("-(N-1)/(2r0) xi^2 g^{-1/4} (b0 - 2B0 psi0)", -c1 / 2.0 * xi2 * e * (b0 - 2.0 * bb0 * p))
                .term("g^{-1/4} h'(0) (k xi^2/2 + g^{1/4} psi0 xi^3/6)", e * hp * (k * xi2 / 2.0 + gq * p * xi3 / 6.0))
                .term("-g^{-1/2} b1 xi", -e2 * i.b1 * xi)
                .term("g^{-3/4} a1~", e3 * i.a1_tilde)
                .term("-g^{-1/4} mu1 xi (b0 - 2B0 psi0)", -e * mu1 * xi * (b0 - 2.0 * bb0 * p))
                .term("psi0 mu1^2 xi", p * mu1 * mu1 * xi),
            Row::new("v slope", [0.0, i.v1p, 0.0, slope_b])
                .term("-2 delta1~ delta2~ v2'", -2.0 * delta_tilde1 * delta_tilde2 * i.v2p)
                .term("-delta1~^3 v3'", -delta_tilde1 * delta_tilde1 * delta_tilde1 * i.v3p)
                .term("-(N-1)/r0 psi0 mu1^2 xi", -c1 * p * mu1 * mu1 * xi)
                .term("2 (N-1)/r0^2 xi^2 psi0 mu1", 2.0 * c2 * xi2 * p * mu1)
                .term("-((N-1)/r0^2 + ((N-1)/r0)^2) mu1 psi0 xi^2", -cc * mu1 * p * xi2)
                .term("(N-1)/r0 mu1 xi g^{-1/4} (b0 - 2B0 psi0)", c1 * mu1 * xi * e * (b0 - 2.0 * bb0 * p))
                .term("mu1 g^{-1/4} h'(0) (-k xi - g^{1/4} psi0 xi^2)", mu1 * e * hp * (-k * xi - gq * p * xi2))
                .term("g^{-1/2} mu1 b1", e2 * mu1 * i.b1),
        ],
    }
}

pub fn solve_order3(i: &MatchingInputs, o1: &Order1, o2: &Order2) -> Result<Order3> {
    i.check_gap()?;
    let x = order3_system(i, o1, o2).solve()?;
    Ok(Order3 { delta3: x[0], delta_tilde3: x[1], a1: x[2], b1: x[3] })
}

/// All twelve matching unknowns at one `g`, with the `φ₁` constants they fed on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingParameters {
    pub g: f64,
    pub xi: f64,
    pub mu1: f64,
    pub delta: [f64; 3],
    pub delta_tilde: [f64; 3],
    pub gauge: Gauge,
    pub a1: f64,
    pub a1_tilde: f64,
    pub b1: f64,
    /// Condition numbers of the three systems.
    pub condition: [f64; 3],
}

impl MatchingParameters {
    pub fn mu(&self) -> f64 {
        1.0 + self.mu1
    }

    pub fn delta_sum(&self) -> f64 {
        self.delta.iter().sum()
    }

    pub fn delta_tilde_sum(&self) -> f64 {
        self.delta_tilde.iter().sum()
    }

    pub fn order1(&self) -> Order1 {
        Order1 { delta1: self.delta[0], delta_tilde1: self.delta_tilde[0], mu1: self.mu1, xi: self.xi }
    }

    pub fn order2(&self) -> Order2 {
        Order2 { delta2: self.delta[1], delta_tilde2: self.delta_tilde[1], a0: self.gauge.a0, b0: self.gauge.b0 }
    }

    pub fn phi1_params(&self, f_prime0: f64, h_prime0: f64) -> Phi1Params {
        phi1_params(&self.order1(), &self.order2(), self.g, f_prime0, h_prime0)
    }
}

fn phi1_params(o1: &Order1, o2: &Order2, g: f64, f_prime0: f64, h_prime0: f64) -> Phi1Params {
    Phi1Params { mu: 1.0 + o1.mu1, xi_hat: g.powf(0.25) * o1.xi, a0: o2.a0, b0: o2.b0, f_prime0, h_prime0 }
}

/// Solves the three systems in turn. `b₁` depends on `(A₀, B₀)` through the
/// `φ₁` basis, so the second system is iterated to a fixed point first.
pub fn match_parameters(base: &MatchingInputs, inner: &InnerCorrections) -> Result<MatchingParameters> {
    let mut inp = *base;
    inp.b0 = inner.b0;
    let o1 = solve_order1(&inp)?;
    let c1 = order1_system(&inp).condition();
    let mut o2 = Order2::default();
    let mut converged = false;
    for _ in 0..50 {
        let prm = phi1_params(&o1, &o2, inp.g, inp.f_prime0, inp.h_prime0);
        inp.b1 = inner.phi1_affine(&prm).2;
        let next = solve_order2(&inp, &o1)?;
        let change = (next.a0 - o2.a0).abs() + (next.b0 - o2.b0).abs() + (next.delta2 - o2.delta2).abs();
        let size = next.a0.abs() + next.b0.abs() + next.delta2.abs();
        o2 = next;
        if change <= 1e-15 * size.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Gate("second matching system: b1(A0, B0) fixed point did not settle".into()));
    }
    let c2 = order2_system(&inp, &o1).condition();
    let prm = phi1_params(&o1, &o2, inp.g, inp.f_prime0, inp.h_prime0);
    let (a1, a1_tilde, b1) = inner.phi1_affine(&prm);
    inp.a1 = a1;
    inp.a1_tilde = a1_tilde;
    inp.b1 = b1;
    let o3 = solve_order3(&inp, &o1, &o2)?;
    let c3 = order3_system(&inp, &o1, &o2).condition();
    Ok(MatchingParameters {
        g: inp.g,
        xi: o1.xi,
        mu1: o1.mu1,
        delta: [o1.delta1, o2.delta2, o3.delta3],
        delta_tilde: [o1.delta_tilde1, o2.delta_tilde2, o3.delta_tilde3],
        gauge: Gauge { a0: o2.a0, b0: o2.b0, a1: o3.a1, b1: o3.b1 },
        a1,
        a1_tilde,
        b1,
        condition: [c1, c2, c3],
    })
}

/// Coefficients of `Σ p_j t^j` rewritten in `s` through `t = α(s − ξ)`.
pub fn t_to_s(p: &[f64; 4], alpha: f64, xi: f64) -> [f64; 4] {
    const BINOM: [[f64; 4]; 4] = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
    let mut out = [0.0; 4];
    for j in 0..4 {
        let c = p[j] * alpha.powi(j as i32);
        for m in 0..=j {
            // (s − ξ)^j = Σ_m C(j,m) s^m (−ξ)^{j−m}
            out[m] += c * BINOM[j][m] * (-xi).powi((j - m) as i32);
        }
    }
    out
}

/// Cubic Taylor polynomials in `s = r − r₀` of the outer and inner
/// pieces on each side, and their coefficient gaps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub g: f64,
    pub outer_u: [f64; 4],
    pub inner_u: [f64; 4],
    pub outer_v: [f64; 4],
    pub inner_v: [f64; 4],
    /// `|outer − inner|` per power of `s`, first component.
    pub gap_u: [f64; 4],
    pub gap_v: [f64; 4],
}

impl ExpansionReport {
    pub fn s2_gap(&self) -> f64 {
        self.gap_u[2].max(self.gap_v[2])
    }

    pub fn s3_gap(&self) -> f64 {
        self.gap_u[3].max(self.gap_v[3])
    }
}

/// Large-`|t|` polynomial of the inner pair in `t`, `[first at +∞, second at −∞]`.
pub fn inner_polynomials(inner: &InnerCorrections, prm: &MatchingParameters, f_prime0: f64, h_prime0: f64) -> [[f64; 4]; 2] {
    let (p, k, g) = (inner.psi0, inner.k, prm.g);
    let (e, e2, e3) = (g.powf(-0.25), g.powf(-0.5), g.powf(-0.75));
    let mu = prm.mu();
    let Gauge { a0, b0: bb0, a1: aa1, b1: bb1 } = prm.gauge;
    let ph = prm.phi1_params(f_prime0, h_prime0);
    let (pp1, pm1) = (inner.phi1_peel_plus(&ph), inner.phi1_peel_minus(&ph));
    let (z_p, z_m) = (&inner.phi0.peel_plus, &inner.phi0.peel_minus);
    let (a0p, a0m, b0) = inner.phi0.affine();
    let mut u = [0.0; 4];
    let mut v = [0.0; 4];
    for j in 0..4 {
        u[j] += e2 * z_p.get(j).copied().unwrap_or(0.0) + e3 * pp1[j];
        v[j] += e2 * z_m.get(j).copied().unwrap_or(0.0) + e3 * pm1[j];
    }
    u[0] += mu * e * k + e2 * (a0p + a0 * p + bb0 * k) + e3 * (prm.a1 + aa1 * p + bb1 * k);
    u[1] += mu * e * p + e2 * (b0 + 2.0 * bb0 * p) + e3 * (prm.b1 + 2.0 * bb1 * p);
    v[0] += mu * e * k + e2 * (a0m - a0 * p + bb0 * k) + e3 * (prm.a1_tilde - aa1 * p + bb1 * k);
    v[1] += -mu * e * p + e2 * (b0 - 2.0 * bb0 * p) + e3 * (prm.b1 - 2.0 * bb1 * p);
    [u, v]
}

/// Compares the inner and outer cubic polynomials in `s`. The outer ones are
/// the Taylor data at `r₀` (values, slopes through `δ³`, `(u₀''+δu₁'')/2`, `u₀'''/6`).
pub fn verify_s2_s3(i: &MatchingInputs, prm: &MatchingParameters, inner: &InnerCorrections) -> ExpansionReport {
    let (d, dt) = (prm.delta_sum(), prm.delta_tilde_sum());
    let outer_u = [d, i.psi0 + d * i.u1p + d * d * i.u2p + d * d * d * i.u3p, (i.u0pp + d * i.u1pp) / 2.0, i.u0ppp / 6.0];
    let outer_v = [dt, -i.psi0 + dt * i.v1p + dt * dt * i.v2p + dt * dt * dt * i.v3p, (i.v0pp + dt * i.v1pp) / 2.0, i.v0ppp / 6.0];
    let [pu, pv] = inner_polynomials(inner, prm, i.f_prime0, i.h_prime0);
    let alpha = prm.mu() * prm.g.powf(0.25);
    let inner_u = t_to_s(&pu, alpha, prm.xi);
    let inner_v = t_to_s(&pv, alpha, prm.xi);
    let gap = |a: [f64; 4], b: [f64; 4]| [(a[0] - b[0]).abs(), (a[1] - b[1]).abs(), (a[2] - b[2]).abs(), (a[3] - b[3]).abs()];
    ExpansionReport { g: prm.g, outer_u, inner_u, outer_v, inner_v, gap_u: gap(outer_u, inner_u), gap_v: gap(outer_v, inner_v) }
}

/// `u₀'''(r₀)` from the differentiated equation: `((N−1)/r₀² + ((N−1)/r₀)² + f'(0))·ψ₀`.
pub fn u0ppp_identity(psi0: f64, r0: f64, dim: usize, f_prime0: f64) -> f64 {
    let c1 = (dim as f64 - 1.0) / r0;
    (c1 / r0 + c1 * c1 + f_prime0) * psi0
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::construction::fixture;
    use crate::fit::loglog_slope;

    fn synthetic(psi0: f64, k: f64, b0: f64, u1p: f64, v1p: f64, r0: f64, g: f64) -> MatchingInputs {
        let data = BoundaryData { u1p, v1p, u2p: 0.3, v2p: -0.2, u3p: 0.1, v3p: 0.05, ..Default::default() };
        MatchingInputs::new(&data, psi0, k, b0, r0, 3, 0.0, 0.0, g).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn order1_matches_closed_forms(psi0 in 1.0..100.0f64, k in 0.1..5.0f64, b0 in -5.0..5.0f64,
                                       u1p in -20.0..20.0f64, off in 1.0..20.0f64, r0 in 0.1..0.9f64, lg in 4.0..8.0f64) {
            let i = synthetic(psi0, k, b0, u1p, u1p - off, r0, 10f64.powf(lg));
            let n = solve_order1(&i).unwrap();
            let c = order1_closed_form(&i);
            for (a, b) in [(n.delta1, c.delta1), (n.delta_tilde1, c.delta_tilde1), (n.mu1, c.mu1), (n.xi, c.xi)] {
                prop_assert!(rel(a, b) < 1e-12 || (a - b).abs() < 1e-15, "{a} vs {b}");
            }
        }

        #[test]
        fn order2_determinant_identity(psi0 in 1.0..100.0f64, k in 0.1..5.0f64, b0 in -5.0..5.0f64,
                                       u1p in -20.0..20.0f64, off in 1.0..20.0f64, r0 in 0.1..0.9f64, lg in 4.0..8.0f64) {
            let i = synthetic(psi0, k, b0, u1p, u1p - off, r0, 10f64.powf(lg));
            let o1 = solve_order1(&i).unwrap();
            let (a, b) = (order2_determinant(&i, &o1), order2_determinant_formula(&i));
            prop_assert!(rel(a, b) < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn homogeneous_data_gives_zero_parameters() {
        let i = synthetic(10.0, 0.0, 0.0, 3.0, -1.0, 0.3, 1e6);
        let o1 = solve_order1(&i).unwrap();
        assert_eq!([o1.delta1, o1.delta_tilde1, o1.mu1, o1.xi].map(f64::abs).iter().cloned().fold(0.0, f64::max), 0.0);
        let o2 = solve_order2(&i, &o1).unwrap();
        assert_eq!(o2.delta2.abs().max(o2.a0.abs()).max(o2.b0.abs()), 0.0);
    }

    #[test]
    fn equal_slopes_are_degenerate() {
        let i = synthetic(10.0, 1.0, 0.5, 2.0, 2.0, 0.3, 1e6);
        assert!(matches!(solve_order1(&i), Err(Error::Degenerate(_))));
    }

    #[test]
    fn condition_grows_as_the_slope_gap_closes() {
        let cond = |gap: f64| order1_system(&synthetic(10.0, 1.0, 0.5, 2.0, 2.0 - gap, 0.3, 1e6)).condition();
        let c: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4].iter().map(|&d| cond(d)).collect();
        for w in c.windows(2) {
            assert!(w[1] / w[0] > 5.0, "{c:?}");
        }
    }

    #[test]
    fn interface_identities_replace_difference_quotients() {
        let c = fixture::cubic();
        let i = c.matching_inputs(1e6).unwrap();
        let d = c.outer.data;
        assert!(rel(i.u0pp, d.u0pp) < 1e-4 && rel(i.v0pp, d.v0pp) < 1e-4);
        assert!(rel(i.u0ppp, d.u0ppp) < 1e-3 && rel(i.v0ppp, d.v0ppp) < 1e-3, "{} {}", i.u0ppp, d.u0ppp);
        assert!(rel(i.u1pp, d.u1pp) < 1e-3, "{} {}", i.u1pp, d.u1pp);
        assert_eq!(i.u0ppp, u0ppp_identity(c.psi0(), c.r0(), 3, 0.0));
    }

    #[test]
    fn parameters_follow_their_powers_of_g() {
        let c = fixture::cubic();
        let gs = [1e4, 1e5, 1e6, 1e7, 1e8];
        let prm: Vec<MatchingParameters> = gs.iter().map(|&g| c.match_at(g).unwrap()).collect();
        for (j, want) in [(0, -0.25), (1, -0.5), (2, -0.75)] {
            let ys: Vec<f64> = prm.iter().map(|p| p.delta[j].abs()).collect();
            let s = loglog_slope(&gs, &ys).unwrap();
            assert!((s - want).abs() < 0.05, "delta{} slope {s}", j + 1);
        }
        let xi: Vec<f64> = prm.iter().map(|p| p.xi.abs()).collect();
        assert!((loglog_slope(&gs, &xi).unwrap() + 0.25).abs() < 0.05);
        // the gauges are O(1) and settle
        for p in &prm {
            assert!(p.gauge.a0.abs() < 10.0 && p.gauge.a1.abs() < 100.0, "{:?}", p.gauge);
            assert!(p.condition.iter().all(|&k| k < MAX_CONDITION));
        }
        let reps: Vec<ExpansionReport> = prm.iter().map(|p| c.expansion_check(p).unwrap()).collect();
        for (j, want) in [(0usize, -1.0), (1, -1.0)] {
            let ys: Vec<f64> = reps.iter().map(|r| r.gap_u[j].max(r.gap_v[j])).collect();
            let s = loglog_slope(&gs, &ys).unwrap();
            assert!(s < want + 0.1, "s^{j} gap slope {s}: {ys:?}");
        }
        // s² and s³ are matched one order lower
        for j in [2usize, 3] {
            let ys: Vec<f64> = reps.iter().map(|r| r.gap_u[j].max(r.gap_v[j])).collect();
            let s = loglog_slope(&gs, &ys).unwrap();
            assert!(s < -0.2, "s^{j} gap slope {s}: {ys:?}");
        }
    }
}
