use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::growth::{GrowthOperator, GrowthSolution};
use super::profile::{BlowupProfile, LineGrid};

/// Quintic smoothstep: 0 for `t ≤ −1`, 1 for `t ≥ 1`, C² in between.
pub fn smoothstep(t: f64) -> [f64; 3] {
    if t <= -1.0 {
        return [0.0; 3];
    }
    if t >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let s = 0.5 * (t + 1.0);
    let s2 = s * s;
    [s2 * s * (10.0 - 15.0 * s + 6.0 * s2), 0.5 * 30.0 * s2 * (1.0 - s) * (1.0 - s), 0.25 * 60.0 * s * (1.0 - 3.0 * s + 2.0 * s2)]
}

fn poly(c: &[f64], t: f64) -> [f64; 3] {
    let mut y = [0.0; 3];
    for &a in c.iter().rev() {
        y[0] = y[0] * t + a;
    }
    for j in (1..c.len()).rev() {
        y[1] = y[1] * t + j as f64 * c[j];
    }
    for j in (2..c.len()).rev() {
        y[2] = y[2] * t + (j * (j - 1)) as f64 * c[j];
    }
    y
}

/// Coefficients of `P` with `−P'' = p` and `P(0) = P'(0) = 0`.
fn double_antiderivative(p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 2];
    for (j, &a) in p.iter().enumerate() {
        out[j + 2] = -a / ((j + 1) * (j + 2)) as f64;
    }
    out
}

/// The right-hand-side families of the inner corrections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Piece {
    /// `((N−1)/r₀)·(U', V')`: the first correction.
    Curvature,
    /// `−((N−1)/r₀²)·(U', V')`, multiplied by `ξ̂ = g^{1/4}ξ`.
    Shift,
    /// `−((N−1)/r₀²)·t·(U', V')`.
    Stretch,
    /// `((N−1)/r₀)·(φ₀' + Z', φ̃₀' + Z̃')` for the canonical `φ₀`.
    Drift,
    /// `((N−1)/r₀)·(U'', V'')`, multiplied by `A₀`.
    GaugeA,
    /// `((N−1)/r₀)·(tU''+2U', tV''+2V')`, multiplied by `B₀`.
    GaugeB,
    /// `(−U, 0)`, multiplied by `f'(0)`.
    ReactionF,
    /// `(0, −V)`, multiplied by `h'(0)`.
    ReactionH,
    /// `−Q(φ₀, φ₀)`, the quadratic coupling of the first correction; `Q` below.
    Quadratic,
    /// `−Q(φ₀, K₁)`, multiplied by `2A₀`.
    QuadraticA,
    /// `−Q(K₁, K₁)`, multiplied by `A₀²`.
    QuadraticAA,
    /// `−Q(φ₀, K₂)`, multiplied by `2B₀`.
    QuadraticB,
    /// `−Q(K₁, K₂)`, multiplied by `2A₀B₀`.
    QuadraticAB,
    /// `−Q(K₂, K₂)`, multiplied by `B₀²`.
    QuadraticBB,
}

impl Piece {
    pub const PHI1: [Piece; 13] = [
        Piece::Shift,
        Piece::Stretch,
        Piece::Drift,
        Piece::GaugeA,
        Piece::GaugeB,
        Piece::ReactionF,
        Piece::ReactionH,
        Piece::Quadratic,
        Piece::QuadraticA,
        Piece::QuadraticAA,
        Piece::QuadraticB,
        Piece::QuadraticAB,
        Piece::QuadraticBB,
    ];
}

/// Profile values at one point.
#[derive(Clone, Copy, Debug)]
pub struct LayerPoint {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub du: f64,
    pub dv: f64,
}

impl LayerPoint {
    pub fn of(p: &BlowupProfile, t: f64) -> Self {
        Self { t, u: p.u_at(t), v: p.v_at(t), du: p.du_at(t), dv: p.dv_at(t) }
    }
}

/// Geometric constants `(N−1)/r₀` and `(N−1)/r₀²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curvature {
    pub c1: f64,
    pub c2: f64,
}

impl Curvature {
    pub fn new(r0: f64, dim: usize) -> Self {
        let n1 = dim as f64 - 1.0;
        Self { c1: n1 / r0, c2: n1 / (r0 * r0) }
    }
}

/// Canonical `φ₀` and its derivative at one point.
#[derive(Clone, Copy, Debug, Default)]
struct Phi0Point {
    val: (f64, f64),
    der: (f64, f64),
}

/// `Q(a, b)`: symmetric part of `(u v², v u²)` bilinear in the corrections.
fn quad(p: LayerPoint, a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let cross = a.0 * b.1 + b.0 * a.1;
    (p.v * cross + p.u * a.1 * b.1, p.u * cross + p.v * a.0 * b.0)
}

fn rhs(piece: Piece, k: Curvature, p: LayerPoint, phi0: Phi0Point) -> (f64, f64) {
    let LayerPoint { t, u, v, du, dv } = p;
    let k1 = (du, dv);
    let k2 = (t * du + u, t * dv + v);
    let neg = |q: (f64, f64)| (-q.0, -q.1);
    let drift = phi0.der;
    match piece {
        Piece::Curvature => (k.c1 * du, k.c1 * dv),
        Piece::Shift => (-k.c2 * du, -k.c2 * dv),
        Piece::Stretch => (-k.c2 * t * du, -k.c2 * t * dv),
        Piece::Drift => (k.c1 * drift.0, k.c1 * drift.1),
        Piece::GaugeA => (k.c1 * u * v * v, k.c1 * v * u * u),
        Piece::GaugeB => (k.c1 * (t * u * v * v + 2.0 * du), k.c1 * (t * v * u * u + 2.0 * dv)),
        Piece::ReactionF => (-u, 0.0),
        Piece::ReactionH => (0.0, -v),
        Piece::Quadratic => neg(quad(p, phi0.val, phi0.val)),
        Piece::QuadraticA => neg(quad(p, phi0.val, k1)),
        Piece::QuadraticAA => neg(quad(p, k1, k1)),
        Piece::QuadraticB => neg(quad(p, phi0.val, k2)),
        Piece::QuadraticAB => neg(quad(p, k1, k2)),
        Piece::QuadraticBB => neg(quad(p, k2, k2)),
    }
}

/// A correction split as polynomial peel plus a decaying-RHS growth solution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeeledPiece {
    pub piece: Piece,
    /// Peel of the first component, active for `t ≥ −1`.
    pub peel_plus: Vec<f64>,
    /// Peel of the second component, active for `t ≤ 1`.
    pub peel_minus: Vec<f64>,
    pub growth: GrowthSolution,
}

impl PeeledPiece {
    /// `[(Y, Y', Y''), (Ỹ, Ỹ', Ỹ'')]` of the peel.
    pub fn peel_at(&self, t: f64) -> [[f64; 3]; 2] {
        let c = smoothstep(t);
        let p = poly(&self.peel_plus, t);
        let y1 = [p[0] * c[0], p[1] * c[0] + p[0] * c[1], p[2] * c[0] + 2.0 * p[1] * c[1] + p[0] * c[2]];
        let c = smoothstep(-t);
        let q = poly(&self.peel_minus, t);
        let y2 = [q[0] * c[0], q[1] * c[0] - q[0] * c[1], q[2] * c[0] - 2.0 * q[1] * c[1] + q[0] * c[2]];
        [y1, y2]
    }

    pub fn at(&self, t: f64) -> (f64, f64) {
        let y = self.peel_at(t);
        let g = self.growth.at(t);
        (y[0][0] + g.0, y[1][0] + g.1)
    }

    pub fn derivative_at(&self, t: f64) -> (f64, f64) {
        let y = self.peel_at(t);
        let g = self.growth.derivative_at(t);
        (y[0][1] + g.0, y[1][1] + g.1)
    }

    /// Affine parts `(a₊, a₋, b)` at `±∞` (the peel has no constant or linear term).
    pub fn affine(&self) -> (f64, f64, f64) {
        (self.growth.a_plus, self.growth.a_minus, self.growth.b)
    }
}

/// Polynomial tails `(p, q)` of each right-hand side at `+∞` (first component) and `−∞` (second).
fn tails(piece: Piece, k: Curvature, psi0: f64, kk: f64, b0: f64) -> (Vec<f64>, Vec<f64>) {
    let (c1, c2) = (k.c1, k.c2);
    match piece {
        Piece::Curvature => (vec![c1 * psi0], vec![-c1 * psi0]),
        Piece::Shift => (vec![-c2 * psi0], vec![c2 * psi0]),
        Piece::Stretch => (vec![0.0, -c2 * psi0], vec![0.0, c2 * psi0]),
        Piece::Drift => (vec![c1 * b0, -c1 * c1 * psi0], vec![c1 * b0, c1 * c1 * psi0]),
        Piece::GaugeA => (vec![], vec![]),
        Piece::GaugeB => (vec![2.0 * c1 * psi0], vec![-2.0 * c1 * psi0]),
        Piece::ReactionF => (vec![-kk, -psi0], vec![]),
        Piece::ReactionH => (vec![], vec![-kk, psi0]),
        Piece::Quadratic | Piece::QuadraticA | Piece::QuadraticAA | Piece::QuadraticB | Piece::QuadraticAB | Piece::QuadraticBB => (vec![], vec![]),
    }
}

fn solve_piece(op: &GrowthOperator<'_>, piece: Piece, k: Curvature, b0: f64, drift: Option<&PeeledPiece>) -> Result<PeeledPiece> {
    let prof = op.profile;
    let g = &prof.grid;
    let m = g.len();
    let (p, q) = tails(piece, k, prof.psi0, prof.k, b0);
    let mut out = PeeledPiece { piece, peel_plus: double_antiderivative(&p), peel_minus: double_antiderivative(&q), growth: empty(op) };
    if p.is_empty() {
        out.peel_plus.clear();
    }
    if q.is_empty() {
        out.peel_minus.clear();
    }
    let phi0_nodal = drift.map(|d| phi0_nodal(d, g));
    let (mut h1, mut h2) = (vec![0.0; m], vec![0.0; m]);
    for i in 0..m {
        let pt = LayerPoint { t: g.t(i), u: prof.u[i], v: prof.v[i], du: prof.du[i], dv: prof.dv[i] };
        let d = phi0_nodal.as_ref().map_or(Phi0Point::default(), |d| d[i]);
        let (r1, r2) = rhs(piece, k, pt, d);
        let y = out.peel_at(pt.t);
        // L applied to the peel
        let l1 = -y[0][2] + pt.v * pt.v * y[0][0] + 2.0 * pt.u * pt.v * y[1][0];
        let l2 = -y[1][2] + pt.u * pt.u * y[1][0] + 2.0 * pt.u * pt.v * y[0][0];
        h1[i] = r1 - l1;
        h2[i] = r2 - l2;
    }
    out.growth = op.solve(&h1, &h2, (0.0, 0.0)).map_err(|e| match e {
        Error::Gate(msg) => Error::Gate(format!("{piece:?}: {msg}")),
        e => e,
    })?;
    Ok(out)
}

fn phi0_nodal(d: &PeeledPiece, g: &LineGrid) -> Vec<Phi0Point> {
    let (g1, g2) = d.growth.nodal_derivatives();
    (0..g.len())
        .map(|i| {
            let y = d.peel_at(g.t(i));
            Phi0Point { val: (y[0][0] + d.growth.phi[i], y[1][0] + d.growth.phi_tilde[i]), der: (y[0][1] + g1[i], y[1][1] + g2[i]) }
        })
        .collect()
}

fn empty(op: &GrowthOperator<'_>) -> GrowthSolution {
    let m = op.profile.grid.len();
    op.solve(&vec![0.0; m], &vec![0.0; m], (0.0, 0.0)).expect("homogeneous solve")
}

/// Gauge parameters, fixed later by matching.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub a0: f64,
    pub b0: f64,
    pub a1: f64,
    pub b1: f64,
}

/// Parameters of the `φ₁` combination.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Phi1Params {
    pub mu: f64,
    /// `g^{1/4}·ξ`
    pub xi_hat: f64,
    pub a0: f64,
    pub b0: f64,
    pub f_prime0: f64,
    pub h_prime0: f64,
}

impl Phi1Params {
    fn weight(&self, piece: Piece) -> f64 {
        let mi = 1.0 / self.mu;
        match piece {
            Piece::Curvature => 0.0,
            Piece::Shift => self.xi_hat,
            Piece::Stretch | Piece::Drift => mi,
            Piece::GaugeA => mi * self.a0,
            Piece::GaugeB => mi * self.b0,
            Piece::ReactionF => mi * self.f_prime0,
            Piece::ReactionH => mi * self.h_prime0,
            Piece::Quadratic => mi,
            Piece::QuadraticA => 2.0 * mi * self.a0,
            Piece::QuadraticAA => mi * self.a0 * self.a0,
            Piece::QuadraticB => 2.0 * mi * self.b0,
            Piece::QuadraticAB => 2.0 * mi * self.a0 * self.b0,
            Piece::QuadraticBB => mi * self.b0 * self.b0,
        }
    }
}

/// `φ₀` and the `φ₁` basis, all g-independent; powers of g enter at assembly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InnerCorrections {
    pub curvature: Curvature,
    pub psi0: f64,
    pub k: f64,
    /// `φ₀` in the canonical gauge; `Z` is its peel.
    pub phi0: PeeledPiece,
    pub b0: f64,
    /// Max `|F̃₀(−t) + F₀(t)|` relative to `max|F₀|`.
    pub antisymmetry_defect: f64,
    pub phi1: Vec<PeeledPiece>,
}

pub fn compute_phi0(op: &GrowthOperator<'_>, r0: f64, dim: usize) -> Result<PeeledPiece> {
    let k = Curvature::new(r0, dim);
    solve_piece(op, Piece::Curvature, k, 0.0, None)
}

/// Relative antisymmetry defect of the decaying φ₀ right-hand side.
fn antisymmetry(profile: &BlowupProfile, phi0: &PeeledPiece, k: Curvature) -> f64 {
    let g = &profile.grid;
    let m = g.len();
    let f = |i: usize| {
        let pt = LayerPoint { t: g.t(i), u: profile.u[i], v: profile.v[i], du: profile.du[i], dv: profile.dv[i] };
        let (r1, r2) = rhs(Piece::Curvature, k, pt, Phi0Point::default());
        let y = phi0.peel_at(pt.t);
        (r1 - (-y[0][2] + pt.v * pt.v * y[0][0] + 2.0 * pt.u * pt.v * y[1][0]), r2 - (-y[1][2] + pt.u * pt.u * y[1][0] + 2.0 * pt.u * pt.v * y[0][0]))
    };
    let vals: Vec<(f64, f64)> = (0..m).map(f).collect();
    let peak = vals.iter().fold(0.0f64, |a, v| a.max(v.0.abs()));
    (0..m).map(|i| (vals[m - 1 - i].1 + vals[i].0).abs()).fold(0.0, f64::max) / peak.max(f64::MIN_POSITIVE)
}

impl InnerCorrections {
    /// `φ₀` and every `φ₁` basis piece for the interface `(r₀, N)`.
    pub fn compute(profile: &BlowupProfile, r0: f64, dim: usize) -> Result<Self> {
        let op = GrowthOperator::new(profile)?;
        let k = Curvature::new(r0, dim);
        let phi0 = compute_phi0(&op, r0, dim)?;
        let antisymmetry_defect = antisymmetry(profile, &phi0, k);
        if antisymmetry_defect > 1e-8 {
            return Err(Error::Gate(format!("phi0 right-hand side antisymmetry defect {antisymmetry_defect:.3e}")));
        }
        let b0 = phi0.growth.b;
        let phi1 = Piece::PHI1.iter().map(|&p| solve_piece(&op, p, k, b0, Some(&phi0))).collect::<Result<Vec<_>>>()?;
        Ok(Self { curvature: k, psi0: profile.psi0, k: profile.k, phi0, b0, antisymmetry_defect, phi1 })
    }

    pub fn piece(&self, p: Piece) -> &PeeledPiece {
        if p == Piece::Curvature {
            return &self.phi0;
        }
        self.phi1.iter().find(|x| x.piece == p).expect("all phi1 pieces are computed")
    }

    /// `(a₁⁺, a₁⁻, b₁)` of the φ₁ combination before its own gauge.
    pub fn phi1_affine(&self, prm: &Phi1Params) -> (f64, f64, f64) {
        self.phi1.iter().fold((0.0, 0.0, 0.0), |acc, p| {
            let w = prm.weight(p.piece);
            let (a, am, b) = p.affine();
            (acc.0 + w * a, acc.1 + w * am, acc.2 + w * b)
        })
    }

    /// Polynomial peel coefficients of the φ₁ combination at `+∞` (first component).
    pub fn phi1_peel_plus(&self, prm: &Phi1Params) -> [f64; 4] {
        self.phi1_peel(prm, |p| &p.peel_plus)
    }

    /// Same at `−∞` (second component), as a polynomial in `t`.
    pub fn phi1_peel_minus(&self, prm: &Phi1Params) -> [f64; 4] {
        self.phi1_peel(prm, |p| &p.peel_minus)
    }

    fn phi1_peel(&self, prm: &Phi1Params, side: impl Fn(&PeeledPiece) -> &Vec<f64>) -> [f64; 4] {
        let mut c = [0.0; 4];
        for p in &self.phi1 {
            let w = prm.weight(p.piece);
            for (j, a) in side(p).iter().enumerate() {
                c[j] += w * a;
            }
        }
        c
    }

    /// `φ₁` combination (first-order part, g^{-3/4} units) and its derivative.
    pub fn phi1_at(&self, prm: &Phi1Params, t: f64) -> ((f64, f64), (f64, f64)) {
        let mut v = (0.0, 0.0);
        let mut d = (0.0, 0.0);
        for p in &self.phi1 {
            let w = prm.weight(p.piece);
            if w == 0.0 {
                continue;
            }
            let (a, b) = p.at(t);
            let (da, db) = p.derivative_at(t);
            v = (v.0 + w * a, v.1 + w * b);
            d = (d.0 + w * da, d.1 + w * db);
        }
        (v, d)
    }

    /// Right-hand side of the φ₁ combination at `t`.
    pub fn phi1_rhs(&self, profile: &BlowupProfile, prm: &Phi1Params, t: f64) -> (f64, f64) {
        let pt = LayerPoint::of(profile, t);
        let phi0 = Phi0Point { val: self.phi0.at(t), der: self.phi0.derivative_at(t) };
        self.phi1.iter().fold((0.0, 0.0), |acc, p| {
            let w = prm.weight(p.piece);
            let r = rhs(p.piece, self.curvature, pt, phi0);
            (acc.0 + w * r.0, acc.1 + w * r.1)
        })
    }

    /// Right-hand side of `φ₀` at `t`.
    pub fn phi0_rhs(&self, profile: &BlowupProfile, t: f64) -> (f64, f64) {
        rhs(Piece::Curvature, self.curvature, LayerPoint::of(profile, t), Phi0Point::default())
    }

    /// Defining-equation re-check of an assembled piece: the peel is removed
    /// from the nodal values, its `L` applied exactly, and the remainder checked
    /// against the Numerov form, row-scaled.
    pub fn numerov_defect(&self, profile: &BlowupProfile, piece: Piece) -> f64 {
        let pp = self.piece(piece);
        let g = &profile.grid;
        let m = g.len();
        let h = g.h;
        let phi0 = phi0_nodal(&self.phi0, g);
        let mut peak: f64 = 0.0;
        // growth part G = Φ − Y and its Numerov right-hand side G'' = V²G + 2UVG̃ − (R − L(Y))
        let rows: Vec<((f64, f64), (f64, f64))> = (0..m)
            .map(|i| {
                let t = g.t(i);
                let pt = LayerPoint { t, u: profile.u[i], v: profile.v[i], du: profile.du[i], dv: profile.dv[i] };
                let r = rhs(piece, self.curvature, pt, phi0[i]);
                peak = peak.max(r.0.abs()).max(r.1.abs());
                let y = pp.peel_at(t);
                let (a, b) = (pp.growth.phi[i], pp.growth.phi_tilde[i]);
                let ly =
                    (-y[0][2] + pt.v * pt.v * y[0][0] + 2.0 * pt.u * pt.v * y[1][0], -y[1][2] + pt.u * pt.u * y[1][0] + 2.0 * pt.u * pt.v * y[0][0]);
                let dd = (pt.v * pt.v * a + 2.0 * pt.u * pt.v * b - (r.0 - ly.0), pt.u * pt.u * b + 2.0 * pt.u * pt.v * a - (r.1 - ly.1));
                ((a, b), dd)
            })
            .collect();
        let mut worst: f64 = 0.0;
        for i in 1..m - 1 {
            let (l, c, r) = (rows[i - 1], rows[i], rows[i + 1]);
            let e1 = (l.0 .0 - 2.0 * c.0 .0 + r.0 .0) / (h * h) - (l.1 .0 + 10.0 * c.1 .0 + r.1 .0) / 12.0;
            let e2 = (l.0 .1 - 2.0 * c.0 .1 + r.0 .1) / (h * h) - (l.1 .1 + 10.0 * c.1 .1 + r.1 .1) / 12.0;
            // row scale: magnitudes of the terms that cancel, as in the Newton residual
            let s1 = (l.0 .0.abs() + 2.0 * c.0 .0.abs() + r.0 .0.abs()) / (h * h) + peak;
            let s2 = (l.0 .1.abs() + 2.0 * c.0 .1.abs() + r.0 .1.abs()) / (h * h) + peak;
            worst = worst.max(e1.abs() / s1).max(e2.abs() / s2);
        }
        worst
    }
}

/// Nodal values of `Z` (first component of the φ₀ peel).
pub fn z_profile(profile: &BlowupProfile, phi0: &PeeledPiece) -> (Vec<f64>, Vec<f64>) {
    let g = &profile.grid;
    (0..g.len())
        .map(|i| {
            let y = phi0.peel_at(g.t(i));
            (y[0][0], y[1][0])
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::solve_profile;

    const PSI0: f64 = 54.872_756_298;
    const R0: f64 = 0.191_781_884_22;

    fn corrections(t: f64, n: usize) -> (BlowupProfile, InnerCorrections) {
        let p = solve_profile(PSI0, t, n).unwrap();
        let ic = InnerCorrections::compute(&p, R0, 3).unwrap();
        (p, ic)
    }

    #[test]
    fn smoothstep_is_c2() {
        for t in [-1.0, 1.0] {
            let (a, b) = (smoothstep(t - 1e-9), smoothstep(t + 1e-9));
            for j in 0..3 {
                assert!((a[j] - b[j]).abs() < 1e-6);
            }
        }
        let h = 1e-5;
        let d = (smoothstep(0.3 + h)[0] - smoothstep(0.3 - h)[0]) / (2.0 * h);
        assert!((d - smoothstep(0.3)[1]).abs() < 1e-8);
    }

    #[test]
    fn phi0_antisymmetry_and_slope() {
        let (p, ic) = corrections(6.0, 12001);
        assert!(ic.antisymmetry_defect < 1e-8);
        let g = &ic.phi0.growth;
        let m = p.grid.len();
        let e = (0..m).map(|i| (g.phi_tilde[m - 1 - i] + g.phi[i]).abs()).fold(0.0, f64::max);
        assert!(e < 1e-8, "{e}");
        assert!((ic.b0 - g.b_integral).abs() < 1e-6 * ic.b0.abs());
        assert!(ic.numerov_defect(&p, Piece::Curvature) < 1e-8);
    }

    #[test]
    fn phi1_cubic_growth() {
        let (_, ic) = corrections(6.0, 12001);
        let prm = Phi1Params { mu: 1.0, ..Default::default() };
        let c = ic.phi1_peel_plus(&prm);
        let k = ic.curvature;
        let want = (k.c2 + k.c1 * k.c1) * PSI0 / 6.0;
        assert!((c[3] - want).abs() < 1e-10 * want);
        // the only quadratic term left is the drift of φ₀'s slope
        assert!((c[2] + k.c1 * ic.b0 / 2.0).abs() < 1e-9 * c[2].abs());
    }

    #[test]
    fn phi1_constants_stable_under_truncation() {
        let (p, a) = corrections(6.0, 12001);
        let (_, b) = corrections(8.0, 16001);
        for piece in Piece::PHI1 {
            let (x, y) = (a.piece(piece).affine(), b.piece(piece).affine());
            assert!((x.0 - y.0).abs() < 1e-6 && (x.1 - y.1).abs() < 1e-6 && (x.2 - y.2).abs() < 1e-6, "{piece:?}");
            assert!(a.numerov_defect(&p, piece) < 1e-8);
        }
    }
}
