use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{eval_local, newton_polished, BandedMatrix, NewtonOptions, NewtonReport, NonlinearSystem};

/// Uniform symmetric grid `t_i = (i − c)·h` on `[−T, T]`, with `t = 0` a node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub t_max: f64,
    pub h: f64,
    pub center: usize,
}

impl LineGrid {
    /// `nodes` is rounded up to the next odd count so that `t = 0` is a node.
    pub fn new(t_max: f64, nodes: usize) -> Self {
        let center = nodes / 2;
        Self { t_max, h: t_max / center as f64, center }
    }
    pub fn len(&self) -> usize {
        2 * self.center + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn t(&self, i: usize) -> f64 {
        if i == self.len() - 1 {
            self.t_max
        } else if i == 0 {
            -self.t_max
        } else {
            (i as f64 - self.center as f64) * self.h
        }
    }
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.t(i)).collect()
    }
    /// Nodes with `lo ≤ t ≤ hi`.
    pub fn range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = ((lo / self.h).ceil() as i64 + self.center as i64).max(0) as usize;
        let b = (((hi / self.h).floor() as i64 + self.center as i64 + 1).max(0) as usize).min(self.len());
        a..b.max(a)
    }
}

/// Fourth-order nodal first derivative on a uniform grid.
pub fn nodal_derivative(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h)
            } else if i < 2 {
                (-25.0 * y[i] + 48.0 * y[i + 1] - 36.0 * y[i + 2] + 16.0 * y[i + 3] - 3.0 * y[i + 4]) / (12.0 * h)
            } else {
                (25.0 * y[i] - 48.0 * y[i - 1] + 36.0 * y[i - 2] - 16.0 * y[i - 3] + 3.0 * y[i - 4]) / (12.0 * h)
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BlowupProfile {
    pub grid: LineGrid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub psi0: f64,
    pub k: f64,
    /// `U(T−1) − ψ₀(T−1)`, the truncation cross-check of `k`.
    pub k_check: f64,
    pub residual: f64,
    pub symmetry_defect: f64,
    /// Fitted `c` in `U·V ≈ C·e^{−c t²}` (diagnostic only).
    pub decay_rate: f64,
    pub report: NewtonReport,
}

impl BlowupProfile {
    pub fn t_max(&self) -> f64 {
        self.grid.t_max
    }

    fn local(&self, ys: &[f64], t: f64, order: usize) -> f64 {
        // 5-point window around t on the uniform grid
        let g = &self.grid;
        let n = g.len();
        let j = ((t / g.h).round() as i64 + g.center as i64).clamp(2, n as i64 - 3) as usize;
        let xs: Vec<f64> = (j - 2..=j + 2).map(|i| g.t(i)).collect();
        eval_local(&xs, &ys[j - 2..=j + 2], t, order)
    }

    /// `U(t)`, continued by `ψ₀t + k` beyond `T` and by 0 below `−T`.
    pub fn u_at(&self, t: f64) -> f64 {
        if t > self.t_max() {
            self.psi0 * t + self.k
        } else if t < -self.t_max() {
            0.0
        } else {
            self.local(&self.u, t, 0)
        }
    }

    pub fn v_at(&self, t: f64) -> f64 {
        if t < -self.t_max() {
            -self.psi0 * t + self.k
        } else if t > self.t_max() {
            0.0
        } else {
            self.local(&self.v, t, 0)
        }
    }

    pub fn du_at(&self, t: f64) -> f64 {
        if t > self.t_max() {
            self.psi0
        } else if t < -self.t_max() {
            0.0
        } else {
            self.local(&self.du, t, 0)
        }
    }

    pub fn dv_at(&self, t: f64) -> f64 {
        if t < -self.t_max() {
            -self.psi0
        } else if t > self.t_max() {
            0.0
        } else {
            self.local(&self.dv, t, 0)
        }
    }
}

struct ProfileSystem {
    grid: LineGrid,
    psi0: f64,
}

const W: [f64; 3] = [1.0, 10.0, 1.0];
const A: [f64; 3] = [1.0, -2.0, 1.0];

impl ProfileSystem {
    fn node_rows(&self, i: usize) -> (usize, usize) {
        if i < self.grid.center {
            (2 * i, 2 * i + 1)
        } else {
            (2 * i + 1, 2 * i + 2)
        }
    }

    /// Every row as `(row, value, scale, [(col, ∂)])`.
    fn rows(&self, x: &[f64], mut emit: impl FnMut(usize, f64, f64, &[(usize, f64)])) {
        let m = self.grid.len();
        let h = self.grid.h;
        let q = h * h / 12.0;
        let (u, v) = (|i: usize| x[2 * i], |i: usize| x[2 * i + 1]);
        let f = |i: usize| u(i) * v(i) * v(i);
        let g = |i: usize| v(i) * u(i) * u(i);
        let mut e = Vec::with_capacity(6);
        for i in 1..m - 1 {
            let (ru, rv) = self.node_rows(i);
            // U'' = U V²
            e.clear();
            let (mut val, mut sc) = (0.0, 1.0);
            for (s, j) in (i - 1..=i + 1).enumerate() {
                val += A[s] * u(j) - q * W[s] * f(j);
                sc += A[s].abs() * u(j).abs() + q * W[s] * f(j).abs();
                e.push((2 * j, A[s] - q * W[s] * v(j) * v(j)));
                e.push((2 * j + 1, -q * W[s] * 2.0 * u(j) * v(j)));
            }
            emit(ru, val, sc, &e);
            // V'' = V U²
            e.clear();
            let (mut val, mut sc) = (0.0, 1.0);
            for (s, j) in (i - 1..=i + 1).enumerate() {
                val += A[s] * v(j) - q * W[s] * g(j);
                sc += A[s].abs() * v(j).abs() + q * W[s] * g(j).abs();
                e.push((2 * j + 1, A[s] - q * W[s] * u(j) * u(j)));
                e.push((2 * j, -q * W[s] * 2.0 * u(j) * v(j)));
            }
            emit(rv, val, sc, &e);
        }
        let c = self.grid.center;
        let p = self.psi0;
        let r = h / 6.0;
        // V'(−T) = −ψ₀ (Numerov-corrected one-sided difference)
        emit(
            0,
            (v(1) - v(0)) / h - r * (2.0 * g(0) + g(1)) + p,
            1.0 + p,
            &[(1, -1.0 / h - r * 2.0 * u(0) * u(0)), (0, -r * 4.0 * u(0) * v(0)), (3, 1.0 / h - r * u(1) * u(1)), (2, -r * 2.0 * u(1) * v(1))],
        );
        // U'(−T) − V·U = 0
        emit(
            1,
            (u(1) - u(0)) / h - r * (2.0 * f(0) + f(1)) - v(0) * u(0),
            1.0 + p,
            &[
                (0, -1.0 / h - r * 2.0 * v(0) * v(0) - v(0)),
                (1, -r * 4.0 * u(0) * v(0) - u(0)),
                (2, 1.0 / h - r * v(1) * v(1)),
                (3, -r * 2.0 * u(1) * v(1)),
            ],
        );
        // translation gauge U(0) = V(0), in place of U'(T) = ψ₀
        emit(2 * c, u(c) - v(c), 1.0 + u(c).abs(), &[(2 * c, 1.0), (2 * c + 1, -1.0)]);
        // V'(T) + U·V = 0
        let n = m - 1;
        emit(
            2 * m - 1,
            (v(n) - v(n - 1)) / h + r * (2.0 * g(n) + g(n - 1)) + u(n) * v(n),
            1.0 + p,
            &[
                (2 * n + 1, 1.0 / h + r * 2.0 * u(n) * u(n) + u(n)),
                (2 * n, r * 4.0 * u(n) * v(n) + v(n)),
                (2 * n - 1, -1.0 / h + r * u(n - 1) * u(n - 1)),
                (2 * n - 2, r * 2.0 * u(n - 1) * v(n - 1)),
            ],
        );
    }
}

impl NonlinearSystem for ProfileSystem {
    fn len(&self) -> usize {
        2 * self.grid.len()
    }
    fn residual(&self, x: &[f64], out: &mut [f64]) {
        self.rows(x, |r, val, _, _| out[r] = val);
    }
    fn jacobian(&self, x: &[f64]) -> BandedMatrix {
        let mut j = BandedMatrix::zeros(self.len(), 4, 3);
        self.rows(x, |r, _, _, e| e.iter().for_each(|&(c, d)| j.add(r, c, d)));
        j
    }
    fn row_scale(&self, x: &[f64], scale: &mut [f64]) {
        self.rows(x, |r, _, s, _| scale[r] = s);
    }
}

pub const MIN_T: f64 = 6.0;
pub const MIN_NODES: usize = 2000;

/// Solve `U'' = UV²`, `V'' = VU²` on `[−T, T]` with slope `ψ₀` at infinity.
pub fn solve_profile(psi0: f64, t_max: f64, n_nodes: usize) -> Result<BlowupProfile> {
    if !(psi0 > 0.0 && psi0.is_finite()) {
        return Err(Error::InvalidInput(format!("psi0 must be positive, got {psi0}")));
    }
    if !(t_max >= MIN_T) {
        return Err(Error::InvalidInput(format!("T must be >= {MIN_T}, got {t_max}")));
    }
    if n_nodes < MIN_NODES {
        return Err(Error::InvalidInput(format!("n_nodes must be >= {MIN_NODES}, got {n_nodes}")));
    }
    let grid = LineGrid::new(t_max, n_nodes);
    let m = grid.len();
    let sys = ProfileSystem { grid: grid.clone(), psi0 };
    let mut x0 = vec![0.0; 2 * m];
    for i in 0..m {
        let t = grid.t(i);
        let s = (psi0 * psi0 * t * t + psi0).sqrt();
        x0[2 * i] = 0.5 * (psi0 * t + s);
        x0[2 * i + 1] = 0.5 * (-psi0 * t + s);
    }
    let opts = NewtonOptions { max_iter: 80, max_backtracks: 30, ..NewtonOptions::absolute(1e-14) };
    let (x, report) = newton_polished(&sys, &x0, &opts, 1e-11)?;
    let mut u: Vec<f64> = (0..m).map(|i| x[2 * i]).collect();
    let mut v: Vec<f64> = (0..m).map(|i| x[2 * i + 1]).collect();
    polish_tail(&mut v, &u, grid.center, grid.h);
    u.reverse();
    v.reverse();
    polish_tail(&mut u, &v, m - 1 - grid.center, grid.h);
    u.reverse();
    v.reverse();
    let symmetry_defect = (0..m).map(|i| (u[i] - v[m - 1 - i]).abs()).fold(0.0, f64::max);
    let du = nodal_derivative(&u, grid.h);
    let dv = nodal_derivative(&v, grid.h);
    let k = u[m - 1] - psi0 * t_max;
    let tc = t_max - 1.0;
    let xs: Vec<f64> = grid.nodes();
    let j = grid.range(tc, tc).start.clamp(2, m - 3);
    let k_check = eval_local(&xs[j - 2..=j + 2], &u[j - 2..=j + 2], tc, 0) - psi0 * tc;
    let decay_rate = fit_decay(&grid, &u, &v);
    let prof = BlowupProfile { grid, u, v, du, dv, psi0, k, k_check, residual: report.final_residual, symmetry_defect, decay_rate, report };
    if prof.symmetry_defect > 1e-8 {
        return Err(Error::Gate(format!("profile symmetry defect {:.3e} exceeds 1e-8", prof.symmetry_defect)));
    }
    if (prof.k - prof.k_check).abs() > 1e-6 {
        return Err(Error::Gate(format!("k at T and T-1 differ by {:.3e}: raise T", (prof.k - prof.k_check).abs())));
    }
    Ok(prof)
}

/// `c` from `ln(UV) ≈ α − c t²` on the part of `t ≥ 1` where `UV` is resolvable.
/// Re-solves the rows of the decaying component beyond `c` with the growing one
/// frozen. They are linear and diagonally dominant, so the tridiagonal sweep is
/// accurate componentwise: the super-Gaussian tail keeps its relative precision
/// instead of carrying absolute round-off from the coupled solve.
fn polish_tail(y: &mut [f64], z: &[f64], c: usize, h: f64) {
    let m = y.len();
    let q = h * h / 12.0;
    let r = h / 6.0;
    let w = |j: usize| z[j] * z[j];
    // rows c+1..m-1, unknowns y[c+1..m]; (sub, diag, sup, rhs)
    let k = m - 1 - c;
    let (mut sup, mut rhs) = (vec![0.0; k], vec![0.0; k]);
    let mut prev = (0.0, 0.0);
    for (row, i) in (c + 1..m).enumerate() {
        let (a, b, cc, mut d) = if i < m - 1 {
            (1.0 - q * w(i - 1), -2.0 - 10.0 * q * w(i), 1.0 - q * w(i + 1), 0.0)
        } else {
            (-1.0 / h + r * w(i - 1), 1.0 / h + 2.0 * r * w(i) + z[i], 0.0, 0.0)
        };
        let a = if row == 0 {
            d -= a * y[c];
            0.0
        } else {
            a
        };
        let den = b - a * prev.0;
        sup[row] = cc / den;
        rhs[row] = (d - a * prev.1) / den;
        prev = (sup[row], rhs[row]);
    }
    for row in (0..k).rev() {
        let next = if row + 1 < k { y[c + row + 2] } else { 0.0 };
        y[c + row + 1] = rhs[row] - sup[row] * next;
    }
}

fn fit_decay(grid: &LineGrid, u: &[f64], v: &[f64]) -> f64 {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in grid.range(0.0, grid.t_max) {
        let p = u[i] * v[i];
        if p > 1e-250 && p < 1e-3 {
            xs.push(grid.t(i).powi(2));
            ys.push(p.ln());
        }
    }
    crate::fit::affine(&xs, &ys).map(|f| -f.slope).unwrap_or(f64::NAN)
}
