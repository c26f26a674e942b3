use std::sync::Arc;

use crate::error::{Error, Result};
use crate::outer::Nonlinearity;
use crate::radial::{BandedLu, BandedMatrix, NonlinearSystem, RadialGrid, RadialLaplacian};

/// Interleaved layout: `x[2i] = u_i`, `x[2i+1] = v_i`.
pub fn interleave(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).flat_map(|(&a, &b)| [a, b]).collect()
}

pub fn split(x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (x.iter().step_by(2).copied().collect(), x.iter().skip(1).step_by(2).copied().collect())
}

/// The discrete coupled system
/// `Δu = f(u) + g·u·v²`, `Δv = h(v) + g·v·u²`
/// with `u = v = 0` at `r = 1`, the regularity row at `r = 0` (ball) or
/// `u = v = 0` at the inner radius (annulus).
pub struct GpSystem {
    pub grid: Arc<RadialGrid>,
    pub f: Nonlinearity,
    pub h: Nonlinearity,
    pub g: f64,
    op: RadialLaplacian,
}

impl GpSystem {
    pub fn new(grid: Arc<RadialGrid>, f: Nonlinearity, h: Nonlinearity, g: f64) -> Self {
        let op = RadialLaplacian::new(&grid);
        Self { grid, f, h, g, op }
    }

    pub fn laplacian(&self) -> &RadialLaplacian {
        &self.op
    }

    /// Dirichlet node (the boundary value is pinned to zero).
    pub fn is_pinned(&self, i: usize) -> bool {
        i + 1 == self.grid.len() || (i == 0 && !self.grid.has_origin())
    }

    fn lap(&self, x: &[f64], i: usize, c: usize) -> f64 {
        let s = self.op.stencil(i);
        let mut v = s.mid * x[2 * i + c];
        if i > 0 {
            v += s.lo * x[2 * i - 2 + c];
        }
        if i + 1 < self.grid.len() {
            v += s.hi * x[2 * i + 2 + c];
        }
        v
    }

    fn magnitude(&self, x: &[f64], i: usize, c: usize) -> f64 {
        let s = self.op.stencil(i);
        let mut v = (s.mid * x[2 * i + c]).abs();
        if i > 0 {
            v += (s.lo * x[2 * i - 2 + c]).abs();
        }
        if i + 1 < self.grid.len() {
            v += (s.hi * x[2 * i + 2 + c]).abs();
        }
        v
    }

    /// The linearization `𝓛` at `x`: `−J` on equation rows, the identity on Dirichlet rows.
    pub fn operator(&self, x: &[f64]) -> BandedMatrix {
        self.matrix(x, -1.0)
    }

    fn matrix(&self, x: &[f64], sign: f64) -> BandedMatrix {
        let n = self.grid.len();
        let g = self.g;
        let mut m = BandedMatrix::zeros(2 * n, 2, 2);
        for i in 0..n {
            let (u, v) = (x[2 * i], x[2 * i + 1]);
            if self.is_pinned(i) {
                m.set(2 * i, 2 * i, 1.0);
                m.set(2 * i + 1, 2 * i + 1, 1.0);
                continue;
            }
            let s = self.op.stencil(i);
            let diag = [self.f.df(u) + g * v * v, self.h.df(v) + g * u * u];
            for c in 0..2 {
                let row = 2 * i + c;
                if i > 0 {
                    m.set(row, row - 2, sign * s.lo);
                }
                if i + 1 < n {
                    m.set(row, row + 2, sign * s.hi);
                }
                m.set(row, row, sign * (s.mid - diag[c]));
                let other = if c == 0 { row + 1 } else { row - 1 };
                m.set(row, other, -sign * 2.0 * g * u * v);
            }
        }
        m
    }

    /// `𝓛(φ,ψ)` at `x`, matrix-free; Dirichlet rows return the boundary values.
    pub fn apply_operator(&self, x: &[f64], d: &[f64]) -> Vec<f64> {
        let n = self.grid.len();
        let g = self.g;
        let mut out = vec![0.0; 2 * n];
        for i in 0..n {
            if self.is_pinned(i) {
                out[2 * i] = d[2 * i];
                out[2 * i + 1] = d[2 * i + 1];
                continue;
            }
            let (u, v) = (x[2 * i], x[2 * i + 1]);
            let (p, q) = (d[2 * i], d[2 * i + 1]);
            out[2 * i] = -self.lap(d, i, 0) + (self.f.df(u) + g * v * v) * p + 2.0 * g * u * v * q;
            out[2 * i + 1] = -self.lap(d, i, 1) + (self.h.df(v) + g * u * u) * q + 2.0 * g * u * v * p;
        }
        out
    }

    /// LU of `𝓛` at `x`; a vanished pivot is reported with its row.
    pub fn factor(&self, x: &[f64]) -> Result<BandedLu> {
        self.operator(x).lu()
    }
}

impl NonlinearSystem for GpSystem {
    fn len(&self) -> usize {
        2 * self.grid.len()
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        let g = self.g;
        for i in 0..self.grid.len() {
            let (u, v) = (x[2 * i], x[2 * i + 1]);
            if self.is_pinned(i) {
                out[2 * i] = u;
                out[2 * i + 1] = v;
            } else {
                out[2 * i] = self.lap(x, i, 0) - self.f.f(u) - g * u * v * v;
                out[2 * i + 1] = self.lap(x, i, 1) - self.h.f(v) - g * v * u * u;
            }
        }
    }

    fn jacobian(&self, x: &[f64]) -> BandedMatrix {
        self.matrix(x, 1.0)
    }

    fn row_scale(&self, x: &[f64], scale: &mut [f64]) {
        let g = self.g;
        for i in 0..self.grid.len() {
            let (u, v) = (x[2 * i], x[2 * i + 1]);
            if self.is_pinned(i) {
                scale[2 * i] = 1.0 + u.abs();
                scale[2 * i + 1] = 1.0 + v.abs();
            } else {
                scale[2 * i] = (self.magnitude(x, i, 0) + self.f.f(u).abs() + g * (u * v * v).abs()).max(1.0);
                scale[2 * i + 1] = (self.magnitude(x, i, 1) + self.h.f(v).abs() + g * (v * u * u).abs()).max(1.0);
            }
        }
    }
}

/// The quadratic part of the system about `(u, v)`:
/// `N₁ = f(u+φ) − f(u) − f'(u)φ + g·u·ψ² + g·ψ²·φ + 2g·v·φ·ψ`, and symmetrically `N₂`.
pub fn quadratic_part(u: &[f64], v: &[f64], phi: &[f64], psi: &[f64], f: &Nonlinearity, h: &Nonlinearity, g: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = u.len();
    for len in [v.len(), phi.len(), psi.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    let mut n1 = Vec::with_capacity(n);
    let mut n2 = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, p, q) = (u[i], v[i], phi[i], psi[i]);
        n1.push(f.f(a + p) - f.f(a) - f.df(a) * p + g * a * q * q + g * q * q * p + 2.0 * g * b * p * q);
        n2.push(h.f(b + q) - h.f(b) - h.df(b) * q + g * b * p * p + g * p * p * q + 2.0 * g * a * p * q);
    }
    Ok((n1, n2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(g: f64) -> (GpSystem, Vec<f64>) {
        let grid = Arc::new(RadialGrid::uniform(0.0, 1.0, 200, 3).unwrap());
        let f = Nonlinearity::Power { lambda: 0.0, p: 1.0 };
        let x: Vec<f64> = grid.nodes().iter().flat_map(|&r| [(1.0 - r) * (0.3 + r), (1.0 - r) * (0.7 - r * r)]).collect();
        (GpSystem::new(grid, f, f, g), x)
    }

    #[test]
    fn jacobian_is_minus_the_operator_on_equation_rows() {
        let (s, x) = sys(50.0);
        let (j, l) = (s.jacobian(&x), s.operator(&x));
        let n = s.len();
        for i in 0..n - 2 {
            for k in i.saturating_sub(2)..(i + 3).min(n) {
                assert_eq!(j.get(i, k), -l.get(i, k));
            }
        }
        assert_eq!(l.get(n - 1, n - 1), 1.0);
        assert!(crate::radial::jacobian_mismatch(&s, &x, 1e-6) < 1e-6);
    }

    #[test]
    fn matrix_free_apply_matches_the_matrix() {
        let (s, x) = sys(1e3);
        let d: Vec<f64> = (0..s.len()).map(|k| ((k * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let a = s.apply_operator(&x, &d);
        let b = s.operator(&x).matvec(&d);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()), "{p} {q}");
        }
    }

    #[test]
    fn quadratic_part_vanishes_at_zero_and_reduces_for_linear_f() {
        let u = [0.5, 0.25, 0.125];
        let z = [0.0; 3];
        let f = Nonlinearity::Power { lambda: 0.0, p: 1.0 };
        let (a, b) = quadratic_part(&u, &u, &z, &z, &f, &f, 1e4).unwrap();
        assert!(a.iter().chain(&b).all(|&x| x == 0.0));
        let lin = Nonlinearity::Cubic { a: 0.0, b: 2.0 };
        let (phi, psi) = ([0.0625, -0.125, 0.25], [0.5, 0.25, -0.125]);
        let g = 1e4;
        let (n1, _) = quadratic_part(&u, &z, &phi, &psi, &lin, &lin, g).unwrap();
        for i in 0..3 {
            assert_eq!(n1[i], g * u[i] * psi[i] * psi[i] + g * psi[i] * psi[i] * phi[i]);
        }
    }

    #[test]
    fn interleave_round_trip() {
        let (u, v) = (vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]);
        let x = interleave(&u, &v);
        assert_eq!(x, vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(split(&x), (u, v));
    }
}
