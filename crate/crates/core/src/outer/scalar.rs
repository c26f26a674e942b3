use std::sync::Arc;

use crate::error::{Error, Result};
use crate::radial::{newton_polished, newton_solve, BandedMatrix, Bc, NewtonOptions, NewtonReport, NonlinearSystem, RadialGrid, RadialLaplacian};

/// `Δu = F_i(u) + s_i` on a radial grid, with boundary rows from `left`/`right`.
pub struct ScalarProblem<'a> {
    pub grid: Arc<RadialGrid>,
    pub left: Bc,
    pub right: Bc,
    /// `(F, F')` at node `i`.
    pub reaction: &'a (dyn Fn(usize, f64) -> (f64, f64) + Sync),
    pub source: Option<&'a [f64]>,
    op: RadialLaplacian,
}

impl<'a> ScalarProblem<'a> {
    pub fn new(
        grid: Arc<RadialGrid>,
        left: Bc,
        right: Bc,
        reaction: &'a (dyn Fn(usize, f64) -> (f64, f64) + Sync),
        source: Option<&'a [f64]>,
    ) -> Result<Self> {
        if matches!(left, Bc::Regularity) && !grid.has_origin() {
            return Err(Error::InvalidInput("regularity row needs r = 0".into()));
        }
        if matches!(right, Bc::Regularity) {
            return Err(Error::InvalidInput("regularity row only at r = 0".into()));
        }
        if let Some(s) = source {
            if s.len() != grid.len() {
                return Err(Error::LengthMismatch { expected: grid.len(), got: s.len() });
            }
        }
        let op = RadialLaplacian::new(&grid);
        Ok(Self { grid, left, right, reaction, source, op })
    }

    fn src(&self, i: usize) -> f64 {
        self.source.map_or(0.0, |s| s[i])
    }

    fn is_row(&self, i: usize) -> bool {
        let n = self.grid.len();
        !((i == 0 && matches!(self.left, Bc::Dirichlet(_))) || (i == n - 1 && matches!(self.right, Bc::Dirichlet(_))))
    }

    pub fn solve(&self, x0: &[f64], opts: &NewtonOptions) -> Result<(Vec<f64>, NewtonReport)> {
        let (mut x, rep) = newton_solve(self, x0, opts)?;
        self.pin(&mut x);
        Ok((x, rep))
    }

    /// Dirichlet data exactly, not up to the last Newton update.
    fn pin(&self, x: &mut [f64]) {
        let n = x.len();
        if let Bc::Dirichlet(v) = self.left {
            x[0] = v;
        }
        if let Bc::Dirichlet(v) = self.right {
            x[n - 1] = v;
        }
    }
}

impl NonlinearSystem for ScalarProblem<'_> {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            out[i] = if self.is_row(i) { self.op.apply_at(x, i) - (self.reaction)(i, x[i]).0 - self.src(i) } else { 0.0 };
        }
        if let Bc::Dirichlet(v) = self.left {
            out[0] = x[0] - v;
        }
        if let Bc::Dirichlet(v) = self.right {
            out[n - 1] = x[n - 1] - v;
        }
    }

    fn jacobian(&self, x: &[f64]) -> BandedMatrix {
        let n = x.len();
        let mut j = BandedMatrix::zeros(n, 1, 1);
        for i in 0..n {
            if !self.is_row(i) {
                j.set(i, i, 1.0);
                continue;
            }
            let s = self.op.stencil(i);
            if i > 0 {
                j.set(i, i - 1, s.lo);
            }
            j.set(i, i, s.mid - (self.reaction)(i, x[i]).1);
            if i + 1 < n {
                j.set(i, i + 1, s.hi);
            }
        }
        j
    }

    fn row_scale(&self, x: &[f64], scale: &mut [f64]) {
        for i in 0..x.len() {
            scale[i] = if self.is_row(i) {
                (self.op.magnitude_at(x, i) + (self.reaction)(i, x[i]).0.abs() + self.src(i).abs()).max(1.0)
            } else {
                1.0 + x[i].abs()
            };
        }
    }
}

/// Tight options for the scalar outer solves: scaled residual at round-off.
pub fn tight() -> NewtonOptions {
    NewtonOptions { tol: 1e-14, max_iter: 60, ..NewtonOptions::absolute(1e-14) }
}

/// Solve with tight tolerance, accepting a round-off floor below 1e-12.
pub fn solve_polished(p: &ScalarProblem<'_>, x0: &[f64]) -> Result<(Vec<f64>, NewtonReport)> {
    let (mut x, rep) = newton_polished(p, x0, &tight(), 1e-12)?;
    p.pin(&mut x);
    Ok((x, rep))
}
