use crate::error::{Error, Result};

use super::grid::{GridFunction, RadialGrid};

/// Boundary condition at one end of a radial interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bc {
    /// `u'(0) = 0` with the `N·u''(0)` row; only valid at `r = 0`.
    Regularity,
    Dirichlet(f64),
}

/// Three-point stencil of Δ at one node: `Δu_i ≈ lo·u_{i-1} + mid·u_i + hi·u_{i+1}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Stencil {
    pub lo: f64,
    pub mid: f64,
    pub hi: f64,
}

/// Stencils of the radial Laplacian `u'' + (N−1)/r·u'` on every node that is not
/// a Dirichlet node; entry 0 at `r = 0` is the ghost-symmetric `N·u''(0)` row
/// (its `lo` is zero and the mirrored neighbour is folded into `hi`).
#[derive(Clone, Debug)]
pub struct RadialLaplacian {
    stencils: Vec<Stencil>,
}

impl RadialLaplacian {
    pub fn new(grid: &RadialGrid) -> Self {
        let r = grid.nodes();
        let n = r.len();
        let nm1 = grid.dim() as f64 - 1.0;
        let mut stencils = vec![Stencil::default(); n];
        for i in 1..n - 1 {
            let hm = r[i] - r[i - 1];
            let hp = r[i + 1] - r[i];
            let s = hm + hp;
            // u'' on quadratics
            let d2 = Stencil { lo: 2.0 / (hm * s), mid: -2.0 / (hm * hp), hi: 2.0 / (hp * s) };
            // u' on quadratics
            let d1 = Stencil { lo: -hp / (hm * s), mid: (hp - hm) / (hm * hp), hi: hm / (hp * s) };
            let c = nm1 / r[i];
            stencils[i] = Stencil { lo: d2.lo + c * d1.lo, mid: d2.mid + c * d1.mid, hi: d2.hi + c * d1.hi };
        }
        if r[0] == 0.0 {
            let h = r[1];
            let nn = grid.dim() as f64;
            stencils[0] = Stencil { lo: 0.0, mid: -2.0 * nn / (h * h), hi: 2.0 * nn / (h * h) };
        }
        Self { stencils }
    }

    pub fn stencil(&self, i: usize) -> Stencil {
        self.stencils[i]
    }

    pub fn apply_at(&self, u: &[f64], i: usize) -> f64 {
        let s = self.stencils[i];
        let mut v = s.mid * u[i];
        if i > 0 {
            v += s.lo * u[i - 1];
        }
        if i + 1 < u.len() {
            v += s.hi * u[i + 1];
        }
        v
    }

    /// Sum of absolute stencil contributions; used to scale residual rows.
    pub fn magnitude_at(&self, u: &[f64], i: usize) -> f64 {
        let s = self.stencils[i];
        let mut v = (s.mid * u[i]).abs();
        if i > 0 {
            v += (s.lo * u[i - 1]).abs();
        }
        if i + 1 < u.len() {
            v += (s.hi * u[i + 1]).abs();
        }
        v
    }
}

/// Discrete Δu. Interior nodes carry Δu; a regularity node carries `N·u''(0)`;
/// a Dirichlet node carries the constraint residual `u(end) − value`.
pub fn radial_laplacian(u: &GridFunction, left: Bc, right: Bc) -> Result<GridFunction> {
    let grid = u.grid();
    let n = grid.len();
    if n < 3 {
        return Err(Error::InvalidInput("radial Laplacian needs at least 3 nodes".into()));
    }
    if matches!(right, Bc::Regularity) {
        return Err(Error::InvalidInput("regularity condition only applies at r = 0".into()));
    }
    if matches!(left, Bc::Regularity) && !grid.has_origin() {
        return Err(Error::InvalidInput("regularity condition requires the grid to start at r = 0".into()));
    }
    let op = RadialLaplacian::new(grid);
    let x = u.values();
    let mut out: Vec<f64> = (0..n).map(|i| if i == 0 || i == n - 1 { 0.0 } else { op.apply_at(x, i) }).collect();
    out[0] = match left {
        Bc::Regularity => op.apply_at(x, 0),
        Bc::Dirichlet(v) => x[0] - v,
    };
    if let Bc::Dirichlet(v) = right {
        out[n - 1] = x[n - 1] - v;
    }
    GridFunction::new(grid.clone(), out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::radial::grid::{build_grid, RefinementZone};

    fn graded(dim: usize) -> Arc<RadialGrid> {
        Arc::new(build_grid(0.0, 1.0, 40, &[RefinementZone::new(0.3, 0.05, 2e-3)], dim).unwrap())
    }

    #[test]
    fn exact_on_quadratics() {
        for dim in 1..=4 {
            let g = graded(dim);
            let nn = dim as f64;
            for (f, lap) in [
                (Box::new(|_: f64| 1.0) as Box<dyn Fn(f64) -> f64>, Box::new(|_: f64| 0.0) as Box<dyn Fn(f64) -> f64>),
                (Box::new(|r: f64| r * r), Box::new(move |_: f64| 2.0 * nn)),
                (Box::new(|r: f64| r), Box::new(move |r: f64| (nn - 1.0) / r)),
            ] {
                let u = GridFunction::from_fn(g.clone(), &f);
                let d = radial_laplacian(&u, Bc::Regularity, Bc::Dirichlet(f(1.0))).unwrap();
                for i in 1..g.len() - 1 {
                    let r = g.nodes()[i];
                    assert!((d.values()[i] - lap(r)).abs() < 1e-8 * (1.0 + lap(r).abs()), "dim {dim} r {r}");
                }
            }
            let u = GridFunction::from_fn(g.clone(), |r| r * r);
            let d = radial_laplacian(&u, Bc::Regularity, Bc::Dirichlet(1.0)).unwrap();
            assert!((d.values()[0] - 2.0 * nn).abs() < 1e-9);
        }
    }

    #[test]
    fn second_order_on_quartic() {
        let err = |cells| {
            let g = Arc::new(RadialGrid::uniform(0.0, 1.0, cells, 2).unwrap());
            let u = GridFunction::from_fn(g.clone(), |r| r.powi(4));
            let d = radial_laplacian(&u, Bc::Regularity, Bc::Dirichlet(1.0)).unwrap();
            (1..g.len() - 1).map(|i| (d.values()[i] - 16.0 * g.nodes()[i].powi(2)).abs()).fold(0.0, f64::max)
        };
        let order = (err(40) / err(80)).log2();
        assert!((order - 2.0).abs() < 0.1, "{order}");
    }

    #[test]
    fn boundary_rows_and_rejections() {
        let g = graded(3);
        let u = GridFunction::from_fn(g.clone(), |r| 2.0 + r);
        let d = radial_laplacian(&u, Bc::Dirichlet(2.0), Bc::Dirichlet(1.0)).unwrap();
        assert_eq!(d.values()[0], 0.0);
        assert_eq!(*d.values().last().unwrap(), 2.0);
        assert!(radial_laplacian(&u, Bc::Dirichlet(0.0), Bc::Regularity).is_err());
        let ann = Arc::new(RadialGrid::uniform(0.5, 1.0, 20, 3).unwrap());
        assert!(radial_laplacian(&GridFunction::zeros(ann), Bc::Regularity, Bc::Dirichlet(0.0)).is_err());
    }
}
