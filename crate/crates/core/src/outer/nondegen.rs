use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{BandedMatrix, Bc, RadialGrid, RadialLaplacian};

use super::family::OuterExpansion;
use super::limit::NodalSolution;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub sigma_min_w: f64,
    pub sigma_min_u0: f64,
    pub sigma_min_v0: f64,
    /// `u₁'(r₀) − v₁'(r₀)`
    pub slope_gap: f64,
}

/// `−Δ + c` restricted to the unknowns that are not fixed by Dirichlet data.
pub fn linearized_operator(grid: &RadialGrid, left: Bc, coef: &[f64]) -> BandedMatrix {
    let op = RadialLaplacian::new(grid);
    let n = grid.len();
    let lo = if matches!(left, Bc::Regularity) { 0 } else { 1 };
    let hi = n - 1; // right end is always Dirichlet
    let m = hi - lo;
    let mut a = BandedMatrix::zeros(m, 1, 1);
    for i in lo..hi {
        let s = op.stencil(i);
        let k = i - lo;
        if k > 0 {
            a.set(k, k - 1, -s.lo);
        }
        a.set(k, k, -s.mid + coef[i]);
        if k + 1 < m {
            a.set(k, k + 1, -s.hi);
        }
    }
    a
}

/// Smallest singular value by inverse iteration on `AᵀA`.
pub fn sigma_min(a: &BandedMatrix) -> Result<f64> {
    let n = a.n();
    let lu = a.clone().lu()?;
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919 % 101) as f64 / 101.0)).collect();
    let mut last = 0.0;
    for _ in 0..500 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        // y = A⁻ᵀ x, then x ← A⁻¹ y; ‖y‖² is the Rayleigh quotient of (AᵀA)⁻¹
        let y = lu.solve_transpose(&x);
        let rho = y.iter().map(|v| v * v).sum::<f64>();
        x = lu.solve(&y);
        let sigma = 1.0 / rho.sqrt();
        if (sigma - last).abs() <= 1e-14 * sigma {
            return Ok(sigma);
        }
        last = sigma;
    }
    Ok(last)
}

/// Scale of `−Δ + c` on resolved modes: `max(λ₁(−Δ), ‖c‖∞)`.
///
/// The discrete `‖A‖` grows like `h⁻²` and would flag every fine mesh.
fn operator_scale(grid: &RadialGrid, left: Bc, coef: &[f64]) -> Result<f64> {
    let lap = sigma_min(&linearized_operator(grid, left, &vec![0.0; coef.len()]))?;
    Ok(lap.max(coef.iter().fold(0.0f64, |m, c| m.max(c.abs()))))
}

fn gated(name: &str, grid: &RadialGrid, left: Bc, coef: &[f64]) -> Result<f64> {
    let a = linearized_operator(grid, left, coef);
    let s = match sigma_min(&a) {
        Ok(s) => s,
        Err(Error::Singular { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    let scale = operator_scale(grid, left, coef)?;
    if s < 1e-8 * scale {
        return Err(Error::Degenerate(format!("{name}: sigma_min = {s:.3e} against operator scale {scale:.3e}")));
    }
    Ok(s)
}

pub fn check_nondegeneracy(sol: &NodalSolution, exp: &OuterExpansion) -> Result<NondegeneracyReport> {
    let react = sol.reaction();
    let cw: Vec<f64> = sol.w.values().iter().map(|&w| react.slope(w)).collect();
    let left = sol.domain.left_bc();
    let sigma_min_w = gated("linearization about w", sol.w.grid(), left, &cw)?;
    let cu: Vec<f64> = exp.u[0].values().iter().map(|&u| sol.f.df(u)).collect();
    let sigma_min_u0 = gated("linearization about u0", &exp.grids.u, Bc::Dirichlet(0.0), &cu)?;
    let cv: Vec<f64> = exp.v[0].values().iter().map(|&v| sol.h.df(v)).collect();
    let sigma_min_v0 = gated("linearization about v0", &exp.grids.v, left, &cv)?;
    let slope_gap = exp.data.u1p - exp.data.v1p;
    if slope_gap.abs() < 1e-10 {
        return Err(Error::Degenerate(format!("u1'(r0) - v1'(r0) = {slope_gap:.3e}")));
    }
    Ok(NondegeneracyReport { sigma_min_w, sigma_min_u0, sigma_min_v0, slope_gap })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::outer::{compute_corrections, solve_limit_problem, Domain, LimitForm, LimitGridSpec, LimitInit, Nonlinearity, OuterGrids};

    fn dense_sigma_min(a: &BandedMatrix) -> f64 {
        let d = a.to_dense();
        let n = d.len();
        let m = DMatrix::from_fn(n, n, |i, j| d[i][j]);
        m.singular_values().min()
    }

    #[test]
    fn inverse_iteration_matches_dense_svd() {
        let f = Nonlinearity::Power { lambda: 0.0, p: 1.0 };
        let spec = LimitGridSpec { base_count: 200, zone_half_width: 0.0, zone_spacing: 1.0 };
        let sol = solve_limit_problem(f, f, 3, Domain::Ball, &LimitInit::Bracket(-20.0, -50.0), &spec, LimitForm::Split).unwrap();
        let c: Vec<f64> = sol.w.values().iter().map(|&w| sol.reaction().slope(w)).collect();
        let a = linearized_operator(sol.w.grid(), Bc::Regularity, &c);
        assert!(a.n() >= 190 && a.n() <= 210, "{}", a.n());
        let (s, d) = (sigma_min(&a).unwrap(), dense_sigma_min(&a));
        assert!((s - d).abs() / d < 1e-8, "{s} vs {d}");
    }

    #[test]
    fn laplacian_sigma_is_the_first_eigenvalue() {
        // −u'' on (0,1): smallest eigenvalue π², and the matrix is symmetric on a uniform grid
        let g = RadialGrid::uniform(0.0, 1.0, 400, 1).unwrap();
        let a = linearized_operator(&g, Bc::Dirichlet(0.0), &vec![0.0; g.len()]);
        let s = sigma_min(&a).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((s - pi2).abs() / pi2 < 1e-4, "{s}");
    }

    #[test]
    fn cubic_nodal_solution_is_nondegenerate() {
        let f = Nonlinearity::Power { lambda: 0.0, p: 1.0 };
        let sol = solve_limit_problem(f, f, 3, Domain::Ball, &LimitInit::Bracket(-20.0, -50.0), &LimitGridSpec::default(), LimitForm::Split).unwrap();
        let grids = OuterGrids::around(&sol, 2000, None).unwrap();
        let exp = compute_corrections(&sol, &grids).unwrap();
        let rep = check_nondegeneracy(&sol, &exp).unwrap();
        assert!(rep.sigma_min_w > 0.0 && rep.sigma_min_u0 > 0.0 && rep.sigma_min_v0 > 0.0);
        assert!(rep.slope_gap.abs() > 1e-3);
    }

    #[test]
    fn singular_operator_is_reported() {
        // −u'' − π²u on (0,1) has a kernel; the discrete eigenvalue sits within O(h²)
        let g = RadialGrid::uniform(0.0, 1.0, 64, 1).unwrap();
        let a = linearized_operator(&g, Bc::Dirichlet(0.0), &vec![0.0; g.len()]);
        let lam = sigma_min(&a).unwrap();
        assert!(matches!(gated("shifted", &g, Bc::Dirichlet(0.0), &vec![-lam; g.len()]), Err(Error::Degenerate(_))));
    }
}
