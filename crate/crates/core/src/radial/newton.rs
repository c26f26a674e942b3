use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::banded::BandedMatrix;

/// A square nonlinear system `F(x) = 0` with a banded Jacobian.
pub trait NonlinearSystem {
    fn len(&self) -> usize;
    fn residual(&self, x: &[f64], out: &mut [f64]);
    fn jacobian(&self, x: &[f64]) -> BandedMatrix;

    /// Row scales: the residual is measured as `max_i |F_i| / scale_i`.
    fn row_scale(&self, _x: &[f64], scale: &mut [f64]) {
        scale.fill(1.0);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ResidualReference {
    Absolute,
    /// Tolerance relative to the measured residual of the zero vector
    /// (falls back to absolute when that residual vanishes).
    ZeroFunction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub reference: ResidualReference,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, max_backtracks: 20, reference: ResidualReference::ZeroFunction }
    }
}

impl NewtonOptions {
    pub fn absolute(tol: f64) -> Self {
        Self { tol, reference: ResidualReference::Absolute, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub final_residual: f64,
    pub tolerance: f64,
}

pub fn residual_measure<S: NonlinearSystem + ?Sized>(sys: &S, x: &[f64]) -> f64 {
    let n = sys.len();
    let mut f = vec![0.0; n];
    let mut s = vec![1.0; n];
    sys.residual(x, &mut f);
    sys.row_scale(x, &mut s);
    f.iter().zip(&s).fold(0.0, |m, (a, b)| {
        let v = a.abs() / b;
        if v.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(v)
        }
    })
}

pub fn newton_solve<S: NonlinearSystem + ?Sized>(sys: &S, x0: &[f64], opts: &NewtonOptions) -> Result<(Vec<f64>, NewtonReport)> {
    let n = sys.len();
    if x0.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: x0.len() });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("initial guess is not finite".into()));
    }
    let tol = match opts.reference {
        ResidualReference::Absolute => opts.tol,
        ResidualReference::ZeroFunction => {
            let r0 = residual_measure(sys, &vec![0.0; n]);
            if r0 > 0.0 && r0.is_finite() {
                opts.tol * r0
            } else {
                opts.tol
            }
        }
    };
    let mut x = x0.to_vec();
    let mut m = residual_measure(sys, &x);
    let mut report = NewtonReport { iterations: 0, residual_history: vec![m], converged: false, final_residual: m, tolerance: tol };
    let mut f = vec![0.0; n];
    while !(m <= tol) && report.iterations < opts.max_iter {
        if !m.is_finite() {
            return Err(Error::NoConvergence { report });
        }
        sys.residual(&x, &mut f);
        let lu = sys.jacobian(&x).lu()?;
        let mut dx: Vec<f64> = f.iter().map(|v| -v).collect();
        lu.solve_in_place(&mut dx);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + lambda * d).collect();
            let mt = residual_measure(sys, &trial);
            if mt < m || mt <= tol {
                accepted = Some((trial, mt));
                break;
            }
            lambda *= 0.5;
        }
        let Some((trial, mt)) = accepted else {
            return Err(Error::NoConvergence { report });
        };
        x = trial;
        m = mt;
        report.iterations += 1;
        report.residual_history.push(m);
        report.final_residual = m;
    }
    report.converged = m <= tol;
    if report.converged {
        Ok((x, report))
    } else {
        Err(Error::NoConvergence { report })
    }
}

/// Newton at `opts.tol`; if it stalls on the round-off floor below `floor`,
/// accept that floor instead of failing.
pub fn newton_polished<S: NonlinearSystem + ?Sized>(sys: &S, x0: &[f64], opts: &NewtonOptions, floor: f64) -> Result<(Vec<f64>, NewtonReport)> {
    let mut opts = *opts;
    loop {
        match newton_solve(sys, x0, &opts) {
            Err(Error::NoConvergence { report }) if report.final_residual < floor && opts.tol < report.final_residual => {
                opts = NewtonOptions { tol: report.final_residual * 1.0001, reference: ResidualReference::Absolute, ..opts };
            }
            r => return r,
        }
    }
}

/// Largest relative gap between `J·d` and a centred difference of `F` along a few
/// fixed pseudo-random directions.
pub fn jacobian_mismatch<S: NonlinearSystem + ?Sized>(sys: &S, x: &[f64], eps: f64) -> f64 {
    let n = sys.len();
    let jac = sys.jacobian(x);
    let mut worst: f64 = 0.0;
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    for _ in 0..4 {
        let d: Vec<f64> = (0..n)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let jd = jac.matvec(&d);
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + eps * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - eps * b).collect();
        let (mut fp, mut fm) = (vec![0.0; n], vec![0.0; n]);
        sys.residual(&xp, &mut fp);
        sys.residual(&xm, &mut fm);
        let scale = jd.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        for i in 0..n {
            worst = worst.max(((fp[i] - fm[i]) / (2.0 * eps) - jd[i]).abs() / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::radial::grid::RadialGrid;
    use crate::radial::ops::RadialLaplacian;

    /// `u'' = s(r) + c·u³` on a uniform 1-D grid with Dirichlet ends.
    struct Poisson {
        grid: Arc<RadialGrid>,
        c: f64,
        src: Vec<f64>,
        ends: (f64, f64),
        skew: f64,
    }

    impl NonlinearSystem for Poisson {
        fn len(&self) -> usize {
            self.grid.len()
        }
        fn residual(&self, x: &[f64], out: &mut [f64]) {
            let op = RadialLaplacian::new(&self.grid);
            let n = x.len();
            for i in 1..n - 1 {
                out[i] = op.apply_at(x, i) - self.c * x[i].powi(3) - self.src[i];
            }
            out[0] = x[0] - self.ends.0;
            out[n - 1] = x[n - 1] - self.ends.1;
        }
        fn jacobian(&self, x: &[f64]) -> BandedMatrix {
            let op = RadialLaplacian::new(&self.grid);
            let n = x.len();
            let mut j = BandedMatrix::zeros(n, 1, 1);
            for i in 1..n - 1 {
                let s = op.stencil(i);
                j.set(i, i - 1, s.lo);
                j.set(i, i, (s.mid - 3.0 * self.c * x[i] * x[i]) * (1.0 + self.skew));
                j.set(i, i + 1, s.hi);
            }
            j.set(0, 0, 1.0);
            j.set(n - 1, n - 1, 1.0);
            j
        }
    }

    fn line() -> Poisson {
        let grid = Arc::new(RadialGrid::uniform(0.0, 1.0, 50, 1).unwrap());
        let n = grid.len();
        Poisson { grid, c: 0.0, src: vec![0.0; n], ends: (0.0, 1.0), skew: 0.0 }
    }

    #[test]
    fn linear_problem_one_step() {
        let p = line();
        let (x, rep) = newton_solve(&p, &vec![0.0; p.len()], &NewtonOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.residual_history.len(), 2);
        for (xi, r) in x.iter().zip(p.grid.nodes()) {
            assert!((xi - r).abs() < 1e-12);
        }
    }

    #[test]
    fn cubic_converges_quadratically() {
        // manufactured w = sin(πr): w'' = -w³ + s with s = -π² sin + sin³
        let pi = std::f64::consts::PI;
        let grid = Arc::new(RadialGrid::uniform(0.0, 1.0, 200, 1).unwrap());
        let src = grid.nodes().iter().map(|&r| -pi * pi * (pi * r).sin() + (pi * r).sin().powi(3)).collect();
        let p = Poisson { grid, c: -1.0, src, ends: (0.0, 0.0), skew: 0.0 };
        let x0: Vec<f64> = p.grid.nodes().iter().map(|&r| 0.5 * (pi * r).sin()).collect();
        let (x, rep) = newton_solve(&p, &x0, &NewtonOptions::absolute(1e-9)).unwrap();
        let h = &rep.residual_history;
        assert!(h.windows(2).all(|w| w[1] < w[0]));
        // quadratic: e_{k+1} / e_k^2 stays bounded while e_k shrinks
        let k = h.len() - 2;
        assert!(h[k] / h[k - 1] < 1e-2, "{h:?}");
        let err = x.iter().zip(p.grid.nodes()).map(|(a, &r)| (a - (pi * r).sin()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4);
    }

    #[test]
    fn probe_flags_inconsistent_jacobian() {
        let mut p = line();
        p.c = -1.0;
        let x: Vec<f64> = p.grid.nodes().iter().map(|&r| r * (1.0 - r)).collect();
        assert!(jacobian_mismatch(&p, &x, 1e-6) < 1e-6);
        p.skew = 0.1;
        assert!(jacobian_mismatch(&p, &x, 1e-6) > 1e-2);
    }

    #[test]
    fn reports_non_convergence() {
        let mut p = line();
        p.c = -1.0;
        let opts = NewtonOptions { max_iter: 0, ..NewtonOptions::absolute(1e-12) };
        match newton_solve(&p, &vec![0.0; p.len()], &opts) {
            Err(Error::NoConvergence { report }) => assert_eq!(report.residual_history.len(), report.iterations + 1),
            other => panic!("{other:?}"),
        }
    }
}
