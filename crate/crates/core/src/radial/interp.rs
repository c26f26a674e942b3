use crate::error::{Error, Result};

use super::grid::GridFunction;

/// Fornberg finite-difference weights: `w[d][j]` approximates the `d`-th
/// derivative at `x0` from samples at `xs[j]`.
pub fn fornberg(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Start of the 5-node window nearest to `r` on nodes `xs`.
pub fn window5(xs: &[f64], r: f64) -> usize {
    let n = xs.len();
    let i = match xs.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(i) => i.saturating_sub(1).min(n - 2),
    };
    let shift = if r - xs[i] > xs[i + 1] - r { 1 } else { 0 };
    (i + shift).saturating_sub(2).min(n - 5)
}

/// Value or derivative (order ≤ 3) from raw samples using the quartic through 5 nearby nodes.
pub fn eval_local(xs: &[f64], ys: &[f64], r: f64, order: usize) -> f64 {
    let s = window5(xs, r);
    if order == 0 {
        if let Ok(i) = xs.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            return ys[i];
        }
    }
    let w = fornberg(r, &xs[s..s + 5], order);
    w[order].iter().zip(&ys[s..s + 5]).map(|(a, b)| a * b).sum()
}

pub fn interp_and_derivatives(u: &GridFunction, r: f64, order: usize) -> Result<f64> {
    let xs = u.nodes();
    let (a, b) = (xs[0], xs[xs.len() - 1]);
    if !(r >= a && r <= b) {
        return Err(Error::OutOfSpan { r, a, b });
    }
    if order > 3 {
        return Err(Error::InvalidInput(format!("derivative order {order} > 3")));
    }
    if xs.len() < 5 {
        return Err(Error::InvalidInput("interpolation needs at least 5 nodes".into()));
    }
    Ok(eval_local(xs, u.values(), r, order))
}

/// Derivative at `r` from the 5 nodes starting at `start` (one-sided fits at ends and interfaces).
pub fn eval_on(xs: &[f64], ys: &[f64], start: usize, r: f64, order: usize) -> f64 {
    let w = fornberg(r, &xs[start..start + 5], order);
    w[order].iter().zip(&ys[start..start + 5]).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::radial::grid::{build_grid, RadialGrid, RefinementZone};

    #[test]
    fn cubic_second_derivative() {
        let g = Arc::new(build_grid(0.0, 1.0, 20, &[RefinementZone::new(0.6, 0.05, 5e-3)], 3).unwrap());
        let u = GridFunction::from_fn(g, |r| r.powi(3));
        let v = interp_and_derivatives(&u, 0.5, 2).unwrap();
        assert!((v - 3.0).abs() < 1e-9);
    }

    #[test]
    fn sine_derivative_fourth_order() {
        let err = |cells, r: f64| {
            let g = Arc::new(RadialGrid::uniform(0.0, 1.0, cells, 1).unwrap());
            let u = GridFunction::from_fn(g, f64::sin);
            (interp_and_derivatives(&u, r, 1).unwrap() - r.cos()).abs()
        };
        assert!(err(25, 0.3) < 1e-6);
        let (e1, e2) = (err(25, 0.32), err(50, 0.32));
        assert!((e1 / e2).log2() > 3.5, "{}", (e1 / e2).log2());
    }

    #[test]
    fn node_value_is_exact() {
        let g = Arc::new(RadialGrid::uniform(0.0, 1.0, 30, 1).unwrap());
        let u = GridFunction::from_fn(g.clone(), |r| (7.0 * r).exp());
        let r = g.nodes()[11];
        assert_eq!(interp_and_derivatives(&u, r, 0).unwrap(), u.values()[11]);
        assert!(interp_and_derivatives(&u, 1.5, 0).is_err());
        assert!(interp_and_derivatives(&u, 0.5, 4).is_err());
    }
}
