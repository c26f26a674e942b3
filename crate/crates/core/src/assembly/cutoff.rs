use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quintic smoothstep `6x⁵ − 15x⁴ + 10x³` on `[0, 1]` with its first two derivatives.
pub fn quintic(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0; 3];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let (x2, x3) = (x * x, x * x * x);
    // clamped: rounding can push the polynomial a few ulps past 1
    [(x3 * (10.0 - 15.0 * x + 6.0 * x2)).min(1.0), 30.0 * x2 * (1.0 - x) * (1.0 - x), 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x)]
}

/// `ζ(r)`: 0 for `|r − r₀| ≤ inner_edge`, 1 beyond `outer_edge`, quintic in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub g: f64,
    pub r0: f64,
    /// Edges are `κ|ln g|g^{-1/4}` and `2κ|ln g|g^{-1/4}`.
    pub kappa: f64,
    pub inner_edge: f64,
    pub outer_edge: f64,
    /// `max|ζ'|·|ln g|·g^{-1/4}` on a probe grid.
    pub d1_const: f64,
    /// `max|ζ''|·|ln g|²·g^{-1/2}` on a probe grid.
    pub d2_const: f64,
}

const PROBE: usize = 20001;

impl CutoffSpec {
    /// `span` is the radial domain; both blend zones must fit inside it.
    pub fn new(g: f64, r0: f64, kappa: f64, span: (f64, f64)) -> Result<Self> {
        if !(g >= std::f64::consts::E.powi(2)) {
            return Err(Error::InvalidInput(format!("cutoff needs g >= e^2, got {g}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidInput(format!("cutoff scale must be positive, got {kappa}")));
        }
        let l = g.ln();
        let inner_edge = kappa * l * g.powf(-0.25);
        let outer_edge = 2.0 * inner_edge;
        if r0 - outer_edge <= span.0 || r0 + outer_edge >= span.1 {
            return Err(Error::Gate(format!(
                "blend zone r0 ± {outer_edge:.4} leaves [{}, {}]: use a larger g or a smaller cutoff scale",
                span.0, span.1
            )));
        }
        let mut c = Self { g, r0, kappa, inner_edge, outer_edge, d1_const: 0.0, d2_const: 0.0 };
        let (mut m1, mut m2): (f64, f64) = (0.0, 0.0);
        for j in 0..PROBE {
            let r = r0 + inner_edge + (outer_edge - inner_edge) * j as f64 / (PROBE - 1) as f64;
            let z = c.zeta(r);
            m1 = m1.max(z[1].abs());
            m2 = m2.max(z[2].abs());
        }
        c.d1_const = m1 * l * g.powf(-0.25);
        c.d2_const = m2 * l * l * g.powf(-0.5);
        Ok(c)
    }

    /// `(ζ, ζ', ζ'')` at `r`.
    pub fn zeta(&self, r: f64) -> [f64; 3] {
        let s = r - self.r0;
        let w = self.outer_edge - self.inner_edge;
        let q = quintic((s.abs() - self.inner_edge) / w);
        let sg = s.signum();
        [q[0], sg * q[1] / w, q[2] / (w * w)]
    }

    pub fn in_core(&self, r: f64) -> bool {
        (r - self.r0).abs() <= self.inner_edge
    }

    pub fn in_outer(&self, r: f64) -> bool {
        (r - self.r0).abs() >= self.outer_edge
    }
}
