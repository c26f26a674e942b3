//! Gluing the inner layer to the outer family with a cutoff, the remainder
//! of the glued pair, the overlap of the two pieces and the weighted norms.

mod cutoff;
mod layer;
mod norms;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::construction::Construction;
use crate::error::{Error, Result};
use crate::matching::MatchingParameters;
use crate::outer::{solve_outer_family, Nonlinearity, OuterFamily};
use crate::radial::{build_grid, eval_local, GridFunction, RadialGrid, RefinementZone};

pub use cutoff::{quintic, CutoffSpec};
pub use layer::{InnerLayer, Jet};
pub use norms::{WeightKind, WeightedNormEvaluator};

/// Global mesh at one `g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub base_count: usize,
    /// Layer zone half-width in units of the cutoff's inner edge.
    pub layer_width: f64,
    /// Layer spacing is `layer_spacing·g^{-1/2}`.
    pub layer_spacing: f64,
    /// Boundary zone `[1 − boundary_width·|ln g|g^{-1/4}, 1]` at spacing `boundary_spacing·g^{-1/4}`.
    pub boundary_width: f64,
    pub boundary_spacing: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self { base_count: 4000, layer_width: 3.0, layer_spacing: 1e-2, boundary_width: 2.0, boundary_spacing: 0.1 }
    }
}

impl MeshSpec {
    pub fn build(&self, g: f64, cutoff: &CutoffSpec, a: f64, dim: usize) -> Result<RadialGrid> {
        let e = g.powf(-0.25);
        let mut zones = Vec::new();
        zones.extend(RefinementZone::new(cutoff.r0, self.layer_width * cutoff.inner_edge, self.layer_spacing * e * e).clipped(a, 1.0));
        let bw = self.boundary_width * g.ln() * e;
        zones.extend(RefinementZone::new(1.0 - 0.5 * bw, 0.5 * bw, self.boundary_spacing * e).clipped(a, 1.0));
        build_grid(a, 1.0, self.base_count, &zones, dim)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// Cutoff scale: the blend runs over `κ|ln g|g^{-1/4} ≤ |r − r₀| ≤ 2κ|ln g|g^{-1/4}`.
    pub kappa: f64,
    pub mesh: MeshSpec,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { kappa: 0.1, mesh: MeshSpec::default() }
    }
}

/// Both pieces at one node: `ζ`, then `(value, r-derivative, Laplacian)` jets.
/// Inner jets are only evaluated where `ζ < 1`.
#[derive(Clone, Copy, Debug)]
pub struct Glue {
    pub zeta: [f64; 3],
    pub inner: Option<[Jet; 2]>,
    pub outer: [Jet; 2],
}

#[derive(Clone, Debug)]
pub struct ApproximateSolution {
    pub g: f64,
    pub grid: Arc<RadialGrid>,
    pub u: GridFunction,
    pub v: GridFunction,
    pub params: MatchingParameters,
    pub cutoff: CutoffSpec,
    pub outer: OuterFamily,
    pub glue: Vec<Glue>,
    pub f: Nonlinearity,
    pub h: Nonlinearity,
    pub r0: f64,
}

fn outer_jets(fam: &OuterFamily, f: &Nonlinearity, h: &Nonlinearity, r0: f64, r: f64) -> [Jet; 2] {
    let jet = |gf: &GridFunction, nl: &Nonlinearity| {
        let (xs, ys) = (gf.nodes(), gf.values());
        let x = eval_local(xs, ys, r, 0);
        [x, eval_local(xs, ys, r, 1), nl.f(x)]
    };
    let u = if r >= r0 { jet(&fam.u, f) } else { [0.0; 3] };
    let v = if r <= r0 { jet(&fam.v, h) } else { [0.0; 3] };
    [u, v]
}

fn blend(z: f64, inner: f64, outer: f64) -> f64 {
    if z == 0.0 {
        inner
    } else if z == 1.0 {
        outer
    } else {
        inner + z * (outer - inner)
    }
}

/// Glue the inner layer and the outer family at the matched parameters.
pub fn assemble(c: &Construction, prm: &MatchingParameters, opts: &AssemblyOptions) -> Result<ApproximateSolution> {
    let g = prm.g;
    let r0 = c.r0();
    let a = c.domain.inner_radius();
    let cutoff = CutoffSpec::new(g, r0, opts.kappa, (a, 1.0))?;
    let outer = solve_outer_family(&c.limit, &c.outer, prm.delta_sum(), prm.delta_tilde_sum())?;
    let layer = InnerLayer::new(&c.profile, &c.inner, r0, c.dim, prm, c.f.df(0.0), c.h.df(0.0));
    if layer.reach() < cutoff.outer_edge {
        let need = layer.alpha * (cutoff.outer_edge + prm.xi.abs());
        return Err(Error::Gate(format!(
            "profile window T = {} is too short for the blend zone at g = {g:e}: need T >= {need:.3}",
            c.profile.t_max()
        )));
    }
    let grid = Arc::new(opts.mesh.build(g, &cutoff, a, c.dim)?);
    let mut glue = Vec::with_capacity(grid.len());
    let (mut u, mut v) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for &r in grid.nodes() {
        let zeta = cutoff.zeta(r);
        let out = outer_jets(&outer, &c.f, &c.h, r0, r);
        let inner = (zeta[0] < 1.0).then(|| layer.eval(r));
        let (ui, vi) = inner.map_or((0.0, 0.0), |j| (j[0][0], j[1][0]));
        u.push(blend(zeta[0], ui, out[0][0]));
        v.push(blend(zeta[0], vi, out[1][0]));
        glue.push(Glue { zeta, inner, outer: out });
    }
    Ok(ApproximateSolution {
        g,
        u: GridFunction::new(grid.clone(), u)?,
        v: GridFunction::new(grid.clone(), v)?,
        grid,
        params: *prm,
        cutoff,
        outer,
        glue,
        f: c.f,
        h: c.h,
        r0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RemainderReport {
    pub g: f64,
    #[serde(skip)]
    pub r1: Vec<f64>,
    #[serde(skip)]
    pub r2: Vec<f64>,
    /// `sup|R₁| / (g^{-1/2}|ln g|⁴)` where `ζ < 1`.
    pub sup_inner_weighted: f64,
    /// Plain `sup|R₁|` where `ζ < 1`, and on the core `ζ = 0`.
    pub sup_inner: f64,
    pub sup_core: f64,
    /// `sup |R₂|·e^{2g^{1/4}(r−r₀)}·g^{1/2}` over `r > r₀`, and its mirror for `R₁`.
    pub exp_tail_check: f64,
    pub exp_tail_check_mirror: f64,
    /// `max |R|` where `ζ = 1`.
    pub zero_outside: f64,
}

impl ApproximateSolution {
    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// Both components of the remainder at every node, from the piece jets.
    pub fn remainder_values(&self) -> (Vec<f64>, Vec<f64>) {
        let nm1 = self.grid.dim() as f64 - 1.0;
        let g = self.g;
        let mut r1 = Vec::with_capacity(self.glue.len());
        let mut r2 = Vec::with_capacity(self.glue.len());
        for (i, (&r, gl)) in self.nodes().iter().zip(&self.glue).enumerate() {
            let (u, v) = (self.u.values()[i], self.v.values()[i]);
            let lap = |k: usize| -> f64 {
                let o = gl.outer[k];
                match gl.inner {
                    None => o[2],
                    Some(inn) => {
                        let p = inn[k];
                        let [z, z1, z2] = gl.zeta;
                        let (d, d1) = (o[0] - p[0], o[1] - p[1]);
                        p[2] + z2 * d + 2.0 * z1 * d1 + z * (o[2] - p[2]) + nm1 / r * z1 * d
                    }
                }
            };
            r1.push(-lap(0) + self.f.f(u) + g * u * v * v);
            r2.push(-lap(1) + self.h.f(v) + g * v * u * u);
        }
        (r1, r2)
    }

    pub fn compute_remainder(&self) -> RemainderReport {
        let (r1, r2) = self.remainder_values();
        let g = self.g;
        let (q, l) = (g.powf(0.25), g.ln());
        let (mut sup_inner, mut sup_core, mut zero_outside): (f64, f64, f64) = (0.0, 0.0, 0.0);
        let (mut tail, mut tail_m) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (i, &r) in self.nodes().iter().enumerate() {
            let gl = &self.glue[i];
            if gl.zeta[0] < 1.0 {
                sup_inner = sup_inner.max(r1[i].abs());
            } else {
                zero_outside = zero_outside.max(r1[i].abs()).max(r2[i].abs());
            }
            if gl.zeta[0] == 0.0 {
                sup_core = sup_core.max(r1[i].abs());
            }
            let s = r - self.r0;
            if s > 0.0 && r2[i] != 0.0 {
                tail = tail.max(r2[i].abs().ln() + 2.0 * q * s);
            }
            if s < 0.0 && r1[i] != 0.0 {
                tail_m = tail_m.max(r1[i].abs().ln() - 2.0 * q * s);
            }
        }
        RemainderReport {
            g,
            sup_inner_weighted: sup_inner / (g.powf(-0.5) * l.powi(4)),
            sup_inner,
            sup_core,
            exp_tail_check: tail.exp() * g.sqrt(),
            exp_tail_check_mirror: tail_m.exp() * g.sqrt(),
            zero_outside,
            r1,
            r2,
        }
    }

    /// `sup |u_out − u_in|`, `sup |v_out − v_in|` over the blend zone.
    pub fn overlap(&self) -> OverlapReport {
        let (mut gu, mut gv): (f64, f64) = (0.0, 0.0);
        for (&r, gl) in self.nodes().iter().zip(&self.glue) {
            let s = (r - self.r0).abs();
            if s < self.cutoff.inner_edge || s > self.cutoff.outer_edge {
                continue;
            }
            if let Some(inn) = gl.inner {
                gu = gu.max((gl.outer[0][0] - inn[0][0]).abs());
                gv = gv.max((gl.outer[1][0] - inn[1][0]).abs());
            }
        }
        let l4 = self.g.ln().powi(4);
        OverlapReport { g: self.g, u_gap: gu, v_gap: gv, u_gap_normalized: gu / l4, v_gap_normalized: gv / l4 }
    }

    pub fn norm(&self, kind: WeightKind, gamma: f64, phi: &[f64], psi: &[f64]) -> Result<f64> {
        WeightedNormEvaluator::new(gamma, self.g, self.r0, kind)?.norm(self.nodes(), phi, psi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OverlapReport {
    pub g: f64,
    pub u_gap: f64,
    pub v_gap: f64,
    /// Gaps divided by `|ln g|⁴`.
    pub u_gap_normalized: f64,
    pub v_gap_normalized: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::fixture::cubic;

    fn ap_at(g: f64, kappa: f64) -> Result<ApproximateSolution> {
        let c = cubic();
        assemble(c, &c.match_at(g)?, &AssemblyOptions { kappa, ..Default::default() })
    }

    #[test]
    fn pieces_are_taken_verbatim_outside_the_blend() {
        let ap = ap_at(1e6, 0.1).unwrap();
        let (mut core, mut outer) = (0, 0);
        for (i, gl) in ap.glue.iter().enumerate() {
            let (u, v) = (ap.u.values()[i], ap.v.values()[i]);
            if gl.zeta[0] == 1.0 {
                assert_eq!((u, v), (gl.outer[0][0], gl.outer[1][0]));
                assert!(gl.inner.is_none());
                outer += 1;
            } else if gl.zeta[0] == 0.0 {
                let inn = gl.inner.unwrap();
                assert_eq!((u, v), (inn[0][0], inn[1][0]));
                core += 1;
            }
        }
        assert!(core > 100 && outer > 100);
        // one side of the interface has no outer piece
        let r = ap.nodes();
        for (i, gl) in ap.glue.iter().enumerate() {
            if r[i] < ap.r0 {
                assert_eq!(gl.outer[0], [0.0; 3]);
            } else if r[i] > ap.r0 {
                assert_eq!(gl.outer[1], [0.0; 3]);
            }
        }
    }

    #[test]
    fn remainder_vanishes_where_the_outer_piece_is_used() {
        for g in [1e4, 1e7] {
            let rep = ap_at(g, 0.1).unwrap().compute_remainder();
            assert!(rep.zero_outside <= 1e-12, "g {g:e}: {}", rep.zero_outside);
            assert!(rep.sup_inner > 0.0 && rep.sup_inner.is_finite());
            assert!(rep.sup_core <= rep.sup_inner);
        }
    }

    #[test]
    fn glued_pair_is_continuous_across_the_blend_edges() {
        let ap = ap_at(1e5, 0.1).unwrap();
        let r = ap.nodes();
        let e = ap.g.powf(-0.25);
        for (k, vals) in [ap.u.values(), ap.v.values()].into_iter().enumerate() {
            for i in 1..r.len() {
                let jump = (vals[i] - vals[i - 1]).abs();
                // slopes are at most ψ₀-sized plus the layer's own O(1/e) scale
                assert!(jump <= 200.0 * (r[i] - r[i - 1]) * (1.0 + 1.0 / e), "component {k} at r = {}: {jump:e}", r[i]);
            }
        }
    }

    #[test]
    fn short_profile_window_is_refused() {
        // at g = 1e8 a blend zone of half-width 0.184 needs t up to ~18 > T = 8
        let err = ap_at(1e8, 0.5).unwrap_err();
        assert!(matches!(err, Error::Gate(ref m) if m.contains("profile window")), "{err}");
        assert!(matches!(ap_at(1e4, 0.5), Err(Error::Gate(_))));
    }

    #[test]
    fn overlap_gap_decays_like_one_over_g() {
        let gs = [1e4, 1e6, 1e8];
        let gaps: Vec<f64> = gs.iter().map(|&g| ap_at(g, 0.1).unwrap().overlap().u_gap_normalized).collect();
        let slope = (gaps[2] / gaps[0]).ln() / (gs[2] / gs[0]).ln();
        assert!((slope + 1.0).abs() <= 0.15, "{gaps:?} {slope}");
    }

    #[test]
    fn weighted_norms_are_ordered() {
        let ap = ap_at(1e6, 0.1).unwrap();
        let (u, v) = (ap.u.values(), ap.v.values());
        let n0 = ap.norm(WeightKind::W0, 0.5, u, v).unwrap();
        let n1 = ap.norm(WeightKind::W1, 0.5, u, v).unwrap();
        let n2 = ap.norm(WeightKind::W2, 0.5, u, v).unwrap();
        assert!(n0 <= n2 && n1 <= n2 && n0 >= ap.u.sup_norm().max(ap.v.sup_norm()));
    }
}
