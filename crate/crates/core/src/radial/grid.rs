use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adjacent-cell growth allowed by the grader (the contract is ≤ 1.2).
const GROWTH: f64 = 1.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementZone {
    pub center: f64,
    pub half_width: f64,
    pub spacing: f64,
}

impl RefinementZone {
    pub fn new(center: f64, half_width: f64, spacing: f64) -> Self {
        Self { center, half_width, spacing }
    }

    /// Intersection with `[a, b]`, or `None` if the zone misses the interval.
    pub fn clipped(&self, a: f64, b: f64) -> Option<Self> {
        let lo = (self.center - self.half_width).max(a);
        let hi = (self.center + self.half_width).min(b);
        (hi > lo).then(|| Self::new(0.5 * (lo + hi), 0.5 * (hi - lo), self.spacing))
    }

    fn target(&self, r: f64) -> f64 {
        let d = ((r - self.center).abs() - self.half_width).max(0.0);
        self.spacing + (GROWTH - 1.0) * d
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    dim: usize,
    zones: Vec<RefinementZone>,
}

impl RadialGrid {
    pub fn from_nodes(nodes: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be >= 1".into()));
        }
        if nodes.len() < 3 {
            return Err(Error::InvalidInput("a grid needs at least 3 nodes".into()));
        }
        if nodes[0] < 0.0 || nodes.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidInput("nodes must be finite and non-negative".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("nodes must be strictly increasing".into()));
        }
        Ok(Self { nodes, dim, zones: Vec::new() })
    }

    pub fn uniform(a: f64, b: f64, cells: usize, dim: usize) -> Result<Self> {
        let h = (b - a) / cells as f64;
        let mut nodes: Vec<f64> = (0..=cells).map(|i| a + h * i as f64).collect();
        nodes[cells] = b;
        Self::from_nodes(nodes, dim)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn zones(&self) -> &[RefinementZone] {
        &self.zones
    }
    pub fn a(&self) -> f64 {
        self.nodes[0]
    }
    pub fn b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
    pub fn has_origin(&self) -> bool {
        self.nodes[0] == 0.0
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Index of an exact node, if present.
    pub fn find(&self, r: f64) -> Option<usize> {
        self.nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()).ok()
    }

    /// Index `i` with `nodes[i] <= r < nodes[i+1]` (clamped to the last cell).
    pub fn cell(&self, r: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        }
    }

    /// Sub-grid of nodes in `[lo, hi]` (both must be nodes).
    pub fn slice(&self, lo: usize, hi: usize) -> Result<Self> {
        let mut g = Self::from_nodes(self.nodes[lo..=hi].to_vec(), self.dim)?;
        let (a, b) = (g.a(), g.b());
        g.zones = self.zones.iter().filter_map(|z| z.clipped(a, b)).collect();
        Ok(g)
    }
}

/// Graded grid on `[a, b]`: spacing at most the base spacing `(b-a)/base_count`
/// and at most each zone's spacing inside that zone, growing geometrically away from it.
pub fn build_grid(a: f64, b: f64, base_count: usize, zones: &[RefinementZone], dim: usize) -> Result<RadialGrid> {
    build_grid_with_breaks(a, b, base_count, zones, dim, &[])
}

/// As [`build_grid`], additionally forcing every point of `breaks` to be a node.
pub fn build_grid_with_breaks(a: f64, b: f64, base_count: usize, zones: &[RefinementZone], dim: usize, breaks: &[f64]) -> Result<RadialGrid> {
    if !(0.0 <= a && a < b) {
        return Err(Error::InvalidInput(format!("need 0 <= a < b, got [{a}, {b}]")));
    }
    if base_count < 16 {
        return Err(Error::InvalidInput("base_count must be >= 16".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidInput("dimension must be >= 1".into()));
    }
    for z in zones {
        if !(z.spacing > 0.0) || !(z.half_width >= 0.0) {
            return Err(Error::InvalidInput(format!("zone at {} has non-positive spacing or width", z.center)));
        }
        if z.center - z.half_width < a - 1e-12 || z.center + z.half_width > b + 1e-12 {
            return Err(Error::InvalidInput(format!("zone at {} (half-width {}) leaves [{a}, {b}]", z.center, z.half_width)));
        }
    }
    let base = (b - a) / base_count as f64;
    let sigma = |r: f64| zones.iter().fold(base, |s, z| s.min(z.target(r)));

    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);

    let mut nodes = vec![a];
    for w in cuts.windows(2) {
        let seg = segment(w[0], w[1], &sigma);
        nodes.extend_from_slice(&seg[1..]);
    }
    let mut g = RadialGrid::from_nodes(nodes, dim)?;
    g.zones = zones.to_vec();
    Ok(g)
}

/// Equidistribute `1/sigma` on `[p, q]`.
fn segment(p: f64, q: f64, sigma: &impl Fn(f64) -> f64) -> Vec<f64> {
    // cumulative M(r) = ∫ dr / sigma, by midpoint marching at sigma/16
    let mut rs = vec![p];
    let mut ms = vec![0.0];
    let mut r = p;
    let mut m = 0.0;
    while r < q {
        let step = (sigma(r) / 16.0).min(q - r);
        let mid = r + 0.5 * step;
        m += step / sigma(mid);
        r = if q - (r + step) < 1e-15 * q.abs().max(1.0) { q } else { r + step };
        rs.push(r);
        ms.push(m);
    }
    let total = m;
    let cells = (total - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(cells + 1);
    out.push(p);
    let mut k = 0;
    for j in 1..cells {
        let target = total * j as f64 / cells as f64;
        while ms[k + 1] < target {
            k += 1;
        }
        let t = (target - ms[k]) / (ms[k + 1] - ms[k]);
        out.push(rs[k] + t * (rs[k + 1] - rs[k]));
    }
    out.push(q);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_without_zones() {
        let g = build_grid(0.0, 1.0, 64, &[], 3).unwrap();
        assert_eq!(g.len(), 65);
        for (i, &r) in g.nodes().iter().enumerate() {
            assert!((r - i as f64 / 64.0).abs() < 1e-12);
        }
        assert_eq!(g.nodes()[0], 0.0);
    }

    #[test]
    fn zone_forces_count() {
        let z = RefinementZone::new(0.5, 0.05, 1e-3);
        let g = build_grid(0.0, 1.0, 64, &[z], 3).unwrap();
        let inside = g.nodes().iter().filter(|&&r| (0.45..=0.55).contains(&r)).count();
        assert!(inside >= 100, "{inside}");
    }

    #[test]
    fn two_zones_and_growth() {
        let zs = [RefinementZone::new(0.5, 0.02, 2e-4), RefinementZone::new(0.99, 0.01, 5e-4)];
        let g = build_grid(0.0, 1.0, 64, &zs, 2).unwrap();
        let h = g.spacings();
        for (w, r) in h.windows(2).zip(g.nodes()) {
            assert!(w[1] / w[0] <= 1.2 && w[0] / w[1] <= 1.2, "ratio at {r}");
        }
        for z in &zs {
            for (i, hi) in h.iter().enumerate() {
                let (l, r) = (g.nodes()[i], g.nodes()[i + 1]);
                if l >= z.center - z.half_width && r <= z.center + z.half_width {
                    assert!(*hi <= z.spacing * (1.0 + 1e-9));
                }
            }
        }
        assert!(h.iter().all(|&x| x <= 1.0 / 64.0 + 1e-12));
    }

    #[test]
    fn rejects_bad_zones() {
        assert!(build_grid(0.0, 1.0, 64, &[RefinementZone::new(1.0, 0.1, 1e-3)], 3).is_err());
        assert!(build_grid(0.0, 1.0, 64, &[RefinementZone::new(0.5, 0.1, 0.0)], 3).is_err());
        assert!(build_grid(0.0, 1.0, 8, &[], 3).is_err());
    }

    #[test]
    fn breaks_are_nodes() {
        let g = build_grid_with_breaks(0.0, 1.0, 50, &[], 3, &[0.1917]).unwrap();
        assert!(g.find(0.1917).is_some());
    }

    #[test]
    fn grid_function_checks_length() {
        let g = Arc::new(build_grid(0.0, 1.0, 16, &[], 1).unwrap());
        assert!(GridFunction::new(g.clone(), vec![0.0; 3]).is_err());
        assert!(GridFunction::new(g, vec![f64::NAN; 17]).is_err());
    }
}
