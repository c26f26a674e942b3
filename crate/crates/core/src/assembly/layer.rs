use crate::blowup::{BlowupProfile, Gauge, InnerCorrections, Phi1Params};
use crate::matching::MatchingParameters;

/// Value, `r`-derivative and radial Laplacian of one component.
pub type Jet = [f64; 3];

/// The inner approximation
/// `μg^{-1/4}(U,V) + g^{-1/2}(φ₀ + A₀K₁ + B₀K₂) + g^{-3/4}(φ₁ + A₁K₁ + B₁K₂)`
/// in `t = μg^{1/4}(r − r₀ − ξ)`, with `K₁ = (U',V')`, `K₂ = (tU'+U, tV'+V)`.
///
/// Second `t`-derivatives come from the defining equations of each piece
/// (`U'' = UV²`, `L(φ) = F`), so the evaluated Laplacian is that of the
/// continuous pieces.
pub struct InnerLayer<'a> {
    pub profile: &'a BlowupProfile,
    pub inner: &'a InnerCorrections,
    pub r0: f64,
    pub dim: usize,
    pub xi: f64,
    pub mu: f64,
    pub gauge: Gauge,
    pub phi1: Phi1Params,
    /// `μg^{1/4}`
    pub alpha: f64,
    pub e: f64,
}

/// A pair and its first two `t`-derivatives.
#[derive(Clone, Copy, Default)]
struct Pair {
    d0: (f64, f64),
    d1: (f64, f64),
    d2: (f64, f64),
}

impl Pair {
    fn axpy(self, a: f64, o: Pair) -> Pair {
        let f = |x: (f64, f64), y: (f64, f64)| (x.0 + a * y.0, x.1 + a * y.1);
        Pair { d0: f(self.d0, o.d0), d1: f(self.d1, o.d1), d2: f(self.d2, o.d2) }
    }
}

impl<'a> InnerLayer<'a> {
    pub fn new(
        profile: &'a BlowupProfile,
        inner: &'a InnerCorrections,
        r0: f64,
        dim: usize,
        prm: &MatchingParameters,
        f_prime0: f64,
        h_prime0: f64,
    ) -> Self {
        let mu = prm.mu();
        Self {
            profile,
            inner,
            r0,
            dim,
            xi: prm.xi,
            mu,
            gauge: prm.gauge,
            phi1: prm.phi1_params(f_prime0, h_prime0),
            alpha: mu * prm.g.powf(0.25),
            e: prm.g.powf(-0.25),
        }
    }

    pub fn t(&self, r: f64) -> f64 {
        self.alpha * (r - self.r0 - self.xi)
    }

    /// Largest `|r − r₀|` whose `t` stays inside the profile window.
    pub fn reach(&self) -> f64 {
        self.profile.t_max() / self.alpha - self.xi.abs()
    }

    /// `[(u, u_r, Δu), (v, v_r, Δv)]` at `r > 0`.
    pub fn eval(&self, r: f64) -> [Jet; 2] {
        let t = self.t(r);
        let p = self.profile;
        let (u, v, du, dv) = (p.u_at(t), p.v_at(t), p.du_at(t), p.dv_at(t));
        let (uu, vv, uv) = (u * u, v * v, u * v);
        let (d2u, d2v) = (u * vv, v * uu);
        let (d3u, d3v) = (du * vv + 2.0 * uv * dv, dv * uu + 2.0 * uv * du);
        let base = Pair { d0: (u, v), d1: (du, dv), d2: (d2u, d2v) };
        let k1 = Pair { d0: (du, dv), d1: (d2u, d2v), d2: (d3u, d3v) };
        let k2 = Pair { d0: (t * du + u, t * dv + v), d1: (t * d2u + 2.0 * du, t * d2v + 2.0 * dv), d2: (t * d3u + 3.0 * d2u, t * d3v + 3.0 * d2v) };
        // φ'' = V²φ + 2UVφ̃ − F, φ̃'' = U²φ̃ + 2UVφ − F̃
        let closed = |d0: (f64, f64), d1: (f64, f64), f: (f64, f64)| Pair {
            d0,
            d1,
            d2: (vv * d0.0 + 2.0 * uv * d0.1 - f.0, uu * d0.1 + 2.0 * uv * d0.0 - f.1),
        };
        let ph0 = &self.inner.phi0;
        let phi0 = closed(ph0.at(t), ph0.derivative_at(t), self.inner.phi0_rhs(p, t));
        let (v1, d1) = self.inner.phi1_at(&self.phi1, t);
        let phi1 = closed(v1, d1, self.inner.phi1_rhs(p, &self.phi1, t));
        let g = self.gauge;
        let big0 = phi0.axpy(g.a0, k1).axpy(g.b0, k2);
        let big1 = phi1.axpy(g.a1, k1).axpy(g.b1, k2);
        let e = self.e;
        let tot = Pair::default().axpy(self.mu * e, base).axpy(e * e, big0).axpy(e * e * e, big1);
        let (a, c) = (self.alpha, (self.dim as f64 - 1.0) / r);
        let jet = |x0: f64, x1: f64, x2: f64| [x0, a * x1, a * a * x2 + c * a * x1];
        [jet(tot.d0.0, tot.d1.0, tot.d2.0), jet(tot.d0.1, tot.d1.1, tot.d2.1)]
    }
}
