use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three weight families; the second component uses the mirrored argument `r₀ − r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightKind {
    /// `1 + |g^{1/4}s|^{1+γ}` for `s ≥ 0`, `1` for `s < 0`.
    W0,
    /// `1` for `s ≥ 0`, `e^{g^{1/4}|s|}` for `s < 0`.
    W1,
    /// `1 + |g^{1/4}s|^{1+γ}` for `s ≥ 0`, `e^{g^{1/4}|s|}` for `s < 0`.
    W2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormEvaluator {
    pub gamma: f64,
    pub g: f64,
    pub r0: f64,
    pub kind: WeightKind,
}

impl WeightedNormEvaluator {
    pub fn new(gamma: f64, g: f64, r0: f64, kind: WeightKind) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidInput(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidInput(format!("g must be positive, got {g}")));
        }
        Ok(Self { gamma, g, r0, kind })
    }

    /// `ln w(s)`.
    pub fn log_weight(&self, s: f64) -> f64 {
        let x = self.g.powf(0.25) * s;
        match (self.kind, s >= 0.0) {
            (WeightKind::W0 | WeightKind::W2, true) => x.abs().powf(1.0 + self.gamma).ln_1p(),
            (WeightKind::W1, true) | (WeightKind::W0, false) => 0.0,
            (WeightKind::W1 | WeightKind::W2, false) => x.abs(),
        }
    }

    pub fn weight(&self, s: f64) -> f64 {
        self.log_weight(s).exp()
    }

    /// `‖w(r − r₀)Φ‖∞ + ‖w(r₀ − r)Ψ‖∞`, each maximum taken in log space.
    pub fn norm(&self, nodes: &[f64], phi: &[f64], psi: &[f64]) -> Result<f64> {
        if phi.len() != nodes.len() || psi.len() != nodes.len() {
            return Err(Error::LengthMismatch { expected: nodes.len(), got: phi.len().min(psi.len()) });
        }
        let log_sup = |vals: &[f64], sign: f64| {
            nodes
                .iter()
                .zip(vals)
                .filter(|(_, &y)| y != 0.0)
                .map(|(&r, &y)| y.abs().ln() + self.log_weight(sign * (r - self.r0)))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let a = log_sup(phi, 1.0);
        let b = log_sup(psi, -1.0);
        let total = a.exp() + b.exp();
        if !total.is_finite() {
            return Err(Error::InvalidInput(format!("weighted norm overflows (log sizes {a:.1}, {b:.1})")));
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn ev(kind: WeightKind, g: f64) -> WeightedNormEvaluator {
        WeightedNormEvaluator::new(0.5, g, 0.3, kind).unwrap()
    }

    #[test]
    fn constants_and_zero() {
        let nodes: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let one = vec![1.0; nodes.len()];
        let zero = vec![0.0; nodes.len()];
        let e = ev(WeightKind::W1, 1e4);
        let n = e.norm(&nodes, &one, &one).unwrap();
        let want = (10.0 * 0.3f64).exp() + (10.0 * 0.7f64).exp();
        assert!((n - want).abs() < 1e-12 * want, "{n} {want}");
        for k in [WeightKind::W0, WeightKind::W1, WeightKind::W2] {
            assert_eq!(ev(k, 1e8).norm(&nodes, &zero, &zero).unwrap(), 0.0);
        }
        // g = 1e8: e^{80} stays finite through log space
        assert!(ev(WeightKind::W2, 1e8).norm(&nodes, &one, &one).unwrap().is_finite());
    }

    #[test]
    fn point_mass_one_layer_width_out() {
        let g: f64 = 1e6;
        let r = 0.3 + g.powf(-0.25);
        let nodes = vec![0.0, r, 1.0];
        let n = ev(WeightKind::W2, g).norm(&nodes, &[0.0, 1.5, 0.0], &[0.0; 3]).unwrap();
        assert!((n - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bad_gamma_is_refused() {
        assert!(WeightedNormEvaluator::new(1.5, 1e4, 0.3, WeightKind::W0).is_err());
    }

    proptest! {
        #[test]
        fn weight_ordering(s in -0.5..0.5f64, lg in 4.0..8.0f64) {
            let g = 10f64.powf(lg);
            let (w0, w1, w2) = (ev(WeightKind::W0, g).weight(s), ev(WeightKind::W1, g).weight(s), ev(WeightKind::W2, g).weight(s));
            prop_assert!(w1 <= w2 && w0 <= w2);
            prop_assert!(w0 >= 1.0 && w1 >= 1.0);
            if s >= 0.0 { prop_assert_eq!(w0, w2); } else { prop_assert_eq!(w1, w2); }
        }
    }
}
