use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::assembly::{ApproximateSolution, WeightKind};
use crate::error::Result;

use super::system::{interleave, split};

/// Random right-hand sides: sums of Gaussian bumps in the layer variable
/// `t = g^{1/4}(r − r₀)`, amplitudes in `[−1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub seed: u64,
    pub samples: usize,
    pub bumps: usize,
    /// Bump centres in `[−c, c]`, widths in `[w_min, w_max]` (layer units).
    pub center_range: f64,
    pub width_min: f64,
    pub width_max: f64,
    pub gamma: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self { seed: 0x5eed, samples: 20, bumps: 3, center_range: 3.0, width_min: 0.5, width_max: 2.0, gamma: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub g: f64,
    /// `‖(φ,ψ)‖₁ / (g^{-1/4}‖(F,H)‖₂)` per sample.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Solve `𝓛(φ,ψ) = (F,H)` for seeded random `(F,H)` and record the ratio of
/// the solution norm to the data norm. The same seed gives the same bumps (in
/// layer units) at every `g`.
pub fn linear_probe(ap: &ApproximateSolution, spec: &ProbeSpec) -> Result<ProbeReport> {
    let sys = ap.system();
    let lu = sys.factor(&ap.interleaved())?;
    let mut rng = SplitMix64::seed_from_u64(spec.seed);
    let (q, e) = (ap.g.powf(0.25), ap.g.powf(-0.25));
    let nodes = ap.nodes();
    let mut ratios = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let mut draw = || -> Vec<(f64, f64, f64)> {
            (0..spec.bumps)
                .map(|_| {
                    (rng.gen_range(-1.0..=1.0), rng.gen_range(-spec.center_range..=spec.center_range), rng.gen_range(spec.width_min..=spec.width_max))
                })
                .collect()
        };
        let (bf, bh) = (draw(), draw());
        let eval = |bs: &[(f64, f64, f64)]| -> Vec<f64> {
            nodes
                .iter()
                .enumerate()
                .map(|(i, &r)| {
                    if sys.is_pinned(i) {
                        return 0.0;
                    }
                    let t = q * (r - ap.r0);
                    bs.iter().map(|&(a, c, w)| a * (-((t - c) / w).powi(2)).exp()).sum()
                })
                .collect()
        };
        let (f, h) = (eval(&bf), eval(&bh));
        let (phi, psi) = split(&lu.solve(&interleave(&f, &h)));
        let num = ap.norm(WeightKind::W1, spec.gamma, &phi, &psi)?;
        let den = ap.norm(WeightKind::W2, spec.gamma, &f, &h)?;
        ratios.push(num / (e * den));
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ProbeReport { g: ap.g, ratios, max_ratio })
}
