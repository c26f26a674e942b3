use serde::{Deserialize, Serialize};

/// Nonlinearities vanishing at zero, with derivatives up to third order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    /// `a·u³ + b·u`
    Cubic { a: f64, b: f64 },
    /// `λ·u − u·|u|^{2p}`
    Power { lambda: f64, p: f64 },
}

impl Nonlinearity {
    pub fn f(&self, u: f64) -> f64 {
        match *self {
            Self::Cubic { a, b } => a * u * u * u + b * u,
            Self::Power { lambda, p } => lambda * u - u * u.abs().powf(2.0 * p),
        }
    }

    pub fn df(&self, u: f64) -> f64 {
        match *self {
            Self::Cubic { a, b } => 3.0 * a * u * u + b,
            Self::Power { lambda, p } => lambda - (2.0 * p + 1.0) * u.abs().powf(2.0 * p),
        }
    }

    pub fn d2f(&self, u: f64) -> f64 {
        match *self {
            Self::Cubic { a, .. } => 6.0 * a * u,
            Self::Power { p, .. } => {
                if u == 0.0 {
                    return 0.0;
                }
                -(2.0 * p + 1.0) * 2.0 * p * u * u.abs().powf(2.0 * p - 2.0)
            }
        }
    }

    pub fn d3f(&self, u: f64) -> f64 {
        match *self {
            Self::Cubic { a, .. } => 6.0 * a,
            Self::Power { p, .. } => {
                let c = -(2.0 * p + 1.0) * 2.0 * p * (2.0 * p - 1.0);
                if u == 0.0 {
                    return if p == 1.0 { c } else { 0.0 };
                }
                c * u.abs().powf(2.0 * p - 2.0)
            }
        }
    }

    /// `f(b+w) − f(b) − f'(b)w − f''(b)w²/2 − f'''(b)w³/6` and its `w`-derivative;
    /// exactly zero for the cubic members.
    pub fn taylor_tail(&self, b: f64, w: f64) -> (f64, f64) {
        if matches!(*self, Self::Cubic { .. } | Self::Power { p: 1.0, .. }) {
            return (0.0, 0.0);
        }
        let (d1, d2, d3) = (self.df(b), self.d2f(b), self.d3f(b));
        (self.f(b + w) - self.f(b) - w * (d1 + w * (d2 / 2.0 + w * d3 / 6.0)), self.df(b + w) - d1 - w * (d2 + w * d3 / 2.0))
    }

    /// Largest relative mismatch between each derivative and a centred difference of the one below.
    pub fn derivative_mismatch(&self, u: f64, eps: f64) -> f64 {
        let fd = |g: &dyn Fn(f64) -> f64| (g(u + eps) - g(u - eps)) / (2.0 * eps);
        let pairs = [(fd(&|x| self.f(x)), self.df(u)), (fd(&|x| self.df(x)), self.d2f(u)), (fd(&|x| self.d2f(x)), self.d3f(u))];
        pairs.iter().map(|(a, b)| (a - b).abs() / (1.0 + b.abs())).fold(0.0, f64::max)
    }
}

/// Reaction term of the limit problem: `f(w)` for `w ≥ 0`, `−h(−w)` for `w < 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitReaction {
    pub f: Nonlinearity,
    pub h: Nonlinearity,
}

impl LimitReaction {
    pub fn value(&self, w: f64) -> f64 {
        if w >= 0.0 {
            self.f.f(w)
        } else {
            -self.h.f(-w)
        }
    }

    pub fn slope(&self, w: f64) -> f64 {
        if w >= 0.0 {
            self.f.df(w)
        } else {
            self.h.df(-w)
        }
    }
}
