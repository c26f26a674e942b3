use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::affine;

use super::GPSolution;

/// A log-log fit of one error quantity against `g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub name: String,
    pub g_list: Vec<f64>,
    pub errors: Vec<f64>,
    pub fitted_slope: f64,
    /// Max deviation of `ln error` from the fitted line.
    pub confidence: f64,
    pub target: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check_ladder(gs: &[f64]) -> Result<()> {
    if gs.len() < 4 {
        return Err(Error::InvalidInput(format!("rate fits need at least 4 values of g, got {}", gs.len())));
    }
    if gs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("g values must be strictly increasing".into()));
    }
    if gs[gs.len() - 1] / gs[0] < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!("g values span {:e}..{:e}: need two decades", gs[0], gs[gs.len() - 1])));
    }
    Ok(())
}

/// Fit `ln error = c + slope·ln g`; `pass` when `|slope − target| ≤ tolerance`.
pub fn fit_rate(name: &str, gs: &[f64], errors: &[f64], target: f64, tolerance: f64) -> Result<RateReport> {
    check_ladder(gs)?;
    if let Some(e) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidInput(format!("{name}: error {e} cannot be fitted on a log scale")));
    }
    let xs: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let fit = affine(&xs, &ys)?;
    Ok(RateReport {
        name: name.into(),
        g_list: gs.to_vec(),
        errors: errors.to_vec(),
        fitted_slope: fit.slope,
        confidence: fit.residual,
        target,
        tolerance,
        pass: (fit.slope - target).abs() <= tolerance,
    })
}

/// The three rates of the converged solutions: `u_g` against `w⁺`, `v_g` against
/// `w⁻`, and the inner profile error. Solutions must be sorted by `g`. A fit whose
/// log residual exceeds `max_residual` is refused: the ladder is not yet asymptotic.
pub fn verify_rates(sols: &[GPSolution], max_residual: f64) -> Result<[RateReport; 3]> {
    let gs: Vec<f64> = sols.iter().map(|s| s.g).collect();
    let col = |f: fn(&GPSolution) -> f64| -> Vec<f64> { sols.iter().map(f).collect() };
    let reps = [
        fit_rate("sup |u_g - w+|", &gs, &col(|s| s.diagnostics.sup_err_u), -0.25, 0.05)?,
        fit_rate("sup |v_g - w-|", &gs, &col(|s| s.diagnostics.sup_err_v), -0.25, 0.05)?,
        fit_rate("inner profile error", &gs, &col(|s| s.diagnostics.inner_profile_err), -0.5, 0.1)?,
    ];
    if let Some(r) = reps.iter().find(|r| r.confidence > max_residual) {
        return Err(Error::Gate(format!(
            "{}: log-log fit residual {:.3} exceeds {max_residual}: the ladder is pre-asymptotic, extend it to larger g",
            r.name, r.confidence
        )));
    }
    Ok(reps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_is_recovered() {
        let gs = [1e4, 1e5, 1e6, 1e7, 1e8];
        let es: Vec<f64> = gs.iter().map(|g: &f64| 3.0 * g.powf(-0.25)).collect();
        let r = fit_rate("x", &gs, &es, -0.25, 0.05).unwrap();
        assert!((r.fitted_slope + 0.25).abs() < 1e-12 && r.confidence < 1e-12 && r.pass);
    }

    #[test]
    fn ladders_are_validated() {
        let e = [1.0; 4];
        assert!(fit_rate("x", &[1e4, 1e5, 1e6], &e[..3], 0.0, 1.0).is_err());
        assert!(fit_rate("x", &[1e4, 2e4, 3e4, 4e4], &e, 0.0, 1.0).is_err());
        assert!(fit_rate("x", &[1e4, 1e6, 1e5, 1e7], &e, 0.0, 1.0).is_err());
        assert!(fit_rate("x", &[1e4, 1e5, 1e6, 1e7], &[1.0, 0.0, 1.0, 1.0], 0.0, 1.0).is_err());
    }
}
