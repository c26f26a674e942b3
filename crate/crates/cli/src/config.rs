use std::fmt;
use std::path::{Path, PathBuf};

use gpseg::assembly::{AssemblyOptions, MeshSpec};
use gpseg::blowup::{MIN_NODES, MIN_T};
use gpseg::construction::ConstructionSpec;
use gpseg::ladder::LadderOptions;
use gpseg::outer::{Domain, LimitGridSpec, LimitInit, Nonlinearity};
use gpseg::solver::{ProbeSpec, SolverOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A config that failed to parse or validate; always names the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn bad(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { field: field.into(), message: message.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitConfig {
    /// Shooting bracket: `w(0)` for the ball, `w'(a)` for an annulus.
    pub bracket: [f64; 2],
    pub base_count: usize,
    pub zone_half_width: f64,
    pub zone_spacing: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        let g = LimitGridSpec::default();
        Self { bracket: [-20.0, -50.0], base_count: g.base_count, zone_half_width: g.zone_half_width, zone_spacing: g.zone_spacing }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OuterGridConfig {
    pub base_count: usize,
    pub zone_half_width: f64,
    pub zone_spacing: f64,
}

impl Default for OuterGridConfig {
    fn default() -> Self {
        let s = ConstructionSpec::default();
        Self { base_count: s.outer_base, zone_half_width: s.outer_zone_half_width, zone_spacing: s.outer_zone_spacing }
    }
}

/// Per-`g` mesh; see [`MeshSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub base_count: usize,
    pub layer_width: f64,
    pub layer_spacing: f64,
    pub boundary_width: f64,
    pub boundary_spacing: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let m = MeshSpec::default();
        Self {
            base_count: m.base_count,
            layer_width: m.layer_width,
            layer_spacing: m.layer_spacing,
            boundary_width: m.boundary_width,
            boundary_spacing: m.boundary_spacing,
        }
    }
}

impl From<&MeshConfig> for MeshSpec {
    fn from(m: &MeshConfig) -> Self {
        Self {
            base_count: m.base_count,
            layer_width: m.layer_width,
            layer_spacing: m.layer_spacing,
            boundary_width: m.boundary_width,
            boundary_spacing: m.boundary_spacing,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlowupConfig {
    pub t_max: f64,
    pub n_nodes: usize,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        let s = ConstructionSpec::default();
        Self { t_max: s.profile_t, n_nodes: s.profile_nodes }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Scaled Newton residual target.
    pub newton: f64,
    pub max_iter: usize,
    /// Largest log-deviation of a rate fit before the ladder is declared pre-asymptotic.
    pub fit_residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SolverOptions::default();
        Self { newton: s.tol, max_iter: s.max_iter, fit_residual: 0.25 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub samples: usize,
    pub bumps: usize,
    pub center_range: f64,
    pub width_min: f64,
    pub width_max: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        let p = ProbeSpec::default();
        Self { samples: p.samples, bumps: p.bumps, center_range: p.center_range, width_min: p.width_min, width_max: p.width_max }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub domain: Domain,
    pub f: Nonlinearity,
    pub h: Nonlinearity,
    pub g_list: Vec<f64>,
    pub limit: LimitConfig,
    pub outer_grid: OuterGridConfig,
    pub mesh: MeshConfig,
    /// Cutoff scale of the gluing.
    pub kappa: f64,
    pub blowup: BlowupConfig,
    pub tolerances: Tolerances,
    /// Exponent of the weighted norms.
    pub gamma: f64,
    pub probe: ProbeConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let cubic = Nonlinearity::Power { lambda: 0.0, p: 1.0 };
        Self {
            dim: 3,
            domain: Domain::Ball,
            f: cubic,
            h: cubic,
            g_list: vec![1e4, 1e5, 1e6, 1e7, 1e8],
            limit: LimitConfig::default(),
            outer_grid: OuterGridConfig::default(),
            mesh: MeshConfig::default(),
            kappa: AssemblyOptions::default().kappa,
            blowup: BlowupConfig::default(),
            tolerances: Tolerances::default(),
            gamma: ProbeSpec::default().gamma,
            probe: ProbeConfig::default(),
            seed: ProbeSpec::default().seed,
            output_dir: PathBuf::from("gpseg-out"),
        }
    }
}

fn positive(field: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {x}")))
    }
}

fn at_least(field: &str, n: usize, min: usize) -> Result<(), ConfigError> {
    if n >= min {
        Ok(())
    } else {
        Err(bad(field, format!("must be at least {min}, got {n}")))
    }
}

fn check_nonlinearity(field: &str, n: &Nonlinearity) -> Result<(), ConfigError> {
    match *n {
        Nonlinearity::Cubic { a, b } => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(bad(field, "cubic coefficients must be finite"));
            }
        }
        Nonlinearity::Power { lambda, p } => {
            if !lambda.is_finite() {
                return Err(bad(&format!("{field}.lambda"), "must be finite"));
            }
            // third derivatives at u = 0 enter the outer expansion
            if !(p >= 1.0 && p.is_finite()) {
                return Err(bad(&format!("{field}.p"), format!("must be at least 1, got {p}")));
            }
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parse JSON; unknown keys and type errors are reported with their path.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            bad(if path == "." { "<root>" } else { &path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        at_least("dim", self.dim, 1)?;
        if let Domain::Annulus { inner } = self.domain {
            if !(inner > 0.0 && inner < 1.0) {
                return Err(bad("domain.inner", format!("annulus inner radius must lie in (0, 1), got {inner}")));
            }
        }
        check_nonlinearity("f", &self.f)?;
        check_nonlinearity("h", &self.h)?;
        if self.g_list.is_empty() {
            return Err(bad("g_list", "must not be empty"));
        }
        for (i, &g) in self.g_list.iter().enumerate() {
            if !(g >= 1e3 && g.is_finite()) {
                return Err(bad(&format!("g_list[{i}]"), format!("must be at least 1e3, got {g}")));
            }
        }
        if self.g_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("g_list", "must be strictly increasing"));
        }
        let [lo, hi] = self.limit.bracket;
        if !(lo.is_finite() && hi.is_finite() && lo != hi) {
            return Err(bad("limit.bracket", "needs two distinct finite values"));
        }
        at_least("limit.base_count", self.limit.base_count, 100)?;
        positive("limit.zone_half_width", self.limit.zone_half_width)?;
        positive("limit.zone_spacing", self.limit.zone_spacing)?;
        at_least("outer_grid.base_count", self.outer_grid.base_count, 100)?;
        positive("outer_grid.zone_half_width", self.outer_grid.zone_half_width)?;
        positive("outer_grid.zone_spacing", self.outer_grid.zone_spacing)?;
        at_least("mesh.base_count", self.mesh.base_count, 100)?;
        positive("mesh.layer_width", self.mesh.layer_width)?;
        positive("mesh.layer_spacing", self.mesh.layer_spacing)?;
        positive("mesh.boundary_width", self.mesh.boundary_width)?;
        positive("mesh.boundary_spacing", self.mesh.boundary_spacing)?;
        positive("kappa", self.kappa)?;
        if !(self.blowup.t_max >= MIN_T && self.blowup.t_max.is_finite()) {
            return Err(bad("blowup.t_max", format!("must be at least {MIN_T}, got {}", self.blowup.t_max)));
        }
        at_least("blowup.n_nodes", self.blowup.n_nodes, MIN_NODES)?;
        let tol = self.tolerances.newton;
        if !(tol > 0.0 && tol <= 1e-6) {
            return Err(bad("tolerances.newton", format!("must lie in (0, 1e-6], got {tol}")));
        }
        at_least("tolerances.max_iter", self.tolerances.max_iter, 1)?;
        positive("tolerances.fit_residual", self.tolerances.fit_residual)?;
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(bad("gamma", format!("must lie in (0, 1), got {}", self.gamma)));
        }
        at_least("probe.samples", self.probe.samples, 1)?;
        at_least("probe.bumps", self.probe.bumps, 1)?;
        positive("probe.center_range", self.probe.center_range)?;
        positive("probe.width_min", self.probe.width_min)?;
        if !(self.probe.width_max >= self.probe.width_min && self.probe.width_max.is_finite()) {
            return Err(bad("probe.width_max", "must be finite and at least probe.width_min"));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(bad("output_dir", "must not be empty"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the validated config: keys sorted at
    /// every level, so the hash ignores key order and spelled-out defaults.
    /// `output_dir` is left out: it does not change any result.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.canonical().to_string().as_bytes()))
    }

    /// The config as a JSON value with sorted keys and without `output_dir`.
    pub fn canonical(&self) -> serde_json::Value {
        // serde_json's map is ordered by key unless `preserve_order` is enabled
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("config is an object").remove("output_dir");
        v
    }

    pub fn construction_spec(&self) -> ConstructionSpec {
        ConstructionSpec {
            limit: LimitGridSpec {
                base_count: self.limit.base_count,
                zone_half_width: self.limit.zone_half_width,
                zone_spacing: self.limit.zone_spacing,
            },
            outer_base: self.outer_grid.base_count,
            outer_zone_half_width: self.outer_grid.zone_half_width,
            outer_zone_spacing: self.outer_grid.zone_spacing,
            profile_t: self.blowup.t_max,
            profile_nodes: self.blowup.n_nodes,
        }
    }

    pub fn limit_init(&self) -> LimitInit {
        LimitInit::Bracket(self.limit.bracket[0], self.limit.bracket[1])
    }

    pub fn ladder_options(&self) -> LadderOptions {
        LadderOptions {
            assembly: AssemblyOptions { kappa: self.kappa, mesh: (&self.mesh).into() },
            solver: SolverOptions { tol: self.tolerances.newton, max_iter: self.tolerances.max_iter },
            probe: ProbeSpec {
                seed: self.seed,
                samples: self.probe.samples,
                bumps: self.probe.bumps,
                center_range: self.probe.center_range,
                width_min: self.probe.width_min,
                width_max: self.probe.width_max,
                gamma: self.gamma,
            },
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(ExperimentConfig::from_json("{}").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn hash_ignores_key_order_and_explicit_defaults() {
        let a = ExperimentConfig::from_json(r#"{"gamma": 0.25, "dim": 3, "f": {"p": 1.0, "kind": "power", "lambda": 0.0}}"#).unwrap();
        let b = ExperimentConfig::from_json(r#"{"f": {"lambda": 0.0, "kind": "power", "p": 1.0}, "dim": 3, "gamma": 0.25}"#).unwrap();
        let c = ExperimentConfig::from_json(r#"{"gamma": 0.25}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash(), c.hash());
        assert_ne!(a.hash(), ExperimentConfig::default().hash());
        assert_eq!(a.hash().len(), 64);
        let d = ExperimentConfig::from_json(r#"{"gamma": 0.25, "output_dir": "elsewhere"}"#).unwrap();
        assert_eq!(a.hash(), d.hash());
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            (r#"{"gamma": 1.5}"#, "gamma"),
            (r#"{"gamma": 0.0}"#, "gamma"),
            (r#"{"g_list": [1e4, 500.0]}"#, "g_list[1]"),
            (r#"{"g_list": [1e5, 1e4]}"#, "g_list"),
            (r#"{"mesh": {"layer_spacing": -1.0}}"#, "mesh.layer_spacing"),
            (r#"{"blowup": {"t_max": 2.0}}"#, "blowup.t_max"),
            (r#"{"f": {"kind": "power", "lambda": 0.0, "p": 0.5}}"#, "f.p"),
            (r#"{"domain": {"kind": "annulus", "inner": 1.5}}"#, "domain.inner"),
            (r#"{"tolerances": {"newton": 0.1}}"#, "tolerances.newton"),
            (r#"{"dim": "three"}"#, "dim"),
            (r#"{"mesh": {"base_count": 10, "bogus": 1}}"#, "mesh.bogus"),
        ];
        for (text, field) in cases {
            let e = ExperimentConfig::from_json(text).unwrap_err();
            assert_eq!(e.field, field, "{text}: {e}");
        }
        assert!(ExperimentConfig::from_json("[1, 2]").is_err());
    }
}
