//! The stages behind each subcommand. Each later command runs every stage of
//! the earlier ones; gate failures carry the stage that raised them.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use gpseg::blowup::{solve_profile, BlowupProfile, InnerCorrections};
use gpseg::construction::Construction;
use gpseg::ladder::{complete_ladder, ColdSolve, ConstructedPoint, LadderOptions, LadderPoint};
use gpseg::outer::{check_nondegeneracy, compute_corrections, solve_limit_problem, LimitForm, NodalSolution, OuterGrids};
use gpseg::radial::RefinementZone;
use gpseg::solver::{verify_rates, RateReport};
use gpseg::verify::{ladder_criteria, static_criteria, Criterion};
use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::artifacts::{csv, g_label, Manifest, StageStatus, Writer};
use crate::config::{hex, ExperimentConfig};

pub const REPORT_SCHEMA: &str = "gpseg-report/1";
pub const MANIFEST_SCHEMA: &str = "gpseg-manifest/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Command {
    Profile,
    Outer,
    Construct,
    Solve,
    Sweep,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Outer => "outer",
            Command::Construct => "construct",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

/// A library failure tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: String,
    pub source: gpseg::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}`: {}", self.stage, self.source)
    }
}

// the library message is already part of the display
impl std::error::Error for StageError {}

/// Acceptance criteria failed under `--strict`.
#[derive(Debug)]
pub struct CriteriaFailed(pub Vec<u8>);

impl fmt::Display for CriteriaFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "criteria failed: {:?}", self.0)
    }
}

impl std::error::Error for CriteriaFailed {}

pub struct RunOptions {
    pub out: PathBuf,
    pub threads: usize,
    pub strict: bool,
}

/// Run bookkeeping: stage verdicts and timings for the manifest.
struct Run {
    stages: Vec<StageStatus>,
    timings: BTreeMap<String, f64>,
    cache: String,
}

impl Run {
    fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> gpseg::Result<T>) -> Result<T, StageError> {
        let clock = Instant::now();
        let out = f();
        self.timings.insert(name.into(), clock.elapsed().as_secs_f64());
        match out {
            Ok(t) => {
                self.stages.push(StageStatus { stage: name.into(), pass: true, message: String::new() });
                Ok(t)
            }
            Err(source) => {
                self.stages.push(StageStatus { stage: name.into(), pass: false, message: source.to_string() });
                Err(StageError { stage: name.into(), source })
            }
        }
    }
}

fn profile_key(psi0: f64, t_max: f64, nodes: usize) -> String {
    let key = format!("profile/1 {:016x} {:016x} {nodes}", psi0.to_bits(), t_max.to_bits());
    hex(&Sha256::digest(key.as_bytes()))[..16].to_string()
}

/// The blow-up profile, reused from `<out>/cache` when the same slope and
/// window were solved before. Cached values round-trip exactly.
fn cached_profile(cache_dir: &Path, psi0: f64, t_max: f64, nodes: usize) -> gpseg::Result<(BlowupProfile, String)> {
    let path = cache_dir.join(format!("profile-{}.json", profile_key(psi0, t_max, nodes)));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(p) = serde_json::from_str::<BlowupProfile>(&text) {
            if p.psi0 == psi0 && p.grid.len() == nodes && p.t_max() == t_max {
                return Ok((p, "hit".into()));
            }
        }
    }
    let p = solve_profile(psi0, t_max, nodes)?;
    let status = match std::fs::create_dir_all(cache_dir).ok().and_then(|_| serde_json::to_string(&p).ok()).map(|s| std::fs::write(&path, s)) {
        Some(Ok(())) => "miss",
        _ => "miss (not stored)",
    };
    Ok((p, status.into()))
}

fn limit_json(l: &NodalSolution) -> Value {
    json!({
        "op": "solve_limit_problem",
        "r0": l.r0,
        "psi0": l.psi0,
        "psi0_left": l.psi0_left,
        "psi0_right": l.psi0_right,
        "slope_gap": l.slope_gap(),
        "newton": l.report,
    })
}

fn profile_json(p: &BlowupProfile) -> Value {
    json!({
        "op": "solve_profile",
        "psi0": p.psi0,
        "k": p.k,
        "k_check": p.k_check,
        "residual": p.residual,
        "symmetry_defect": p.symmetry_defect,
        "decay_rate": p.decay_rate,
        "t_max": p.t_max(),
        "nodes": p.grid.len(),
        "newton": p.report,
    })
}

fn point_json(cp: &ConstructedPoint) -> Value {
    json!({
        "op": "construct_point",
        "g": cp.g,
        "matching": cp.params,
        "expansion": cp.expansion,
        "remainder": cp.remainder,
        "overlap": cp.overlap,
    })
}

fn construct_csv(cp: &ConstructedPoint) -> String {
    let ap = &cp.ap;
    let zeta: Vec<f64> = ap.glue.iter().map(|g| g.zeta[0]).collect();
    csv(&["r", "u_ap", "v_ap", "R1", "R2", "zeta"], &[ap.nodes(), ap.u.values(), ap.v.values(), &cp.remainder.r1, &cp.remainder.r2, &zeta])
}

fn solve_csv(p: &LadderPoint) -> String {
    let ap = &p.constructed.ap;
    csv(&["r", "u", "v", "u_ap", "v_ap"], &[ap.nodes(), p.solution.u.values(), p.solution.v.values(), ap.u.values(), ap.v.values()])
}

fn rates_csv(pts: &[LadderPoint]) -> String {
    let col = |f: fn(&LadderPoint) -> f64| -> Vec<f64> { pts.iter().map(f).collect() };
    csv(
        &["g", "sup_err_u", "sup_err_v", "inner_profile_err", "correction_norm", "probe_max_ratio"],
        &[
            &col(|p| p.constructed.g),
            &col(|p| p.solution.diagnostics.sup_err_u),
            &col(|p| p.solution.diagnostics.sup_err_v),
            &col(|p| p.solution.diagnostics.inner_profile_err),
            &col(|p| p.solution.diagnostics.correction_norm),
            &col(|p| p.probe.max_ratio),
        ],
    )
}

/// A constructed point and, from `solve` on, its cold Newton attempt.
type Built = (ConstructedPoint, Option<ColdSolve>);

/// Run `cmd`; the manifest is written whether or not a stage fails.
pub fn run(cmd: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Value> {
    let started = crate::artifacts::unix_now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.threads).build().context("building the thread pool")?;
    let mut writer = Writer::new(&opts.out)?;
    let mut run = Run { stages: Vec::new(), timings: BTreeMap::new(), cache: "unused".into() };
    let outcome = stages(cmd, cfg, opts, &pool, &mut run, &mut writer);
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        command: cmd.name().into(),
        config_hash: cfg.hash(),
        started_unix: started,
        finished_unix: crate::artifacts::unix_now(),
        threads: pool.current_num_threads(),
        profile_cache: run.cache.clone(),
        stages: run.stages.clone(),
        timings_seconds: serde_json::to_value(&run.timings)?,
        files: writer.files.clone(),
    };
    writer.put_json(&format!("{}-manifest.json", cmd.name()), &serde_json::to_value(&manifest)?)?;
    outcome
}

fn stages(cmd: Command, cfg: &ExperimentConfig, opts: &RunOptions, pool: &rayon::ThreadPool, run: &mut Run, w: &mut Writer) -> Result<Value> {
    let spec = cfg.construction_spec();
    let mut report = serde_json::Map::new();
    report.insert("schema".into(), json!(REPORT_SCHEMA));
    report.insert("command".into(), json!(cmd.name()));
    report.insert("config_hash".into(), json!(cfg.hash()));
    report.insert("config".into(), cfg.canonical());

    let limit = run.stage("limit", || solve_limit_problem(cfg.f, cfg.h, cfg.dim, cfg.domain, &cfg.limit_init(), &spec.limit, LimitForm::Split))?;
    report.insert("limit".into(), limit_json(&limit));

    let cache_dir = w.root().join("cache");
    let (profile, cache) = run.stage("profile", || cached_profile(&cache_dir, limit.psi0, spec.profile_t, spec.profile_nodes))?;
    run.cache = cache;
    report.insert("profile".into(), profile_json(&profile));
    if cmd == Command::Profile {
        w.put("profile/profile.csv", &csv(&["t", "u", "v", "du", "dv"], &[&profile.grid.nodes(), &profile.u, &profile.v, &profile.du, &profile.dv]))?;
        return finish(cmd, report, w);
    }

    let outer = run.stage("outer", || {
        let zone = RefinementZone::new(limit.r0, spec.outer_zone_half_width, spec.outer_zone_spacing);
        let grids = OuterGrids::around(&limit, spec.outer_base, Some(zone))?;
        compute_corrections(&limit, &grids)
    })?;
    let nondegeneracy = run.stage("nondegeneracy", || check_nondegeneracy(&limit, &outer))?;
    let inner = run.stage("inner", || InnerCorrections::compute(&profile, limit.r0, cfg.dim))?;
    report.insert("outer".into(), json!({ "op": "compute_corrections", "boundary_data": outer.data, "nondegeneracy": nondegeneracy }));
    report.insert("inner".into(), json!({ "op": "inner_corrections", "b0": inner.b0, "antisymmetry_defect": inner.antisymmetry_defect }));
    let c = Construction { f: cfg.f, h: cfg.h, dim: cfg.dim, domain: cfg.domain, limit, outer, nondegeneracy, profile, inner };
    if cmd == Command::Outer {
        w.put("outer/limit.csv", &csv(&["r", "w"], &[c.limit.w.nodes(), c.limit.w.values()]))?;
        let [u0, u1, u2, u3] = &c.outer.u;
        w.put("outer/outer_u.csv", &csv(&["r", "u0", "u1", "u2", "u3"], &[u0.nodes(), u0.values(), u1.values(), u2.values(), u3.values()]))?;
        let [v0, v1, v2, v3] = &c.outer.v;
        w.put("outer/outer_v.csv", &csv(&["r", "v0", "v1", "v2", "v3"], &[v0.nodes(), v0.values(), v1.values(), v2.values(), v3.values()]))?;
        return finish(cmd, report, w);
    }

    // every g is independent up to the cold solve
    let lopts: LadderOptions = cfg.ladder_options();
    let solve = cmd >= Command::Solve;
    let clock = Instant::now();
    let built: Vec<(f64, gpseg::Result<Built>)> = pool.install(|| {
        cfg.g_list
            .par_iter()
            .map(|&g| {
                let r = ConstructedPoint::build(&c, g, &lopts).map(|cp| {
                    let cold = solve.then(|| cp.solve(&c, &lopts));
                    (cp, cold)
                });
                (g, r)
            })
            .collect()
    });
    run.timings.insert("build_and_cold_solve".into(), clock.elapsed().as_secs_f64());
    let mut pts = Vec::with_capacity(built.len());
    for (g, r) in built {
        pts.push(run.stage(&format!("construct {}", g_label(g)), || r)?);
    }
    report.insert("points".into(), Value::Array(pts.iter().map(|(cp, _)| point_json(cp)).collect()));
    if cmd == Command::Construct {
        for (cp, _) in &pts {
            w.put(&format!("construct/{}.csv", g_label(cp.g)), &construct_csv(cp))?;
        }
        return finish(cmd, report, w);
    }

    let cold: Vec<(ConstructedPoint, ColdSolve)> = pts.into_iter().map(|(cp, s)| (cp, s.expect("solved"))).collect();
    let ladder = run.stage("solve", || complete_ladder(&c, cold, &lopts))?;
    let points: Vec<Value> = ladder
        .iter()
        .map(|p| {
            let mut v = point_json(&p.constructed);
            v["solution"] = json!({ "op": "newton", "g": p.solution.g, "continued": p.solution.continued, "newton": p.solution.report, "diagnostics": p.solution.diagnostics });
            v["probe"] = json!({ "op": "linear_probe", "report": p.probe });
            v
        })
        .collect();
    report.insert("points".into(), Value::Array(points));
    for p in &ladder {
        w.put(&format!("solve/{}.csv", g_label(p.constructed.g)), &solve_csv(p))?;
    }
    if cmd == Command::Solve {
        return finish(cmd, report, w);
    }

    w.put(&format!("{}/rates.csv", cmd.name()), &rates_csv(&ladder))?;
    let sols: Vec<_> = ladder.iter().map(|p| p.solution.clone()).collect();
    if cmd == Command::Sweep {
        let rates: [RateReport; 3] = run.stage("rates", || verify_rates(&sols, cfg.tolerances.fit_residual))?;
        report.insert("rates".into(), json!({ "op": "verify_rates", "fits": rates }));
        return finish(cmd, report, w);
    }

    let mut criteria: Vec<Criterion> = run.stage("static criteria", || static_criteria(&c, &spec, cfg.seed))?;
    let (ladder_cs, rates) = run.stage("ladder criteria", || ladder_criteria(&ladder, cfg.tolerances.newton))?;
    criteria.extend(ladder_cs);
    criteria.sort_by_key(|c| c.id);
    for cr in &criteria {
        println!("{}", cr.line());
    }
    let failed: Vec<u8> = criteria.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    let pass = failed.is_empty();
    println!("verify: {} of {} criteria pass", criteria.len() - failed.len(), criteria.len());
    report.insert("rates".into(), json!({ "op": "verify_rates", "fits": rates }));
    report.insert("criteria".into(), json!({ "op": "acceptance", "list": criteria }));
    report.insert("pass".into(), json!(pass));
    let report = finish(cmd, report, w)?;
    if opts.strict && !pass {
        return Err(CriteriaFailed(failed).into());
    }
    Ok(report)
}

fn finish(cmd: Command, report: serde_json::Map<String, Value>, w: &mut Writer) -> Result<Value> {
    let v = Value::Object(report);
    w.put_json(&format!("{}-report.json", cmd.name()), &v)?;
    Ok(v)
}
