//! Orchestration: run the solver, probes, sweep and ensemble simulation a
//! configuration asks for, then write every artifact.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;
use sto_core::audits::{
    distance_to_uniform, hilbert_audit, lasota_yorke_audit, lipschitz_audit, memory_loss_audit,
    ulam_audit,
};
use sto_core::fibered::FiberedDensity;
use sto_core::finite_sim::{
    concentration_probe, convergence_sweep, node_for, run, sample_initial, strictly_decreasing,
    write_sweep_csv, AdjacencyFamily, NetworkSystem, SweepParams, SweepSpec,
};
use sto_core::graphon::Graphon;
use sto_core::report::{
    assemble_report, Comparison, Environment, ProbeResult, ReportParts, RunReport,
};
use sto_core::rng::derive_seed;
use sto_core::sto::{fixed_point, StoModel, MASS_WARN};
use sto_core::{EnsembleState64, FiberedDensity64, StoError};

use crate::config::{ConfigError, ErrorCode, ExperimentConfig, GraphonSpec, PROBE_NAMES};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] StoError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Engine(StoError::Io(_) | StoError::Report(_)) | CliError::Io(_) => 1,
            CliError::Engine(_) => 3,
        }
    }
}

/// Probes that read the fixed-point solve.
const SOLVE_PROBES: &[&str] = &["rate", "uniqueness", "expansion", "uniform_limit"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    FixedPoint,
    Simulate,
    Compare,
    Probe(String),
}

/// What a run will compute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plan {
    pub command: Command,
    pub solve: bool,
    pub alternate_solve: bool,
    pub probes: Vec<String>,
    pub keep_ensemble: bool,
}

impl Plan {
    pub fn new(command: Command, cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let probes: Vec<String> = match &command {
            Command::FixedPoint => cfg.probes.clone(),
            Command::Simulate => vec!["concentration".into()],
            Command::Compare => vec!["sweep".into()],
            Command::Probe(name) => {
                if !PROBE_NAMES.contains(&name.as_str()) {
                    return Err(ConfigError {
                        code: ErrorCode::UnresolvableName,
                        line: None,
                        key: Some("probe".into()),
                        message: format!(
                            "unknown probe `{name}`; known: {}",
                            PROBE_NAMES.join(", ")
                        ),
                    });
                }
                vec![name.clone()]
            }
        };
        let has = |n: &str| probes.iter().any(|p| p == n);
        Ok(Self {
            solve: command == Command::FixedPoint
                || probes.iter().any(|p| SOLVE_PROBES.contains(&p.as_str())),
            alternate_solve: has("uniqueness") || has("expansion"),
            keep_ensemble: command == Command::Simulate,
            probes,
            command,
        })
    }

    /// Human-readable execution plan for `--dry-run`.
    pub fn describe(&self, cfg: &ExperimentConfig) -> String {
        let mut out = format!(
            "scenario {}: map {}, coupling {}, graphon {:?}, alpha {:?}, grid nz={} nx={}, seed {}\n",
            cfg.name, cfg.map, cfg.coupling, cfg.graphon, cfg.alpha, cfg.nz, cfg.nx, cfg.seed
        );
        let mut step = 1;
        let mut line = |s: String| {
            out.push_str(&format!("  {step}. {s}\n"));
            step += 1;
        };
        if self.solve {
            line(format!(
                "fixed point from {:?} (tol {:e}, max_iter {})",
                cfg.initial, cfg.tol, cfg.max_iter
            ));
        }
        if self.alternate_solve {
            line(format!("second fixed point from {:?}", cfg.alternate));
        }
        for p in &self.probes {
            line(format!("probe {p}"));
        }
        if cfg.alpha_warning {
            out.push_str("  warning: alpha is outside the certified regime\n");
        }
        out
    }
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub fixed_point: Option<FiberedDensity64>,
    pub ensemble: Option<EnsembleState64>,
}

impl Outcome {
    /// 0 when no verdict failed, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.all_pass() {
            0
        } else {
            4
        }
    }
}

fn default_threshold(name: &str, cfg: &ExperimentConfig) -> (Comparison, f64) {
    match name {
        "rate" => (Comparison::Above, 0.99),
        "uniqueness" => (Comparison::Below, 5.0 * cfg.tol),
        "expansion" => (Comparison::AtMost, 0.0),
        "uniform_limit" => (Comparison::Below, 1e-10),
        "lasota_yorke" => (Comparison::AtLeast, -1e-8),
        "memory_loss" => (Comparison::AtMost, 0.0),
        "lipschitz" => (Comparison::Below, 0.1),
        "ulam" => (Comparison::Below, 2e-2),
        "hilbert" => (Comparison::Below, 1.0),
        "sweep" => (Comparison::AtMost, 0.0),
        "concentration" => (Comparison::Above, 0.9),
        _ => unreachable!("probe names are validated"),
    }
}

fn probe_seed(cfg: &ExperimentConfig, name: &str) -> u64 {
    let idx = PROBE_NAMES.iter().position(|p| *p == name).unwrap_or(0);
    derive_seed(cfg.seed, 1 + idx as u64)
}

fn sweep_spec(cfg: &ExperimentConfig) -> Result<SweepSpec<f64>, StoError> {
    let (limit, family) = match &cfg.graphon {
        GraphonSpec::Er { p } => (Graphon::constant(*p), AdjacencyFamily::ErdosRenyi { p: *p }),
        // a constant kernel is the one-block graphon
        GraphonSpec::Constant { p } => (
            Graphon::block(vec![], vec![*p])?,
            AdjacencyFamily::Quantized,
        ),
        other => (other.limit()?, AdjacencyFamily::Quantized),
    };
    Ok(SweepSpec {
        scenario: cfg.name.clone(),
        limit,
        family,
        z_stars: cfg.sweep.z_star.clone(),
    })
}

struct Solved {
    phi: FiberedDensity64,
    report: sto_core::sto::SolveReport,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    model: StoModel<f64>,
    primary: Option<Solved>,
    alternate: Option<Solved>,
    timings: BTreeMap<String, f64>,
    sweep: Option<Vec<sto_core::finite_sim::SweepRow>>,
    concentration: Option<sto_core::finite_sim::ConcentrationTable>,
    ensemble: Option<EnsembleState64>,
    keep_ensemble: bool,
}

impl Context<'_> {
    fn model_with(&self, alpha: f64, nz: usize, nx: usize) -> Result<StoModel<f64>, StoError> {
        Ok(StoModel::new(
            self.cfg.map_fn()?,
            self.cfg.coupling_fn()?,
            self.cfg.graphon.limit()?,
            alpha,
            nz,
            nx,
        )?
        .with_strict(self.cfg.strict))
    }

    fn primary(&self) -> &Solved {
        self.primary
            .as_ref()
            .expect("plan solves before solve probes")
    }

    fn run_probe(&mut self, name: &str) -> Result<ProbeResult, StoError> {
        let cfg = self.cfg;
        let a = &cfg.audit;
        let seed = probe_seed(cfg, name);
        let (cmp, default) = default_threshold(name, cfg);
        let threshold = cfg.thresholds.get(name).copied().unwrap_or(default);
        let eval = |stat: f64, values: serde_json::Value| {
            ProbeResult::evaluate(name, stat, cmp, threshold, values)
        };
        Ok(match name {
            "rate" => {
                let r = &self.primary().report;
                let fit = r.rate.clone();
                let ok = r.converged && fit.as_ref().is_some_and(|f| f.rate > 0.0);
                let stat = match (&fit, ok) {
                    (Some(f), true) => f.r_squared,
                    _ => f64::NAN,
                };
                eval(
                    stat,
                    json!({
                        "converged": r.converged,
                        "iterations": r.iterations,
                        "final_residual": r.weak_residuals.last(),
                        "rate": fit.as_ref().map(|f| f.rate),
                        "r_squared": fit.as_ref().map(|f| f.r_squared),
                        "points": fit.as_ref().map(|f| f.points),
                    }),
                )
            }
            "uniqueness" => {
                let (p, q) = (
                    self.primary(),
                    self.alternate.as_ref().expect("alternate solve"),
                );
                let d = sto_core::fibered::weak_norm_distance(&p.phi, &q.phi)?;
                eval(
                    d,
                    json!({
                        "distance": d,
                        "converged": [p.report.converged, q.report.converged],
                        "iterations": [p.report.iterations, q.report.iterations],
                    }),
                )
            }
            "expansion" => {
                let runs: Vec<&Solved> = self.primary.iter().chain(self.alternate.iter()).collect();
                let mut steps = 0usize;
                let mut violations = 0usize;
                let mut min_xi = f64::INFINITY;
                let mut max_dist = 0.0f64;
                for s in &runs {
                    let r = &s.report;
                    steps += r.iterations;
                    violations += r
                        .min_xi
                        .iter()
                        .zip(&r.max_distortion)
                        .filter(|(x, d)| !(**x > 1.0) || !d.is_finite())
                        .count();
                    min_xi = r.min_xi.iter().copied().fold(min_xi, f64::min);
                    max_dist = r.max_distortion.iter().copied().fold(max_dist, f64::max);
                }
                eval(
                    violations as f64,
                    json!({
                        "steps": steps,
                        "violations": violations,
                        "min_xi": min_xi,
                        "max_distortion": max_dist,
                    }),
                )
            }
            "uniform_limit" => {
                let s = self.primary();
                let d = distance_to_uniform(&s.phi);
                eval(
                    d,
                    json!({ "sup_distance": d, "iterations": s.report.iterations }),
                )
            }
            "lasota_yorke" => {
                let r = lasota_yorke_audit(&self.model, a.lasota_yorke_trials, seed)?;
                eval(r.min_slack, serde_json::to_value(&r).expect("record"))
            }
            "memory_loss" => {
                let alpha = cfg.alpha_at(a.memory_loss_alpha_fraction)?;
                let m = self.model_with(alpha, cfg.nz, cfg.nx)?;
                let r = memory_loss_audit(
                    &m,
                    a.memory_loss_trials,
                    a.memory_loss_steps,
                    a.memory_loss_skip,
                    a.memory_loss_margin,
                    seed,
                )?;
                let mut v = serde_json::to_value(&r).expect("record");
                v["alpha"] = json!(alpha);
                eval(r.max_excess, v)
            }
            "lipschitz" => {
                let r = lipschitz_audit(
                    &self.model,
                    a.lipschitz_pairs,
                    a.lipschitz_w_rel,
                    a.lipschitz_phi_amplitude,
                    seed,
                )?;
                let stat = if r.max_ratio.is_finite() && r.max_ratio_refined.is_finite() {
                    r.relative_change
                } else {
                    f64::NAN
                };
                eval(stat, serde_json::to_value(&r).expect("record"))
            }
            "ulam" => {
                let m = self.model_with(self.model.alpha(), a.ulam_nz, a.ulam_nx)?;
                let r = ulam_audit(&m, a.ulam_trials, a.ulam_subdiv, seed)?;
                eval(r.max_l1, serde_json::to_value(&r).expect("record"))
            }
            "hilbert" => {
                let alpha = cfg.alpha_at(a.hilbert_alpha_fraction)?;
                let m = self.model_with(alpha, cfg.nz, cfg.nx)?;
                let r = hilbert_audit(&m, a.hilbert_pairs, seed)?;
                let mut v = serde_json::to_value(&r).expect("record");
                v["alpha"] = json!(alpha);
                eval(r.max_gamma.unwrap_or(f64::NAN), v)
            }
            "sweep" => {
                let spec = sweep_spec(cfg)?;
                let nu = FiberedDensity::from_spec(cfg.nz, cfg.nx, &cfg.initial)?;
                let params = SweepParams {
                    n_list: cfg.sweep.n_list.clone(),
                    t: cfg.sweep.t,
                    r: cfg.sweep.r,
                    seed,
                    bootstrap: cfg.sweep.bootstrap,
                };
                let rows = convergence_sweep(
                    &spec,
                    &nu,
                    &cfg.map_fn()?,
                    &cfg.coupling_fn()?,
                    self.model.alpha(),
                    &params,
                )?;
                let flags: Vec<bool> = spec
                    .z_stars
                    .iter()
                    .map(|&z| strictly_decreasing(&rows, &spec.scenario, z))
                    .collect();
                let failing = flags.iter().filter(|d| !**d).count();
                self.sweep = Some(rows);
                eval(
                    failing as f64,
                    json!({ "z_star": spec.z_stars, "strictly_decreasing": flags }),
                )
            }
            "concentration" => {
                let c = &cfg.concentration;
                let spec = sweep_spec(cfg)?;
                let nu = FiberedDensity::from_spec(cfg.nz, cfg.nx, &cfg.initial)?;
                let system = NetworkSystem::new(
                    spec.adjacency(c.n, seed)?,
                    cfg.map_fn()?,
                    cfg.coupling_fn()?,
                    self.model.alpha(),
                )?;
                let init = sample_initial(&nu, c.n, c.r, derive_seed(seed, 1))?;
                let state = run(&system, &init, c.t)?;
                let node = node_for(c.z_star, c.n) - 1;
                let table = concentration_probe(&system, &state, node, c.x, &c.eps)?;
                let ok = table.sub_gaussian() && !table.degenerate;
                let stat = match (ok, table.r_squared) {
                    (true, Some(r2)) => r2,
                    _ => f64::NAN,
                };
                let v = json!({
                    "slope": table.slope,
                    "r_squared": table.r_squared,
                    "envelope": table.envelope,
                    "sub_gaussian": table.sub_gaussian(),
                });
                self.concentration = Some(table);
                if self.keep_ensemble {
                    self.ensemble = Some(state);
                }
                eval(stat, v)
            }
            _ => unreachable!("probe names are validated"),
        })
    }
}

fn timed<R>(timings: &mut BTreeMap<String, f64>, key: &str, f: impl FnOnce() -> R) -> R {
    let t = Instant::now();
    let r = f();
    timings.insert(key.to_string(), t.elapsed().as_secs_f64());
    r
}

/// Execute `plan` for `cfg`. Fails only on numerical or configuration
/// errors; probe failures are verdicts inside the report.
pub fn run_scenario(cfg: &ExperimentConfig, plan: &Plan) -> Result<Outcome, CliError> {
    let alpha = cfg.alpha_value()?;
    let model = StoModel::new(
        cfg.map_fn()?,
        cfg.coupling_fn()?,
        cfg.graphon.limit()?,
        alpha,
        cfg.nz,
        cfg.nx,
    )?
    .with_strict(cfg.strict);
    let mut warnings = Vec::new();
    if cfg.alpha_warning {
        let t = cfg
            .alpha_threshold()?
            .map_or("none".to_string(), |t| t.to_string());
        warnings.push(format!(
            "alpha = {alpha} is outside the certified regime (threshold {t})"
        ));
    }
    let mut ctx = Context {
        cfg,
        model,
        primary: None,
        alternate: None,
        timings: BTreeMap::new(),
        sweep: None,
        concentration: None,
        ensemble: None,
        keep_ensemble: plan.keep_ensemble,
    };
    let solve =
        |ctx: &Context, start: &sto_core::fibered::ProfileSpec| -> Result<Solved, StoError> {
            let phi0 = FiberedDensity::from_spec(cfg.nz, cfg.nx, start)?;
            let (phi, report) = fixed_point(&ctx.model, &phi0, cfg.tol, cfg.max_iter)?;
            Ok(Solved { phi, report })
        };
    if plan.solve {
        let mut timings = std::mem::take(&mut ctx.timings);
        let s = timed(&mut timings, "solve", || solve(&ctx, &cfg.initial))?;
        if plan.alternate_solve {
            ctx.alternate = Some(timed(&mut timings, "solve_alternate", || {
                solve(&ctx, &cfg.alternate)
            })?);
        }
        ctx.timings = timings;
        for (label, run) in [("primary", Some(&s)), ("alternate", ctx.alternate.as_ref())] {
            let Some(run) = run else { continue };
            if !run.report.converged {
                warnings.push(format!(
                    "{label} solve stopped after {} iterations without converging",
                    run.report.iterations
                ));
            }
            if run.report.mass_errors.iter().any(|m| *m > MASS_WARN) {
                warnings.push(format!(
                    "{label} solve: pre-normalisation mass error above {MASS_WARN:e}"
                ));
            }
            if !run.report.non_expanding_steps.is_empty() {
                warnings.push(format!(
                    "{label} solve: non-expanding fibers at iterations {:?}",
                    run.report.non_expanding_steps
                ));
            }
        }
        ctx.primary = Some(s);
    }
    let mut probes = Vec::new();
    for name in &plan.probes {
        let t = Instant::now();
        probes.push(ctx.run_probe(name)?);
        ctx.timings
            .insert(format!("probe.{name}"), t.elapsed().as_secs_f64());
    }
    let report = assemble_report(ReportParts {
        config: cfg.echo(),
        requested: plan.probes.clone(),
        solve: ctx.primary.as_ref().map(|s| s.report.clone()),
        probes,
        sweep: ctx.sweep.take(),
        concentration: ctx.concentration.take(),
        warnings,
        environment: Environment {
            nz: cfg.nz,
            nx: cfg.nx,
            seed: cfg.seed,
            timings: ctx.timings.clone(),
        },
    })?;
    Ok(Outcome {
        report,
        fixed_point: ctx.primary.map(|s| s.phi),
        ensemble: ctx.ensemble,
    })
}

/// Write the report and every long-format series it carries into `dir`.
/// Returns the written paths in a fixed order.
pub fn emit_plot_data(outcome: &Outcome, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut create = |name: &str| -> std::io::Result<BufWriter<File>> {
        let p = dir.join(name);
        written.push(p.clone());
        Ok(BufWriter::new(File::create(p)?))
    };
    let r = &outcome.report;
    {
        use std::io::Write;
        create("report.json")?.write_all(r.to_json()?.as_bytes())?;
    }
    if let Some(s) = &r.solve {
        s.write_residual_csv(create("residuals.csv")?)?;
    }
    if let Some(phi) = &outcome.fixed_point {
        phi.write_csv(create("heatmap.csv")?)?;
        phi.write_binary(create("fixed_point.bin")?)?;
    }
    if let Some(rows) = &r.sweep {
        write_sweep_csv(rows, create("sweep.csv")?)?;
    }
    if let Some(c) = &r.concentration {
        c.write_csv(create("concentration.csv")?)?;
    }
    if let Some(e) = &outcome.ensemble {
        e.write_binary(create("ensemble.bin")?)?;
    }
    Ok(written)
}
