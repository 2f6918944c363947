//! Acceptance run: one PASS/FAIL line per criterion, then a nonzero exit if
//! any criterion outside `KNOWN_FAILING` fails.
//!
//! Runs without the libtest harness so the lines are always printed.

use std::path::Path;
use std::process::Command as Proc;
use std::time::Instant;

use serde_json::Value;
use sto_cli::config::parse_config_str;
use sto_cli::presets::{preset, PRESET_NAMES};
use sto_cli::{run_scenario, Command, ExperimentConfig, Outcome, Plan};

/// Criteria that fail at the specified scale; see the README.
const KNOWN_FAILING: &[usize] = &[7];

const UNCOUPLED: &str = "
[run]
name = uncoupled
[model]
map = doubling
alpha = 0
[grid]
nz = 64
nx = 256
[initial]
profile = sinusoid(0.8, 0.25)
alternate = sinusoid(0.5, 0.7)
[solver]
max_iter = 3
[probes]
names = uniform_limit
";

struct Line {
    id: usize,
    pass: bool,
    detail: String,
}

fn run(cfg: &ExperimentConfig, command: Command) -> (Outcome, f64) {
    let plan = Plan::new(command, cfg).expect("plan");
    let t = Instant::now();
    let out = run_scenario(cfg, &plan).expect("scenario runs");
    (out, t.elapsed().as_secs_f64())
}

fn values<'a>(o: &'a Outcome, probe: &str) -> &'a Value {
    &o.report.probes[probe].values
}

fn stat(o: &Outcome, probe: &str) -> f64 {
    o.report.probes[probe].statistic.unwrap_or(f64::NAN)
}

fn presets() -> Vec<ExperimentConfig> {
    PRESET_NAMES
        .iter()
        .map(|n| preset(n).expect("preset"))
        .collect()
}

/// Run `probe` on every preset; pass iff `ok` holds for each statistic.
fn per_preset(id: usize, probe: &str, ok: impl Fn(f64, &Value) -> bool, show: &[&str]) -> Line {
    let mut pass = true;
    let mut parts = Vec::new();
    for cfg in presets() {
        let (o, secs) = run(&cfg, Command::Probe(probe.into()));
        let (s, v) = (stat(&o, probe), values(&o, probe));
        pass &= ok(s, v);
        let shown: Vec<String> = show.iter().map(|k| format!("{k}={}", v[*k])).collect();
        parts.push(format!(
            "{}: stat={s:.4e} {} ({secs:.1}s)",
            cfg.name,
            shown.join(" ")
        ));
    }
    Line {
        id,
        pass,
        detail: parts.join("; "),
    }
}

fn c1() -> Line {
    let cfg = parse_config_str(UNCOUPLED, ExperimentConfig::default()).expect("config");
    let (o, secs) = run(&cfg, Command::FixedPoint);
    let solve = o.report.solve.as_ref().expect("solve");
    let sup = stat(&o, "uniform_limit");
    Line {
        id: 1,
        pass: sup < 1e-10 && solve.iterations <= 3 && secs < 1.0,
        detail: format!(
            "sup error {sup:.3e} after {} iterations, {secs:.2}s",
            solve.iterations
        ),
    }
}

fn c2_c3() -> (Line, Line) {
    let (mut p2, mut p3) = (true, true);
    let (mut d2, mut d3) = (Vec::new(), Vec::new());
    for cfg in presets() {
        let (o, secs) = run(&cfg, Command::FixedPoint);
        let r = values(&o, "rate");
        let residual = r["final_residual"].as_f64().unwrap_or(f64::NAN);
        let rate = r["rate"].as_f64().unwrap_or(f64::NAN);
        let r2 = r["r_squared"].as_f64().unwrap_or(f64::NAN);
        let uniq = stat(&o, "uniqueness");
        let tol = cfg.tol;
        p2 &= r["converged"] == true
            && residual < 1e-10
            && r2 > 0.99
            && rate > 0.0
            && uniq < 5.0 * tol
            && secs < 60.0;
        d2.push(format!(
            "{}: residual {residual:.2e}, R2 {r2:.5}, rate {rate:.3}, uniqueness {uniq:.2e}, {secs:.1}s",
            cfg.name
        ));
        let e = values(&o, "expansion");
        let violations = e["violations"].as_u64().unwrap_or(u64::MAX);
        let max_dist = e["max_distortion"].as_f64().unwrap_or(f64::NAN);
        p3 &= violations == 0 && max_dist.is_finite();
        d3.push(format!(
            "{}: {} steps, {violations} violations, min xi {:.4}, max distortion {max_dist:.4}",
            cfg.name,
            e["steps"],
            e["min_xi"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    (
        Line {
            id: 2,
            pass: p2,
            detail: d2.join("; "),
        },
        Line {
            id: 3,
            pass: p3,
            detail: d3.join("; "),
        },
    )
}

fn c8() -> Line {
    let cfg = preset("er").expect("preset");
    let (o, secs) = run(&cfg, Command::Simulate);
    let v = values(&o, "concentration");
    let r2 = v["r_squared"].as_f64().unwrap_or(f64::NAN);
    let slope = v["slope"].as_f64().unwrap_or(f64::NAN);
    let c = &cfg.concentration;
    Line {
        id: 8,
        pass: slope < 0.0 && r2 > 0.9 && v["sub_gaussian"] == true && c.n == 400 && c.r == 10_000,
        detail: format!(
            "N={} R={}: slope {slope:.4} in eps^2 N, R2 {r2:.4}, tails under fit {}, {secs:.1}s",
            c.n, c.r, v["sub_gaussian"]
        ),
    }
}

fn stripped_report(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("report.json")).expect("report written");
    let mut v: Value = serde_json::from_str(&text).expect("report parses");
    v["environment"]
        .as_object_mut()
        .expect("environment")
        .remove("timings");
    v
}

fn c11() -> Line {
    let bin = env!("CARGO_BIN_EXE_sto");
    let tmp = tempfile::tempdir().expect("tempdir");
    let runs: &[(&str, &[&str])] = &[
        ("fixed-point", &["--preset", "clustered", "fixed-point"]),
        ("simulate", &["--preset", "er", "simulate"]),
        (
            "lasota_yorke",
            &["--preset", "decay", "probe", "lasota_yorke"],
        ),
        ("hilbert", &["--preset", "er", "probe", "hilbert"]),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, args) in runs {
        let mut reports = Vec::new();
        for threads in ["1", "4"] {
            let out = tmp.path().join(format!("{label}-{threads}"));
            let status = Proc::new(bin)
                .args(["--threads", threads, "--out"])
                .arg(&out)
                .args(*args)
                .output()
                .expect("binary runs");
            assert!(status.status.code().is_some(), "{label}: killed");
            reports.push(serde_json::to_string(&stripped_report(&out)).expect("json"));
        }
        let same = reports[0] == reports[1];
        pass &= same;
        parts.push(format!(
            "{label}: {}",
            if same { "identical" } else { "DIFFERENT" }
        ));
    }
    Line {
        id: 11,
        pass,
        detail: format!("threads 1 vs 4: {}", parts.join(", ")),
    }
}

fn main() {
    let t = Instant::now();
    let mut lines = vec![c1()];
    let (l2, l3) = c2_c3();
    lines.push(l2);
    lines.push(l3);
    lines.push(per_preset(
        4,
        "lasota_yorke",
        |s, _| s >= -1e-8,
        &["trials", "min_relative_slack"],
    ));
    lines.push(per_preset(
        5,
        "memory_loss",
        |s, _| s <= 0.0,
        &["trials", "max_ratio", "max_mass_defect"],
    ));
    lines.push(per_preset(
        6,
        "lipschitz",
        |s, v| s < 0.1 && v["max_ratio"].as_f64().is_some_and(f64::is_finite),
        &["pairs", "max_ratio", "max_ratio_refined"],
    ));
    let sweep_start = Instant::now();
    let mut l7 = per_preset(
        7,
        "sweep",
        |s, _| s == 0.0,
        &["z_star", "strictly_decreasing"],
    );
    let sweep_secs = sweep_start.elapsed().as_secs_f64();
    l7.pass &= sweep_secs < 600.0;
    l7.detail.push_str(&format!("; total {sweep_secs:.0}s"));
    lines.push(l7);
    lines.push(c8());
    lines.push(per_preset(
        9,
        "ulam",
        |s, _| s < 2e-2,
        &["trials", "subdiv", "mean_l1"],
    ));
    lines.push(per_preset(
        10,
        "hilbert",
        |s, _| s < 1.0,
        &["pairs", "skipped_fibers"],
    ));
    lines.push(c11());

    let mut unexpected = Vec::new();
    for l in &lines {
        let tag = if l.pass { "PASS" } else { "FAIL" };
        let known = if !l.pass && KNOWN_FAILING.contains(&l.id) {
            " (known)"
        } else {
            ""
        };
        println!("criterion {:>2}: {tag}{known}  {}", l.id, l.detail);
        if !l.pass && !KNOWN_FAILING.contains(&l.id) {
            unexpected.push(l.id);
        }
    }
    let passed = lines.iter().filter(|l| l.pass).count();
    println!(
        "acceptance: {passed}/{} criteria pass in {:.0}s",
        lines.len(),
        t.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
