//! Experiment configuration: a sectioned `key = value` text format, with
//! JSON accepted as an equivalent alternative.
//!
//! ```text
//! [model]
//! map = perturbed_doubling(0.3)
//! alpha_fraction = 0.5
//!
//! [graphon]
//! kind = block
//! cuts = 0.5
//! values = 1, 0.2, 0.2, 0.5
//! ```
//!
//! The JSON form nests the same keys under section objects:
//! `{"model": {"map": "doubling", "alpha": 0.1}}`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sto_core::circle_maps::catalog;
use sto_core::fibered::ProfileSpec;
use sto_core::graphon::{Graphon, Profile};
use sto_core::sto::alpha_hat;
use sto_core::{CouplingFunction64, ExpandingMap64, Graphon64};

/// Distinct failure classes of [`parse_config`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCode {
    UnknownKey,
    TypeMismatch,
    UnresolvableName,
    InvalidValue,
    Syntax,
    Io,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UnknownKey => "unknown-key",
            ErrorCode::TypeMismatch => "type-mismatch",
            ErrorCode::UnresolvableName => "unresolvable-name",
            ErrorCode::InvalidValue => "invalid-value",
            ErrorCode::Syntax => "syntax",
            ErrorCode::Io => "io",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub code: ErrorCode,
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error[{}]", self.code.as_str())?;
        if let Some(l) = self.line {
            write!(f, " at line {l}")?;
        }
        if let Some(k) = &self.key {
            write!(f, " ({k})")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(
    code: ErrorCode,
    line: Option<usize>,
    key: Option<&str>,
    message: impl Into<String>,
) -> ConfigError {
    ConfigError {
        code,
        line,
        key: key.map(str::to_string),
        message: message.into(),
    }
}

pub const PROBE_NAMES: &[&str] = &[
    "rate",
    "uniqueness",
    "expansion",
    "uniform_limit",
    "lasota_yorke",
    "memory_loss",
    "lipschitz",
    "ulam",
    "hilbert",
    "sweep",
    "concentration",
];

/// Coupling strength, either absolute or relative to `alpha_hat / ||W||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSpec {
    Absolute(f64),
    Fraction(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphonSpec {
    Constant {
        p: f64,
    },
    Block {
        cuts: Vec<f64>,
        values: Vec<f64>,
    },
    Translation {
        shape: String,
        amplitude: f64,
        rate: f64,
    },
    /// Bernoulli(`p`) graphs at finite `N`; the constant `p` in the limit.
    Er {
        p: f64,
    },
}

impl GraphonSpec {
    pub fn limit(&self) -> sto_core::Result<Graphon64> {
        Ok(match self {
            GraphonSpec::Constant { p } | GraphonSpec::Er { p } => Graphon::constant(*p),
            GraphonSpec::Block { cuts, values } => Graphon::block(cuts.clone(), values.clone())?,
            GraphonSpec::Translation {
                shape,
                amplitude,
                rate,
            } => Graphon::translation(match shape.as_str() {
                "exp" => Profile::exp(*amplitude, *rate),
                _ => Profile::linear(*amplitude),
            }),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditSettings {
    pub lasota_yorke_trials: usize,
    pub memory_loss_trials: usize,
    pub memory_loss_steps: usize,
    pub memory_loss_skip: usize,
    pub memory_loss_margin: f64,
    pub memory_loss_alpha_fraction: f64,
    pub lipschitz_pairs: usize,
    pub lipschitz_w_rel: f64,
    pub lipschitz_phi_amplitude: f64,
    pub ulam_trials: usize,
    pub ulam_nz: usize,
    pub ulam_nx: usize,
    pub ulam_subdiv: usize,
    pub hilbert_pairs: usize,
    pub hilbert_alpha_fraction: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            lasota_yorke_trials: 1000,
            memory_loss_trials: 20,
            memory_loss_steps: 10,
            memory_loss_skip: 2,
            memory_loss_margin: 0.05,
            memory_loss_alpha_fraction: 0.1,
            lipschitz_pairs: 100,
            lipschitz_w_rel: 0.1,
            lipschitz_phi_amplitude: 0.1,
            ulam_trials: 100,
            ulam_nz: 4,
            ulam_nx: 32,
            ulam_subdiv: 64,
            hilbert_pairs: 20,
            hilbert_alpha_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSettings {
    pub n_list: Vec<usize>,
    pub t: usize,
    pub r: usize,
    pub z_star: Vec<f64>,
    pub bootstrap: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            n_list: vec![100, 400, 1600],
            t: 3,
            r: 2000,
            z_star: vec![0.1, 0.5, 0.9],
            bootstrap: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationSettings {
    pub n: usize,
    pub r: usize,
    /// Network steps taken before the statistic is measured.
    pub t: usize,
    /// Position of the probed node in `[0, 1]`.
    pub z_star: f64,
    pub x: f64,
    pub eps: Vec<f64>,
}

impl Default for ConcentrationSettings {
    fn default() -> Self {
        Self {
            n: 400,
            r: 10_000,
            t: 0,
            z_star: 0.5,
            x: 0.3,
            eps: (2..=13).map(|i| i as f64 / 1000.0).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub map: String,
    pub map_eps: Option<f64>,
    pub coupling: String,
    pub alpha: AlphaSpec,
    pub graphon: GraphonSpec,
    pub nz: usize,
    pub nx: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Abort on a non-expanding fiber instead of flagging it.
    pub strict: bool,
    pub initial: ProfileSpec,
    pub alternate: ProfileSpec,
    pub probes: Vec<String>,
    /// Overrides of the built-in probe thresholds.
    pub thresholds: BTreeMap<String, f64>,
    pub audit: AuditSettings,
    pub sweep: SweepSettings,
    pub concentration: ConcentrationSettings,
    pub seed: u64,
    /// Set when `|alpha| ||W||` is not below `alpha_hat`.
    pub alpha_warning: bool,
    /// Output location; not part of the echoed configuration.
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            map: "perturbed_doubling(0.3)".into(),
            map_eps: None,
            coupling: "h1".into(),
            alpha: AlphaSpec::Fraction(0.5),
            graphon: GraphonSpec::Constant { p: 1.0 },
            nz: 64,
            nx: 256,
            tol: 1e-10,
            max_iter: 500,
            strict: false,
            initial: ProfileSpec::VonMises {
                kappa: 2.0,
                center: 0.2,
            },
            alternate: ProfileSpec::Sinusoid {
                amplitude: 0.6,
                phase: 0.5,
            },
            probes: vec!["rate".into(), "uniqueness".into(), "expansion".into()],
            thresholds: BTreeMap::new(),
            audit: AuditSettings::default(),
            sweep: SweepSettings::default(),
            concentration: ConcentrationSettings::default(),
            seed: 1,
            alpha_warning: false,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn map_fn(&self) -> sto_core::Result<ExpandingMap64> {
        catalog::map(&self.map, self.map_eps)
    }

    pub fn coupling_fn(&self) -> sto_core::Result<CouplingFunction64> {
        catalog::coupling(&self.coupling)
    }

    /// `alpha_hat / ||W||_{L^inf L^1}`, or `None` when it is unbounded.
    pub fn alpha_threshold(&self) -> sto_core::Result<Option<f64>> {
        let ah = alpha_hat(&self.map_fn()?, &self.coupling_fn()?)?;
        let w = self.graphon.limit()?.linf_l1_bound();
        Ok(ah.filter(|_| w > 0.0).map(|a| a / w))
    }

    /// Resolved coupling strength; a fraction of an unbounded threshold
    /// resolves to zero.
    pub fn alpha_value(&self) -> sto_core::Result<f64> {
        Ok(match self.alpha {
            AlphaSpec::Absolute(a) => a,
            AlphaSpec::Fraction(q) => self.alpha_threshold()?.map_or(0.0, |t| q * t),
        })
    }

    /// Strength at `fraction * alpha_hat / ||W||`.
    pub fn alpha_at(&self, fraction: f64) -> sto_core::Result<f64> {
        Ok(self.alpha_threshold()?.map_or(0.0, |t| fraction * t))
    }

    /// Echo of every result-affecting setting.
    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    fn validate(&mut self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: String| err(ErrorCode::InvalidValue, None, Some(key), msg);
        if !(self.tol > 0.0) {
            return Err(bad(
                "solver.tol",
                format!("tol must be positive, got {}", self.tol),
            ));
        }
        if self.nz < 2 || self.nx < 2 {
            return Err(bad(
                "grid",
                format!("grids must be >= 2, got nz = {}, nx = {}", self.nz, self.nx),
            ));
        }
        if self.max_iter == 0 {
            return Err(bad("solver.max_iter", "max_iter must be positive".into()));
        }
        self.map_fn().map_err(|e| {
            err(
                ErrorCode::UnresolvableName,
                None,
                Some("model.map"),
                e.to_string(),
            )
        })?;
        self.coupling_fn().map_err(|e| {
            err(
                ErrorCode::UnresolvableName,
                None,
                Some("model.coupling"),
                e.to_string(),
            )
        })?;
        self.graphon
            .limit()
            .map_err(|e| bad("graphon", e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.probes {
            if !PROBE_NAMES.contains(&p.as_str()) {
                return Err(err(
                    ErrorCode::UnresolvableName,
                    None,
                    Some("probes.names"),
                    format!("unknown probe `{p}`"),
                ));
            }
            if !seen.insert(p) {
                return Err(bad("probes.names", format!("probe `{p}` listed twice")));
            }
        }
        if self.sweep.n_list.is_empty() || self.sweep.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad(
                "sweep.n_list",
                "N_list must be non-empty and strictly increasing".into(),
            ));
        }
        if self
            .sweep
            .z_star
            .iter()
            .chain([&self.concentration.z_star])
            .any(|z| !(0.0..=1.0).contains(z))
        {
            return Err(bad("sweep.z_star", "z* must lie in [0, 1]".into()));
        }
        self.alpha_warning = match (self.alpha_value(), self.alpha_threshold()) {
            (Ok(a), Ok(Some(t))) => a.abs() >= t,
            _ => false,
        };
        Ok(())
    }
}

/// One raw setting with its source line.
#[derive(Clone, Debug)]
struct Entry {
    raw: Raw,
    line: Option<usize>,
}

#[derive(Clone, Debug)]
enum Raw {
    Text(String),
    Json(Value),
}

/// Known keys, grouped by section.
const KEYS: &[(&str, &[&str])] = &[
    ("run", &["name", "seed"]),
    (
        "model",
        &["map", "map_eps", "coupling", "alpha", "alpha_fraction"],
    ),
    (
        "graphon",
        &["kind", "p", "cuts", "values", "shape", "amplitude", "rate"],
    ),
    ("grid", &["nz", "nx"]),
    ("solver", &["tol", "max_iter", "strict"]),
    ("initial", &["profile", "alternate"]),
    ("probes", &["names"]),
    ("thresholds", PROBE_NAMES),
    (
        "audit",
        &[
            "lasota_yorke_trials",
            "memory_loss_trials",
            "memory_loss_steps",
            "memory_loss_skip",
            "memory_loss_margin",
            "memory_loss_alpha_fraction",
            "lipschitz_pairs",
            "lipschitz_w_rel",
            "lipschitz_phi_amplitude",
            "ulam_trials",
            "ulam_nz",
            "ulam_nx",
            "ulam_subdiv",
            "hilbert_pairs",
            "hilbert_alpha_fraction",
        ],
    ),
    ("sweep", &["n_list", "t", "r", "z_star", "bootstrap"]),
    ("concentration", &["n", "r", "t", "z_star", "x", "eps"]),
    ("output", &["dir"]),
];

fn known(section: &str, key: &str) -> Result<(), &'static str> {
    match KEYS.iter().find(|(s, _)| *s == section) {
        None => Err("unknown section"),
        Some((_, keys)) if keys.contains(&key) => Ok(()),
        Some(_) => Err("unknown key"),
    }
}

struct Settings {
    entries: BTreeMap<String, Entry>,
}

fn parse_ini(text: &str) -> Result<Settings, ConfigError> {
    let mut entries = BTreeMap::new();
    let mut section: Option<String> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw_line.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| {
                    err(
                        ErrorCode::Syntax,
                        Some(line),
                        None,
                        "unterminated section header",
                    )
                })?
                .trim();
            if !KEYS.iter().any(|(k, _)| *k == name) {
                return Err(err(
                    ErrorCode::UnknownKey,
                    Some(line),
                    Some(name),
                    format!("unknown section `[{name}]`"),
                ));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| {
            err(
                ErrorCode::Syntax,
                Some(line),
                None,
                format!("expected `key = value`, got `{s}`"),
            )
        })?;
        let sec = section.as_deref().ok_or_else(|| {
            err(
                ErrorCode::Syntax,
                Some(line),
                Some(k.trim()),
                "key outside of any section",
            )
        })?;
        let full = format!("{sec}.{}", k.trim());
        known(sec, k.trim())
            .map_err(|why| err(ErrorCode::UnknownKey, Some(line), Some(&full), why))?;
        let entry = Entry {
            raw: Raw::Text(v.trim().to_string()),
            line: Some(line),
        };
        if entries.insert(full.clone(), entry).is_some() {
            return Err(err(
                ErrorCode::InvalidValue,
                Some(line),
                Some(&full),
                "key given twice",
            ));
        }
    }
    Ok(Settings { entries })
}

fn parse_json(text: &str) -> Result<Settings, ConfigError> {
    let root: Value = serde_json::from_str(text)
        .map_err(|e| err(ErrorCode::Syntax, Some(e.line()), None, e.to_string()))?;
    let Value::Object(sections) = root else {
        return Err(err(
            ErrorCode::Syntax,
            Some(1),
            None,
            "top level must be an object of sections",
        ));
    };
    let line_of = |needle: &str| {
        let quoted = format!("\"{needle}\"");
        text.lines()
            .position(|l| l.contains(&quoted))
            .map(|i| i + 1)
    };
    let mut entries = BTreeMap::new();
    for (sec, body) in sections {
        let Value::Object(keys) = body else {
            return Err(err(
                ErrorCode::TypeMismatch,
                line_of(&sec),
                Some(&sec),
                "a section must be an object",
            ));
        };
        for (k, v) in keys {
            let full = format!("{sec}.{k}");
            known(&sec, &k)
                .map_err(|why| err(ErrorCode::UnknownKey, line_of(&k), Some(&full), why))?;
            entries.insert(
                full,
                Entry {
                    raw: Raw::Json(v),
                    line: line_of(&k),
                },
            );
        }
    }
    Ok(Settings { entries })
}

impl Settings {
    fn mismatch(&self, key: &str, expected: &str) -> ConfigError {
        let e = &self.entries[key];
        let got = match &e.raw {
            Raw::Text(t) => format!("`{t}`"),
            Raw::Json(v) => v.to_string(),
        };
        err(
            ErrorCode::TypeMismatch,
            e.line,
            Some(key),
            format!("expected {expected}, got {got}"),
        )
    }

    fn name_error(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        err(
            ErrorCode::UnresolvableName,
            self.entries[key].line,
            Some(key),
            msg,
        )
    }

    fn invalid(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        err(
            ErrorCode::InvalidValue,
            self.entries[key].line,
            Some(key),
            msg,
        )
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        match &e.raw {
            Raw::Text(t) => t
                .parse()
                .map(Some)
                .map_err(|_| self.mismatch(key, "a number")),
            Raw::Json(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| self.mismatch(key, "a number")),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        match &e.raw {
            Raw::Text(t) => t
                .parse()
                .map(Some)
                .map_err(|_| self.mismatch(key, "a non-negative integer")),
            Raw::Json(v) => v
                .as_u64()
                .map(|u| Some(u as usize))
                .ok_or_else(|| self.mismatch(key, "a non-negative integer")),
        }
    }

    fn u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        Ok(self.usize(key)?.map(|v| v as u64))
    }

    fn bool(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        match &e.raw {
            Raw::Text(t) => match t.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                _ => Err(self.mismatch(key, "a boolean")),
            },
            Raw::Json(v) => v
                .as_bool()
                .map(Some)
                .ok_or_else(|| self.mismatch(key, "a boolean")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        match &e.raw {
            Raw::Text(t) => Ok(Some(t.clone())),
            Raw::Json(Value::String(s)) => Ok(Some(s.clone())),
            Raw::Json(_) => Err(self.mismatch(key, "a string")),
        }
    }

    fn items(&self, key: &str) -> Option<Vec<Raw>> {
        let e = self.entries.get(key)?;
        Some(match &e.raw {
            Raw::Text(t) => t
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Raw::Text(s.to_string()))
                .collect(),
            Raw::Json(Value::Array(a)) => a.iter().cloned().map(Raw::Json).collect(),
            Raw::Json(v) => vec![Raw::Json(v.clone())],
        })
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        let Some(items) = self.items(key) else {
            return Ok(None);
        };
        items
            .iter()
            .map(|r| match r {
                Raw::Text(t) => t.parse().ok(),
                Raw::Json(v) => v.as_f64(),
            })
            .collect::<Option<Vec<f64>>>()
            .map(Some)
            .ok_or_else(|| self.mismatch(key, "a list of numbers"))
    }

    fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        let Some(items) = self.items(key) else {
            return Ok(None);
        };
        items
            .iter()
            .map(|r| match r {
                Raw::Text(t) => t.parse().ok(),
                Raw::Json(v) => v.as_u64().map(|u| u as usize),
            })
            .collect::<Option<Vec<usize>>>()
            .map(Some)
            .ok_or_else(|| self.mismatch(key, "a list of non-negative integers"))
    }

    fn string_list(&self, key: &str) -> Result<Option<Vec<String>>, ConfigError> {
        let Some(items) = self.items(key) else {
            return Ok(None);
        };
        items
            .into_iter()
            .map(|r| match r {
                Raw::Text(t) => Some(t),
                Raw::Json(Value::String(s)) => Some(s),
                Raw::Json(_) => None,
            })
            .collect::<Option<Vec<String>>>()
            .map(Some)
            .ok_or_else(|| self.mismatch(key, "a list of strings"))
    }

    fn profile(&self, key: &str) -> Result<Option<ProfileSpec>, ConfigError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        match &e.raw {
            Raw::Json(v @ Value::Object(_)) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|x| self.name_error(key, x.to_string())),
            Raw::Json(Value::String(s)) | Raw::Text(s) => {
                parse_profile(s).map(Some).map_err(|m| match m {
                    ProfileError::Name(n) => self.name_error(key, format!("unknown profile `{n}`")),
                    ProfileError::Shape(m) => self.mismatch(key, &m),
                })
            }
            Raw::Json(_) => Err(self.mismatch(key, "a profile")),
        }
    }

    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        macro_rules! set {
            ($field:expr, $getter:ident, $key:expr) => {
                if let Some(v) = self.$getter($key)? {
                    $field = v;
                }
            };
        }
        set!(cfg.name, string, "run.name");
        set!(cfg.seed, u64, "run.seed");
        if let Some(m) = self.string("model.map")? {
            let base = m.split('(').next().unwrap_or("").trim();
            if !catalog::MAP_NAMES.contains(&base) {
                return Err(self.name_error("model.map", format!("unknown map `{m}`")));
            }
            cfg.map = m;
        }
        if let Some(e) = self.f64("model.map_eps")? {
            cfg.map_eps = Some(e);
        }
        if let Some(c) = self.string("model.coupling")? {
            if !catalog::COUPLING_NAMES.contains(&c.as_str()) {
                return Err(self.name_error("model.coupling", format!("unknown coupling `{c}`")));
            }
            cfg.coupling = c;
        }
        match (self.f64("model.alpha")?, self.f64("model.alpha_fraction")?) {
            (Some(_), Some(_)) => {
                return Err(self.invalid(
                    "model.alpha_fraction",
                    "give either alpha or alpha_fraction, not both",
                ))
            }
            (Some(a), None) => cfg.alpha = AlphaSpec::Absolute(a),
            (None, Some(q)) => cfg.alpha = AlphaSpec::Fraction(q),
            (None, None) => {}
        }
        self.apply_graphon(cfg)?;
        set!(cfg.nz, usize, "grid.nz");
        set!(cfg.nx, usize, "grid.nx");
        set!(cfg.tol, f64, "solver.tol");
        set!(cfg.max_iter, usize, "solver.max_iter");
        set!(cfg.strict, bool, "solver.strict");
        set!(cfg.initial, profile, "initial.profile");
        set!(cfg.alternate, profile, "initial.alternate");
        if let Some(names) = self.string_list("probes.names")? {
            if let Some(bad) = names.iter().find(|n| !PROBE_NAMES.contains(&n.as_str())) {
                return Err(self.name_error("probes.names", format!("unknown probe `{bad}`")));
            }
            cfg.probes = names;
        }
        for name in PROBE_NAMES {
            if let Some(t) = self.f64(&format!("thresholds.{name}"))? {
                cfg.thresholds.insert(name.to_string(), t);
            }
        }
        let a = &mut cfg.audit;
        set!(a.lasota_yorke_trials, usize, "audit.lasota_yorke_trials");
        set!(a.memory_loss_trials, usize, "audit.memory_loss_trials");
        set!(a.memory_loss_steps, usize, "audit.memory_loss_steps");
        set!(a.memory_loss_skip, usize, "audit.memory_loss_skip");
        set!(a.memory_loss_margin, f64, "audit.memory_loss_margin");
        set!(
            a.memory_loss_alpha_fraction,
            f64,
            "audit.memory_loss_alpha_fraction"
        );
        set!(a.lipschitz_pairs, usize, "audit.lipschitz_pairs");
        set!(a.lipschitz_w_rel, f64, "audit.lipschitz_w_rel");
        set!(
            a.lipschitz_phi_amplitude,
            f64,
            "audit.lipschitz_phi_amplitude"
        );
        set!(a.ulam_trials, usize, "audit.ulam_trials");
        set!(a.ulam_nz, usize, "audit.ulam_nz");
        set!(a.ulam_nx, usize, "audit.ulam_nx");
        set!(a.ulam_subdiv, usize, "audit.ulam_subdiv");
        set!(a.hilbert_pairs, usize, "audit.hilbert_pairs");
        set!(
            a.hilbert_alpha_fraction,
            f64,
            "audit.hilbert_alpha_fraction"
        );
        let s = &mut cfg.sweep;
        set!(s.n_list, usize_list, "sweep.n_list");
        set!(s.t, usize, "sweep.t");
        set!(s.r, usize, "sweep.r");
        set!(s.z_star, f64_list, "sweep.z_star");
        set!(s.bootstrap, usize, "sweep.bootstrap");
        let c = &mut cfg.concentration;
        set!(c.n, usize, "concentration.n");
        set!(c.r, usize, "concentration.r");
        set!(c.t, usize, "concentration.t");
        set!(c.z_star, f64, "concentration.z_star");
        set!(c.x, f64, "concentration.x");
        set!(c.eps, f64_list, "concentration.eps");
        if let Some(d) = self.string("output.dir")? {
            cfg.output_dir = Some(PathBuf::from(d));
        }
        Ok(())
    }

    fn apply_graphon(&self, cfg: &mut ExperimentConfig) -> Result<(), ConfigError> {
        let kind = match self.string("graphon.kind")? {
            Some(k) => k,
            None => {
                let touched = self.entries.keys().any(|k| k.starts_with("graphon."));
                if touched {
                    return Err(self.invalid(
                        self.entries
                            .keys()
                            .find(|k| k.starts_with("graphon."))
                            .expect("key"),
                        "graphon parameters need `kind`",
                    ));
                }
                return Ok(());
            }
        };
        let need = |key: &str, v: Option<f64>| {
            v.ok_or_else(|| {
                err(
                    ErrorCode::InvalidValue,
                    self.entries["graphon.kind"].line,
                    Some(key),
                    "missing",
                )
            })
        };
        cfg.graphon = match kind.as_str() {
            "constant" => GraphonSpec::Constant {
                p: need("graphon.p", self.f64("graphon.p")?)?,
            },
            "er" => {
                let p = need("graphon.p", self.f64("graphon.p")?)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(self.invalid("graphon.p", "edge probability must lie in [0, 1]"));
                }
                GraphonSpec::Er { p }
            }
            "block" => GraphonSpec::Block {
                cuts: self.f64_list("graphon.cuts")?.unwrap_or_default(),
                values: self
                    .f64_list("graphon.values")?
                    .ok_or_else(|| self.invalid("graphon.kind", "block graphon needs `values`"))?,
            },
            "translation" => {
                let shape = self
                    .string("graphon.shape")?
                    .unwrap_or_else(|| "linear".into());
                if shape != "linear" && shape != "exp" {
                    return Err(self
                        .name_error("graphon.shape", format!("unknown profile shape `{shape}`")));
                }
                GraphonSpec::Translation {
                    shape,
                    amplitude: self.f64("graphon.amplitude")?.unwrap_or(1.0),
                    rate: self.f64("graphon.rate")?.unwrap_or(1.0),
                }
            }
            other => {
                return Err(self.name_error("graphon.kind", format!("unknown graphon `{other}`")))
            }
        };
        Ok(())
    }
}

enum ProfileError {
    Name(String),
    Shape(String),
}

/// `uniform`, `sinusoid(a, phase)`, `linear_in_z(a)`, `von_mises(kappa, center)`
/// or `two_cluster(split, left, right)` with nested profiles.
pub fn parse_profile_str(s: &str) -> Option<ProfileSpec> {
    parse_profile(s).ok()
}

fn parse_profile(s: &str) -> Result<ProfileSpec, ProfileError> {
    let s = s.trim();
    let (name, args) = match s.find('(') {
        None => (s, Vec::new()),
        Some(i) => {
            let body = s[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| ProfileError::Shape("a closing parenthesis".into()))?;
            (s[..i].trim(), split_top(body))
        }
    };
    let num = |i: usize| -> Result<f64, ProfileError> {
        args.get(i)
            .and_then(|a| a.trim().parse().ok())
            .ok_or_else(|| {
                ProfileError::Shape(format!("a numeric argument {} for `{name}`", i + 1))
            })
    };
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(ProfileError::Shape(format!("{n} arguments for `{name}`")))
        }
    };
    Ok(match name {
        "uniform" => {
            arity(0)?;
            ProfileSpec::Uniform
        }
        "sinusoid" => {
            arity(2)?;
            ProfileSpec::Sinusoid {
                amplitude: num(0)?,
                phase: num(1)?,
            }
        }
        "linear_in_z" => {
            arity(1)?;
            ProfileSpec::LinearInZ { amplitude: num(0)? }
        }
        "von_mises" => {
            arity(2)?;
            ProfileSpec::VonMises {
                kappa: num(0)?,
                center: num(1)?,
            }
        }
        "two_cluster" => {
            arity(3)?;
            ProfileSpec::TwoCluster {
                split: num(0)?,
                left: Box::new(parse_profile(&args[1])?),
                right: Box::new(parse_profile(&args[2])?),
            }
        }
        other => return Err(ProfileError::Name(other.to_string())),
    })
}

fn split_top(body: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in body.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    if !cur.trim().is_empty() || !out.is_empty() {
        out.push(cur);
    }
    out
}

/// Parse `text` on top of `base`. JSON is detected by a leading `{`.
pub fn parse_config_str(
    text: &str,
    base: ExperimentConfig,
) -> Result<ExperimentConfig, ConfigError> {
    let settings = if text.trim_start().starts_with('{') {
        parse_json(text)?
    } else {
        parse_ini(text)?
    };
    let mut cfg = base;
    settings.apply(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config_with_base(
    path: &Path,
    base: ExperimentConfig,
) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        err(
            ErrorCode::Io,
            None,
            None,
            format!("cannot read {}: {e}", path.display()),
        )
    })?;
    parse_config_str(&text, base)
}

/// Read and validate a configuration file, filling defaults.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with_base(path, ExperimentConfig::default())
}

/// Validate a programmatically built configuration.
pub fn validated(mut cfg: ExperimentConfig) -> Result<ExperimentConfig, ConfigError> {
    cfg.validate()?;
    Ok(cfg)
}
