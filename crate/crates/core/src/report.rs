//! Rate fits, probe verdicts and the JSON run report.
//!
//! Floats are written with 17 significant digits so that a report parsed
//! and written again is byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Result, StoError};
use crate::finite_sim::{ConcentrationTable, SweepRow};
use crate::sto::SolveReport;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = intercept + slope * x`. `None` when the
/// abscissae are all equal. A constant response counts as a perfect fit.
pub fn least_squares(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x[..n].iter().sum::<f64>() / nf;
    let my = y[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = x[..n].iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x[..n]
        .iter()
        .zip(&y[..n])
        .map(|(a, b)| (a - mx) * (b - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = y[..n].iter().map(|v| (v - my).powi(2)).sum();
    let sse: f64 = x[..n]
        .iter()
        .zip(&y[..n])
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Exponential decay rate of the last `tail_fraction` of `history`:
/// `-slope` of `log history` against the iteration index.
pub fn fit_exponential_rate(history: &[f64], tail_fraction: f64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(StoError::Parameter(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let take = ((history.len() as f64) * tail_fraction).ceil() as usize;
    let start = history.len() - take.min(history.len());
    let tail = &history[start..];
    if tail.len() < 4 {
        return Err(StoError::Numeric(format!(
            "rate fit needs at least 4 tail points, got {}",
            tail.len()
        )));
    }
    if tail.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(StoError::Numeric(
            "rate fit needs positive finite history".into(),
        ));
    }
    let xs: Vec<f64> = (start..history.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|v| v.ln()).collect();
    let fit = least_squares(&xs, &ys).expect("distinct abscissae");
    Ok(RateFit {
        rate: -fit.slope,
        r_squared: fit.r_squared,
        points: tail.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

/// How a probe statistic is compared with its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Below,
    AtMost,
    Above,
    AtLeast,
}

/// Pure verdict of `statistic` against `threshold`; non-finite statistics fail.
pub fn verdict(statistic: f64, comparison: Comparison, threshold: f64) -> Verdict {
    if !statistic.is_finite() {
        return Verdict::Fail;
    }
    let ok = match comparison {
        Comparison::Below => statistic < threshold,
        Comparison::AtMost => statistic <= threshold,
        Comparison::Above => statistic > threshold,
        Comparison::AtLeast => statistic >= threshold,
    };
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub name: String,
    pub statistic: Option<f64>,
    pub comparison: Comparison,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Probe-specific detail.
    pub values: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl ProbeResult {
    pub fn evaluate(
        name: impl Into<String>,
        statistic: f64,
        comparison: Comparison,
        threshold: f64,
        values: serde_json::Value,
    ) -> Self {
        Self {
            name: name.into(),
            statistic: statistic.is_finite().then_some(statistic),
            comparison,
            threshold,
            verdict: verdict(statistic, comparison, threshold),
            values,
            note: None,
        }
    }

    pub fn skipped(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            statistic: None,
            comparison: Comparison::AtMost,
            threshold: 0.0,
            verdict: Verdict::Skipped,
            values: serde_json::Value::Null,
            note: Some(reason.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub nz: usize,
    pub nx: usize,
    pub seed: u64,
    /// Wall-clock seconds per phase; the only non-reproducible field.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: serde_json::Value,
    pub solve: Option<SolveReport>,
    pub probes: BTreeMap<String, ProbeResult>,
    pub sweep: Option<Vec<SweepRow>>,
    pub concentration: Option<ConcentrationTable>,
    pub warnings: Vec<String>,
    pub environment: Environment,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.probes.values().all(|p| p.verdict != Verdict::Fail)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.probes
            .values()
            .filter(|p| p.verdict == Verdict::Fail)
            .map(|p| p.name.as_str())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_17(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| StoError::Report(e.to_string()))
    }

    /// JSON with the timing map emptied, for reproducibility comparisons.
    pub fn to_json_without_timings(&self) -> Result<String> {
        let mut r = self.clone();
        r.environment.timings.clear();
        r.to_json()
    }
}

/// Inputs to [`assemble_report`].
#[derive(Clone, Debug, Default)]
pub struct ReportParts {
    pub config: serde_json::Value,
    /// Probe names requested by the configuration.
    pub requested: Vec<String>,
    pub solve: Option<SolveReport>,
    pub probes: Vec<ProbeResult>,
    pub sweep: Option<Vec<SweepRow>>,
    pub concentration: Option<ConcentrationTable>,
    pub warnings: Vec<String>,
    pub environment: Environment,
}

/// Every requested probe must appear exactly once, and nothing else.
pub fn assemble_report(parts: ReportParts) -> Result<RunReport> {
    let requested: BTreeSet<&str> = parts.requested.iter().map(String::as_str).collect();
    if requested.len() != parts.requested.len() {
        return Err(StoError::Report("a probe is requested twice".into()));
    }
    let mut probes = BTreeMap::new();
    for p in parts.probes {
        if !requested.contains(p.name.as_str()) {
            return Err(StoError::Report(format!(
                "probe `{}` was not requested",
                p.name
            )));
        }
        if probes.contains_key(&p.name) {
            return Err(StoError::Report(format!("duplicate probe `{}`", p.name)));
        }
        probes.insert(p.name.clone(), p);
    }
    if let Some(missing) = requested.iter().find(|n| !probes.contains_key(**n)) {
        return Err(StoError::Report(format!("missing probe `{missing}`")));
    }
    Ok(RunReport {
        config: parts.config,
        solve: parts.solve,
        probes,
        sweep: parts.sweep,
        concentration: parts.concentration,
        warnings: parts.warnings,
        environment: parts.environment,
    })
}

/// Pretty JSON with `f64` written as `d.dddddddddddddddde±x`.
pub fn to_json_17<S: Serialize>(value: &S) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| StoError::Report(e.to_string()))?;
    buf.push(b'\n');
    String::from_utf8(buf).map_err(|e| StoError::Report(e.to_string()))
}

struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{:.16e}", value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_geometric_history() {
        let h: Vec<f64> = (0..5).map(|i| (-(i as f64)).exp()).collect();
        let f = fit_exponential_rate(&h, 1.0).unwrap();
        assert!((f.rate - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let c = fit_exponential_rate(&[0.3; 6], 1.0).unwrap();
        assert_eq!(c.rate, 0.0);
        assert!(fit_exponential_rate(&[1.0, 0.5, 0.0, 0.1], 1.0).is_err());
        assert!(fit_exponential_rate(&[1.0, 0.5, 0.2], 1.0).is_err());
        assert!(fit_exponential_rate(&h, 0.0).is_err());
    }

    #[test]
    fn noisy_geometric_rate_within_ten_percent() {
        let noise = Normal::new(0.0, 0.05).unwrap();
        for seed in 0..100 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let h: Vec<f64> = (0..40)
                .map(|i| (-0.7 * i as f64).exp() * (1.0 + noise.sample(&mut rng)))
                .collect();
            let f = fit_exponential_rate(&h, 0.5).unwrap();
            assert!((f.rate - 0.7).abs() < 0.07, "seed {seed}: {}", f.rate);
        }
    }

    #[test]
    fn verdicts_are_pure() {
        assert_eq!(verdict(1.0, Comparison::Below, 2.0), Verdict::Pass);
        assert_eq!(verdict(2.0, Comparison::Below, 2.0), Verdict::Fail);
        assert_eq!(verdict(2.0, Comparison::AtMost, 2.0), Verdict::Pass);
        assert_eq!(verdict(f64::NAN, Comparison::AtLeast, 0.0), Verdict::Fail);
        assert_eq!(verdict(0.5, Comparison::Above, 0.0), Verdict::Pass);
    }

    fn probe(name: &str) -> ProbeResult {
        ProbeResult::evaluate(
            name,
            0.1,
            Comparison::Below,
            1.0,
            serde_json::json!({"x": 0.1}),
        )
    }

    #[test]
    fn assembly_rules() {
        let empty = assemble_report(ReportParts::default()).unwrap();
        assert!(empty.probes.is_empty() && empty.all_pass());
        let parts = ReportParts {
            requested: vec!["a".into(), "b".into()],
            probes: vec![probe("b"), ProbeResult::skipped("a", "not applicable")],
            ..ReportParts::default()
        };
        let r = assemble_report(parts.clone()).unwrap();
        assert_eq!(r.probes.len(), 2);
        let mut dup = parts.clone();
        dup.probes.push(probe("b"));
        assert!(assemble_report(dup).is_err());
        let mut missing = parts.clone();
        missing.probes.pop();
        assert!(assemble_report(missing).is_err());
        let mut extra = parts;
        extra.probes.push(probe("c"));
        assert!(assemble_report(extra).is_err());
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let mut env = Environment {
            nz: 4,
            nx: 8,
            seed: 3,
            ..Environment::default()
        };
        env.timings.insert("solve".into(), 0.123456789);
        let r = assemble_report(ReportParts {
            config: serde_json::json!({"alpha": 0.1 + 0.2, "name": "x"}),
            requested: vec!["p".into()],
            probes: vec![ProbeResult::evaluate(
                "p",
                std::f64::consts::PI / 3.0,
                Comparison::AtMost,
                1e-300,
                serde_json::json!([1e-17, -2.5e10, 0.0]),
            )],
            environment: env,
            ..ReportParts::default()
        })
        .unwrap();
        let a = r.to_json().unwrap();
        let back = RunReport::from_json(&a).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), a);
        assert!(a.contains("3.0000000000000004e-1"));
        assert!(a.contains("1.2345678900000000e-1"));
        assert!(!r
            .to_json_without_timings()
            .unwrap()
            .contains("1.2345678900000000e-1"));
    }
}
