use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::densities;
use crate::error::{param, Result};
use crate::fibered::{
    admissible_diagnostics, sup_norm_distance, weak_norm_distance, AdmissibleDiagnostics,
    FiberedDensity,
};
use crate::report::{fit_exponential_rate, RateFit};
use crate::scalar::Real;

use super::transfer::StoModel;

/// Outcome of a fixed-point solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    /// `||phi_{t+1} - phi_t||_{"1"}` per iteration.
    pub weak_residuals: Vec<f64>,
    /// Largest fiberwise sup difference per iteration.
    pub sup_residuals: Vec<f64>,
    /// Largest pre-normalisation mass error per iteration.
    pub mass_errors: Vec<f64>,
    pub min_xi: Vec<f64>,
    pub max_distortion: Vec<f64>,
    /// `max_z |phi_z|_{BV^1}` and `max_z |phi_z|_{BV^2}` of each iterate.
    pub m1_history: Vec<f64>,
    pub m2_history: Vec<f64>,
    /// Iterations that contained at least one non-expanding fiber.
    pub non_expanding_steps: Vec<usize>,
    /// Fit on the last half of the weak residuals; absent with fewer than
    /// four points or a non-positive residual in the window.
    pub rate: Option<RateFit>,
    /// `||F phi* - phi*||_{"1"}` after convergence.
    pub certificate_residual: Option<f64>,
    pub final_diagnostics: AdmissibleDiagnostics,
}

impl SolveReport {
    pub fn expansion_violations(&self) -> usize {
        self.min_xi.iter().filter(|&&x| !(x > 1.0)).count()
    }

    pub fn write_residual_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,weak_residual,sup_residual,mass_error_max")?;
        for i in 0..self.iterations {
            writeln!(
                out,
                "{},{:e},{:e},{:e}",
                i + 1,
                self.weak_residuals[i],
                self.sup_residuals[i],
                self.mass_errors[i]
            )?;
        }
        Ok(())
    }
}

/// Plain fixed-point iteration `phi <- F phi` until the weak residual drops
/// below `tol` or `max_iter` steps are taken.
pub fn fixed_point<T: Real>(
    model: &StoModel<T>,
    phi0: &FiberedDensity<T>,
    tol: T,
    max_iter: usize,
) -> Result<(FiberedDensity<T>, SolveReport)> {
    if !(tol > T::zero()) {
        return Err(param(format!("tol must be positive, got {tol}")));
    }
    let mut report = SolveReport {
        iterations: 0,
        converged: false,
        tol: tol.as_f64(),
        weak_residuals: Vec::new(),
        sup_residuals: Vec::new(),
        mass_errors: Vec::new(),
        min_xi: Vec::new(),
        max_distortion: Vec::new(),
        m1_history: Vec::new(),
        m2_history: Vec::new(),
        non_expanding_steps: Vec::new(),
        rate: None,
        certificate_residual: None,
        final_diagnostics: admissible_diagnostics(phi0, T::one())?,
    };
    let mut phi = phi0.clone();
    while report.iterations < max_iter {
        let (next, stats) = model.step(&phi)?;
        let weak = weak_norm_distance(&next, &phi)?;
        report.weak_residuals.push(weak.as_f64());
        report
            .sup_residuals
            .push(sup_norm_distance(&next, &phi)?.as_f64());
        report.mass_errors.push(stats.mass_error_max);
        report.min_xi.push(stats.min_xi);
        report.max_distortion.push(stats.max_distortion);
        if !stats.non_expanding.is_empty() {
            report.non_expanding_steps.push(report.iterations);
        }
        let (m1, m2) = seminorm_radii(&next);
        report.m1_history.push(m1);
        report.m2_history.push(m2);
        report.iterations += 1;
        phi = next;
        if weak < tol {
            report.converged = true;
            break;
        }
    }
    let n = report.weak_residuals.len();
    if n >= 8 {
        report.rate = fit_exponential_rate(&report.weak_residuals, 0.5).ok();
    }
    if report.converged {
        let (after, _) = model.step(&phi)?;
        report.certificate_residual = Some(weak_norm_distance(&after, &phi)?.as_f64());
    }
    report.final_diagnostics = admissible_diagnostics(&phi, T::one())?;
    Ok((phi, report))
}

fn seminorm_radii<T: Real>(phi: &FiberedDensity<T>) -> (f64, f64) {
    phi.rows().fold((0.0f64, 0.0f64), |(a, b), r| {
        let m2 = if r.len() >= 3 {
            densities::bv2(r).as_f64()
        } else {
            0.0
        };
        (a.max(densities::bv1(r).as_f64()), b.max(m2))
    })
}

/// Solve from two starts and report their final weak distance.
pub fn uniqueness_probe<T: Real>(
    model: &StoModel<T>,
    start_a: &FiberedDensity<T>,
    start_b: &FiberedDensity<T>,
    tol: T,
    max_iter: usize,
) -> Result<(T, SolveReport, SolveReport)> {
    let (a, ra) = fixed_point(model, start_a, tol, max_iter)?;
    let (b, rb) = fixed_point(model, start_b, tol, max_iter)?;
    Ok((weak_norm_distance(&a, &b)?, ra, rb))
}
