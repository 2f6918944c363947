//! Randomized audits built on the single-shot probes in [`crate::sto`].
//!
//! Trial `i` of an audit draws from stream `i` of its seed, trials run in
//! parallel and are reduced in index order, so results do not depend on the
//! worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities;
use crate::error::{param, Result};
use crate::fibered::FiberedDensity;
use crate::rng::stream;
use crate::scalar::Real;
use crate::sto::ulam::{cell_averages, ulam_matrix, ulam_transfer};
use crate::sto::{
    fiber_pushforward, hilbert_contraction_probe, lasota_yorke_probe, lipschitz_probe,
    memory_loss_probe, StoModel,
};
use crate::trials::{perturb_graphon, RandomProfile};

/// Modes and amplitude of the random admissible measures `nu`.
const NU_MODES: usize = 3;
const NU_AMPLITUDE: f64 = 0.8;

fn random_nu<T: Real, R: Rng>(rng: &mut R, nz: usize, nx: usize) -> Result<FiberedDensity<T>> {
    RandomProfile::sample(rng, NU_MODES, NU_AMPLITUDE)?.density(nz, nx)
}

fn check_trials(n: usize) -> Result<()> {
    if n == 0 {
        return Err(param("an audit needs at least one trial"));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LasotaYorkeAudit {
    pub trials: usize,
    pub min_slack: f64,
    /// `min slack / rhs`.
    pub min_relative_slack: f64,
    pub worst_trial: usize,
}

/// Random smooth zero-mean test functions pushed by fibers realized from
/// random admissible measures.
pub fn lasota_yorke_audit<T: Real>(
    model: &StoModel<T>,
    trials: usize,
    seed: u64,
) -> Result<LasotaYorkeAudit> {
    check_trials(trials)?;
    let (nz, nx) = model.grid();
    let recs: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let nu = random_nu::<T, _>(&mut rng, nz, nx)?;
            let k = rng.random_range(0..nz);
            let g = RandomProfile::sample(&mut rng, 8, 1.0)?.zero_mean::<T>(rng.random(), nx)?;
            let maps = model.realize(&nu)?;
            lasota_yorke_probe(&maps[k], &g)
        })
        .collect::<Result<_>>()?;
    let mut out = LasotaYorkeAudit {
        trials,
        min_slack: f64::INFINITY,
        min_relative_slack: f64::INFINITY,
        worst_trial: 0,
    };
    for (i, r) in recs.iter().enumerate() {
        if r.slack < out.min_slack {
            out.min_slack = r.slack;
            out.worst_trial = i;
        }
        out.min_relative_slack = out.min_relative_slack.min(r.slack / r.rhs);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryLossAudit {
    pub trials: usize,
    pub steps: usize,
    /// Ratios of steps `<= skip` are not audited.
    pub skip: usize,
    /// `max (ratio - (1/xi + margin))` over audited steps.
    pub max_excess: f64,
    pub max_ratio: f64,
    pub max_mass_defect: f64,
}

/// Zero-mean functions pushed along random sequences of admissible measures.
pub fn memory_loss_audit<T: Real>(
    model: &StoModel<T>,
    trials: usize,
    steps: usize,
    skip: usize,
    margin: f64,
    seed: u64,
) -> Result<MemoryLossAudit> {
    check_trials(trials)?;
    if steps <= skip {
        return Err(param(
            "memory loss audit: steps must exceed the skipped prefix",
        ));
    }
    let (nz, nx) = model.grid();
    let traces: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let seq = (0..steps)
                .map(|_| random_nu::<T, _>(&mut rng, nz, nx))
                .collect::<Result<Vec<_>>>()?;
            let k = rng.random_range(0..nz);
            let z = (k as f64 + 0.5) / nz as f64;
            let psi = RandomProfile::sample(&mut rng, 6, 1.0)?.zero_mean::<T>(z, nx)?;
            memory_loss_probe(model, &seq, k, &psi, steps)
        })
        .collect::<Result<_>>()?;
    let mut out = MemoryLossAudit {
        trials,
        steps,
        skip,
        max_excess: f64::NEG_INFINITY,
        max_ratio: 0.0,
        max_mass_defect: 0.0,
    };
    for tr in &traces {
        // ratio i compares step i + 1 with step i
        for (i, r) in tr.ratios(1e-10) {
            if i + 1 > skip {
                out.max_excess = out.max_excess.max(r - (1.0 / tr.xi[i] + margin));
                out.max_ratio = out.max_ratio.max(r);
            }
        }
        let d = tr.mass_defects.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        out.max_mass_defect = out.max_mass_defect.max(d);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzAudit {
    pub pairs: usize,
    pub nx: usize,
    pub max_ratio: f64,
    pub max_ratio_refined: f64,
    /// `|refined - coarse| / coarse`.
    pub relative_change: f64,
}

/// Random `(W, phi)` perturbation pairs around `model`, evaluated on the
/// model grid and on twice as many `x` nodes.
pub fn lipschitz_audit<T: Real>(
    model: &StoModel<T>,
    pairs: usize,
    w_rel: f64,
    phi_amplitude: f64,
    seed: u64,
) -> Result<LipschitzAudit> {
    check_trials(pairs)?;
    let (nz, nx) = model.grid();
    let refined = StoModel::new(
        model.map().clone(),
        model.coupling().clone(),
        model.graphon().clone(),
        model.alpha(),
        nz,
        2 * nx,
    )?
    .with_strict(model.is_strict());
    let max_on = |m: &StoModel<T>| -> Result<f64> {
        let (nz, nx) = m.grid();
        let ratios: Vec<f64> = (0..pairs)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, i as u64);
                let base = RandomProfile::sample(&mut rng, NU_MODES, 0.6)?;
                let delta = RandomProfile::sample(&mut rng, NU_MODES, phi_amplitude)?;
                let mut pert = base.clone();
                for (a, b) in pert.modes.iter_mut().zip(&delta.modes) {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                }
                let wt = perturb_graphon(m.graphon(), &mut rng, w_rel)?;
                let mt =
                    StoModel::new(m.map().clone(), m.coupling().clone(), wt, m.alpha(), nz, nx)?
                        .with_strict(m.is_strict());
                Ok(
                    lipschitz_probe(m, &mt, &base.density(nz, nx)?, &pert.density(nz, nx)?)?
                        .as_f64(),
                )
            })
            .collect::<Result<_>>()?;
        Ok(ratios.into_iter().fold(0.0, f64::max))
    };
    let coarse = max_on(model)?;
    let fine = max_on(&refined)?;
    Ok(LipschitzAudit {
        pairs,
        nx,
        max_ratio: coarse,
        max_ratio_refined: fine,
        relative_change: (fine - coarse).abs() / coarse,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UlamAudit {
    pub trials: usize,
    pub subdiv: usize,
    pub max_l1: f64,
    pub mean_l1: f64,
}

/// Collocation push-forward against the dense Ulam matrix, both reduced to
/// cell averages.
pub fn ulam_audit<T: Real>(
    model: &StoModel<T>,
    trials: usize,
    subdiv: usize,
    seed: u64,
) -> Result<UlamAudit> {
    check_trials(trials)?;
    let (nz, nx) = model.grid();
    let errs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let nu = random_nu::<T, _>(&mut rng, nz, nx)?;
            let k = rng.random_range(0..nz);
            let phi = random_nu::<T, _>(&mut rng, nz, nx)?.row_density(k);
            let maps = model.realize(&nu)?;
            let (pushed, _) = fiber_pushforward(&maps[k], &phi)?;
            let p = ulam_matrix(&maps[k], subdiv)?;
            let u = ulam_transfer(&p, &cell_averages(phi.values()));
            let c = cell_averages(pushed.values());
            let d: T = u.iter().zip(&c).map(|(&a, &b)| (a - b).abs()).sum();
            Ok((d / T::from_usize_lossy(nx)).as_f64())
        })
        .collect::<Result<_>>()?;
    Ok(UlamAudit {
        trials,
        subdiv,
        max_l1: errs.iter().copied().fold(0.0, f64::max),
        mean_l1: errs.iter().sum::<f64>() / trials as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HilbertAudit {
    pub pairs: usize,
    pub max_gamma: Option<f64>,
    pub skipped_fibers: usize,
}

/// Random pairs of positive fibered densities.
pub fn hilbert_audit<T: Real>(
    model: &StoModel<T>,
    pairs: usize,
    seed: u64,
) -> Result<HilbertAudit> {
    check_trials(pairs)?;
    let (nz, nx) = model.grid();
    let recs: Vec<_> = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, i as u64);
            let a = random_nu::<T, _>(&mut rng, nz, nx)?;
            let b = random_nu::<T, _>(&mut rng, nz, nx)?;
            hilbert_contraction_probe(model, &a, &b)
        })
        .collect::<Result<_>>()?;
    let mut out = HilbertAudit {
        pairs,
        max_gamma: None,
        skipped_fibers: 0,
    };
    for r in recs {
        out.skipped_fibers += r.skipped.len();
        if let Some(g) = r.max_gamma {
            out.max_gamma = Some(out.max_gamma.map_or(g, |m: f64| m.max(g)));
        }
    }
    Ok(out)
}

/// `sup_z sup_x |phi_z(x) - 1|`.
pub fn distance_to_uniform<T: Real>(phi: &FiberedDensity<T>) -> f64 {
    phi.rows()
        .map(|r| {
            densities::sup_distance(r, &vec![T::one(); r.len()])
                .map_or(f64::INFINITY, |d| d.as_f64())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle_maps::{CouplingFunction, ExpandingMap};
    use crate::graphon::Graphon;

    fn model(alpha: f64, nz: usize, nx: usize) -> StoModel<f64> {
        StoModel::new(
            ExpandingMap::perturbed_doubling(0.3).unwrap(),
            CouplingFunction::h1(),
            Graphon::constant(0.5),
            alpha,
            nz,
            nx,
        )
        .unwrap()
    }

    #[test]
    fn audits_are_reproducible() {
        let m = model(0.2, 4, 64);
        let a = lasota_yorke_audit(&m, 6, 9).unwrap();
        let b = lasota_yorke_audit(&m, 6, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.min_slack > 0.0);
        assert!(lasota_yorke_audit(&m, 0, 9).is_err());
    }

    #[test]
    fn uncoupled_doubling_kills_memory_of_low_modes() {
        let m = StoModel::new(
            ExpandingMap::linear(2).unwrap(),
            CouplingFunction::h1(),
            Graphon::constant(1.0),
            0.0,
            2,
            128,
        )
        .unwrap();
        let r = memory_loss_audit(&m, 3, 6, 2, 0.05, 1).unwrap();
        // only modes <= 6 are present, so after three doublings nothing is left
        assert!(r.max_excess < 0.0, "{r:?}");
        assert!(r.max_mass_defect < 1e-12);
        assert!(memory_loss_audit(&m, 3, 2, 2, 0.05, 1).is_err());
    }

    #[test]
    fn ulam_matches_collocation_for_doubling() {
        let m = model(0.0, 2, 32);
        let r = ulam_audit(&m, 5, 64, 3).unwrap();
        assert!(r.max_l1 < 2e-2 && r.mean_l1 <= r.max_l1);
    }

    #[test]
    fn hilbert_contracts_at_small_alpha() {
        let m = model(0.05, 4, 64);
        let r = hilbert_audit(&m, 3, 4).unwrap();
        assert!(r.max_gamma.unwrap() < 1.0);
    }

    #[test]
    fn lipschitz_ratio_is_grid_stable() {
        let m = model(0.2, 4, 64);
        let r = lipschitz_audit(&m, 4, 0.1, 0.1, 5).unwrap();
        assert!(r.max_ratio.is_finite() && r.relative_change < 0.1, "{r:?}");
    }

    #[test]
    fn uniform_distance() {
        let phi = FiberedDensity::<f64>::uniform(3, 8).unwrap();
        assert_eq!(distance_to_uniform(&phi), 0.0);
    }
}
