use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle_maps::{CouplingFunction, ExpandingMap};
use crate::densities::{self, nodes, CircleDensity};
use crate::error::{domain, param, Result, StoError};
use crate::fibered::FiberedDensity;
use crate::graphon::Graphon;
use crate::scalar::Real;

use super::fiber_map::{alpha_hat, realize_fiber_map, FiberMapRealization};
use super::mean_field::{contract, KernelTables};
use super::MeanFieldTable;

/// Pre-normalisation mass error that triggers a warning.
pub const MASS_WARN: f64 = 1e-6;

/// Collocation transfer `(L g)(x_j) = sum_b g(y_b) / F'(y_b)` without
/// renormalisation. Requires a monotone lift (`F' > 0`).
///
/// `g(y_b)` uses the periodic cubic interpolant. With the piecewise-linear
/// one the discrete operator is only piecewise smooth in `g`: preimages
/// crossing grid nodes kick the iteration off its geometric decay once the
/// residual falls near `h^2`.
pub fn transfer_raw<T: Real>(map: &FiberMapRealization<T>, g: &[T]) -> Result<Vec<T>> {
    let nx = g.len();
    if nx != map.nx() {
        return Err(param(format!(
            "grid mismatch: density {nx} vs map {}",
            map.nx()
        )));
    }
    if !(map.min_slope() > T::zero()) {
        return Err(domain(format!(
            "fiber {}: lift is not monotone",
            map.fiber()
        )));
    }
    let d = map.degree() as usize;
    let f0 = map.lift(T::zero());
    let mut ys = vec![T::zero(); d];
    let mut out = Vec::with_capacity(nx);
    for x in nodes::<T>(nx) {
        map.preimages_into(x, f0, &mut ys)?;
        let s: T = ys
            .iter()
            .map(|&y| densities::interpolate_cubic(g, y) / map.derivative(y))
            .sum();
        out.push(s);
    }
    Ok(out)
}

/// Push `phi` forward by `F` and renormalise. Returns the density and the
/// pre-normalisation mass error.
pub fn fiber_pushforward<T: Real>(
    map: &FiberMapRealization<T>,
    phi: &CircleDensity<T>,
) -> Result<(CircleDensity<T>, T)> {
    if !map.is_expanding() {
        return Err(domain(format!(
            "fiber {} is not expanding (min slope {})",
            map.fiber(),
            map.min_slope()
        )));
    }
    push_row(map, phi.values())
}

fn push_row<T: Real>(map: &FiberMapRealization<T>, phi: &[T]) -> Result<(CircleDensity<T>, T)> {
    let mut raw = transfer_raw(map, phi)?;
    // cubic overshoot next to a zero of phi
    for v in raw.iter_mut() {
        *v = v.max(T::zero());
    }
    let m = densities::mass(&raw);
    if !(m > T::zero()) {
        return Err(StoError::Numeric("pushed density has no mass".into()));
    }
    let err = (m - densities::mass(phi)).abs();
    Ok((
        CircleDensity::from_values_unchecked(raw.into_iter().map(|v| v / m).collect()),
        err,
    ))
}

/// Per-step certificate data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub min_xi: f64,
    pub max_distortion: f64,
    pub mass_error_max: f64,
    /// Fibers whose grid `xi <= 1` (only possible in non-strict mode).
    pub non_expanding: Vec<usize>,
}

impl StepStats {
    pub fn mass_warning(&self) -> bool {
        self.mass_error_max >= MASS_WARN
    }
}

/// The self-consistent transfer operator with fixed `(f, h, W, alpha)` and
/// grid-dependent tables cached.
#[derive(Clone, Debug)]
pub struct StoModel<T> {
    f: ExpandingMap<T>,
    h: CouplingFunction<T>,
    w: Graphon<T>,
    alpha: T,
    nz: usize,
    nx: usize,
    wmat: Vec<T>,
    kernels: KernelTables<T>,
    strict: bool,
}

impl<T: Real> StoModel<T> {
    pub fn new(
        f: ExpandingMap<T>,
        h: CouplingFunction<T>,
        w: Graphon<T>,
        alpha: T,
        nz: usize,
        nx: usize,
    ) -> Result<Self> {
        if nz < 1 || nx < 2 {
            return Err(param(format!("grid too small: nz = {nz}, nx = {nx}")));
        }
        if !alpha.is_finite() {
            return Err(param("alpha must be finite"));
        }
        let wmat = w.midpoint_matrix(nz);
        let kernels = KernelTables::new(&h, nx);
        Ok(Self {
            f,
            h,
            w,
            alpha,
            nz,
            nx,
            wmat,
            kernels,
            strict: true,
        })
    }

    /// In non-strict mode monotone but non-expanding fibers are pushed and
    /// flagged; in strict mode (the default) they abort the step.
    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn map(&self) -> &ExpandingMap<T> {
        &self.f
    }

    pub fn coupling(&self) -> &CouplingFunction<T> {
        &self.h
    }

    pub fn graphon(&self) -> &Graphon<T> {
        &self.w
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.nz, self.nx)
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// `|alpha| * ||W||_{L^inf L^1} < alpha_hat(f, h)`.
    pub fn within_certified_regime(&self) -> Result<bool> {
        Ok(match alpha_hat(&self.f, &self.h)? {
            None => true,
            Some(a) => self.alpha.abs() * self.w.linf_l1_bound() < a,
        })
    }

    pub fn mean_field(&self, phi: &FiberedDensity<T>) -> Result<MeanFieldTable<T>> {
        self.check(phi)?;
        contract(&self.wmat, &self.kernels, phi)
    }

    /// All fiber maps `F_{phi, z_k}`.
    pub fn realize(&self, phi: &FiberedDensity<T>) -> Result<Vec<FiberMapRealization<T>>> {
        let table = self.mean_field(phi)?;
        (0..self.nz)
            .map(|k| realize_fiber_map(&self.f, self.alpha, &table, k))
            .collect()
    }

    fn check(&self, phi: &FiberedDensity<T>) -> Result<()> {
        if (phi.nz(), phi.nx()) != (self.nz, self.nx) {
            return Err(param(format!(
                "grid mismatch: state ({}, {}) vs model ({}, {})",
                phi.nz(),
                phi.nx(),
                self.nz,
                self.nx
            )));
        }
        Ok(())
    }

    /// One application of the operator. Fibers are processed independently;
    /// the result does not depend on how they are scheduled.
    pub fn step(&self, phi: &FiberedDensity<T>) -> Result<(FiberedDensity<T>, StepStats)> {
        let maps = self.realize(phi)?;
        let rows: Vec<Result<(CircleDensity<T>, T)>> = maps
            .par_iter()
            .map(|map| {
                if self.strict && !map.is_expanding() {
                    return Err(StoError::Fiber {
                        fiber: map.fiber(),
                        source: Box::new(domain(format!(
                            "not expanding (min slope {})",
                            map.min_slope()
                        ))),
                    });
                }
                push_row(map, phi.row(map.fiber())).map_err(|e| StoError::Fiber {
                    fiber: map.fiber(),
                    source: Box::new(e),
                })
            })
            .collect();
        let mut stats = StepStats {
            min_xi: f64::INFINITY,
            ..StepStats::default()
        };
        let mut data = Vec::with_capacity(self.nz * self.nx);
        for (map, row) in maps.iter().zip(rows) {
            let (density, err) = row?;
            stats.min_xi = stats.min_xi.min(map.min_slope().as_f64());
            stats.max_distortion = stats.max_distortion.max(map.distortion().as_f64());
            stats.mass_error_max = stats.mass_error_max.max(err.as_f64());
            if !map.is_expanding() {
                stats.non_expanding.push(map.fiber());
            }
            data.extend(density.into_values());
        }
        Ok((
            FiberedDensity::from_raw_unchecked(self.nz, self.nx, data),
            stats,
        ))
    }
}

/// One operator step for the given data, building a throw-away model.
pub fn sto_step<T: Real>(
    phi: &FiberedDensity<T>,
    w: &Graphon<T>,
    h: &CouplingFunction<T>,
    f: &ExpandingMap<T>,
    alpha: T,
) -> Result<FiberedDensity<T>> {
    let model = StoModel::new(f.clone(), h.clone(), w.clone(), alpha, phi.nz(), phi.nx())?;
    Ok(model.step(phi)?.0)
}
