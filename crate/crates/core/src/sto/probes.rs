use serde::{Deserialize, Serialize};

use crate::circle_maps::ck_norm;
use crate::densities::{self, hilbert_metric_positive, SignedCircleFunction};
use crate::error::{domain, param, Result, StoError};
use crate::fibered::{weak_norm_distance, FiberedDensity};
use crate::graphon::graphon_l1_distance;
use crate::scalar::Real;

use super::fiber_map::FiberMapRealization;
use super::transfer::{transfer_raw, StoModel};

/// Base-grid resolution for `||W - W~||_{L^1}` in the Lipschitz probe.
pub const GRAPHON_L1_GRID: usize = 512;

/// Ratio `||F phi - F~ phi~||_{"1"} / (||W - W~||_{L^1} + ||phi - phi~||_{"1"})`.
pub fn lipschitz_probe<T: Real>(
    model: &StoModel<T>,
    model_tilde: &StoModel<T>,
    phi: &FiberedDensity<T>,
    phi_tilde: &FiberedDensity<T>,
) -> Result<T> {
    if model.grid() != model_tilde.grid() {
        return Err(param("lipschitz probe: models live on different grids"));
    }
    let dw = graphon_l1_distance(model.graphon(), model_tilde.graphon(), GRAPHON_L1_GRID)?;
    let dphi = weak_norm_distance(phi, phi_tilde)?;
    let den = dw + dphi;
    if !(den > T::zero()) {
        return Err(param(
            "lipschitz probe: identical inputs give an undefined ratio",
        ));
    }
    let (a, _) = model.step(phi)?;
    let (b, _) = model_tilde.step(phi_tilde)?;
    Ok(weak_norm_distance(&a, &b)? / den)
}

/// One Lasota-Yorke audit: `|F_* g|_{BV^1} <= lambda1 |g|_{BV^1} + D ||g||_{L^1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LasotaYorkeRecord {
    pub lhs: f64,
    pub lambda1: f64,
    pub d: f64,
    pub rhs: f64,
    pub slack: f64,
}

pub fn lasota_yorke_probe<T: Real>(
    map: &FiberMapRealization<T>,
    g: &SignedCircleFunction<T>,
) -> Result<LasotaYorkeRecord> {
    if !map.is_expanding() {
        return Err(domain(format!("fiber {} is not expanding", map.fiber())));
    }
    let pushed = transfer_raw(map, g.values())?;
    let lhs = densities::bv1(&pushed);
    let lambda1 = T::one() / map.min_slope();
    let d = map.distortion();
    let rhs = lambda1 * densities::bv1(g.values()) + d * densities::l1(g.values());
    Ok(LasotaYorkeRecord {
        lhs: lhs.as_f64(),
        lambda1: lambda1.as_f64(),
        d: d.as_f64(),
        rhs: rhs.as_f64(),
        slack: (rhs - lhs).as_f64(),
    })
}

/// `BV^1` history of a zero-mean function pushed by a sequence of fiber maps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryLossTrace {
    /// `|psi_n|_{BV^1} + ||psi_n||_{L^1}`, `n = 0..=steps`.
    pub norms: Vec<f64>,
    /// `|psi_n|_{BV^1}` alone.
    pub seminorms: Vec<f64>,
    /// Grid `xi` of the map used at each step.
    pub xi: Vec<f64>,
    /// Mean of each pushed function before it is projected back to zero mean.
    pub mass_defects: Vec<f64>,
}

impl MemoryLossTrace {
    /// Ratios `norms[i+1] / norms[i]` where `norms[i]` is above `floor`
    /// times the initial norm; smaller norms are round-off dominated.
    pub fn ratios(&self, floor: f64) -> Vec<(usize, f64)> {
        let cut = floor * self.norms.first().copied().unwrap_or(0.0);
        self.norms
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] > cut && w[0] > 0.0)
            .map(|(i, w)| (i, w[1] / w[0]))
            .collect()
    }
}

/// Push `psi0` on fiber `k` by `F_{nu_1, z_k}`, ..., `F_{nu_n, z_k}`.
///
/// The exact operator preserves zero mean; the discrete one leaves a small
/// constant defect that would never contract, so it is subtracted after each
/// push and recorded.
pub fn memory_loss_probe<T: Real>(
    model: &StoModel<T>,
    nu_sequence: &[FiberedDensity<T>],
    k: usize,
    psi0: &SignedCircleFunction<T>,
    steps: usize,
) -> Result<MemoryLossTrace> {
    if steps > nu_sequence.len() {
        return Err(param(format!(
            "memory loss: {steps} steps requested but only {} measures given",
            nu_sequence.len()
        )));
    }
    if psi0.mass().abs() > T::lit(1e-10) {
        return Err(param(format!(
            "memory loss: psi0 must have zero mean, got {}",
            psi0.mass()
        )));
    }
    if k >= model.grid().0 {
        return Err(param(format!("fiber index {k} out of range")));
    }
    let norm = |v: &[T]| (densities::bv1(v) + densities::l1(v), densities::bv1(v));
    let mut psi = psi0.values().to_vec();
    let (n0, s0) = norm(&psi);
    let mut trace = MemoryLossTrace {
        norms: vec![n0.as_f64()],
        seminorms: vec![s0.as_f64()],
        xi: Vec::new(),
        mass_defects: Vec::new(),
    };
    for nu in &nu_sequence[..steps] {
        let maps = model.realize(nu)?;
        let map = &maps[k];
        if !map.is_expanding() {
            return Err(StoError::Fiber {
                fiber: k,
                source: Box::new(domain("memory loss: non-expanding fiber map")),
            });
        }
        psi = transfer_raw(map, &psi)?;
        let defect = densities::mass(&psi);
        psi.iter_mut().for_each(|v| *v -= defect);
        trace.mass_defects.push(defect.as_f64());
        let (n, s) = norm(&psi);
        trace.norms.push(n.as_f64());
        trace.seminorms.push(s.as_f64());
        trace.xi.push(map.min_slope().as_f64());
    }
    Ok(trace)
}

/// Per-fiber contraction of the positive-cone surrogate metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HilbertRecord {
    /// `None` where the input distance vanishes.
    pub gammas: Vec<Option<f64>>,
    pub max_gamma: Option<f64>,
    pub skipped: Vec<usize>,
}

pub fn hilbert_contraction_probe<T: Real>(
    model: &StoModel<T>,
    phi: &FiberedDensity<T>,
    psi: &FiberedDensity<T>,
) -> Result<HilbertRecord> {
    let (fphi, _) = model.step(phi)?;
    let (fpsi, _) = model.step(psi)?;
    let mut rec = HilbertRecord {
        gammas: Vec::with_capacity(phi.nz()),
        max_gamma: None,
        skipped: Vec::new(),
    };
    for k in 0..phi.nz() {
        let before = hilbert_metric_positive(phi.row(k), psi.row(k))?;
        if !(before > T::lit(1e-14)) {
            rec.gammas.push(None);
            rec.skipped.push(k);
            continue;
        }
        let after = hilbert_metric_positive(fphi.row(k), fpsi.row(k))?;
        let g = (after / before).as_f64();
        rec.max_gamma = Some(rec.max_gamma.map_or(g, |m: f64| m.max(g)));
        rec.gammas.push(Some(g));
    }
    Ok(rec)
}

/// `sum_{i <= order} max_j |F1^(i)(x_j) - F2^(i)(x_j)|`.
pub fn fiber_map_ck_distance<T: Real>(
    a: &FiberMapRealization<T>,
    b: &FiberMapRealization<T>,
    order: u8,
) -> Result<T> {
    if a.nx() != b.nx() {
        return Err(param("fiber maps live on different grids"));
    }
    if order > 2 {
        return Err(param(format!("order must be 0..=2, got {order}")));
    }
    let mut total = T::zero();
    for i in 0..=order {
        let sup = (0..a.nx())
            .map(|j| (a.node_derivative(j, i) - b.node_derivative(j, i)).abs())
            .fold(T::zero(), T::max);
        total += sup;
    }
    Ok(total)
}

/// `|alpha| ||h||_{C^k} ||W(z_a, .) - W(z_b, .)||_{L^1}` with the row
/// difference taken on the model's base quadrature.
pub fn ck_distance_bound<T: Real>(
    model: &StoModel<T>,
    ka: usize,
    kb: usize,
    order: u8,
) -> Result<T> {
    let (nz, _) = model.grid();
    if ka >= nz || kb >= nz {
        return Err(param("fiber index out of range"));
    }
    let zs = crate::graphon::midpoints::<T>(nz);
    let w = model.graphon();
    let row: T = zs
        .iter()
        .map(|&zp| (w.eval_unchecked(zs[ka], zp) - w.eval_unchecked(zs[kb], zp)).abs())
        .sum::<T>()
        / T::from_usize_lossy(nz);
    Ok(model.alpha().abs() * ck_norm(model.coupling(), order)? * row)
}

/// Relative change of `max_z sup |phi_z''|` between a solution and its
/// refinement on twice as many `x` nodes.
pub fn refinement_c2_change<T: Real>(
    coarse: &FiberedDensity<T>,
    fine: &FiberedDensity<T>,
) -> Result<T> {
    if fine.nx() != 2 * coarse.nx() || fine.nz() != coarse.nz() {
        return Err(param("refinement probe expects the same nz and doubled nx"));
    }
    let c2 = |phi: &FiberedDensity<T>| phi.rows().map(densities::c2_sup).fold(T::zero(), T::max);
    let (a, b) = (c2(coarse), c2(fine));
    if !(b > T::zero()) {
        return Ok((a - b).abs());
    }
    Ok((a - b).abs() / b)
}
