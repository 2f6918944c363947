//! Dense Ulam discretisation of a fiber map, kept as an independent check
//! on the collocation transfer. It uses only forward evaluations of `F`.

use crate::error::{param, Result};
use crate::scalar::Real;

use super::fiber_map::FiberMapRealization;

/// Row-stochastic `nx x nx` matrix: entry `(i, j)` is the fraction of
/// `subdiv` equispaced sample points of cell `i` that land in cell `j`.
pub fn ulam_matrix<T: Real>(map: &FiberMapRealization<T>, subdiv: usize) -> Result<Vec<T>> {
    if subdiv == 0 {
        return Err(param("ulam subdivision must be positive"));
    }
    let nx = map.nx();
    let nf = T::from_usize_lossy(nx);
    let w = T::one() / T::from_usize_lossy(subdiv);
    let mut p = vec![T::zero(); nx * nx];
    for i in 0..nx {
        for s in 0..subdiv {
            let x = (T::from_usize_lossy(i) + (T::from_usize_lossy(s) + T::lit(0.5)) * w) / nf;
            let j = (map.eval(x) * nf)
                .floor()
                .to_usize()
                .unwrap_or(0)
                .min(nx - 1);
            p[i * nx + j] += w;
        }
    }
    Ok(p)
}

/// Cell averages of the piecewise-linear interpolant of nodal values.
pub fn cell_averages<T: Real>(values: &[T]) -> Vec<T> {
    let n = values.len();
    (0..n)
        .map(|i| (values[i] + values[(i + 1) % n]) * T::lit(0.5))
        .collect()
}

/// Push cell averages `hist` through the Ulam matrix.
pub fn ulam_transfer<T: Real>(p: &[T], hist: &[T]) -> Vec<T> {
    let n = hist.len();
    let mut out = vec![T::zero(); n];
    for i in 0..n {
        let hi = hist[i];
        for (o, &pij) in out.iter_mut().zip(&p[i * n..(i + 1) * n]) {
            *o += hi * pij;
        }
    }
    out
}
