use crate::circle_maps::CouplingFunction;
use crate::densities::nodes;
use crate::error::{param, Result};
use crate::fibered::FiberedDensity;
use crate::graphon::Graphon;
use crate::scalar::Real;

/// Mean field `M[k][j] = int W(z_k, z') int h(x_j, y) phi_{z'}(y) dy dz'`
/// together with its first two `x`-derivatives, on the `nz x nx` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldTable<T> {
    nz: usize,
    nx: usize,
    m: Vec<T>,
    mx: Vec<T>,
    mxx: Vec<T>,
}

impl<T: Real> MeanFieldTable<T> {
    pub fn zeros(nz: usize, nx: usize) -> Self {
        Self {
            nz,
            nx,
            m: vec![T::zero(); nz * nx],
            mx: vec![T::zero(); nz * nx],
            mxx: vec![T::zero(); nz * nx],
        }
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Row `k` of `M`, `M_x` or `M_xx` for `order` 0, 1, 2.
    pub fn row(&self, k: usize, order: usize) -> &[T] {
        let t = match order {
            0 => &self.m,
            1 => &self.mx,
            _ => &self.mxx,
        };
        &t[k * self.nx..(k + 1) * self.nx]
    }

    pub fn max_abs(&self, order: usize) -> T {
        let t = match order {
            0 => &self.m,
            1 => &self.mx,
            _ => &self.mxx,
        };
        t.iter().fold(T::zero(), |a, v| a.max(v.abs()))
    }

    /// Number of distinct rows of `M` (exact comparison).
    pub fn distinct_rows(&self) -> usize {
        let mut seen: Vec<&[T]> = Vec::new();
        for k in 0..self.nz {
            let r = self.row(k, 0);
            if !seen.contains(&r) {
                seen.push(r);
            }
        }
        seen.len()
    }
}

/// Precomputed `h`-kernel tables for a given `nx`:
/// `tables[o][i * nx + j] = d^o/dx^o h(x_j, y_i)`.
#[derive(Clone, Debug)]
pub(crate) struct KernelTables<T> {
    nx: usize,
    tables: [Vec<T>; 3],
}

impl<T: Real> KernelTables<T> {
    pub(crate) fn new(h: &CouplingFunction<T>, nx: usize) -> Self {
        let xs = nodes::<T>(nx);
        let build = |o: u8| {
            let mut t = Vec::with_capacity(nx * nx);
            for &y in &xs {
                for &x in &xs {
                    t.push(h.partial_unchecked(x, y, o, 0));
                }
            }
            t
        };
        Self {
            nx,
            tables: [build(0), build(1), build(2)],
        }
    }
}

/// Two-stage contraction: `H = phi * K / nx` over `y`, then `M = W * H / nz`
/// over `z'`. Cost `O(nz nx^2 + nz^2 nx)`.
pub(crate) fn contract<T: Real>(
    wmat: &[T],
    kernels: &KernelTables<T>,
    phi: &FiberedDensity<T>,
) -> Result<MeanFieldTable<T>> {
    let (nz, nx) = (phi.nz(), phi.nx());
    if kernels.nx != nx || wmat.len() != nz * nz {
        return Err(param(
            "mean field: grid mismatch between state and kernel tables",
        ));
    }
    let inv_nx = T::one() / T::from_usize_lossy(nx);
    let inv_nz = T::one() / T::from_usize_lossy(nz);
    let mut out = MeanFieldTable::zeros(nz, nx);
    let mut stage = vec![T::zero(); nz * nx];
    for (o, table) in kernels.tables.iter().enumerate() {
        T::gemm(nz, nx, nx, phi.data(), table, &mut stage);
        let target = match o {
            0 => &mut out.m,
            1 => &mut out.mx,
            _ => &mut out.mxx,
        };
        T::gemm(nz, nz, nx, wmat, &stage, target);
        let scale = inv_nx * inv_nz;
        target.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(out)
}

/// Mean-field tables of `phi` under kernel `w` and coupling `h`.
pub fn mean_field<T: Real>(
    w: &Graphon<T>,
    h: &CouplingFunction<T>,
    phi: &FiberedDensity<T>,
) -> Result<MeanFieldTable<T>> {
    let kernels = KernelTables::new(h, phi.nx());
    contract(&w.midpoint_matrix(phi.nz()), &kernels, phi)
}
