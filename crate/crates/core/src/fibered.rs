//! Gridded disintegrations `phi(z, x)` with Lebesgue marginal.
//!
//! The base `[0, 1]` is cut into `nz` cells with midpoints
//! `z_k = (k + 1/2) / nz`; row `k` is a [`CircleDensity`] on the fiber over
//! `z_k`. Rows are stored contiguously, row-major.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::densities::{self, CircleDensity};
use crate::error::{param, Result, StoError};
use crate::graphon::{default_radii, dyadic_variation, midpoints};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct FiberedDensity<T> {
    nz: usize,
    nx: usize,
    data: Vec<T>,
}

/// Measured radii of the admissible set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleDiagnostics {
    /// max over rows of `|phi_z|_{BV^1}`
    pub m1: f64,
    /// max over rows of `|phi_z|_{BV^2}`
    pub m2: f64,
    pub var_p: f64,
    pub weak_norm: f64,
    pub c2_sup: f64,
}

/// Initial-condition recipes addressable from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    Uniform,
    /// `1 + amplitude * sin(2 pi (x - phase))` on every fiber.
    Sinusoid {
        amplitude: f64,
        phase: f64,
    },
    /// `left` for `z <= split`, `right` above.
    TwoCluster {
        split: f64,
        left: Box<ProfileSpec>,
        right: Box<ProfileSpec>,
    },
    /// `1 + amplitude * z * sin(2 pi x)`, Lipschitz in `z`.
    LinearInZ {
        amplitude: f64,
    },
    /// `exp(kappa * cos(2 pi (x - center)))`, normalised.
    VonMises {
        kappa: f64,
        center: f64,
    },
}

impl ProfileSpec {
    /// Unnormalised density value at `(z, x)`.
    pub fn raw(&self, z: f64, x: f64) -> f64 {
        use std::f64::consts::TAU;
        match self {
            ProfileSpec::Uniform => 1.0,
            ProfileSpec::Sinusoid { amplitude, phase } => {
                1.0 + amplitude * (TAU * (x - phase)).sin()
            }
            ProfileSpec::TwoCluster { split, left, right } => {
                if z <= *split {
                    left.raw(z, x)
                } else {
                    right.raw(z, x)
                }
            }
            ProfileSpec::LinearInZ { amplitude } => 1.0 + amplitude * z * (TAU * x).sin(),
            ProfileSpec::VonMises { kappa, center } => (kappa * (TAU * (x - center)).cos()).exp(),
        }
    }
}

impl<T: Real> FiberedDensity<T> {
    pub fn uniform(nz: usize, nx: usize) -> Result<Self> {
        check_grid(nz, nx)?;
        Ok(Self {
            nz,
            nx,
            data: vec![T::one(); nz * nx],
        })
    }

    /// Sample `profile(z_k, x_j)` and normalise each row.
    pub fn from_profile(nz: usize, nx: usize, profile: impl Fn(T, T) -> T) -> Result<Self> {
        check_grid(nz, nx)?;
        let mut data = Vec::with_capacity(nz * nx);
        for (k, z) in midpoints::<T>(nz).into_iter().enumerate() {
            let row =
                CircleDensity::from_fn(nx, |x| profile(z, x)).map_err(|e| StoError::Fiber {
                    fiber: k,
                    source: Box::new(e),
                })?;
            data.extend_from_slice(row.values());
        }
        Ok(Self { nz, nx, data })
    }

    pub fn from_spec(nz: usize, nx: usize, spec: &ProfileSpec) -> Result<Self> {
        Self::from_profile(nz, nx, |z, x| T::lit(spec.raw(z.as_f64(), x.as_f64())))
    }

    /// Validate rows given as densities.
    pub fn from_rows(rows: Vec<CircleDensity<T>>) -> Result<Self> {
        let nz = rows.len();
        let nx = rows.first().map(CircleDensity::nx).unwrap_or(0);
        check_grid(nz, nx)?;
        let mut data = Vec::with_capacity(nz * nx);
        for r in &rows {
            if r.nx() != nx {
                return Err(param("all rows must share nx"));
            }
            data.extend_from_slice(r.values());
        }
        Ok(Self { nz, nx, data })
    }

    pub(crate) fn from_raw_unchecked(nz: usize, nx: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), nz * nx);
        Self { nz, nx, data }
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[T] {
        &self.data[k * self.nx..(k + 1) * self.nx]
    }

    pub fn row_density(&self, k: usize) -> CircleDensity<T> {
        CircleDensity::from_values_unchecked(self.row(k).to_vec())
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.nx)
    }

    /// Row index whose cell contains `z` (nearest midpoint).
    pub fn row_for(&self, z: f64) -> usize {
        ((z * self.nz as f64).floor().max(0.0) as usize).min(self.nz - 1)
    }

    /// Largest `|mass - 1|` over rows.
    pub fn max_mass_error(&self) -> T {
        self.rows()
            .map(|r| (densities::mass(r) - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    /// Long-format CSV `z,x,value`, one line per grid point.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "z,x,value")?;
        let zs = midpoints::<f64>(self.nz);
        for (k, row) in self.rows().enumerate() {
            for (j, v) in row.iter().enumerate() {
                writeln!(
                    out,
                    "{:.17e},{:.17e},{:.17e}",
                    zs[k],
                    j as f64 / self.nx as f64,
                    v.as_f64()
                )?;
            }
        }
        Ok(())
    }

    /// Binary dump: magic `STOFIBER`, `nz: u64`, `nx: u64`, then `nz * nx`
    /// row-major `f64` values, all little-endian.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(BIN_MAGIC)?;
        out.write_all(&(self.nz as u64).to_le_bytes())?;
        out.write_all(&(self.nx as u64).to_le_bytes())?;
        for v in &self.data {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BIN_MAGIC {
            return Err(param("not a fibered density dump"));
        }
        let mut word = [0u8; 8];
        input.read_exact(&mut word)?;
        let nz = u64::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let nx = u64::from_le_bytes(word) as usize;
        check_grid(nz, nx)?;
        let mut data = Vec::with_capacity(nz * nx);
        for _ in 0..nz * nx {
            input.read_exact(&mut word)?;
            data.push(T::lit(f64::from_le_bytes(word)));
        }
        Ok(Self { nz, nx, data })
    }
}

const BIN_MAGIC: &[u8; 8] = b"STOFIBER";

fn check_grid(nz: usize, nx: usize) -> Result<()> {
    if nz < 2 || nx < 2 {
        return Err(param(format!(
            "fibered grids need nz, nx >= 2, got ({nz}, {nx})"
        )));
    }
    Ok(())
}

fn check_same(a: &FiberedDensity<impl Real>, b: &FiberedDensity<impl Real>) -> Result<()> {
    if a.nz != b.nz || a.nx != b.nx {
        return Err(param(format!(
            "grid mismatch: ({}, {}) vs ({}, {})",
            a.nz, a.nx, b.nz, b.nx
        )));
    }
    Ok(())
}

/// `int ||phi_z - psi_z||_{W^1} dz` by midpoint rule.
pub fn weak_norm_distance<T: Real>(phi: &FiberedDensity<T>, psi: &FiberedDensity<T>) -> Result<T> {
    check_same(phi, psi)?;
    let s: T = phi
        .rows()
        .zip(psi.rows())
        .map(|(a, b)| densities::w1_slices(a, b))
        .sum();
    Ok(s / T::from_usize_lossy(phi.nz))
}

/// `||phi||_{"1"}` of a fibered probability density. Each fiber is a
/// nonnegative measure, for which the bounded-Lipschitz dual norm is its mass.
pub fn weak_norm<T: Real>(phi: &FiberedDensity<T>) -> T {
    phi.rows().map(densities::mass).sum::<T>() / T::from_usize_lossy(phi.nz)
}

/// Largest fiberwise sup distance.
pub fn sup_norm_distance<T: Real>(phi: &FiberedDensity<T>, psi: &FiberedDensity<T>) -> Result<T> {
    check_same(phi, psi)?;
    Ok(phi
        .data
        .iter()
        .zip(&psi.data)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max))
}

fn pairwise_bv1<T: Real>(phi: &FiberedDensity<T>) -> Vec<T> {
    let n = phi.nz;
    let mut dist = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = densities::bv1_diff(phi.row(i), phi.row(j));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    dist
}

fn ball_range<T: Real>(mids: &[T], omega: T, r: T) -> (usize, usize) {
    let slack = T::lit(1e-12);
    let lo = mids.partition_point(|&z| z < omega - r - slack);
    let hi = mids.partition_point(|&z| z <= omega + r + slack);
    (lo, hi)
}

/// `max |phi_z - phi_zbar|_{BV^1}` over midpoints in the closed ball `B(omega, r)`.
pub fn osc_bv1<T: Real>(phi: &FiberedDensity<T>, omega: T, r: T) -> Result<T> {
    if !(r > T::zero()) {
        return Err(param("osc_bv1 needs r > 0"));
    }
    let mids = midpoints::<T>(phi.nz);
    let (lo, hi) = ball_range(&mids, omega, r);
    let mut m = T::zero();
    for i in lo..hi {
        for j in (i + 1)..hi {
            m = m.max(densities::bv1_diff(phi.row(i), phi.row(j)));
        }
    }
    Ok(m)
}

/// `max_r r^-p int osc_{BV^1}(phi, omega, r) d omega` over `radii`, with
/// `omega` on the midpoint grid.
pub fn var_p_bv1<T: Real>(phi: &FiberedDensity<T>, p_exp: T, radii: &[T]) -> Result<T> {
    if radii.is_empty() {
        return Err(param("var_p_bv1 needs at least one radius"));
    }
    if radii.iter().any(|&r| !(r > T::zero())) {
        return Err(param("radii must be positive"));
    }
    if !(p_exp > T::zero() && p_exp <= T::one()) {
        return Err(param(format!("p_exp must lie in (0, 1], got {p_exp}")));
    }
    let dist = pairwise_bv1(phi);
    Ok(dyadic_variation(&dist, phi.nz, p_exp, radii))
}

pub fn admissible_diagnostics<T: Real>(
    phi: &FiberedDensity<T>,
    p_exp: T,
) -> Result<AdmissibleDiagnostics> {
    let mut m1 = T::zero();
    let mut m2 = T::zero();
    let mut c2 = T::zero();
    for r in phi.rows() {
        m1 = m1.max(densities::bv1(r));
        if phi.nx >= 3 {
            m2 = m2.max(densities::bv2(r));
            c2 = c2.max(densities::c2_sup(r));
        }
    }
    let var_p = var_p_bv1(phi, p_exp, &default_radii())?;
    Ok(AdmissibleDiagnostics {
        m1: m1.as_f64(),
        m2: m2.as_f64(),
        var_p: var_p.as_f64(),
        weak_norm: weak_norm(phi).as_f64(),
        c2_sup: c2.as_f64(),
    })
}
