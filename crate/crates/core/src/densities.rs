//! Densities and signed functions on the circle.
//!
//! A function is stored by its samples at the nodes `x_j = j / nx` and read
//! as the periodic piecewise-linear interpolant. Norms are computed on the
//! samples: the Riemann sum `(1/nx) sum |v_j|` for `L^1`, first differences
//! for `|.|_{BV^1}` and second differences for `|.|_{BV^2}`.
//!
//! The slice-level functions are used directly by the fibered and operator
//! modules, which store many rows contiguously.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, param, Result};
use crate::scalar::{wrap_unit, Real};

/// Signed function on the circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignedCircleFunction<T> {
    values: Vec<T>,
}

/// Probability density on the circle: nonnegative, Riemann mass one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CircleDensity<T> {
    values: Vec<T>,
}

pub const MASS_TOL: f64 = 1e-10;

impl<T: Real> SignedCircleFunction<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(param("circle function needs at least one sample"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("circle function values must be finite"));
        }
        Ok(Self { values })
    }

    /// Sample `g` at `j / nx`.
    pub fn from_fn(nx: usize, g: impl Fn(T) -> T) -> Result<Self> {
        Self::new(nodes::<T>(nx).into_iter().map(g).collect())
    }

    pub fn zeros(nx: usize) -> Self {
        Self {
            values: vec![T::zero(); nx],
        }
    }

    pub fn nx(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn mass(&self) -> T {
        mass(&self.values)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        same_grid(self.nx(), other.nx())?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| *a - *b)
                .collect(),
        })
    }

    /// Periodic linear interpolation at `x`.
    pub fn interpolate(&self, x: T) -> T {
        interpolate(&self.values, x)
    }
}

impl<T: Real> CircleDensity<T> {
    /// Validate already-normalised samples.
    pub fn new(values: Vec<T>) -> Result<Self> {
        let f = SignedCircleFunction::new(values)?;
        if f.values.iter().any(|&v| v < T::zero()) {
            return Err(domain("density values must be nonnegative"));
        }
        let m = f.mass();
        if (m - T::one()).abs() > T::lit(MASS_TOL).max(T::epsilon() * T::lit(64.0)) {
            return Err(domain(format!("density mass must be 1, got {m}")));
        }
        Ok(Self { values: f.values })
    }

    pub fn uniform(nx: usize) -> Self {
        Self {
            values: vec![T::one(); nx],
        }
    }

    /// Sample a nonnegative `g` at the nodes and normalise.
    pub fn from_fn(nx: usize, g: impl Fn(T) -> T) -> Result<Self> {
        normalize(&SignedCircleFunction::from_fn(nx, g)?)
    }

    pub fn nx(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn as_signed(&self) -> SignedCircleFunction<T> {
        SignedCircleFunction {
            values: self.values.clone(),
        }
    }

    pub fn interpolate(&self, x: T) -> T {
        interpolate(&self.values, x)
    }

    pub(crate) fn from_values_unchecked(values: Vec<T>) -> Self {
        Self { values }
    }

    /// CSV with header `x,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,value")?;
        let nx = self.nx();
        for (j, v) in self.values.iter().enumerate() {
            writeln!(out, "{:.17e},{:.17e}", j as f64 / nx as f64, v.as_f64())?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.values.iter().map(|v| v.as_f64()).collect::<Vec<_>>())
            .expect("finite floats serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<f64> =
            serde_json::from_str(text).map_err(|e| param(format!("density json: {e}")))?;
        Self::new(raw.into_iter().map(T::lit).collect())
    }
}

/// Grid nodes `j / nx`.
pub fn nodes<T: Real>(nx: usize) -> Vec<T> {
    let nf = T::from_usize_lossy(nx);
    (0..nx).map(|j| T::from_usize_lossy(j) / nf).collect()
}

fn same_grid(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(param(format!("grid mismatch: {a} vs {b}")));
    }
    Ok(())
}

/// Scale a nonnegative function to unit Riemann mass.
pub fn normalize<T: Real>(raw: &SignedCircleFunction<T>) -> Result<CircleDensity<T>> {
    if raw.values.iter().any(|&v| v < T::zero()) {
        return Err(domain("cannot normalise a function with negative values"));
    }
    let m = raw.mass();
    if !(m > T::zero()) {
        return Err(domain("cannot normalise a function with zero mass"));
    }
    Ok(CircleDensity {
        values: raw.values.iter().map(|&v| v / m).collect(),
    })
}

// ---- slice kernels --------------------------------------------------------

#[inline]
pub(crate) fn mass<T: Real>(v: &[T]) -> T {
    v.iter().copied().sum::<T>() / T::from_usize_lossy(v.len())
}

#[inline]
pub(crate) fn l1<T: Real>(v: &[T]) -> T {
    v.iter().map(|x| x.abs()).sum::<T>() / T::from_usize_lossy(v.len())
}

#[inline]
pub(crate) fn bv1<T: Real>(v: &[T]) -> T {
    let n = v.len();
    (0..n).map(|j| (v[(j + 1) % n] - v[j]).abs()).sum()
}

#[inline]
pub(crate) fn bv1_diff<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len();
    (0..n)
        .map(|j| {
            let k = (j + 1) % n;
            ((a[k] - b[k]) - (a[j] - b[j])).abs()
        })
        .sum()
}

pub(crate) fn bv2<T: Real>(v: &[T]) -> T {
    let n = v.len();
    let s: T = (0..n)
        .map(|j| (v[(j + 1) % n] - v[j] - v[j] + v[(j + n - 1) % n]).abs())
        .sum();
    s * T::from_usize_lossy(n)
}

/// `max_j |v''|` from second differences.
pub(crate) fn c2_sup<T: Real>(v: &[T]) -> T {
    let n = v.len();
    let n2 = T::from_usize_lossy(n * n);
    (0..n)
        .map(|j| (v[(j + 1) % n] - v[j] - v[j] + v[(j + n - 1) % n]).abs() * n2)
        .fold(T::zero(), T::max)
}

#[inline]
pub(crate) fn interpolate<T: Real>(v: &[T], x: T) -> T {
    let n = v.len();
    let s = wrap_unit(x) * T::from_usize_lossy(n);
    let i = s.floor();
    let t = s - i;
    let i = i.to_usize().unwrap_or(0).min(n - 1);
    let a = v[i];
    let b = v[(i + 1) % n];
    a + (b - a) * t
}

/// Periodic Catmull-Rom interpolation: C^1 in `x` and linear in `v`, exact on
/// quadratics.
#[inline]
pub(crate) fn interpolate_cubic<T: Real>(v: &[T], x: T) -> T {
    let n = v.len();
    let s = wrap_unit(x) * T::from_usize_lossy(n);
    let i = s.floor();
    let t = s - i;
    let i = i.to_usize().unwrap_or(0).min(n - 1);
    let p0 = v[(i + n - 1) % n];
    let p1 = v[i];
    let p2 = v[(i + 1) % n];
    let p3 = v[(i + 2) % n];
    let c1 = p2 - p0;
    let c2 = T::lit(2.0) * p0 - T::lit(5.0) * p1 + T::lit(4.0) * p2 - p3;
    let c3 = T::lit(3.0) * (p1 - p2) + p3 - p0;
    p1 + T::lit(0.5) * t * (c1 + t * (c2 + t * c3))
}

/// Circle `W^1` between two unit-mass sample vectors via the shifted CDF:
/// `min_c int |Phi - c|`, `Phi(x) = int_0^x (a - b)`, `c` the median of `Phi`.
pub(crate) fn w1_slices<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len();
    let h = T::one() / T::from_usize_lossy(n);
    let half = T::lit(0.5);
    let mut phi = Vec::with_capacity(n);
    let mut acc = T::zero();
    for j in 0..n {
        phi.push(acc);
        let k = (j + 1) % n;
        // trapezoid on the piecewise-linear difference
        acc += half * h * ((a[j] - b[j]) + (a[k] - b[k]));
    }
    median_abs_deviation(&mut phi) * h
}

/// `sum |v_i - median(v)|`, reordering `v`.
fn median_abs_deviation<T: Real>(v: &mut [T]) -> T {
    let n = v.len();
    let mid = n / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |x, y| x.partial_cmp(y).expect("finite"));
    let med = *m;
    v.iter().map(|x| (*x - med).abs()).sum()
}

// ---- public operations ------------------------------------------------------

pub fn l1_norm<T: Real>(f: &SignedCircleFunction<T>) -> T {
    l1(&f.values)
}

/// Total variation of the samples, `sum_j |v_{j+1} - v_j|` (periodic).
pub fn bv1_seminorm<T: Real>(f: &SignedCircleFunction<T>) -> T {
    bv1(&f.values)
}

/// Total variation of the derivative, `nx * sum_j |v_{j+1} - 2 v_j + v_{j-1}|`.
pub fn bv2_seminorm<T: Real>(f: &SignedCircleFunction<T>) -> Result<T> {
    if f.nx() < 3 {
        return Err(param("bv2_seminorm needs nx >= 3"));
    }
    Ok(bv2(&f.values))
}

/// Wasserstein-1 distance on the circle.
pub fn w1_distance<T: Real>(f: &CircleDensity<T>, g: &CircleDensity<T>) -> Result<T> {
    if f.nx() == g.nx() {
        return Ok(w1_slices(&f.values, &g.values));
    }
    // resample the coarser density onto the finer grid
    let (fine, coarse) = if f.nx() > g.nx() { (f, g) } else { (g, f) };
    let resampled: Vec<T> = nodes::<T>(fine.nx())
        .into_iter()
        .map(|x| coarse.interpolate(x))
        .collect();
    let m = mass(&resampled);
    let resampled: Vec<T> = resampled.into_iter().map(|v| v / m).collect();
    Ok(w1_slices(&fine.values, &resampled))
}

/// Wasserstein-1 distance between the empirical measure of `samples` and `g`.
///
/// The shifted-CDF integral is evaluated exactly on the partition formed by
/// the grid nodes and the samples: on each piece the empirical CDF is
/// constant and the CDF of `g` is quadratic.
pub fn w1_empirical<T: Real>(samples: &[T], g: &CircleDensity<T>) -> Result<T> {
    if samples.is_empty() {
        return Err(param("w1_empirical needs at least one sample"));
    }
    let mut xs: Vec<f64> = samples.iter().map(|s| wrap_unit(*s).as_f64()).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let r = xs.len() as f64;
    let gv: Vec<f64> = g.values.iter().map(|v| v.as_f64()).collect();
    let nx = gv.len();
    let h = 1.0 / nx as f64;
    // G at nodes
    let mut g_nodes = Vec::with_capacity(nx + 1);
    let mut acc = 0.0;
    for j in 0..nx {
        g_nodes.push(acc);
        acc += 0.5 * h * (gv[j] + gv[(j + 1) % nx]);
    }
    g_nodes.push(acc);
    let cdf_g = |x: f64| -> f64 {
        let s = (x * nx as f64).min(nx as f64);
        let j = (s.floor() as usize).min(nx - 1);
        let t = (x - j as f64 * h).max(0.0);
        let a = gv[j];
        let b = gv[(j + 1) % nx];
        g_nodes[j] + a * t + (b - a) * t * t / (2.0 * h)
    };
    // pieces: (left, right, empirical count) with Phi = count/R - G on each
    let mut breaks: Vec<f64> = (0..=nx).map(|j| j as f64 * h).collect();
    breaks.extend_from_slice(&xs);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    breaks.dedup();
    let gl = [
        (-0.774_596_669_241_483_4, 5.0 / 9.0),
        (0.0, 8.0 / 9.0),
        (0.774_596_669_241_483_4, 5.0 / 9.0),
    ];
    // pieces (lo, hi, empirical CDF value)
    let mut pieces: Vec<(f64, f64, f64)> = Vec::with_capacity(breaks.len());
    let mut count = 0usize;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        while count < xs.len() && xs[count] <= lo {
            count += 1;
        }
        if hi > lo {
            pieces.push((lo, hi, count as f64 / r));
        }
    }
    let (mut c_lo, mut c_hi) = (f64::MAX, f64::MIN);
    for &(lo, hi, e) in &pieces {
        for x in [lo, 0.5 * (lo + hi), hi] {
            let v = e - cdf_g(x);
            c_lo = c_lo.min(v);
            c_hi = c_hi.max(v);
        }
    }
    let objective = |c: f64| -> f64 {
        pieces
            .iter()
            .map(|&(lo, hi, e)| abs_integral_quadratic(&|x| e - cdf_g(x) - c, lo, hi, &gl))
            .sum()
    };
    // the objective is convex in the shift c
    let pad = 1e-3 * (c_hi - c_lo).max(1e-12);
    let (mut a, mut b) = (c_lo - pad, c_hi + pad);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..90 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        }
        if b - a < 1e-14 {
            break;
        }
    }
    Ok(T::lit(f1.min(f2)))
}

/// `int_lo^hi |f|` for a quadratic `f`, splitting at its roots.
fn abs_integral_quadratic(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, gl: &[(f64, f64); 3]) -> f64 {
    let quad = |a: f64, b: f64| {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        gl.iter().map(|(n, w)| w * f(mid + half * n)).sum::<f64>() * half
    };
    // recover the quadratic from three samples and find its roots in (lo, hi)
    let m = 0.5 * (lo + hi);
    let (f0, f1, f2) = (f(lo), f(m), f(hi));
    let hh = 0.5 * (hi - lo);
    // f(m + s) = f1 + b s + a s^2
    let a = (f0 + f2 - 2.0 * f1) / (2.0 * hh * hh);
    let b = (f2 - f0) / (2.0 * hh);
    let mut cuts = vec![lo];
    let mut roots = Vec::new();
    if a.abs() > 1e-300 {
        let disc = b * b - 4.0 * a * f1;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            roots.push((-b - sq) / (2.0 * a));
            roots.push((-b + sq) / (2.0 * a));
        }
    } else if b.abs() > 1e-300 {
        roots.push(-f1 / b);
    }
    roots.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    for s in roots {
        let x = m + s;
        if x > lo && x < hi {
            cuts.push(x);
        }
    }
    cuts.push(hi);
    cuts.windows(2).map(|w| quad(w[0], w[1]).abs()).sum()
}

/// Hilbert projective metric of the positive cone,
/// `log(max f/g * max g/f)`.
pub fn hilbert_metric_positive<T: Real>(f: &[T], g: &[T]) -> Result<T> {
    same_grid(f.len(), g.len())?;
    if f.iter().chain(g).any(|&v| !(v > T::zero())) {
        return Err(domain("hilbert metric needs strictly positive functions"));
    }
    let mut up = T::zero();
    let mut down = T::zero();
    for (a, b) in f.iter().zip(g) {
        up = up.max(*a / *b);
        down = down.max(*b / *a);
    }
    Ok((up * down).ln().max(T::zero()))
}

pub fn sup_distance<T: Real>(f: &[T], g: &[T]) -> Result<T> {
    same_grid(f.len(), g.len())?;
    Ok(f.iter()
        .zip(g)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max))
}
