//! Interaction kernels `W(z, z')` on `[0, 1]^2`.
//!
//! Step graphons follow the finite-graph convention: the unit interval is cut
//! into `N` cells `I_1 = [0, 1/N]`, `I_i = ((i-1)/N, i/N]`, and
//! `W = A_ij` on `I_i x I_j`. Block graphons use the same left-open rule at
//! their cut points.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::rng;
use crate::scalar::Real;

/// Shape of a translation-invariant profile `xi(u)`, `u = |z - z'|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiShape {
    /// `amplitude * (1 - u)`
    Linear,
    /// `amplitude * exp(-rate * u)`
    Exp,
}

/// Lipschitz decay profile for spatially decaying kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Profile<T> {
    pub shape: XiShape,
    pub amplitude: T,
    pub rate: T,
}

impl<T: Real> Profile<T> {
    pub fn linear(amplitude: T) -> Self {
        Self {
            shape: XiShape::Linear,
            amplitude,
            rate: T::one(),
        }
    }

    pub fn exp(amplitude: T, rate: T) -> Self {
        Self {
            shape: XiShape::Exp,
            amplitude,
            rate,
        }
    }

    #[inline]
    pub fn eval(&self, u: T) -> T {
        match self.shape {
            XiShape::Linear => self.amplitude * (T::one() - u),
            XiShape::Exp => self.amplitude * (-self.rate * u).exp(),
        }
    }

    /// `int_0^s |xi(u)| du` for `s` in `[0, 1]`.
    fn abs_integral(&self, s: T) -> T {
        let a = self.amplitude.abs();
        match self.shape {
            XiShape::Linear => a * (s - s * s / T::lit(2.0)),
            XiShape::Exp => {
                if self.rate == T::zero() {
                    a * s
                } else {
                    a * (T::one() - (-self.rate * s).exp()) / self.rate
                }
            }
        }
    }

    pub fn lipschitz(&self) -> T {
        match self.shape {
            XiShape::Linear => self.amplitude.abs(),
            XiShape::Exp => (self.amplitude * self.rate).abs(),
        }
    }

    fn sup(&self) -> T {
        // both shapes are monotone in u on [0, 1]
        self.eval(T::zero()).abs().max(self.eval(T::one()).abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GraphonKind<T> {
    Constant(T),
    /// `values` is `B x B` row-major; `cuts` are `B - 1` sorted points in `(0, 1)`.
    Block {
        cuts: Vec<T>,
        values: Vec<T>,
    },
    /// `W(z, z') = xi(|z - z'|)`.
    Translation(Profile<T>),
    /// Step graphon of an `n x n` matrix.
    Step {
        n: usize,
        a: Vec<T>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graphon<T> {
    kind: GraphonKind<T>,
    linf_l1_bound: T,
    sup_bound: T,
}

impl<T: Real> Graphon<T> {
    pub fn constant(p: T) -> Self {
        Self {
            kind: GraphonKind::Constant(p),
            linf_l1_bound: p.abs(),
            sup_bound: p.abs(),
        }
    }

    pub fn block(cuts: Vec<T>, values: Vec<T>) -> Result<Self> {
        let b = cuts.len() + 1;
        if values.len() != b * b {
            return Err(param(format!(
                "block graphon with {} cuts needs {} values, got {}",
                cuts.len(),
                b * b,
                values.len()
            )));
        }
        let mut prev = T::zero();
        for &c in &cuts {
            if !(c > prev && c < T::one()) {
                return Err(param(
                    "block cuts must be strictly increasing inside (0, 1)",
                ));
            }
            prev = c;
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(param("block values must be finite"));
        }
        let widths = block_widths(&cuts);
        let linf = (0..b)
            .map(|r| {
                (0..b)
                    .map(|c| values[r * b + c].abs() * widths[c])
                    .sum::<T>()
            })
            .fold(T::zero(), T::max);
        let sup = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        Ok(Self {
            kind: GraphonKind::Block { cuts, values },
            linf_l1_bound: linf,
            sup_bound: sup,
        })
    }

    pub fn translation(profile: Profile<T>) -> Self {
        // the row norm I(z) + I(1 - z) peaks at z = 1/2 for monotone decay
        let half = T::lit(0.5);
        let linf = profile.abs_integral(half) + profile.abs_integral(half);
        Self {
            linf_l1_bound: linf,
            sup_bound: profile.sup(),
            kind: GraphonKind::Translation(profile),
        }
    }

    pub fn kind(&self) -> &GraphonKind<T> {
        &self.kind
    }

    /// Cached `ess sup_z ||W(z, .)||_{L^1}`.
    pub fn linf_l1_bound(&self) -> T {
        self.linf_l1_bound
    }

    /// Cached `sup |W|`.
    pub fn sup_bound(&self) -> T {
        self.sup_bound
    }

    pub fn eval(&self, z: T, zp: T) -> Result<T> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(z) || !unit(zp) {
            return Err(param(format!(
                "graphon coordinates must lie in [0, 1], got ({z}, {zp})"
            )));
        }
        Ok(self.eval_unchecked(z, zp))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, z: T, zp: T) -> T {
        match &self.kind {
            GraphonKind::Constant(p) => *p,
            GraphonKind::Block { cuts, values } => {
                let b = cuts.len() + 1;
                let r = cuts.partition_point(|&c| c < z);
                let c = cuts.partition_point(|&c| c < zp);
                values[r * b + c]
            }
            GraphonKind::Translation(xi) => xi.eval((z - zp).abs()),
            GraphonKind::Step { n, a } => a[step_cell(z, *n) * n + step_cell(zp, *n)],
        }
    }

    /// `W(z_k, z_l)` at cell midpoints `z_k = (k + 1/2) / nz`, row-major.
    pub fn midpoint_matrix(&self, nz: usize) -> Vec<T> {
        let mids = midpoints::<T>(nz);
        let mut out = Vec::with_capacity(nz * nz);
        for &z in &mids {
            for &zp in &mids {
                out.push(self.eval_unchecked(z, zp));
            }
        }
        out
    }

    /// Midpoint quadrature of `||W(z, .)||_{L^1}`.
    pub fn row_l1_norm(&self, z: T, quad_points: usize) -> Result<T> {
        if quad_points < 2 {
            return Err(param("row_l1_norm needs at least 2 quadrature points"));
        }
        if !(z >= T::zero() && z <= T::one()) {
            return Err(param(format!("z must lie in [0, 1], got {z}")));
        }
        let mids = midpoints::<T>(quad_points);
        let s: T = mids
            .iter()
            .map(|&zp| self.eval_unchecked(z, zp).abs())
            .sum();
        Ok(s / T::from_usize_lossy(quad_points))
    }
}

fn block_widths<T: Real>(cuts: &[T]) -> Vec<T> {
    let mut w = Vec::with_capacity(cuts.len() + 1);
    let mut prev = T::zero();
    for &c in cuts {
        w.push(c - prev);
        prev = c;
    }
    w.push(T::one() - prev);
    w
}

/// Index of the cell containing `z` under the `[0,1/N], ((i-1)/N, i/N]` rule.
#[inline]
fn step_cell<T: Real>(z: T, n: usize) -> usize {
    let s = (z * T::from_usize_lossy(n)).ceil();
    let i = s.to_usize().unwrap_or(0);
    i.saturating_sub(1).min(n - 1)
}

/// Cell midpoints `(k + 1/2) / n`.
pub fn midpoints<T: Real>(n: usize) -> Vec<T> {
    let nf = T::from_usize_lossy(n);
    (0..n)
        .map(|k| (T::from_usize_lossy(k) + T::lit(0.5)) / nf)
        .collect()
}

/// Dense `N x N` interaction matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix<T> {
    n: usize,
    entries: Vec<T>,
    seed: Option<u64>,
    binary: bool,
}

impl<T: Real> AdjacencyMatrix<T> {
    pub fn from_entries(n: usize, entries: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(param("adjacency matrix needs N >= 1"));
        }
        if entries.len() != n * n {
            return Err(param(format!(
                "expected {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(param("adjacency entries must be finite"));
        }
        let binary = entries.iter().all(|&v| v == T::zero() || v == T::one());
        Ok(Self {
            n,
            entries,
            seed: None,
            binary,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn is_binary(&self) -> bool {
        self.binary
    }

    /// In-degree `k_i = sum_j A_ij`.
    pub fn degrees(&self) -> Vec<T> {
        self.entries
            .chunks(self.n)
            .map(|row| row.iter().copied().sum())
            .collect()
    }

    /// Relabel nodes: `B[i][j] = A[perm[i]][perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut entries = Vec::with_capacity(n * n);
        for &pi in perm {
            for &pj in perm {
                entries.push(self.get(pi, pj));
            }
        }
        Self {
            n,
            entries,
            seed: self.seed,
            binary: self.binary,
        }
    }
}

/// Step graphon with `W = A_ij` on `I_i x I_j`.
pub fn step_graphon_from_matrix<T: Real>(a: &AdjacencyMatrix<T>) -> Graphon<T> {
    let n = a.n;
    let nf = T::from_usize_lossy(n);
    let linf = a
        .entries
        .chunks(n)
        .map(|row| row.iter().map(|v| v.abs()).sum::<T>() / nf)
        .fold(T::zero(), T::max);
    let sup = a.entries.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    Graphon {
        kind: GraphonKind::Step {
            n,
            a: a.entries.clone(),
        },
        linf_l1_bound: linf,
        sup_bound: sup,
    }
}

/// Erdos-Renyi sample: i.i.d. Bernoulli(`p`) entries, row `i` drawn from
/// stream `i` of `seed`.
pub fn sample_er<T: Real>(n: usize, p: f64, seed: u64) -> Result<AdjacencyMatrix<T>> {
    if n == 0 {
        return Err(param("sample_er needs N >= 1"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(param(format!(
            "edge probability must lie in [0, 1], got {p}"
        )));
    }
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut r = rng::stream(seed, i as u64);
        for _ in 0..n {
            entries.push(if r.random_bool(p) {
                T::one()
            } else {
                T::zero()
            });
        }
    }
    Ok(AdjacencyMatrix {
        n,
        entries,
        seed: Some(seed),
        binary: true,
    })
}

/// Sample a kernel onto `N` nodes: `xi(|i - j| / N)` for translation kernels,
/// the block value at the node midpoints `(i - 1/2) / N` for block kernels.
pub fn quantize_kernel<T: Real>(w: &Graphon<T>, n: usize) -> Result<AdjacencyMatrix<T>> {
    if n == 0 {
        return Err(param("quantize_kernel needs N >= 1"));
    }
    let nf = T::from_usize_lossy(n);
    let entries = match &w.kind {
        GraphonKind::Translation(xi) => {
            let mut e = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    e.push(xi.eval(T::from_usize_lossy(i.abs_diff(j)) / nf));
                }
            }
            e
        }
        GraphonKind::Block { .. } => w.midpoint_matrix(n),
        _ => {
            return Err(param(
                "quantize_kernel supports translation and block graphons only",
            ))
        }
    };
    AdjacencyMatrix::from_entries(n, entries)
}

/// `int int |W - W~|` by midpoint quadrature on a `grid x grid` mesh.
pub fn graphon_l1_distance<T: Real>(w: &Graphon<T>, wt: &Graphon<T>, grid: usize) -> Result<T> {
    if grid == 0 {
        return Err(param("graphon_l1_distance needs grid >= 1"));
    }
    let mids = midpoints::<T>(grid);
    let mut total = T::zero();
    for &z in &mids {
        let row: T = mids
            .iter()
            .map(|&zp| (w.eval_unchecked(z, zp) - wt.eval_unchecked(z, zp)).abs())
            .sum();
        total += row;
    }
    Ok(total / T::from_usize_lossy(grid * grid))
}

/// Dyadic radii `2^-1, ..., 2^-8`.
pub fn default_radii<T: Real>() -> Vec<T> {
    (1..=8).map(|k| T::lit(0.5f64.powi(k))).collect()
}

/// `max_r r^-p int_0^1 osc_{L^1}(W, omega, r) d omega` over the supplied radii.
///
/// `osc(omega, r)` is the maximum of `||W(z, .) - W(z', .)||_{L^1}` over grid
/// midpoints `z, z'` in the closed ball of radius `r` around `omega`.
pub fn var_p_l1<T: Real>(w: &Graphon<T>, p_exp: T, z_grid: usize, radii: &[T]) -> Result<T> {
    if radii.is_empty() {
        return Err(param("var_p_l1 needs at least one radius"));
    }
    if !(p_exp > T::zero() && p_exp <= T::one()) {
        return Err(param(format!("p_exp must lie in (0, 1], got {p_exp}")));
    }
    if radii.iter().any(|&r| !(r > T::zero())) {
        return Err(param("radii must be positive"));
    }
    if z_grid < 2 {
        return Err(param("var_p_l1 needs z_grid >= 2"));
    }
    let n = z_grid;
    let table = w.midpoint_matrix(n);
    let nf = T::from_usize_lossy(n);
    // pairwise row distances
    let mut dist = vec![T::zero(); n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d: T = table[i * n..(i + 1) * n]
                .iter()
                .zip(&table[j * n..(j + 1) * n])
                .map(|(a, b)| (*a - *b).abs())
                .sum::<T>()
                / nf;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    Ok(dyadic_variation(&dist, n, p_exp, radii))
}

/// Shared driver for `var_{p,L^1}` and `var_{p,BV^1}`: `dist` is a symmetric
/// `n x n` table of pairwise distances between midpoint rows.
pub(crate) fn dyadic_variation<T: Real>(dist: &[T], n: usize, p_exp: T, radii: &[T]) -> T {
    let mids = midpoints::<T>(n);
    let nf = T::from_usize_lossy(n);
    let slack = T::lit(1e-12);
    let mut best = T::zero();
    for &r in radii {
        let mut integral = T::zero();
        for &omega in &mids {
            let lo = mids.partition_point(|&z| z < omega - r - slack);
            let hi = mids.partition_point(|&z| z <= omega + r + slack);
            integral += osc_window(dist, n, lo, hi);
        }
        let v = integral / nf / r.powf(p_exp);
        best = best.max(v);
    }
    best
}

/// Max of `dist` over the index square `[lo, hi)^2`.
pub(crate) fn osc_window<T: Real>(dist: &[T], n: usize, lo: usize, hi: usize) -> T {
    let mut m = T::zero();
    for i in lo..hi {
        for j in (i + 1)..hi {
            m = m.max(dist[i * n + j]);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clustered() -> Graphon<f64> {
        Graphon::block(vec![0.5], vec![1.0, 0.2, 0.2, 0.5]).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(clustered().eval(0.25, 0.25).unwrap(), 1.0);
        assert_eq!(clustered().eval(0.5, 0.75).unwrap(), 0.2);
        assert_eq!(clustered().eval(0.75, 0.75).unwrap(), 0.5);
        assert_eq!(Graphon::<f64>::constant(0.5).eval(0.1, 0.9).unwrap(), 0.5);
        let t = Graphon::<f64>::translation(Profile::linear(1.0));
        assert!((t.eval(0.2, 0.7).unwrap() - 0.5).abs() < 1e-15);
        assert!(t.eval(-0.1, 0.5).is_err());
        assert!(t.eval(0.1, 1.5).is_err());
    }

    #[test]
    fn block_validation() {
        assert!(Graphon::block(vec![0.5], vec![1.0, 0.2, 0.2]).is_err());
        assert!(Graphon::block(vec![0.6, 0.4], vec![0.0; 9]).is_err());
        assert!(Graphon::block(vec![1.0], vec![0.0; 4]).is_err());
    }

    #[test]
    fn step_graphon_cells() {
        let a = AdjacencyMatrix::from_entries(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let w = step_graphon_from_matrix(&a);
        assert_eq!(w.eval(0.25, 0.75).unwrap(), 0.0);
        assert_eq!(w.eval(0.25, 0.25).unwrap(), 1.0);
        // closed first cell, right-closed later cells
        assert_eq!(w.eval(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(w.eval(1.0, 1.0).unwrap(), 1.0);
        let one = AdjacencyMatrix::from_entries(1, vec![0.3]).unwrap();
        let w1 = step_graphon_from_matrix(&one);
        for (z, zp) in [(0.0, 0.0), (0.4, 0.9), (1.0, 0.2)] {
            assert_eq!(w1.eval(z, zp).unwrap(), 0.3);
        }
    }

    #[test]
    fn step_graphon_reproduces_row_sums() {
        // N^-1 A_ij = int_{I_j} W(z, .) for z in I_i
        let a = sample_er::<f64>(8, 0.5, 3).unwrap();
        let w = step_graphon_from_matrix(&a);
        let q = 64; // sub-points per cell
        for i in 0..8 {
            let z = (i as f64 + 0.3) / 8.0;
            for j in 0..8 {
                let s: f64 = (0..q)
                    .map(|m| {
                        w.eval(z, (j as f64 + (m as f64 + 0.5) / q as f64) / 8.0)
                            .unwrap()
                    })
                    .sum::<f64>()
                    / (8 * q) as f64;
                assert!((s - a.get(i, j) / 8.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn er_sampling() {
        let z = sample_er::<f64>(50, 0.0, 1).unwrap();
        assert!(z.entries().iter().all(|&v| v == 0.0));
        let o = sample_er::<f64>(50, 1.0, 1).unwrap();
        assert!(o.entries().iter().all(|&v| v == 1.0));
        assert!(sample_er::<f64>(5, 1.5, 1).is_err());
        assert!(sample_er::<f64>(5, -0.1, 1).is_err());
        assert_eq!(
            sample_er::<f64>(30, 0.4, 9).unwrap(),
            sample_er::<f64>(30, 0.4, 9).unwrap()
        );
        assert!(o.is_binary());
    }

    #[test]
    fn er_row_means_concentrate() {
        let n = 1000;
        let tol = (n as f64).powf(-1.0 / 3.0);
        for seed in 0..100 {
            let a = sample_er::<f64>(n, 0.5, seed).unwrap();
            for k in a.degrees() {
                assert!((k / n as f64 - 0.5).abs() < tol);
            }
        }
    }

    #[test]
    fn er_row_deviation_shrinks_with_n() {
        let dev = |n: usize| {
            let a = sample_er::<f64>(n, 0.5, 11).unwrap();
            a.degrees()
                .iter()
                .map(|k| (k / n as f64 - 0.5).abs())
                .fold(0.0, f64::max)
        };
        let (d1, d2, d3) = (dev(100), dev(400), dev(1600));
        assert!(d1 > d2 && d2 > d3, "{d1} {d2} {d3}");
    }

    #[test]
    fn quantize_examples() {
        let t = Graphon::<f64>::translation(Profile::linear(1.0));
        let a = quantize_kernel(&t, 4).unwrap();
        // 1-based (1, 3) -> 0-based (0, 2)
        assert!((a.get(0, 2) - 0.5).abs() < 1e-15);
        for i in 0..4 {
            assert_eq!(a.get(i, i), 1.0);
        }
        let b = quantize_kernel(&clustered(), 4).unwrap();
        assert_eq!(b.get(0, 3), 0.2);
        assert_eq!(b.get(0, 1), 1.0);
        assert_eq!(b.get(2, 3), 0.5);
        assert!(quantize_kernel(&Graphon::<f64>::constant(0.5), 4).is_err());
    }

    #[test]
    fn quantized_block_round_trips_on_midpoints() {
        let w = Graphon::block(vec![0.25, 0.5], (0..9).map(|v| v as f64 / 10.0).collect()).unwrap();
        let n = 8;
        let s = step_graphon_from_matrix(&quantize_kernel(&w, n).unwrap());
        for &z in &midpoints::<f64>(n) {
            for &zp in &midpoints::<f64>(n) {
                assert_eq!(s.eval(z, zp).unwrap(), w.eval(z, zp).unwrap());
            }
        }
    }

    #[test]
    fn row_norms() {
        assert!((Graphon::<f64>::constant(0.5).row_l1_norm(0.3, 16).unwrap() - 0.5).abs() < 1e-15);
        assert!((clustered().row_l1_norm(0.25, 64).unwrap() - 0.6).abs() < 1e-14);
        let t = Graphon::<f64>::translation(Profile::linear(1.0));
        assert!((t.row_l1_norm(0.0, 1000).unwrap() - 0.5).abs() < 1e-12);
        assert!(t.row_l1_norm(0.0, 1).is_err());
    }

    #[test]
    fn linf_bounds_dominate_quadrature() {
        let kernels = vec![
            Graphon::<f64>::constant(0.7),
            clustered(),
            Graphon::<f64>::translation(Profile::linear(1.0)),
            Graphon::<f64>::translation(Profile::exp(1.0, 3.0)),
            step_graphon_from_matrix(&sample_er::<f64>(40, 0.3, 5).unwrap()),
        ];
        for w in &kernels {
            let m = midpoints::<f64>(257)
                .into_iter()
                .map(|z| w.row_l1_norm(z, 4000).unwrap())
                .fold(0.0, f64::max);
            assert!(
                w.linf_l1_bound() >= m - 1e-6,
                "{:?}: {} < {}",
                w.kind(),
                w.linf_l1_bound(),
                m
            );
            assert!(w.linf_l1_bound() <= m + 1e-3);
        }
        assert!(
            (Graphon::<f64>::translation(Profile::linear(1.0)).linf_l1_bound() - 0.75).abs()
                < 1e-15
        );
    }

    #[test]
    fn l1_distances() {
        let a = Graphon::<f64>::constant(0.5);
        assert_eq!(graphon_l1_distance(&a, &a, 32).unwrap(), 0.0);
        let b = Graphon::<f64>::constant(0.7);
        assert!((graphon_l1_distance(&a, &b, 32).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn er_step_vs_constant_distance_matches_expectation() {
        // each cell contributes |Bernoulli - p| = 1/2 when p = 1/2
        let mut acc = 0.0;
        for seed in 0..10 {
            let s = step_graphon_from_matrix(&sample_er::<f64>(200, 0.5, seed).unwrap());
            acc += graphon_l1_distance(&s, &Graphon::<f64>::constant(0.5), 400).unwrap();
        }
        assert!((acc / 10.0 - 0.5).abs() < 1e-12);
        // p = 0.3: expectation 2 p (1 - p) = 0.42, Monte Carlo oracle
        let mut acc = 0.0;
        for seed in 0..20 {
            let s = step_graphon_from_matrix(&sample_er::<f64>(200, 0.3, seed).unwrap());
            acc += graphon_l1_distance(&s, &Graphon::<f64>::constant(0.3), 200).unwrap();
        }
        assert!((acc / 20.0 - 0.42).abs() < 2e-3);
    }

    #[test]
    fn variation_examples() {
        let radii = default_radii::<f64>();
        assert_eq!(
            var_p_l1(&Graphon::<f64>::constant(0.5), 1.0, 64, &radii).unwrap(),
            0.0
        );
        assert_eq!(
            var_p_l1(&Graphon::<f64>::constant(0.5), 0.3, 64, &radii).unwrap(),
            0.0
        );
        let v = var_p_l1(&clustered(), 1.0, 256, &radii).unwrap();
        assert!((v - 1.1).abs() < 1e-9, "{v}");
        let v2 = var_p_l1(&clustered(), 1.0, 512, &radii).unwrap();
        assert!((v2 - v).abs() / v < 0.05);
        assert!(var_p_l1(&clustered(), 1.0, 64, &[]).is_err());
        assert!(var_p_l1(&clustered(), 0.0, 64, &radii).is_err());
    }

    #[test]
    fn translation_variation_is_bounded_by_lipschitz_constant() {
        // ||W(z,.) - W(z',.)||_L1 <= L |z - z'|, and |z - z'| <= 2r in a ball
        for xi in [Profile::<f64>::linear(1.0), Profile::exp(1.0, 4.0)] {
            let w = Graphon::<f64>::translation(xi);
            let v = var_p_l1(&w, 1.0, 128, &default_radii()).unwrap();
            assert!(v.is_finite() && v > 0.0);
            assert!(v <= 2.0 * xi.lipschitz() + 1e-9, "{v}");
        }
    }
}
