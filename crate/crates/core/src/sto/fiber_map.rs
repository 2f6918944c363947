use crate::circle_maps::{ck_norm, CouplingFunction, ExpandingMap};
use crate::error::{domain, param, Result, StoError};
use crate::scalar::{wrap_unit, Real};

use super::MeanFieldTable;

/// Fine-grid subdivisions per cell used for the `xi` and distortion sweeps.
const FINE: usize = 8;

/// The fiber map `F(x) = f(x) + alpha * M_k(x)` on a single fiber, with the
/// mean-field row interpolated by cubic Hermite splines through `(M, M_x)`.
#[derive(Clone, Debug)]
pub struct FiberMapRealization<T> {
    f: ExpandingMap<T>,
    alpha: T,
    fiber: usize,
    m: Vec<T>,
    mx: Vec<T>,
    /// Exact node curvature from the table, when available.
    mxx: Option<Vec<T>>,
    xi: T,
    distortion: T,
}

impl<T: Real> FiberMapRealization<T> {
    /// Realization from explicit mean-field values and slopes at the nodes.
    pub fn from_row(
        f: ExpandingMap<T>,
        alpha: T,
        fiber: usize,
        m: Vec<T>,
        mx: Vec<T>,
    ) -> Result<Self> {
        if m.len() != mx.len() || m.len() < 2 {
            return Err(param(
                "mean-field row and slope must share a grid of at least 2 nodes",
            ));
        }
        if !alpha.is_finite() {
            return Err(param("alpha must be finite"));
        }
        let mut r = Self {
            f,
            alpha,
            fiber,
            m,
            mx,
            mxx: None,
            xi: T::zero(),
            distortion: T::zero(),
        };
        r.certify();
        Ok(r)
    }

    fn certify(&mut self) {
        let nx = self.m.len();
        let fine = T::from_usize_lossy(FINE);
        let mut xi = T::infinity();
        let mut dist = T::zero();
        for j in 0..nx {
            for s in 0..=FINE {
                let t = T::from_usize_lossy(s) / fine;
                let x = (T::from_usize_lossy(j) + t) / T::from_usize_lossy(nx);
                let d1 = self.f.d(x, 1) + self.alpha * self.hermite(j, t, 1);
                let d2 = self.f.d(x, 2) + self.alpha * self.hermite(j, t, 2);
                xi = xi.min(d1);
                if d1 > T::zero() {
                    dist = dist.max(d2.abs() / (d1 * d1));
                } else {
                    dist = T::infinity();
                }
            }
        }
        self.xi = xi;
        self.distortion = dist;
    }

    pub fn nx(&self) -> usize {
        self.m.len()
    }

    /// `i`-th derivative of `F` at node `j` (the lift for `i = 0`), using the
    /// tabulated curvature for `i = 2` when present.
    pub fn node_derivative(&self, j: usize, order: u8) -> T {
        let x = T::from_usize_lossy(j) / T::from_usize_lossy(self.m.len());
        let mean = match (order, &self.mxx) {
            (0, _) => self.m[j],
            (1, _) => self.mx[j],
            (_, Some(c)) => c[j],
            (_, None) => self.hermite(j, T::zero(), 2),
        };
        let base = if order == 0 {
            self.f.lift(x)
        } else {
            self.f.d(x, order.min(2))
        };
        base + self.alpha * mean
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn base_map(&self) -> &ExpandingMap<T> {
        &self.f
    }

    pub fn degree(&self) -> u32 {
        self.f.degree()
    }

    /// Grid lower bound of `F'`.
    pub fn min_slope(&self) -> T {
        self.xi
    }

    /// Grid sup of `|F''| / F'^2` (one-sided at nodes).
    pub fn distortion(&self) -> T {
        self.distortion
    }

    pub fn is_expanding(&self) -> bool {
        self.xi > T::one()
    }

    /// Value, first or second derivative of the Hermite interpolant on cell `j`
    /// at local coordinate `t in [0, 1]`.
    #[inline]
    fn hermite(&self, j: usize, t: T, order: u8) -> T {
        let n = self.m.len();
        let h = T::one() / T::from_usize_lossy(n);
        let k = (j + 1) % n;
        let (p0, p1) = (self.m[j], self.m[k]);
        let (m0, m1) = (self.mx[j] * h, self.mx[k] * h);
        let (t2, t3) = (t * t, t * t * t);
        let c = T::lit;
        match order {
            0 => {
                (c(2.0) * t3 - c(3.0) * t2 + T::one()) * p0
                    + (t3 - c(2.0) * t2 + t) * m0
                    + (c(3.0) * t2 - c(2.0) * t3) * p1
                    + (t3 - t2) * m1
            }
            1 => {
                ((c(6.0) * t2 - c(6.0) * t) * (p0 - p1)
                    + (c(3.0) * t2 - c(4.0) * t + T::one()) * m0
                    + (c(3.0) * t2 - c(2.0) * t) * m1)
                    / h
            }
            _ => {
                ((c(12.0) * t - c(6.0)) * (p0 - p1)
                    + (c(6.0) * t - c(4.0)) * m0
                    + (c(6.0) * t - c(2.0)) * m1)
                    / (h * h)
            }
        }
    }

    #[inline]
    fn locate(&self, x: T) -> (usize, T) {
        let n = self.m.len();
        let s = wrap_unit(x) * T::from_usize_lossy(n);
        let i = s.floor();
        let j = i.to_usize().unwrap_or(0).min(n - 1);
        (j, s - T::from_usize_lossy(j))
    }

    /// Interpolated mean-field term `M_k(x)` (or a derivative).
    pub fn mean_field_at(&self, x: T, order: u8) -> T {
        let (j, t) = self.locate(x);
        self.hermite(j, t, order)
    }

    /// Lift `F^(x)` on the real line.
    #[inline]
    pub fn lift(&self, x: T) -> T {
        self.f.lift(x) + self.alpha * self.mean_field_at(x, 0)
    }

    pub fn eval(&self, x: T) -> T {
        wrap_unit(self.lift(x))
    }

    #[inline]
    pub fn derivative(&self, x: T) -> T {
        self.f.d(x, 1) + self.alpha * self.mean_field_at(x, 1)
    }

    pub fn second_derivative(&self, x: T) -> T {
        self.f.d(x, 2) + self.alpha * self.mean_field_at(x, 2)
    }

    /// Solve `F^(y) = t` for `y in [0, 1]` given `F^(0) <= t <= F^(1)`.
    /// Newton on the monotone lift, safeguarded by the bisection bracket.
    pub(crate) fn solve_lift(&self, t: T, guess: T) -> Result<T> {
        let tol = T::root_tol();
        let (mut lo, mut hi) = (T::zero(), T::one());
        let mut y = guess.max(lo).min(hi);
        for _ in 0..100 {
            let g = self.lift(y) - t;
            if g.abs() < tol {
                return Ok(y);
            }
            if g < T::zero() {
                lo = y;
            } else {
                hi = y;
            }
            let d = self.derivative(y);
            let newton = y - g / d;
            y = if d > T::zero() && newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) * T::lit(0.5)
            };
            if hi - lo <= T::epsilon() {
                return Ok(y);
            }
        }
        Err(StoError::Numeric(format!(
            "inverse branch for target {t} did not converge in 100 iterations"
        )))
    }

    /// Preimages of `x` written into `out` (length `degree`), in increasing
    /// order on `[0, 1)`. Requires only monotonicity of the lift.
    pub(crate) fn preimages_into(&self, x: T, f0: T, out: &mut [T]) -> Result<()> {
        let d = self.f.degree() as usize;
        let df = T::from_usize_lossy(d);
        let x = wrap_unit(x);
        // first target x + n >= F^(0)
        let n0 = (f0 - x).ceil();
        for (b, slot) in out.iter_mut().enumerate().take(d) {
            let t = x + n0 + T::from_usize_lossy(b);
            let guess = (t - f0) / df;
            let y = self.solve_lift(t, guess)?;
            *slot = if y >= T::one() { y - T::one() } else { y };
        }
        out[..d].sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        Ok(())
    }
}

/// `F_{nu, z_k}` for fiber `k` of the mean-field table.
pub fn realize_fiber_map<T: Real>(
    f: &ExpandingMap<T>,
    alpha: T,
    table: &MeanFieldTable<T>,
    k: usize,
) -> Result<FiberMapRealization<T>> {
    if k >= table.nz() {
        return Err(param(format!(
            "fiber index {k} out of range (nz = {})",
            table.nz()
        )));
    }
    let mut r = FiberMapRealization::from_row(
        f.clone(),
        alpha,
        k,
        table.row(k, 0).to_vec(),
        table.row(k, 1).to_vec(),
    )?;
    r.mxx = Some(table.row(k, 2).to_vec());
    Ok(r)
}

/// The `d` preimages of `x` under `F`, sorted in `[0, 1)`.
pub fn inverse_branches<T: Real>(map: &FiberMapRealization<T>, x: T) -> Result<Vec<T>> {
    if !map.is_expanding() {
        return Err(domain(format!(
            "fiber {} is not expanding (min slope {})",
            map.fiber, map.xi
        )));
    }
    let mut out = vec![T::zero(); map.degree() as usize];
    map.preimages_into(x, map.lift(T::zero()), &mut out)?;
    Ok(out)
}

/// `(min_slope(f) - 1) / ||h||_{C^1}`; `None` when `h` vanishes identically.
pub fn alpha_hat<T: Real>(f: &ExpandingMap<T>, h: &CouplingFunction<T>) -> Result<Option<T>> {
    let c1 = ck_norm(h, 1)?;
    if c1 == T::zero() {
        return Ok(None);
    }
    Ok(Some((f.min_slope() - T::one()) / c1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fibered::{FiberedDensity, ProfileSpec};
    use crate::graphon::Graphon;
    use crate::sto::mean_field;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{PI, TAU};

    fn flat(f: ExpandingMap<f64>, nx: usize) -> FiberMapRealization<f64> {
        FiberMapRealization::from_row(f, 0.0, 0, vec![0.0; nx], vec![0.0; nx]).unwrap()
    }

    #[test]
    fn alpha_hat_examples() {
        let h1 = CouplingFunction::h1();
        let a = alpha_hat(&ExpandingMap::<f64>::linear(2).unwrap(), &h1)
            .unwrap()
            .unwrap();
        assert!((a - 1.0 / (1.0 + 1.0 / TAU + 1.0)).abs() < 1e-6);
        assert!((a - 0.4631).abs() < 1e-4);
        let b = alpha_hat(&ExpandingMap::<f64>::linear(3).unwrap(), &h1)
            .unwrap()
            .unwrap();
        assert!((b - 0.9263).abs() < 1e-4);
        assert!(alpha_hat(
            &ExpandingMap::<f64>::linear(2).unwrap(),
            &CouplingFunction::zero()
        )
        .unwrap()
        .is_none());
    }

    #[test]
    fn zero_alpha_recovers_base_map() {
        let f = ExpandingMap::<f64>::perturbed_doubling(0.3).unwrap();
        let r = flat(f.clone(), 64);
        assert!((r.min_slope() - 1.7).abs() < 1e-12);
        for i in 0..50 {
            let x = i as f64 / 50.0 + 0.003;
            assert_eq!(r.lift(x), f.lift(x));
        }
    }

    #[test]
    fn hermite_reproduces_cubic_data_and_lift_property() {
        let nx = 64;
        let xs: Vec<f64> = (0..nx).map(|j| j as f64 / nx as f64).collect();
        let m: Vec<f64> = xs.iter().map(|x| (TAU * x).cos()).collect();
        let mx: Vec<f64> = xs.iter().map(|x| -TAU * (TAU * x).sin()).collect();
        let f = ExpandingMap::<f64>::linear(2).unwrap();
        let r = FiberMapRealization::from_row(f, 0.1, 0, m, mx).unwrap();
        for i in 0..200 {
            let x = i as f64 / 200.0 + 1e-3;
            assert!((r.mean_field_at(x, 0) - (TAU * x).cos()).abs() < 1e-6);
            assert!((r.mean_field_at(x, 1) + TAU * (TAU * x).sin()).abs() < 5e-3);
            assert!((r.lift(x + 1.0) - r.lift(x) - 2.0).abs() < 1e-10);
        }
        // xi bound: 2 - 0.1 * 2 pi
        assert!(r.min_slope() >= 2.0 - 0.1 * TAU - 1e-9);
        assert!(r.distortion().is_finite());
    }

    #[test]
    fn realized_from_sinusoidal_mean_field_keeps_expansion() {
        let phi = FiberedDensity::<f64>::from_spec(
            4,
            128,
            &ProfileSpec::Sinusoid {
                amplitude: 0.5,
                phase: 0.0,
            },
        )
        .unwrap();
        let t = mean_field(&Graphon::constant(1.0), &CouplingFunction::h1(), &phi).unwrap();
        let f = ExpandingMap::linear(2).unwrap();
        let r = realize_fiber_map(&f, 0.2, &t, 1).unwrap();
        let sup_mx = 2.0 * PI / (8.0 * PI);
        assert!(r.min_slope() >= 2.0 - 0.2 * sup_mx - 1e-9);
        assert!(r.is_expanding());
        assert!(realize_fiber_map(&f, 0.2, &t, 4).is_err());
    }

    #[test]
    fn doubling_preimages() {
        let r = flat(ExpandingMap::linear(2).unwrap(), 16);
        let p = inverse_branches(&r, 0.5).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
        let p = inverse_branches(&r, 0.0).unwrap();
        assert!(p[0].abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn round_trip_on_perturbed_coupled_map() {
        let nx = 64;
        let xs: Vec<f64> = (0..nx).map(|j| j as f64 / nx as f64).collect();
        let m: Vec<f64> = xs.iter().map(|x| 0.1 * (TAU * (x - 0.2)).sin()).collect();
        let mx: Vec<f64> = xs
            .iter()
            .map(|x| 0.1 * TAU * (TAU * (x - 0.2)).cos())
            .collect();
        let f = ExpandingMap::<f64>::perturbed_doubling(0.3).unwrap();
        let r = FiberMapRealization::from_row(f, 0.4, 0, m, mx).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x: f64 = rng.random();
            let ys = inverse_branches(&r, x).unwrap();
            assert_eq!(ys.len(), 2);
            assert!(ys[0] < ys[1]);
            for y in ys {
                let back = r.eval(y);
                let err = (back - x).abs().min(1.0 - (back - x).abs());
                assert!(err < 1e-10, "x={x} y={y} back={back}");
            }
        }
    }

    #[test]
    fn non_expanding_realization_is_rejected_for_inversion() {
        let f = ExpandingMap::<f64>::linear(2).unwrap();
        let r = FiberMapRealization::from_row(f, -1.2, 0, vec![0.0; 4], vec![1.0; 4]).unwrap();
        assert!(!r.is_expanding());
        assert!(matches!(
            inverse_branches(&r, 0.3),
            Err(StoError::Domain(_))
        ));
    }
}
