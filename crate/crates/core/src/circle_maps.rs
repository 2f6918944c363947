//! Local dynamics and pairwise coupling on the circle `T = R / Z`.
//!
//! Maps are supplied as a closed-form lift together with exact derivatives,
//! so that inverse-branch solves and distortion bounds never go through an
//! interpolated surrogate.

use std::fmt;
use std::sync::Arc;

use crate::error::{param, Result, StoError};
use crate::scalar::{wrap_unit, Real};

pub type LiftFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
pub type DerivFn<T> = Arc<dyn Fn(T, u8) -> T + Send + Sync>;
pub type KernelFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;
/// `(x, y, i, j) -> d^i/dx^i d^j/dy^j h(x, y)`.
pub type PartialFn<T> = Arc<dyn Fn(T, T, u8, u8) -> T + Send + Sync>;
pub type UnaryFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Orientation-preserving expanding circle map given through its lift.
#[derive(Clone)]
pub struct ExpandingMap<T> {
    name: String,
    lift: LiftFn<T>,
    deriv: DerivFn<T>,
    degree: u32,
    min_slope: T,
    c3_bound: T,
}

impl<T: fmt::Debug> fmt::Debug for ExpandingMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExpandingMap")
            .field("name", &self.name)
            .field("degree", &self.degree)
            .field("min_slope", &self.min_slope)
            .field("c3_bound", &self.c3_bound)
            .finish()
    }
}

impl<T: Real> ExpandingMap<T> {
    /// Build a map from its lift and derivatives.
    ///
    /// `deriv(x, k)` must return the `k`-th derivative of the lift for
    /// `k = 1, 2, 3`; `min_slope` is a certified lower bound on the first
    /// derivative and must exceed one.
    pub fn new(
        name: impl Into<String>,
        degree: u32,
        min_slope: T,
        c3_bound: T,
        lift: LiftFn<T>,
        deriv: DerivFn<T>,
    ) -> Result<Self> {
        if degree < 2 {
            return Err(param(format!("degree must be >= 2, got {degree}")));
        }
        if !(min_slope > T::one()) {
            return Err(param(format!("min_slope must exceed 1, got {min_slope}")));
        }
        Ok(Self {
            name: name.into(),
            lift,
            deriv,
            degree,
            min_slope,
            c3_bound,
        })
    }

    /// `x -> d * x`.
    pub fn linear(degree: u32) -> Result<Self> {
        let d = T::lit(degree as f64);
        let name = match degree {
            2 => "doubling".to_string(),
            3 => "tripling".to_string(),
            _ => format!("linear({degree})"),
        };
        Self::new(
            name,
            degree,
            d,
            T::one() + d,
            Arc::new(move |x| d * x),
            Arc::new(move |_, k| if k == 1 { d } else { T::zero() }),
        )
    }

    /// `x -> 2x + eps * sin(2 pi x) / (2 pi)`, expanding for `|eps| < 1`.
    pub fn perturbed_doubling(eps: f64) -> Result<Self> {
        if !(eps.abs() < 1.0) {
            return Err(param(format!(
                "perturbed_doubling needs |eps| < 1, got {eps}"
            )));
        }
        let e = T::lit(eps);
        let two = T::lit(2.0);
        let tau = T::TAU();
        let ae = e.abs();
        let c3 = T::one() + (two + ae) + tau * ae + tau * tau * ae;
        Self::new(
            format!("perturbed_doubling({eps})"),
            2,
            two - ae,
            c3,
            Arc::new(move |x| two * x + e * (tau * x).sin() / tau),
            Arc::new(move |x, k| match k {
                1 => two + e * (tau * x).cos(),
                2 => -e * tau * (tau * x).sin(),
                3 => -e * tau * tau * (tau * x).cos(),
                _ => T::nan(),
            }),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn min_slope(&self) -> T {
        self.min_slope
    }

    pub fn c3_bound(&self) -> T {
        self.c3_bound
    }

    /// The lift `f^(x)` without reduction.
    #[inline]
    pub fn lift(&self, x: T) -> T {
        (self.lift)(x)
    }

    /// `f^(x) mod 1`.
    #[inline]
    pub fn eval(&self, x: T) -> T {
        wrap_unit(self.lift(x))
    }

    /// Derivative of order 1, 2 or 3.
    pub fn derivative(&self, x: T, order: u8) -> Result<T> {
        if !(1..=3).contains(&order) {
            return Err(param(format!(
                "map derivative order must be 1..=3, got {order}"
            )));
        }
        Ok((self.deriv)(x, order))
    }

    /// Unchecked derivative for hot loops; `order` must be in `1..=3`.
    #[inline]
    pub(crate) fn d(&self, x: T, order: u8) -> T {
        (self.deriv)(x, order)
    }
}

/// Biperiodic coupling `h: T x T -> R`.
#[derive(Clone)]
pub struct CouplingFunction<T> {
    name: String,
    eval: KernelFn<T>,
    partial: PartialFn<T>,
    ck_bounds: [T; 4],
    separable: Option<Vec<(UnaryFn<T>, UnaryFn<T>)>>,
}

impl<T: fmt::Debug> fmt::Debug for CouplingFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CouplingFunction")
            .field("name", &self.name)
            .field("ck_bounds", &self.ck_bounds)
            .field("separable_rank", &self.separable.as_ref().map(Vec::len))
            .finish()
    }
}

impl<T: Real> CouplingFunction<T> {
    pub fn new(
        name: impl Into<String>,
        eval: KernelFn<T>,
        partial: PartialFn<T>,
        ck_bounds: [T; 4],
    ) -> Self {
        Self {
            name: name.into(),
            eval,
            partial,
            ck_bounds,
            separable: None,
        }
    }

    /// Attach a finite-rank factorisation `h(x, y) = sum_m a_m(x) b_m(y)`.
    pub fn with_separable(mut self, terms: Vec<(UnaryFn<T>, UnaryFn<T>)>) -> Self {
        self.separable = Some(terms);
        self
    }

    /// `h == 0`.
    pub fn zero() -> Self {
        Self::new(
            "zero",
            Arc::new(|_, _| T::zero()),
            Arc::new(|_, _, _, _| T::zero()),
            [T::zero(); 4],
        )
        .with_separable(Vec::new())
    }

    /// `h1(x, y) = sin(2 pi (y - x)) / (2 pi)`.
    pub fn h1() -> Self {
        let tau = T::TAU();
        Self::new(
            "h1",
            Arc::new(move |x, y| (tau * (y - x)).sin() / tau),
            Arc::new(move |x, y, i, j| {
                // d/dx brings -tau, d/dy brings +tau, acting on sin(tau (y - x))
                let m = (i + j) as i32;
                let sign = if i % 2 == 1 { -T::one() } else { T::one() };
                sign * tau.powi(m - 1) * sin_derivative(tau * (y - x), m)
            }),
            trig_ck_bounds(),
        )
        .with_separable(vec![
            (
                Arc::new(move |x: T| (tau * x).cos() / tau) as UnaryFn<T>,
                Arc::new(move |y: T| (tau * y).sin()) as UnaryFn<T>,
            ),
            (
                Arc::new(move |x: T| -(tau * x).sin() / tau),
                Arc::new(move |y: T| (tau * y).cos()),
            ),
        ])
    }

    /// `h2(x, y) = sin(2 pi y) cos(2 pi x) / (2 pi)`.
    pub fn h2() -> Self {
        let tau = T::TAU();
        Self::new(
            "h2",
            Arc::new(move |x, y| (tau * y).sin() * (tau * x).cos() / tau),
            Arc::new(move |x, y, i, j| {
                let m = (i + j) as i32;
                tau.powi(m - 1)
                    * cos_derivative(tau * x, i as i32)
                    * sin_derivative(tau * y, j as i32)
            }),
            trig_ck_bounds(),
        )
        .with_separable(vec![(
            Arc::new(move |x: T| (tau * x).cos() / tau) as UnaryFn<T>,
            Arc::new(move |y: T| (tau * y).sin()) as UnaryFn<T>,
        )])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Catalog upper bounds for `||h||_{C^k}`, `k = 0..=3`.
    pub fn ck_bounds(&self) -> [T; 4] {
        self.ck_bounds
    }

    pub fn separable(&self) -> Option<&[(UnaryFn<T>, UnaryFn<T>)]> {
        self.separable.as_deref()
    }

    #[inline]
    pub fn eval(&self, x: T, y: T) -> T {
        (self.eval)(x, y)
    }

    /// `d^order/dx^order h(x, y)` for `order` in `0..=3`.
    pub fn d1(&self, x: T, y: T, order: u8) -> Result<T> {
        if order > 3 {
            return Err(param(format!(
                "coupling derivative order must be 0..=3, got {order}"
            )));
        }
        Ok(self.partial_unchecked(x, y, order, 0))
    }

    /// Mixed partial `d^i/dx^i d^j/dy^j h`, `i + j <= 3`.
    pub fn partial(&self, x: T, y: T, i: u8, j: u8) -> Result<T> {
        if i + j > 3 {
            return Err(param(format!("total derivative order {} exceeds 3", i + j)));
        }
        Ok(self.partial_unchecked(x, y, i, j))
    }

    #[inline]
    pub(crate) fn partial_unchecked(&self, x: T, y: T, i: u8, j: u8) -> T {
        if i == 0 && j == 0 {
            (self.eval)(x, y)
        } else {
            (self.partial)(x, y, i, j)
        }
    }
}

/// `d^m/dt^m sin(t)`.
fn sin_derivative<T: Real>(t: T, m: i32) -> T {
    match m.rem_euclid(4) {
        0 => t.sin(),
        1 => t.cos(),
        2 => -t.sin(),
        _ => -t.cos(),
    }
}

/// `d^m/dt^m cos(t)`.
fn cos_derivative<T: Real>(t: T, m: i32) -> T {
    sin_derivative(t, m + 1)
}

/// Bounds for couplings whose order-`m` partials have sup `(2 pi)^(m-1)`.
fn trig_ck_bounds<T: Real>() -> [T; 4] {
    let tau = T::TAU();
    let mut out = [T::zero(); 4];
    let mut acc = T::zero();
    for (m, slot) in out.iter_mut().enumerate() {
        acc += T::lit((m + 1) as f64) * tau.powi(m as i32 - 1);
        *slot = acc;
    }
    out
}

const CK_BASE_GRID: usize = 512;
const CK_MAX_GRID: usize = 4096;

/// Gridded `C^k` norm: sum over all partials of total order `<= k` of their
/// sup modulus on an `n x n` grid, refined until two successive grids agree
/// to `1e-6`.
pub fn ck_norm<T: Real>(h: &CouplingFunction<T>, k: u8) -> Result<T> {
    if k > 3 {
        return Err(param(format!("ck_norm order must be 0..=3, got {k}")));
    }
    let mut n = CK_BASE_GRID;
    let mut prev = ck_norm_on_grid(h, k, n);
    while n < CK_MAX_GRID {
        n *= 2;
        let next = ck_norm_on_grid(h, k, n);
        if (next - prev).abs() < T::lit(1e-6) {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

fn ck_norm_on_grid<T: Real>(h: &CouplingFunction<T>, k: u8, n: usize) -> T {
    let step = T::one() / T::from_usize_lossy(n);
    let mut total = T::zero();
    for order in 0..=k {
        for i in 0..=order {
            let j = order - i;
            let mut sup = T::zero();
            for a in 0..n {
                let x = T::from_usize_lossy(a) * step;
                for b in 0..n {
                    let y = T::from_usize_lossy(b) * step;
                    sup = sup.max(h.partial_unchecked(x, y, i, j).abs());
                }
            }
            total += sup;
        }
    }
    total
}

/// Gridded `||f||_{C^3}` of a circle map, with `sup |f| <= 1` for the
/// circle-valued map.
pub fn map_c3_norm<T: Real>(f: &ExpandingMap<T>, n: usize) -> T {
    let step = T::one() / T::from_usize_lossy(n);
    let mut sups = [T::zero(); 3];
    for a in 0..n {
        let x = T::from_usize_lossy(a) * step;
        for (o, s) in sups.iter_mut().enumerate() {
            *s = s.max(f.d(x, o as u8 + 1).abs());
        }
    }
    T::one() + sups.iter().copied().sum::<T>()
}

/// Named catalog of built-in maps and couplings.
pub mod catalog {
    use super::*;

    pub const MAP_NAMES: &[&str] = &["doubling", "tripling", "perturbed_doubling"];
    pub const COUPLING_NAMES: &[&str] = &["h1", "h2", "zero"];

    /// Resolve a map name. `perturbed_doubling` takes its parameter either
    /// inline (`perturbed_doubling(0.3)`) or through `eps`.
    pub fn map<T: Real>(name: &str, eps: Option<f64>) -> Result<ExpandingMap<T>> {
        let name = name.trim();
        let (base, inline) = split_call(name)?;
        match base {
            "doubling" => ExpandingMap::linear(2),
            "tripling" => ExpandingMap::linear(3),
            "perturbed_doubling" => {
                let e = inline.or(eps).ok_or_else(|| {
                    param("perturbed_doubling requires a parameter (map_eps)".to_string())
                })?;
                ExpandingMap::perturbed_doubling(e)
            }
            _ => Err(StoError::Lookup {
                kind: "map",
                name: name.to_string(),
            }),
        }
    }

    pub fn coupling<T: Real>(name: &str) -> Result<CouplingFunction<T>> {
        match name.trim() {
            "h1" => Ok(CouplingFunction::h1()),
            "h2" => Ok(CouplingFunction::h2()),
            "zero" => Ok(CouplingFunction::zero()),
            other => Err(StoError::Lookup {
                kind: "coupling",
                name: other.to_string(),
            }),
        }
    }

    /// Every built-in entry with default parameters.
    pub fn builtin_library<T: Real>() -> (Vec<ExpandingMap<T>>, Vec<CouplingFunction<T>>) {
        let maps = vec![
            ExpandingMap::linear(2).expect("doubling"),
            ExpandingMap::linear(3).expect("tripling"),
            ExpandingMap::perturbed_doubling(0.3).expect("perturbed doubling"),
        ];
        let couplings = vec![
            CouplingFunction::h1(),
            CouplingFunction::h2(),
            CouplingFunction::zero(),
        ];
        (maps, couplings)
    }

    fn split_call(name: &str) -> Result<(&str, Option<f64>)> {
        match name.find('(') {
            None => Ok((name, None)),
            Some(open) => {
                let close = name
                    .rfind(')')
                    .filter(|&c| c > open)
                    .ok_or_else(|| param(format!("malformed map name `{name}`")))?;
                let arg = name[open + 1..close].trim();
                let v: f64 = arg
                    .parse()
                    .map_err(|_| param(format!("bad map parameter `{arg}`")))?;
                Ok((name[..open].trim(), Some(v)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn doubling_values() {
        let f = ExpandingMap::<f64>::linear(2).unwrap();
        assert_eq!(f.eval(0.75), 0.5);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.derivative(0.3, 1).unwrap(), 2.0);
        assert_eq!(f.derivative(0.3, 2).unwrap(), 0.0);
        assert!(f.derivative(0.3, 4).is_err());
        assert!(f.derivative(0.3, 0).is_err());
    }

    #[test]
    fn perturbed_doubling_values() {
        let f = ExpandingMap::<f64>::perturbed_doubling(0.3).unwrap();
        // direct arithmetic: 0.5 + 0.3 * sin(pi/2) / (2 pi)
        let expected = 0.5 + 0.3 / TAU;
        assert!((f.eval(0.25) - expected).abs() < 1e-15);
        assert!((f.derivative(0.0, 1).unwrap() - 2.3).abs() < 1e-15);
        assert!((f.min_slope() - 1.7).abs() < 1e-15);
        assert!(ExpandingMap::<f64>::perturbed_doubling(1.0).is_err());
    }

    #[test]
    fn catalog_maps_are_periodic_and_expanding() {
        let (maps, _) = catalog::builtin_library::<f64>();
        let n = 10_000;
        for f in &maps {
            let d = f.degree() as f64;
            for a in 0..n {
                let x = a as f64 / n as f64;
                assert!(
                    (f.lift(x + 1.0) - f.lift(x) - d).abs() < 1e-12,
                    "{}",
                    f.name()
                );
                assert!(f.derivative(x, 1).unwrap() >= f.min_slope() - 1e-15);
            }
            assert!(map_c3_norm(f, 4096) <= f.c3_bound() + 1e-12);
        }
    }

    fn fd_error(f: &ExpandingMap<f64>, dx: f64) -> f64 {
        (0..200)
            .map(|a| {
                let x = a as f64 / 200.0 + 0.0013;
                let fd = (f.lift(x + dx) - f.lift(x - dx)) / (2.0 * dx);
                (fd - f.derivative(x, 1).unwrap()).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn derivative_matches_central_differences_at_second_order() {
        let f = ExpandingMap::<f64>::perturbed_doubling(0.3).unwrap();
        let e1 = fd_error(&f, 1e-2);
        let e2 = fd_error(&f, 5e-3);
        assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn coupling_h1_values() {
        let h = CouplingFunction::<f64>::h1();
        assert!(h.d1(0.3, 0.3, 0).unwrap().abs() < 1e-16);
        assert!((h.d1(0.3, 0.3, 1).unwrap() + 1.0).abs() < 1e-15);
        assert!((h.d1(0.0, 0.25, 0).unwrap() - 1.0 / TAU).abs() < 1e-15);
        assert!(h.d1(0.0, 0.0, 4).is_err());
    }

    #[test]
    fn coupling_partials_match_finite_differences() {
        for h in [CouplingFunction::<f64>::h1(), CouplingFunction::<f64>::h2()] {
            let dx = 1e-5;
            for (x, y) in [(0.1, 0.7), (0.33, 0.2), (0.9, 0.45)] {
                for i in 0..3u8 {
                    for j in 0..(3 - i) {
                        let gx = (h.partial(x + dx, y, i, j).unwrap()
                            - h.partial(x - dx, y, i, j).unwrap())
                            / (2.0 * dx);
                        let gy = (h.partial(x, y + dx, i, j).unwrap()
                            - h.partial(x, y - dx, i, j).unwrap())
                            / (2.0 * dx);
                        assert!((gx - h.partial(x, y, i + 1, j).unwrap()).abs() < 1e-6);
                        assert!((gy - h.partial(x, y, i, j + 1).unwrap()).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn couplings_are_biperiodic() {
        for h in [CouplingFunction::<f64>::h1(), CouplingFunction::<f64>::h2()] {
            for a in 0..50 {
                for b in 0..50 {
                    let (x, y) = (a as f64 / 50.0, b as f64 / 50.0);
                    assert!((h.eval(x + 1.0, y) - h.eval(x, y)).abs() < 1e-12);
                    assert!((h.eval(x, y + 1.0) - h.eval(x, y)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn separable_factorisation_matches_kernel() {
        for h in [CouplingFunction::<f64>::h1(), CouplingFunction::<f64>::h2()] {
            let terms = h.separable().unwrap();
            for (x, y) in [(0.1, 0.7), (0.33, 0.2), (0.9, 0.45)] {
                let s: f64 = terms.iter().map(|(a, b)| a(x) * b(y)).sum();
                assert!((s - h.eval(x, y)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ck_norm_values_and_monotonicity() {
        let h = CouplingFunction::<f64>::h1();
        let c0 = ck_norm(&h, 0).unwrap();
        let c1 = ck_norm(&h, 1).unwrap();
        assert!((c0 - 1.0 / (2.0 * PI)).abs() < 1e-6);
        assert!((c1 - (1.0 / (2.0 * PI) + 2.0)).abs() < 1e-6);
        assert!((c1 - 2.1592).abs() < 1e-4);
        let mut prev = 0.0;
        for k in 0..=3 {
            let c = ck_norm(&h, k).unwrap();
            assert!(c >= prev);
            assert!(c <= h.ck_bounds()[k as usize] + 1e-9);
            prev = c;
        }
        let z = CouplingFunction::<f64>::zero();
        for k in 0..=3 {
            assert_eq!(ck_norm(&z, k).unwrap(), 0.0);
        }
        assert!(ck_norm(&h, 4).is_err());
    }

    #[test]
    fn catalog_lookup() {
        let f = catalog::map::<f64>("doubling", None).unwrap();
        assert_eq!(f.degree(), 2);
        assert_eq!(f.min_slope(), 2.0);
        let p = catalog::map::<f64>("perturbed_doubling(0.3)", None).unwrap();
        assert!((p.min_slope() - 1.7).abs() < 1e-15);
        let p2 = catalog::map::<f64>("perturbed_doubling", Some(0.3)).unwrap();
        assert!((p2.min_slope() - 1.7).abs() < 1e-15);
        assert!(catalog::map::<f64>("perturbed_doubling", None).is_err());
        assert!(matches!(
            catalog::map::<f64>("logistic", None),
            Err(StoError::Lookup { .. })
        ));
        let h = catalog::coupling::<f64>("h1").unwrap();
        assert!((h.ck_bounds()[1] - 2.1592).abs() < 1e-4);
        assert!(catalog::coupling::<f64>("h9").is_err());
    }

    #[test]
    fn f32_maps_work() {
        let f = ExpandingMap::<f32>::perturbed_doubling(0.3).unwrap();
        assert!((f.derivative(0.0, 1).unwrap() - 2.3).abs() < 1e-6);
    }
}
