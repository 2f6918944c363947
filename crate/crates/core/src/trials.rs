//! Grid-independent random inputs for randomized audits.
//!
//! A [`RandomProfile`] is a short trigonometric series in `x` whose
//! coefficients are affine in `z`, so the same draw can be rendered on any
//! grid and compared across refinements.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densities::SignedCircleFunction;
use crate::error::{param, Result};
use crate::fibered::FiberedDensity;
use crate::graphon::{Graphon, GraphonKind, Profile};
use crate::scalar::Real;

/// `sum_k (a_k + b_k z) cos(2 pi k x) + (c_k + d_k z) sin(2 pi k x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomProfile {
    /// `[a, b, c, d]` for modes `k = 1..`.
    pub modes: Vec<[f64; 4]>,
}

impl RandomProfile {
    /// Draw `max_mode` modes and scale so that the sup of the series over
    /// `[0,1]^2` is at most `amplitude`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, max_mode: usize, amplitude: f64) -> Result<Self> {
        if max_mode == 0 || !(amplitude >= 0.0) {
            return Err(param(
                "random profile needs at least one mode and amplitude >= 0",
            ));
        }
        let mut modes: Vec<[f64; 4]> = (0..max_mode)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let bound: f64 = modes
            .iter()
            .map(|[a, b, c, d]| a.abs().max((a + b).abs()) + c.abs().max((c + d).abs()))
            .sum();
        let s = if bound > 0.0 { amplitude / bound } else { 0.0 };
        for m in &mut modes {
            m.iter_mut().for_each(|v| *v *= s);
        }
        Ok(Self { modes })
    }

    /// Zero-mean series value.
    pub fn eval(&self, z: f64, x: f64) -> f64 {
        self.modes
            .iter()
            .enumerate()
            .map(|(i, [a, b, c, d])| {
                let t = TAU * (i + 1) as f64 * x;
                (a + b * z) * t.cos() + (c + d * z) * t.sin()
            })
            .sum()
    }

    /// The density `1 + series`, positive whenever `amplitude < 1`.
    pub fn density<T: Real>(&self, nz: usize, nx: usize) -> Result<FiberedDensity<T>> {
        FiberedDensity::from_profile(nz, nx, |z: T, x: T| {
            T::lit(1.0 + self.eval(z.as_f64(), x.as_f64()))
        })
    }

    /// The zero-mean series on fiber `z`.
    pub fn zero_mean<T: Real>(&self, z: f64, nx: usize) -> Result<SignedCircleFunction<T>> {
        SignedCircleFunction::from_fn(nx, |x: T| T::lit(self.eval(z, x.as_f64())))
    }
}

/// Multiply every parameter of `w` by an independent factor in
/// `[1 - rel, 1 + rel]`, keeping the graphon's family.
pub fn perturb_graphon<T: Real, R: Rng + ?Sized>(
    w: &Graphon<T>,
    rng: &mut R,
    rel: f64,
) -> Result<Graphon<T>> {
    let mut jitter = || T::lit(1.0 + rng.random_range(-rel..=rel));
    match w.kind() {
        GraphonKind::Constant(p) => Ok(Graphon::constant(*p * jitter())),
        GraphonKind::Block { cuts, values } => {
            let k = cuts.len() + 1;
            let mut v = values.clone();
            for i in 0..k {
                for j in i..k {
                    let s = jitter();
                    v[i * k + j] = values[i * k + j] * s;
                    v[j * k + i] = values[j * k + i] * s;
                }
            }
            Graphon::block(cuts.clone(), v)
        }
        GraphonKind::Translation(p) => Ok(Graphon::translation(Profile {
            amplitude: p.amplitude * jitter(),
            ..*p
        })),
        _ => Err(param("perturb_graphon: unsupported graphon family")),
    }
}
