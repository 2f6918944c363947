use std::f64::consts::TAU;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use sto_core::circle_maps::{CouplingFunction, ExpandingMap};
use sto_core::fibered::{weak_norm_distance, FiberedDensity};
use sto_core::graphon::Graphon;
use sto_core::sto::{alpha_hat, fixed_point, StoModel};

fn certified_alpha(fraction: f64, w: &Graphon<f64>) -> f64 {
    let f = ExpandingMap::<f64>::perturbed_doubling(0.3).unwrap();
    let a = alpha_hat(&f, &CouplingFunction::h1()).unwrap().unwrap();
    fraction * a / w.linf_l1_bound()
}

#[test]
fn uncoupled_doubling_halves_frequencies() {
    // L cos(2 pi 2k x) = cos(2 pi k x) under x -> 2x
    let m = StoModel::new(
        ExpandingMap::linear(2).unwrap(),
        CouplingFunction::h1(),
        Graphon::constant(1.0),
        0.0,
        3,
        256,
    )
    .unwrap();
    let phi = FiberedDensity::from_profile(3, 256, |z: f64, x: f64| {
        1.0 + 0.4 * (2.0 * TAU * x).cos() + 0.3 * z * (4.0 * TAU * x).sin()
    })
    .unwrap();
    let (next, stats) = m.step(&phi).unwrap();
    for k in 0..3 {
        let z = (k as f64 + 0.5) / 3.0;
        for (j, &v) in next.row(k).iter().enumerate() {
            let x = j as f64 / 256.0;
            let want = 1.0 + 0.4 * (TAU * x).cos() + 0.3 * z * (2.0 * TAU * x).sin();
            assert_abs_diff_eq!(v, want, epsilon = 1e-5);
        }
    }
    assert_abs_diff_eq!(stats.min_xi, 2.0, epsilon = 1e-12);
}

#[test]
fn single_precision_tracks_double() {
    let w64 = Graphon::block(vec![0.5], vec![1.0, 0.2, 0.2, 0.5]).unwrap();
    let w32 = Graphon::block(vec![0.5f32], vec![1.0, 0.2, 0.2, 0.5]).unwrap();
    let alpha = certified_alpha(0.5, &w64);
    let profile = |z: f64, x: f64| 1.0 + 0.5 * (TAU * (x + z)).sin();
    let m64 = StoModel::new(
        ExpandingMap::perturbed_doubling(0.3).unwrap(),
        CouplingFunction::h1(),
        w64,
        alpha,
        8,
        64,
    )
    .unwrap();
    let m32 = StoModel::new(
        ExpandingMap::<f32>::perturbed_doubling(0.3).unwrap(),
        CouplingFunction::h1(),
        w32,
        alpha as f32,
        8,
        64,
    )
    .unwrap();
    let (p64, r64) = fixed_point(
        &m64,
        &FiberedDensity::from_profile(8, 64, profile).unwrap(),
        1e-12,
        200,
    )
    .unwrap();
    let init32 =
        FiberedDensity::from_profile(8, 64, |z: f32, x: f32| profile(z as f64, x as f64) as f32)
            .unwrap();
    let (p32, r32) = fixed_point(&m32, &init32, 1e-5, 200).unwrap();
    assert!(r64.converged && r32.converged);
    for (a, b) in p64.data().iter().zip(p32.data()) {
        assert_abs_diff_eq!(*a, *b as f64, epsilon = 1e-4);
    }
}

#[test]
fn fixed_point_is_stationary_and_start_independent() {
    let w = Graphon::constant(0.5);
    let m = StoModel::new(
        ExpandingMap::perturbed_doubling(0.3).unwrap(),
        CouplingFunction::h1(),
        w.clone(),
        certified_alpha(0.5, &w),
        8,
        128,
    )
    .unwrap();
    let a = FiberedDensity::from_profile(8, 128, |_, x: f64| 1.0 + 0.8 * (TAU * x).cos()).unwrap();
    let b = FiberedDensity::from_profile(8, 128, |z: f64, x: f64| {
        (-(x - z).powi(2) * 8.0).exp() + 0.1
    })
    .unwrap();
    let (pa, ra) = fixed_point(&m, &a, 1e-11, 300).unwrap();
    let (pb, _) = fixed_point(&m, &b, 1e-11, 300).unwrap();
    assert!(ra.converged);
    assert!(weak_norm_distance(&pa, &pb).unwrap() < 5e-11);
    let (next, _) = m.step(&pa).unwrap();
    assert!(weak_norm_distance(&next, &pa).unwrap() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn step_preserves_unit_mass_and_positivity(
        amp in 0.0f64..0.95,
        phase in 0.0f64..1.0,
        tilt in -0.5f64..0.5,
        fraction in 0.0f64..0.95,
    ) {
        let w = Graphon::translation(sto_core::graphon::Profile::linear(1.0));
        let m = StoModel::new(
            ExpandingMap::perturbed_doubling(0.3).unwrap(),
            CouplingFunction::h1(),
            w.clone(),
            certified_alpha(fraction, &w),
            4,
            64,
        )
        .unwrap();
        let phi = FiberedDensity::from_profile(4, 64, |z: f64, x: f64| {
            1.0 + amp * (TAU * (x + phase + tilt * z)).sin()
        })
        .unwrap();
        let (next, stats) = m.step(&phi).unwrap();
        prop_assert!(stats.min_xi > 1.0);
        for k in 0..4 {
            let row = next.row(k);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            let mass = row.iter().sum::<f64>() / 64.0;
            prop_assert!((mass - 1.0).abs() < 1e-12);
        }
    }
}
