mod common;

use lambkit::dispersion::{
    curves_to_csv, family_roots, frequency_at_pitch, mode_frequency, solve_mode, LambMode, PlateMaterial, PlateSpec, Symmetry,
};
use lambkit::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn random_plate(rng: &mut ChaCha8Rng) -> PlateSpec {
    let v_l = rng.random_range(4000.0..12000.0);
    let v_t = v_l * rng.random_range(0.3..0.65);
    let h = rng.random_range(50e-9..3e-6);
    PlateSpec::new(PlateMaterial::new("r", 3000.0, v_l, v_t).unwrap(), h).unwrap()
}

#[test]
fn matches_the_complex_form_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for case in 0..20 {
        let plate = random_plate(&mut rng);
        let k = rng.random_range(0.1..8.0) / plate.h;
        for (sym, is_s) in [(Symmetry::Symmetric, true), (Symmetry::Antisymmetric, false)] {
            let got = family_roots(&plate, sym, k, 2).unwrap();
            let want = common::oracle_roots(plate.material.v_l, plate.material.v_t, plate.h, k, is_s, 2);
            assert_eq!(got.len(), want.len(), "case {case} {sym:?}");
            for (g, w) in got.iter().zip(&want) {
                assert!((g / w - 1.0).abs() < 1e-6, "case {case} {sym:?}: {g} vs {w}");
            }
        }
    }
}

#[test]
fn mode_ordering_within_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..10 {
        let plate = random_plate(&mut rng);
        let k = rng.random_range(0.2..6.0) / plate.h;
        let f = |m| mode_frequency(&plate, m, k).unwrap().unwrap();
        assert!(f(LambMode::S0) < f(LambMode::S1));
        assert!(f(LambMode::A0) < f(LambMode::A1));
        assert!(f(LambMode::A0) < f(LambMode::S0));
    }
}

#[test]
fn thickness_scaling_invariance() {
    let plate = PlateSpec::default_stack();
    for mode in LambMode::ALL {
        for pitch in [0.5e-6, 1.5e-6, 4.5e-6] {
            for s in [0.25, 2.0, 9.0] {
                let k = PI / pitch;
                let a = mode_frequency(&plate, mode, k).unwrap().unwrap();
                let b = mode_frequency(&plate.with_thickness(plate.h * s), mode, k / s).unwrap().unwrap();
                assert!((s * b / a - 1.0).abs() < 1e-9, "{mode} pitch {pitch} s {s}");
            }
        }
    }
}

#[test]
fn curves_are_continuous_on_a_fine_grid() {
    let plate = PlateSpec::default_stack();
    let ks: Vec<f64> = (0..400).map(|i| PI / 4.5e-6 + (PI / 0.5e-6 - PI / 4.5e-6) * i as f64 / 399.0).collect();
    for mode in LambMode::ALL {
        let c = solve_mode(&plate, mode, &ks, Execution::default()).unwrap();
        assert!(c.gaps.is_empty(), "{mode}: {:?}", c.gaps);
        let dk = ks[1] - ks[0];
        for w in c.samples.windows(2) {
            // group velocity stays below v_l, so f moves by at most v_l·dk/2π
            let jump = (w[1].f - w[0].f).abs();
            assert!(jump <= plate.material.v_l * dk / (2.0 * PI) * 1.01, "{mode}: jump {jump}");
        }
        if matches!(mode, LambMode::S0 | LambMode::A0) {
            assert!(c.samples.windows(2).all(|w| w[1].f > w[0].f), "{mode} not monotone");
        }
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let plate = PlateSpec::default_stack();
    let ks: Vec<f64> = (1..=64).map(|i| i as f64 * 1e5).collect();
    let a = solve_mode(&plate, LambMode::S1, &ks, Execution::Sequential).unwrap();
    let b = solve_mode(&plate, LambMode::S1, &ks, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    assert_eq!(curves_to_csv(&[a]).unwrap(), curves_to_csv(&[b]).unwrap());
}

#[test]
fn pitch_lookup_rejects_nonsense() {
    let plate = PlateSpec::default_stack();
    assert!(frequency_at_pitch(&plate, LambMode::S0, 0.0).is_err());
    assert!(frequency_at_pitch(&plate, LambMode::S0, -1e-6).is_err());
    assert!(mode_frequency(&plate, LambMode::S0, f64::NAN).is_err());
}

#[test]
fn default_stack_mode_order_below_half_wavelength_thickness() {
    let plate = PlateSpec::default_stack();
    // h/λ from 0.02 to 0.45
    for i in 0..30 {
        let h_over_lambda = 0.02 + 0.43 * i as f64 / 29.0;
        let k = 2.0 * PI * h_over_lambda / plate.h;
        let f = |m| mode_frequency(&plate, m, k).unwrap().unwrap();
        assert!(f(LambMode::A0) <= f(LambMode::S0));
        assert!(f(LambMode::S0) <= f(LambMode::A1).min(f(LambMode::S1)), "h/λ = {h_over_lambda}");
    }
}
