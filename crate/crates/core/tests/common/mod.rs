//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use lambkit::circuit::{mbvd_admittance, AdmittanceTrace, MbvdModel, MotionalBranch, StaticNetwork};
use lambkit::layout::{Cell, Library, Placement, Polygon, Rotation};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

fn csinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-6 {
        Complex64::new(1.0, 0.0) - z * z / 6.0
    } else {
        z.sin() / z
    }
}

/// Rayleigh-Lamb relation in tan-free form, evaluated with complex p and q
/// on a unit-thickness, unit-shear-velocity plate. `x = ωh/v_t`, `xi = kh`.
/// Real on the real axis; the imaginary part is rounding noise.
pub fn oracle_residual(x: f64, xi: f64, kappa: f64, symmetric: bool) -> f64 {
    let k2 = xi * xi;
    let p2 = Complex64::new(kappa * kappa * x * x - k2, 0.0);
    let q2 = Complex64::new(x * x - k2, 0.0);
    let alpha = p2.sqrt() / 2.0;
    let beta = q2.sqrt() / 2.0;
    let a = (q2 - k2) * (q2 - k2);
    let v = if symmetric {
        a * alpha.cos() * csinc(beta) + 4.0 * k2 * p2 * csinc(alpha) * beta.cos()
    } else {
        a * csinc(alpha) * beta.cos() + 4.0 * k2 * q2 * alpha.cos() * csinc(beta)
    };
    v.re
}

/// Lowest `count` roots (Hz) by a dense uniform sign scan plus bisection.
pub fn oracle_roots(v_l: f64, v_t: f64, h: f64, k: f64, symmetric: bool, count: usize) -> Vec<f64> {
    let kappa = v_t / v_l;
    let xi = k * h;
    let x_hi = 1.5 * (3.0 * xi + 4.0 * PI) / kappa;
    let x_lo = 0.02 * xi;
    let n = 60_000;
    let f = |x: f64| oracle_residual(x, xi, kappa, symmetric);
    let mut roots = Vec::new();
    let mut a = x_lo;
    let mut fa = f(a);
    for i in 1..=n {
        let b = x_lo + (x_hi - x_lo) * i as f64 / n as f64;
        let fb = f(b);
        if fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            roots.push(0.5 * (lo + hi) * v_t / (2.0 * PI * h));
            if roots.len() == count {
                break;
            }
        }
        a = b;
        fa = fb;
    }
    roots
}

fn cell_name(rng: &mut ChaCha8Rng, i: usize) -> String {
    const ALPHA: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_$?";
    let len = rng.random_range(1..=20);
    let tail: String = (0..len).map(|_| ALPHA[rng.random_range(0..ALPHA.len())] as char).collect();
    format!("C{i}_{tail}")
}

/// A random valid library: rectangles and simple convex polygons on random
/// layers, plus placements that only point at earlier cells.
pub fn random_library(rng: &mut ChaCha8Rng) -> Library {
    let mut lib = Library::new(format!("LIB{}", rng.random_range(0..1000)));
    let n_cells = rng.random_range(1..=6);
    for i in 0..n_cells {
        let mut cell = Cell::new(cell_name(rng, i));
        cell.timestamps = [
            [rng.random_range(1990..2030), rng.random_range(1..=12), rng.random_range(1..=28), rng.random_range(0..24), rng.random_range(0..60), rng.random_range(0..60)],
            [2001, 2, 3, 4, 5, 6],
        ];
        for _ in 0..rng.random_range(0..8) {
            let layer = rng.random_range(0..256);
            let x0 = rng.random_range(-1_000_000..1_000_000);
            let y0 = rng.random_range(-1_000_000..1_000_000);
            let w = rng.random_range(1..100_000);
            let h = rng.random_range(1..100_000);
            let poly = if rng.random_bool(0.5) {
                Polygon::rect(layer, x0, y0, x0 + w, y0 + h).unwrap()
            } else {
                // Counter-clockwise pentagon.
                Polygon::new(layer, vec![(x0, y0), (x0 + w, y0), (x0 + w + w / 2 + 1, y0 + h), (x0 + w / 2, y0 + 2 * h), (x0 - w / 2 - 1, y0 + h)]).unwrap()
            };
            cell.polygons.push(poly);
        }
        if i > 0 {
            for _ in 0..rng.random_range(0..4) {
                let target = &lib.cells[rng.random_range(0..i)];
                cell.placements.push(Placement {
                    cell: target.name.clone(),
                    origin: (rng.random_range(-5_000_000..5_000_000), rng.random_range(-5_000_000..5_000_000)),
                    rotation: [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270][rng.random_range(0..4)],
                });
            }
        }
        lib.cells.push(cell);
    }
    lib
}

pub fn branch(f_r: f64, c_m: f64, r_m: f64) -> MotionalBranch {
    let w = 2.0 * PI * f_r;
    MotionalBranch::new(r_m, 1.0 / (w * w * c_m), c_m)
}

/// Random 1 to 4 branch model with well separated resonances, its 400-point
/// grid, and the noisy trace (relative complex Gaussian noise).
pub fn random_mbvd(rng: &mut ChaCha8Rng, noise: f64) -> (MbvdModel, AdmittanceTrace) {
    let n = rng.random_range(1..=4);
    let c_0 = rng.random_range(0.5e-12..2.0e-12);
    let r_s = rng.random_range(0.5..5.0);
    let mut f = rng.random_range(0.8e9..1.2e9);
    let mut branches = Vec::with_capacity(n);
    for _ in 0..n {
        let k2: f64 = rng.random_range(0.01..0.08);
        let q: f64 = rng.random_range(150.0..600.0);
        let c_m = c_0 * k2 / (1.0 - k2);
        let r_total = 1.0 / (2.0 * PI * f * c_m * q);
        let r_m = (r_total - r_s).max(0.2 * r_total);
        branches.push(branch(f, c_m, r_m));
        f *= rng.random_range(1.15..1.3);
    }
    let model = MbvdModel::new(StaticNetwork::new(c_0, 0.0, r_s), branches).unwrap();
    let f_lo = model.branches()[0].resonance_frequency() * 0.9;
    let f_hi = model.branches()[n - 1].resonance_frequency() * 1.1;
    let freqs: Vec<f64> = (0..400).map(|i| f_lo + (f_hi - f_lo) * i as f64 / 399.0).collect();
    let clean = mbvd_admittance(&model, &freqs).unwrap();
    let g = Normal::new(0.0, noise).unwrap();
    let noisy = clean
        .admittance()
        .iter()
        .map(|y| y * Complex64::new(1.0 + g.sample(rng), g.sample(rng)))
        .collect();
    (model, AdmittanceTrace::new(freqs, noisy).unwrap())
}
