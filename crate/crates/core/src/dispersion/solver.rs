use super::residual::reduced_residual;
use super::{DispersionCurve, DispersionError, DispersionSample, LambMode, PlateSpec, Symmetry};
use crate::Execution;
use std::f64::consts::PI;

const UNIFORM_POINTS: usize = 2000;
const GEOMETRIC_POINTS: usize = 200;
/// Relative step for the logarithmic finite differences.
const SENSITIVITY_STEP: f64 = 1e-4;

/// Scan abscissae in x = ωh/v_t. The uniform part covers the window
/// (0, (3ξ + 4π)/κ]; a geometric run below the first uniform point resolves
/// the quadratic A0 root at small ξ.
fn scan_points(xi: f64, kappa: f64) -> Vec<f64> {
    let x_max = (3.0 * xi + 4.0 * PI) / kappa;
    let dx = x_max / UNIFORM_POINTS as f64;
    let mut xs = Vec::with_capacity(UNIFORM_POINTS + GEOMETRIC_POINTS);
    let x_lo = 1e-3 * xi * xi;
    if x_lo > 0.0 && x_lo < dx {
        let ratio = (dx / x_lo).powf(1.0 / GEOMETRIC_POINTS as f64);
        let mut x = x_lo;
        for _ in 0..GEOMETRIC_POINTS {
            xs.push(x);
            x *= ratio;
        }
    }
    xs.extend((1..=UNIFORM_POINTS).map(|i| dx * i as f64));
    xs
}

/// Brent's method on a sign-changing bracket.
fn brent<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-13 * b.abs();
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}

/// Up to `count` lowest nonzero roots in x of one symmetry family.
fn roots_nd(xi: f64, kappa: f64, symmetry: Symmetry, count: usize) -> Vec<f64> {
    let f = |x: f64| reduced_residual(x, xi, kappa, symmetry);
    let xs = scan_points(xi, kappa);
    let mut out = Vec::with_capacity(count);
    let mut prev_x = xs[0];
    let mut prev_f = f(prev_x);
    for &x in &xs[1..] {
        if out.len() == count {
            break;
        }
        let fx = f(x);
        if prev_f == 0.0 {
            out.push(prev_x);
        } else if fx != 0.0 && prev_f.signum() != fx.signum() {
            out.push(brent(f, prev_x, x, prev_f, fx));
        }
        prev_x = x;
        prev_f = fx;
    }
    out.truncate(count);
    out
}

fn check_k(k: f64) -> Result<(), DispersionError> {
    if k > 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(DispersionError::InvalidGrid(format!("k must be positive and finite, got {k}")))
    }
}

/// The lowest `count` nonzero frequencies (Hz) of a symmetry family at `k`.
pub fn family_roots(
    plate: &PlateSpec,
    symmetry: Symmetry,
    k: f64,
    count: usize,
) -> Result<Vec<f64>, DispersionError> {
    plate.validate()?;
    check_k(k)?;
    let m = &plate.material;
    let to_hz = m.v_t / (plate.h * 2.0 * PI);
    Ok(roots_nd(k * plate.h, m.v_t / m.v_l, symmetry, count)
        .into_iter()
        .map(|x| x * to_hz)
        .collect())
}

/// Frequency of `mode` at `k`, or `None` when no root lies in the scan window.
pub fn mode_frequency(plate: &PlateSpec, mode: LambMode, k: f64) -> Result<Option<f64>, DispersionError> {
    let roots = family_roots(plate, mode.symmetry(), k, mode.order() + 1)?;
    Ok(roots.get(mode.order()).copied())
}

/// Frequency of `mode` at k = π/pitch, solved directly.
pub fn frequency_at_pitch(plate: &PlateSpec, mode: LambMode, pitch: f64) -> Result<f64, DispersionError> {
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(DispersionError::InvalidGrid(format!("pitch must be positive, got {pitch}")));
    }
    let k = PI / pitch;
    mode_frequency(plate, mode, k)?.ok_or(DispersionError::NoRoot { k, mode })
}

/// Solves one mode over a strictly increasing grid of positive wavenumbers.
/// Each k is scanned independently; points without a root become gaps.
pub fn solve_mode(
    plate: &PlateSpec,
    mode: LambMode,
    k_grid: &[f64],
    exec: Execution,
) -> Result<DispersionCurve, DispersionError> {
    plate.validate()?;
    if k_grid.is_empty() {
        return Err(DispersionError::InvalidGrid("empty k grid".into()));
    }
    for &k in k_grid {
        check_k(k)?;
    }
    if k_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DispersionError::InvalidGrid("k grid must be strictly increasing".into()));
    }
    let roots = exec.map(k_grid, |&k| mode_frequency(plate, mode, k));
    let mut samples = Vec::with_capacity(k_grid.len());
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    let mut open_gap: Option<(f64, f64)> = None;
    for (&k, r) in k_grid.iter().zip(roots) {
        match r? {
            Some(f) => {
                if let Some(g) = open_gap.take() {
                    gaps.push(g);
                }
                samples.push(DispersionSample { k, f });
            }
            None => {
                open_gap = Some(match open_gap {
                    Some((lo, _)) => (lo, k),
                    None => (k, k),
                });
            }
        }
    }
    if let Some(g) = open_gap {
        gaps.push(g);
    }
    Ok(DispersionCurve { mode, samples, gaps })
}

/// Solves several modes on the same grid.
pub fn solve_modes(
    plate: &PlateSpec,
    modes: &[LambMode],
    k_grid: &[f64],
    exec: Execution,
) -> Result<Vec<DispersionCurve>, DispersionError> {
    modes.iter().map(|&m| solve_mode(plate, m, k_grid, exec)).collect()
}

/// Interpolates a solved curve at k = π/pitch.
pub fn pitch_to_frequency(pitch: f64, curve: &DispersionCurve) -> Result<f64, DispersionError> {
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(DispersionError::InvalidGrid(format!("pitch must be positive, got {pitch}")));
    }
    curve.interpolate(PI / pitch)
}

/// Logarithmic sensitivities of f to plate thickness and IDT pitch.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Sensitivity {
    pub dlnf_dlnh: f64,
    pub dlnf_dlnp: f64,
}

/// Central differences in log space with relative step 1e-4 on h and on
/// pitch (k = π/pitch).
pub fn sensitivity(plate: &PlateSpec, mode: LambMode, k: f64) -> Result<Sensitivity, DispersionError> {
    check_k(k)?;
    let eps = SENSITIVITY_STEP;
    let solve = |pl: &PlateSpec, kk: f64| -> Result<f64, DispersionError> {
        mode_frequency(pl, mode, kk)?
            .ok_or_else(|| DispersionError::Sensitivity(format!("{mode} has no root at k = {kk:.6e}")))
    };
    let denom = ((1.0 + eps) / (1.0 - eps)).ln();
    let f_hp = solve(&plate.with_thickness(plate.h * (1.0 + eps)), k)?;
    let f_hm = solve(&plate.with_thickness(plate.h * (1.0 - eps)), k)?;
    // pitch up means k down
    let f_pp = solve(plate, k / (1.0 + eps))?;
    let f_pm = solve(plate, k / (1.0 - eps))?;
    Ok(Sensitivity {
        dlnf_dlnh: (f_hp / f_hm).ln() / denom,
        dlnf_dlnp: (f_pp / f_pm).ln() / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{rayleigh_lamb_residual, PlateMaterial};

    fn textbook() -> PlateSpec {
        PlateSpec::new(PlateMaterial::new("t", 1.0, 10000.0, 5500.0).unwrap(), 1e-6).unwrap()
    }

    #[test]
    fn s0_thin_plate_limit() {
        let pl = textbook();
        let k = 0.01 / pl.h;
        let f = mode_frequency(&pl, LambMode::S0, k).unwrap().unwrap();
        let v = 2.0 * PI * f / k;
        assert!((v / 9187.0 - 1.0).abs() < 1e-3, "{v}");
        let fa = mode_frequency(&pl, LambMode::A0, k).unwrap().unwrap();
        assert!(fa < f);
    }

    #[test]
    fn a0_flexural_limit() {
        // ω ≈ k²·h·c_plate/√12 for kh ≪ 1
        let pl = textbook();
        for kh in [1e-3, 1e-2] {
            let k = kh / pl.h;
            let f = mode_frequency(&pl, LambMode::A0, k).unwrap().unwrap();
            let w_ref = k * k * pl.h * pl.material.thin_plate_velocity() / 12f64.sqrt();
            assert!((2.0 * PI * f / w_ref - 1.0).abs() < 1e-3, "kh = {kh}");
        }
    }

    #[test]
    fn higher_modes_approach_cutoffs() {
        let pl = PlateSpec::default_stack();
        let (vl, vt, h) = (pl.material.v_l, pl.material.v_t, pl.h);
        let a1_cut = (vt / (2.0 * h)).min(vl / h);
        let s1_cut = (vl / (2.0 * h)).min(vt / h);
        let k = 1e-3 / h;
        let a1 = mode_frequency(&pl, LambMode::A1, k).unwrap().unwrap();
        let s1 = mode_frequency(&pl, LambMode::S1, k).unwrap().unwrap();
        assert!((a1 / a1_cut - 1.0).abs() < 5e-3);
        assert!((s1 / s1_cut - 1.0).abs() < 5e-3);
    }

    #[test]
    fn roots_are_residual_zeros() {
        let pl = PlateSpec::default_stack();
        let k = PI / 1e-6;
        for mode in LambMode::ALL {
            let f = mode_frequency(&pl, mode, k).unwrap().unwrap();
            let w = 2.0 * PI * f;
            let r = |s: f64| rayleigh_lamb_residual(w * s, k, &pl, mode.symmetry());
            assert!(r(1.0 - 1e-9).signum() != r(1.0 + 1e-9).signum() || r(1.0) == 0.0);
        }
    }

    #[test]
    fn default_stack_lands_in_band() {
        let pl = PlateSpec::default_stack();
        let f9 = frequency_at_pitch(&pl, LambMode::S0, 4.5e-6).unwrap();
        let f1 = frequency_at_pitch(&pl, LambMode::S0, 0.5e-6).unwrap();
        assert!((f9 / 700e6 - 1.0).abs() < 0.15, "{f9}");
        assert!((f1 / 5e9 - 1.0).abs() < 0.20, "{f1}");
    }

    #[test]
    fn grid_validation_and_gaps() {
        let pl = PlateSpec::default_stack();
        assert!(solve_mode(&pl, LambMode::S0, &[], Execution::Sequential).is_err());
        assert!(solve_mode(&pl, LambMode::S0, &[2.0, 1.0], Execution::Sequential).is_err());
        assert!(solve_mode(&pl, LambMode::S0, &[0.0, 1.0], Execution::Sequential).is_err());
        let c = solve_mode(&pl, LambMode::S1, &[1e5, 1e6, 3e6], Execution::Sequential).unwrap();
        assert_eq!(c.samples.len(), 3);
        assert!(c.gaps.is_empty());
    }

    #[test]
    fn sensitivity_limits() {
        let pl = PlateSpec::default_stack();
        // h/λ = 0.02
        let lambda = pl.h / 0.02;
        let s = sensitivity(&pl, LambMode::S0, 2.0 * PI / lambda).unwrap();
        assert!(s.dlnf_dlnh.abs() < 0.05);
        assert!((s.dlnf_dlnp + 1.0).abs() < 0.02);
        let s1 = sensitivity(&pl, LambMode::S1, 1e-3 / pl.h).unwrap();
        assert!((s1.dlnf_dlnh.abs() - 1.0).abs() < 0.05);
        assert!((s1.dlnf_dlnh + s1.dlnf_dlnp + 1.0).abs() < 1e-6);
    }

    #[test]
    fn interpolation_agrees_with_direct_solve() {
        let pl = PlateSpec::default_stack();
        let ks: Vec<f64> = (0..=60).map(|i| 0.5e6 + i as f64 * 0.1e6).collect();
        let c = solve_mode(&pl, LambMode::S0, &ks, Execution::Parallel).unwrap();
        let pitch = 1.3e-6;
        let fi = pitch_to_frequency(pitch, &c).unwrap();
        let fd = frequency_at_pitch(&pl, LambMode::S0, pitch).unwrap();
        assert!((fi / fd - 1.0).abs() < 1e-5);
        assert!(pitch_to_frequency(0.1e-6, &c).is_err());
    }
}
