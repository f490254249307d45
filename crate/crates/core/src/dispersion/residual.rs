use super::{PlateSpec, Symmetry};
use std::sync::OnceLock;

/// cos(√a2), continued as cosh(√−a2) for a2 < 0.
fn cos_sqrt(a2: f64) -> f64 {
    if a2 >= 0.0 {
        a2.sqrt().cos()
    } else {
        (-a2).sqrt().cosh()
    }
}

/// sin(√a2)/√a2, continued as sinh(√−a2)/√−a2 for a2 < 0.
fn sinc_sqrt(a2: f64) -> f64 {
    if a2.abs() < 1e-8 {
        return 1.0 - a2 / 6.0;
    }
    if a2 > 0.0 {
        let s = a2.sqrt();
        s.sin() / s
    } else {
        let s = (-a2).sqrt();
        s.sinh() / s
    }
}

const SERIES_TERMS: usize = 12;

/// (−1)^(m+n)·(s_m c_n − c_m s_n) with s_m = 1/(2m+1)!, c_m = 1/(2m)!.
fn series_weights() -> &'static [[f64; SERIES_TERMS + 1]; SERIES_TERMS + 1] {
    static W: OnceLock<[[f64; SERIES_TERMS + 1]; SERIES_TERMS + 1]> = OnceLock::new();
    W.get_or_init(|| {
        let mut fact = [1.0f64; 2 * SERIES_TERMS + 2];
        for i in 1..fact.len() {
            fact[i] = fact[i - 1] * i as f64;
        }
        let mut w = [[0.0; SERIES_TERMS + 1]; SERIES_TERMS + 1];
        for (m, row) in w.iter_mut().enumerate() {
            for (n, v) in row.iter_mut().enumerate() {
                let sign = if (m + n) % 2 == 0 { 1.0 } else { -1.0 };
                *v = sign * (1.0 / (fact[2 * m + 1] * fact[2 * n]) - 1.0 / (fact[2 * m] * fact[2 * n + 1]));
            }
        }
        w
    })
}

/// E(P, Q) = (S(P)C(Q) − C(P)S(Q)) / (Q − P), with S = sinc_sqrt and
/// C = cos_sqrt. The difference cancels badly when P and Q are both small, so
/// there the double power series is summed with the (Q − P) factor removed
/// analytically.
fn e_term(p2: f64, q2: f64) -> f64 {
    if p2.abs() > 2.0 || q2.abs() > 2.0 {
        let num = sinc_sqrt(p2) * cos_sqrt(q2) - cos_sqrt(p2) * sinc_sqrt(q2);
        return num / (q2 - p2);
    }
    let w = series_weights();
    // h[j] = Σ_{i=0..j} Q^i P^(j−i)
    let mut h = [0.0f64; SERIES_TERMS + 1];
    h[0] = 1.0;
    let mut p_pow = 1.0;
    for j in 1..=SERIES_TERMS {
        p_pow *= p2;
        h[j] = q2 * h[j - 1] + p_pow;
    }
    let pq = p2 * q2;
    let mut sum = 0.0;
    let mut pq_pow = 1.0;
    for m in 0..SERIES_TERMS {
        for n in (m + 1)..=SERIES_TERMS {
            sum += w[m][n] * pq_pow * h[n - m - 1];
        }
        pq_pow *= pq;
    }
    sum
}

/// Residual in x = ωh/v_t, xi = kh, kappa = v_t/v_l, divided by the positive
/// factor x²/4 so the trivial ω = 0 root is gone.
///
/// With α = ph/2 and β = qh/2 the symmetric relation
/// `(q²−k²)² sin β cos α + 4k²pq sin α cos β = 0` is divided by β and scaled
/// by h⁴/16, which leaves only even functions of α and β. The ξ⁴ parts of the
/// two terms cancel identically and are removed before evaluation.
pub(crate) fn reduced_residual(x: f64, xi: f64, kappa: f64, symmetry: Symmetry) -> f64 {
    let xi2 = xi * xi;
    let x2 = x * x;
    let p2 = (kappa * kappa * x2 - xi2) / 4.0;
    let q2 = (x2 - xi2) / 4.0;
    let shear = 1.0 - kappa * kappa;
    let e = e_term(p2, q2);
    let cs = cos_sqrt(p2) * sinc_sqrt(q2);
    match symmetry {
        Symmetry::Symmetric => (x2 / 4.0 - shear * xi2) * cs + shear * xi2 * p2 * e,
        Symmetry::Antisymmetric => {
            let d = 2.0 * xi2 - x2;
            (x2 / 4.0) * cs + shear * (d * d / 16.0) * e
        }
    }
}

/// Real-valued Rayleigh-Lamb characteristic residual at (ω, k).
///
/// Written in terms of p² = ω²/v_l² − k² and q² = ω²/v_t² − k² only, so it is
/// continuous through the p², q² sign changes and independent of the branch
/// chosen for p and q. Zero on every dispersion branch and at ω = 0.
pub fn rayleigh_lamb_residual(omega: f64, k: f64, plate: &PlateSpec, symmetry: Symmetry) -> f64 {
    let h = plate.h;
    let m = &plate.material;
    let x = omega * h / m.v_t;
    x * x / 4.0 * reduced_residual(x, k * h, m.v_t / m.v_l, symmetry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::PlateMaterial;
    use num_complex::Complex64;

    fn plate() -> PlateSpec {
        PlateSpec::new(PlateMaterial::new("t", 2700.0, 6300.0, 3100.0).unwrap(), 1e-6).unwrap()
    }

    /// Textbook tan-form written with complex p and q, multiplied through by
    /// the cosines so it is finite everywhere.
    fn complex_form(omega: f64, k: f64, pl: &PlateSpec, sym: Symmetry) -> f64 {
        let (vl, vt, h) = (pl.material.v_l, pl.material.v_t, pl.h);
        let p = Complex64::new(omega * omega / (vl * vl) - k * k, 0.0).sqrt();
        let q = Complex64::new(omega * omega / (vt * vt) - k * k, 0.0).sqrt();
        let (al, be) = (p * h / 2.0, q * h / 2.0);
        let g = q * q - k * k;
        let v = match sym {
            Symmetry::Symmetric => g * g * be.sin() * al.cos() + 4.0 * k * k * p * q * al.sin() * be.cos(),
            Symmetry::Antisymmetric => g * g * al.sin() * be.cos() + 4.0 * k * k * p * q * be.sin() * al.cos(),
        };
        // Same real-valued function up to a positive factor (and a real one for the antisymmetric case).
        let scale = match sym {
            Symmetry::Symmetric => be * 16.0 / h.powi(4),
            Symmetry::Antisymmetric => al * 16.0 / h.powi(4),
        };
        (v / scale).re
    }

    #[test]
    fn matches_complex_textbook_form() {
        let pl = plate();
        for &(f, k) in &[(1e9, 2e6), (2.2e9, 1e6), (0.3e9, 4e6), (3.1e9, 5e5)] {
            let w = 2.0 * std::f64::consts::PI * f;
            for sym in [Symmetry::Symmetric, Symmetry::Antisymmetric] {
                let a = rayleigh_lamb_residual(w, k, &pl, sym);
                let b = complex_form(w, k, &pl, sym);
                assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()), "{sym:?} {f} {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn e_series_matches_direct_difference() {
        for &(p, q) in &[(1.5, 1.9), (-1.2, 0.7), (-1.9, -0.4), (0.3, 1.95)] {
            let direct = (sinc_sqrt(p) * cos_sqrt(q) - cos_sqrt(p) * sinc_sqrt(q)) / (q - p);
            assert!((e_term(p, q) - direct).abs() < 1e-12, "{p} {q}");
        }
        assert!((e_term(1e-9, 2e-9) + 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn continuous_across_q2_sign_change() {
        let pl = plate();
        let k = 3e6;
        let w0 = k * pl.material.v_t;
        for sym in [Symmetry::Symmetric, Symmetry::Antisymmetric] {
            let lo = rayleigh_lamb_residual(w0 * (1.0 - 1e-10), k, &pl, sym);
            let hi = rayleigh_lamb_residual(w0 * (1.0 + 1e-10), k, &pl, sym);
            assert!((lo - hi).abs() <= 1e-6 * lo.abs().max(1e-30));
        }
    }

    #[test]
    fn k_zero_reduces_to_thickness_resonances() {
        let pl = plate();
        let (vl, vt, h) = (pl.material.v_l, pl.material.v_t, pl.h);
        let pi = std::f64::consts::PI;
        // symmetric: cos(ωh/2v_l) = 0 or sin(ωh/2v_t) = 0
        for w in [pi * vl / h, 2.0 * pi * vt / h, 3.0 * pi * vl / h] {
            let r = rayleigh_lamb_residual(w, 0.0, &pl, Symmetry::Symmetric);
            let scale = rayleigh_lamb_residual(w * 1.01, 0.0, &pl, Symmetry::Symmetric).abs();
            assert!(r.abs() < 1e-9 * scale, "{w}: {r}");
        }
        // antisymmetric: sin(ωh/2v_l) = 0 or cos(ωh/2v_t) = 0
        for w in [pi * vt / h, 2.0 * pi * vl / h] {
            let r = rayleigh_lamb_residual(w, 0.0, &pl, Symmetry::Antisymmetric);
            let scale = rayleigh_lamb_residual(w * 1.01, 0.0, &pl, Symmetry::Antisymmetric).abs();
            assert!(r.abs() < 1e-9 * scale, "{w}: {r}");
        }
    }

    #[test]
    fn sign_changes_across_s0_at_unit_kh() {
        // dense scan oracle: S0 phase velocity lies below the thin-plate value
        let pl = plate();
        let k = 1.0 / pl.h;
        let w_hi = k * pl.material.thin_plate_velocity();
        let n = 20_000;
        let mut changes = 0;
        let mut prev = rayleigh_lamb_residual(w_hi * 1e-3, k, &pl, Symmetry::Symmetric);
        for i in 1..=n {
            let w = w_hi * (1e-3 + (1.0 - 1e-3) * i as f64 / n as f64);
            let r = rayleigh_lamb_residual(w, k, &pl, Symmetry::Symmetric);
            if r.signum() != prev.signum() {
                changes += 1;
            }
            prev = r;
        }
        assert_eq!(changes, 1);
    }
}
