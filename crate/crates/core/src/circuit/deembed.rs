use super::CircuitError;
use num_complex::Complex64;

/// Above this magnitude a short standard is treated as ideal (1/y_short → 0).
const IDEAL_SHORT_GUARD: f64 = 1e12;

/// Open-short de-embedding of a one-port admittance:
/// `1 / ( 1/(y_dut − y_open) − 1/(y_short − y_open) )`.
pub fn de_embed_open_short(
    y_dut: Complex64,
    y_open: Complex64,
    y_short: Complex64,
) -> Result<Complex64, CircuitError> {
    let scale = y_dut.norm().max(y_open.norm()).max(1e-300);
    let intrinsic = y_dut - y_open;
    if intrinsic.norm() <= 1e-14 * scale {
        return Err(CircuitError::DegenerateFixture("y_dut equals y_open"));
    }
    let short_term = if !y_short.is_finite() || y_short.norm() >= IDEAL_SHORT_GUARD {
        Complex64::new(0.0, 0.0)
    } else {
        let s = y_short - y_open;
        if s.norm() <= 1e-14 * y_short.norm().max(y_open.norm()).max(1e-300) {
            return Err(CircuitError::DegenerateFixture("y_short equals y_open"));
        }
        s.inv()
    };
    let z = intrinsic.inv() - short_term;
    if z.norm() == 0.0 || !z.is_finite() {
        return Err(CircuitError::DegenerateFixture("de-embedded impedance is zero"));
    }
    Ok(z.inv())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ideal_fixtures_pass_through() {
        let y = c(1e-3, 5e-3);
        let out = de_embed_open_short(y, c(0.0, 0.0), c(f64::INFINITY, 0.0)).unwrap();
        assert!((out - y).norm() < 1e-15);
        let out = de_embed_open_short(y, c(0.0, 0.0), c(1e15, 0.0)).unwrap();
        assert!((out - y).norm() < 1e-15);
    }

    #[test]
    fn recovers_forward_embedded_device() {
        // y_p in parallel with (z_s in series with the device)
        let y_p = c(1e-5, 3e-4);
        let z_s = c(2.5, 0.8);
        for y in [c(2e-3, 7e-3), c(0.04, -0.01), c(1e-4, 6e-3)] {
            let y_meas = y_p + (z_s + y.inv()).inv();
            let y_open = y_p;
            let y_short = y_p + z_s.inv();
            let out = de_embed_open_short(y_meas, y_open, y_short).unwrap();
            assert!((out - y).norm() / y.norm() < 1e-9);
        }
    }

    #[test]
    fn degenerate_fixtures_error() {
        let y = c(1e-3, 1e-3);
        assert!(de_embed_open_short(y, y, c(1.0, 0.0)).is_err());
        assert!(de_embed_open_short(c(2e-3, 0.0), y, y).is_err());
    }
}
