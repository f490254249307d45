use super::RfError;
use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One-port error terms. `de` = e00·e11 − e10e01.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBox {
    pub e00: Complex64,
    pub e11: Complex64,
    pub de: Complex64,
}

impl ErrorBox {
    pub fn identity() -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            e00: z,
            e11: z,
            de: Complex64::new(-1.0, 0.0),
        }
    }

    pub fn from_terms(e00: Complex64, e11: Complex64, e10e01: Complex64) -> Self {
        Self {
            e00,
            e11,
            de: e00 * e11 - e10e01,
        }
    }

    /// Reflection tracking e10·e01.
    pub fn tracking(&self) -> Complex64 {
        self.e00 * self.e11 - self.de
    }

    /// Forward model: Γm = e00 + e10e01·Γ/(1 − e11·Γ).
    pub fn measure(&self, gamma: Complex64) -> Complex64 {
        self.e00 + self.tracking() * gamma / (Complex64::new(1.0, 0.0) - self.e11 * gamma)
    }
}

/// Reflection of a calibration standard as a function of frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum StandardModel {
    /// Frequency-independent reflection.
    Ideal { gamma: Complex64 },
    /// Fringing capacitance C(f) = Σ cᵢ·fⁱ behind a lossless offset delay.
    Open { c_poly: Vec<f64>, delay_s: f64 },
    /// Inductance L(f) = Σ lᵢ·fⁱ behind a lossless offset delay.
    Short { l_poly: Vec<f64>, delay_s: f64 },
    /// Resistive load.
    Load { resistance: f64 },
}

fn poly(c: &[f64], f: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * f + ci)
}

impl StandardModel {
    pub fn gamma(&self, f: f64, z0: f64) -> Complex64 {
        let w = 2.0 * PI * f;
        let one = Complex64::new(1.0, 0.0);
        let delay = |tau: f64| Complex64::from_polar(1.0, -2.0 * w * tau);
        match self {
            StandardModel::Ideal { gamma } => *gamma,
            StandardModel::Open { c_poly, delay_s } => {
                let zc = Complex64::new(0.0, w * poly(c_poly, f) * z0);
                (one - zc) / (one + zc) * delay(*delay_s)
            }
            StandardModel::Short { l_poly, delay_s } => {
                let zl = Complex64::new(0.0, w * poly(l_poly, f) / z0);
                (zl - one) / (zl + one) * delay(*delay_s)
            }
            StandardModel::Load { resistance } => Complex64::new((resistance - z0) / (resistance + z0), 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalStandards {
    pub short: StandardModel,
    pub open: StandardModel,
    pub load: StandardModel,
}

impl Default for CalStandards {
    /// Ideal −1, +1, 0.
    fn default() -> Self {
        Self {
            short: StandardModel::Ideal { gamma: Complex64::new(-1.0, 0.0) },
            open: StandardModel::Ideal { gamma: Complex64::new(1.0, 0.0) },
            load: StandardModel::Ideal { gamma: Complex64::new(0.0, 0.0) },
        }
    }
}

/// Raw reflections of the three standards at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OslMeasurement {
    pub short: Complex64,
    pub open: Complex64,
    pub load: Complex64,
}

/// Solves the three error terms at each frequency from the linear form
/// Γm = e00 + Γa·Γm·e11 − Γa·de.
pub fn osl_solve(
    frequencies: &[f64],
    measured: &[OslMeasurement],
    standards: &CalStandards,
    z0: f64,
) -> Result<Vec<ErrorBox>, RfError> {
    if frequencies.len() != measured.len() {
        return Err(RfError::LengthMismatch(measured.len(), frequencies.len()));
    }
    let one = Complex64::new(1.0, 0.0);
    frequencies
        .iter()
        .zip(measured)
        .enumerate()
        .map(|(index, (&f, m))| {
            let fail = |message: &str| RfError::Calibration {
                index,
                frequency: f,
                message: message.into(),
            };
            let pairs = [
                (standards.short.gamma(f, z0), m.short),
                (standards.open.gamma(f, z0), m.open),
                (standards.load.gamma(f, z0), m.load),
            ];
            let scale = pairs.iter().map(|(_, gm)| gm.norm()).fold(1.0, f64::max);
            for i in 0..3 {
                for j in (i + 1)..3 {
                    if (pairs[i].1 - pairs[j].1).norm() <= 1e-12 * scale {
                        return Err(fail("two standards were measured with the same reflection"));
                    }
                }
            }
            let a = Matrix3::from_fn(|r, c| {
                let (ga, gm) = pairs[r];
                match c {
                    0 => one,
                    1 => ga * gm,
                    _ => -ga,
                }
            });
            let b = Vector3::new(pairs[0].1, pairs[1].1, pairs[2].1);
            let det = a.determinant();
            if !det.is_finite() || det.norm() <= 1e-14 * scale * scale {
                return Err(fail("standards do not determine the error terms"));
            }
            let x = a.lu().solve(&b).ok_or_else(|| fail("singular calibration system"))?;
            if !(x[0].is_finite() && x[1].is_finite() && x[2].is_finite()) {
                return Err(fail("non-finite error terms"));
            }
            Ok(ErrorBox {
                e00: x[0],
                e11: x[1],
                de: x[2],
            })
        })
        .collect()
}

/// Γa = (Γm − e00)/(e10e01 + e11·(Γm − e00)).
pub fn apply_correction(b: &ErrorBox, s_meas: Complex64) -> Result<Complex64, RfError> {
    let d = s_meas - b.e00;
    let den = b.tracking() + b.e11 * d;
    if den.norm() <= 1e-15 * (1.0 + d.norm()) || !den.is_finite() {
        return Err(RfError::Correction(s_meas));
    }
    Ok(d / den)
}
