//! Rayleigh-Lamb dispersion of an effective isotropic plate.
//!
//! Modes are labelled by ascending frequency within each symmetry family
//! (S0 is the lowest symmetric root at a given k, S1 the next; likewise
//! A0/A1). No mode-shape tracking is done.

mod interp;
mod residual;
mod solver;

pub use residual::rayleigh_lamb_residual;
pub use solver::{
    family_roots, frequency_at_pitch, mode_frequency, pitch_to_frequency, sensitivity, solve_mode,
    solve_modes, Sensitivity,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DispersionError {
    #[error("invalid plate: {0}")]
    InvalidPlate(String),
    #[error("invalid k grid: {0}")]
    InvalidGrid(String),
    #[error("k = {k:.6e} rad/m is outside the solved range [{lo:.6e}, {hi:.6e}]")]
    OutOfRange { k: f64, lo: f64, hi: f64 },
    #[error("k = {k:.6e} rad/m falls in a gap of the {mode} curve")]
    InGap { k: f64, mode: LambMode },
    #[error("no {mode} root at k = {k:.6e} rad/m")]
    NoRoot { k: f64, mode: LambMode },
    #[error("sensitivity failed: {0}")]
    Sensitivity(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric,
    Antisymmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LambMode {
    A0,
    S0,
    A1,
    S1,
}

impl LambMode {
    pub const ALL: [LambMode; 4] = [LambMode::A0, LambMode::S0, LambMode::A1, LambMode::S1];

    pub fn symmetry(self) -> Symmetry {
        match self {
            LambMode::S0 | LambMode::S1 => Symmetry::Symmetric,
            LambMode::A0 | LambMode::A1 => Symmetry::Antisymmetric,
        }
    }

    /// Index of the branch within its family (0 for A0/S0).
    pub fn order(self) -> usize {
        match self {
            LambMode::A0 | LambMode::S0 => 0,
            LambMode::A1 | LambMode::S1 => 1,
        }
    }
}

impl fmt::Display for LambMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LambMode::A0 => "A0",
            LambMode::S0 => "S0",
            LambMode::A1 => "A1",
            LambMode::S1 => "S1",
        };
        f.write_str(s)
    }
}

impl FromStr for LambMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A0" => Ok(LambMode::A0),
            "S0" => Ok(LambMode::S0),
            "A1" => Ok(LambMode::A1),
            "S1" => Ok(LambMode::S1),
            other => Err(format!("unknown mode '{other}' (expected A0, S0, A1 or S1)")),
        }
    }
}

/// Isotropic plate material. Only the velocity ratio and v_t enter the
/// dispersion relation; `rho` is carried for completeness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateMaterial {
    pub name: String,
    pub rho: f64,
    pub v_l: f64,
    pub v_t: f64,
}

impl PlateMaterial {
    pub fn new(name: impl Into<String>, rho: f64, v_l: f64, v_t: f64) -> Result<Self, DispersionError> {
        let m = Self {
            name: name.into(),
            rho,
            v_l,
            v_t,
        };
        m.validate()?;
        Ok(m)
    }

    /// Effective constants for the metal/Al₀.₆Sc₀.₄N/metal laminate. These are
    /// calibration values placing S0 at ~0.66 GHz for λ = 9 µm and ~5.3 GHz
    /// for λ = 1 µm on a 400 nm plate; they are not measured data. v_l/v_t is
    /// kept away from 2, where the two lowest symmetric cutoffs coincide.
    pub fn alscn_effective() -> Self {
        Self {
            name: "AlScN-effective".into(),
            rho: 3500.0,
            v_l: 7000.0,
            v_t: 3400.0,
        }
    }

    pub fn validate(&self) -> Result<(), DispersionError> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(DispersionError::InvalidPlate(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.v_t > 0.0 && self.v_t < self.v_l && self.v_l.is_finite()) {
            return Err(DispersionError::InvalidPlate(format!(
                "need 0 < v_t < v_l, got v_t = {}, v_l = {}",
                self.v_t, self.v_l
            )));
        }
        Ok(())
    }

    /// Low-frequency S0 phase velocity 2·v_t·√(1 − v_t²/v_l²).
    pub fn thin_plate_velocity(&self) -> f64 {
        let kappa = self.v_t / self.v_l;
        2.0 * self.v_t * (1.0 - kappa * kappa).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateSpec {
    pub material: PlateMaterial,
    pub h: f64,
}

impl PlateSpec {
    pub fn new(material: PlateMaterial, h: f64) -> Result<Self, DispersionError> {
        let p = Self { material, h };
        p.validate()?;
        Ok(p)
    }

    /// 400 nm effective AlScN plate.
    pub fn default_stack() -> Self {
        Self {
            material: PlateMaterial::alscn_effective(),
            h: 400e-9,
        }
    }

    pub fn validate(&self) -> Result<(), DispersionError> {
        self.material.validate()?;
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(DispersionError::InvalidPlate(format!("h must be > 0, got {}", self.h)));
        }
        Ok(())
    }

    pub fn with_thickness(&self, h: f64) -> Self {
        Self {
            material: self.material.clone(),
            h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionSample {
    /// Wavenumber, rad/m.
    pub k: f64,
    /// Frequency, Hz.
    pub f: f64,
}

impl DispersionSample {
    pub fn phase_velocity(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.f / self.k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionCurve {
    pub mode: LambMode,
    pub samples: Vec<DispersionSample>,
    /// Closed k-intervals of grid points where no root was found.
    pub gaps: Vec<(f64, f64)>,
}

impl DispersionCurve {
    /// Monotone cubic (PCHIP) interpolation of f(k).
    pub fn interpolate(&self, k: f64) -> Result<f64, DispersionError> {
        let s = &self.samples;
        let (lo, hi) = match (s.first(), s.last()) {
            (Some(a), Some(b)) => (a.k, b.k),
            _ => return Err(DispersionError::OutOfRange { k, lo: f64::NAN, hi: f64::NAN }),
        };
        if !(k >= lo && k <= hi) {
            return Err(DispersionError::OutOfRange { k, lo, hi });
        }
        let i = s.partition_point(|p| p.k <= k).saturating_sub(1).min(s.len().saturating_sub(2));
        if s.len() >= 2 {
            let (ka, kb) = (s[i].k, s[i + 1].k);
            if self.gaps.iter().any(|&(g0, g1)| g1 > ka && g0 < kb) {
                return Err(DispersionError::InGap { k, mode: self.mode });
            }
        }
        let ks: Vec<f64> = s.iter().map(|p| p.k).collect();
        let fs: Vec<f64> = s.iter().map(|p| p.f).collect();
        Ok(interp::pchip(&ks, &fs, k))
    }

    /// CSV rows `mode,k,f,v_phase` (no header).
    pub fn csv_rows(&self) -> impl Iterator<Item = [String; 4]> + '_ {
        self.samples.iter().map(move |s| {
            [
                self.mode.to_string(),
                format!("{:e}", s.k),
                format!("{:e}", s.f),
                format!("{:e}", s.phase_velocity()),
            ]
        })
    }
}

/// Writes curves as CSV with header `mode,k,f,v_phase`.
pub fn curves_to_csv(curves: &[DispersionCurve]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["mode", "k", "f", "v_phase"])?;
    for c in curves {
        for row in c.csv_rows() {
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_parsing_and_families() {
        assert_eq!("s1".parse::<LambMode>().unwrap(), LambMode::S1);
        assert!("B0".parse::<LambMode>().is_err());
        assert_eq!(LambMode::A1.symmetry(), Symmetry::Antisymmetric);
        assert_eq!(LambMode::S1.order(), 1);
    }

    #[test]
    fn material_validation() {
        assert!(PlateMaterial::new("x", 1.0, 5000.0, 6000.0).is_err());
        assert!(PlateMaterial::new("x", 0.0, 6000.0, 3000.0).is_err());
        assert!(PlateSpec::new(PlateMaterial::alscn_effective(), 0.0).is_err());
        let m = PlateMaterial::new("x", 1.0, 10000.0, 5500.0).unwrap();
        assert!((m.thin_plate_velocity() - 9186.8).abs() < 0.1);
    }

    #[test]
    fn gap_blocks_interpolation() {
        let curve = DispersionCurve {
            mode: LambMode::S1,
            samples: vec![
                DispersionSample { k: 1.0, f: 10.0 },
                DispersionSample { k: 4.0, f: 13.0 },
            ],
            gaps: vec![(2.0, 3.0)],
        };
        assert!(matches!(curve.interpolate(2.5), Err(DispersionError::InGap { .. })));
        assert!(matches!(curve.interpolate(5.0), Err(DispersionError::OutOfRange { .. })));
    }

    #[test]
    fn csv_has_expected_columns() {
        let curve = DispersionCurve {
            mode: LambMode::S0,
            samples: vec![DispersionSample { k: 1e6, f: 1e9 }],
            gaps: vec![],
        };
        let csv = curves_to_csv(&[curve]).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("mode,k,f,v_phase"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "S0");
        let v: f64 = row[3].parse().unwrap();
        assert!((v - 2.0 * std::f64::consts::PI * 1e3).abs() < 1e-6);
    }
}
