//! IDT sizing: aperture, finger count for impedance matching, dose and
//! exposure-layer assignment.

use crate::dispersion::{frequency_at_pitch, DispersionError, LambMode, PlateSpec};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Smallest and largest fabricated finger width (m).
pub const MIN_FINGER_WIDTH: f64 = 250e-9;
pub const MAX_FINGER_WIDTH: f64 = 2.25e-6;
const DOSE_WIDTH_TOLERANCE: f64 = 1e-9;
pub const DOSE_NARROW: f64 = 21.75;
pub const DOSE_DEFAULT: f64 = 20.50;

const SMALL_RANGE: (f64, f64) = (500e-9, 1e-6);
const LARGE_RANGE: (f64, f64) = (1.5e-6, 4.5e-6);
/// Relative slack on catalog range edges so 1e-6 and friends compare cleanly.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DesignError {
    #[error("invalid IDT: {0}")]
    InvalidIdt(String),
    #[error("invalid capacitance model: {0}")]
    InvalidCapacitance(String),
    #[error("finger width {width_nm:.1} nm outside the fabricated range 250 nm to 2250 nm")]
    DoseRange { width_nm: f64 },
    #[error("pitch {pitch_nm:.1} nm lies in the unassigned gap between the SMALL (500-1000 nm) and LARGE (1500-4500 nm) layers")]
    LayerGap { pitch_nm: f64 },
    #[error("pitch {pitch_nm:.1} nm is outside the catalog range 500 nm to 4500 nm")]
    LayerRange { pitch_nm: f64 },
    #[error("matching needs {needed} fingers, above the cap of {cap}")]
    FingerCap { needed: u64, cap: u32 },
    #[error("target impedance must be positive, got {0}")]
    InvalidTarget(f64),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Layer {
    Small,
    Large,
    Pads,
}

/// IDT exposure layer plus the companion pad exposure, which every design uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerAssignment {
    pub idt: Layer,
    pub pads: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdtSpec {
    pub pitch: f64,
    pub wavelength: f64,
    pub finger_width: f64,
    pub aperture: f64,
    pub gap: f64,
    pub n_fingers: u32,
    pub dummy_count_per_side: u32,
}

impl IdtSpec {
    /// Derives wavelength = 2·pitch and finger width = pitch/2.
    pub fn new(pitch: f64, aperture: f64, gap: f64, n_fingers: u32, dummy_count_per_side: u32) -> Result<Self, DesignError> {
        let spec = Self {
            pitch,
            wavelength: 2.0 * pitch,
            finger_width: pitch / 2.0,
            aperture,
            gap,
            n_fingers,
            dummy_count_per_side,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Aperture 10λ and gap λ/2.
    pub fn standard(pitch: f64, n_fingers: u32, dummy_count_per_side: u32) -> Result<Self, DesignError> {
        Self::new(pitch, 20.0 * pitch, pitch, n_fingers, dummy_count_per_side)
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        let bad = |m: String| Err(DesignError::InvalidIdt(m));
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return bad(format!("pitch must be positive, got {}", self.pitch));
        }
        if self.wavelength != 2.0 * self.pitch || self.finger_width != self.pitch / 2.0 {
            return bad("wavelength must be 2*pitch and finger_width pitch/2".into());
        }
        if !(self.aperture > 0.0 && self.aperture.is_finite()) {
            return bad(format!("aperture must be positive, got {}", self.aperture));
        }
        if !(self.gap >= 0.0 && self.gap.is_finite()) {
            return bad(format!("gap must be non-negative, got {}", self.gap));
        }
        if self.n_fingers < 2 || !self.n_fingers.is_multiple_of(2) {
            return bad(format!("n_fingers must be even and at least 2, got {}", self.n_fingers));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacitorTopology {
    /// Finger to floating bottom plate, opposite fingers in series.
    #[default]
    VerticalField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitanceModel {
    pub eps_r: f64,
    pub h_piezo: f64,
    #[serde(default)]
    pub topology: CapacitorTopology,
}

impl Default for CapacitanceModel {
    fn default() -> Self {
        Self {
            eps_r: 16.0,
            h_piezo: 400e-9,
            topology: CapacitorTopology::VerticalField,
        }
    }
}

impl CapacitanceModel {
    pub fn new(eps_r: f64, h_piezo: f64) -> Result<Self, DesignError> {
        let m = Self {
            eps_r,
            h_piezo,
            topology: CapacitorTopology::VerticalField,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), DesignError> {
        if !(self.eps_r > 1.0 && self.eps_r.is_finite()) {
            return Err(DesignError::InvalidCapacitance(format!("eps_r must exceed 1, got {}", self.eps_r)));
        }
        if !(self.h_piezo > 0.0 && self.h_piezo.is_finite()) {
            return Err(DesignError::InvalidCapacitance(format!("h_piezo must be positive, got {}", self.h_piezo)));
        }
        Ok(())
    }

    /// Capacitance of one finger to the bottom plate.
    pub fn finger_capacitance(&self, idt: &IdtSpec) -> f64 {
        EPSILON_0 * self.eps_r * idt.aperture * idt.finger_width / self.h_piezo
    }
}

/// C0 = (n/2)·(c_f/2): pairs of opposite fingers in series through the
/// floating plate, pairs in parallel. Fringing and busbars are ignored.
pub fn static_capacitance(idt: &IdtSpec, cap: &CapacitanceModel) -> f64 {
    let c_f = cap.finger_capacitance(idt);
    f64::from(idt.n_fingers) / 2.0 * (c_f / 2.0)
}

pub fn impedance_magnitude(f: f64, c0: f64) -> f64 {
    1.0 / (2.0 * PI * f * c0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchOptions {
    pub max_fingers: u32,
    pub dummy_count_per_side: u32,
    /// Aperture in wavelengths.
    pub aperture_wavelengths: f64,
    /// Gap in wavelengths.
    pub gap_wavelengths: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            max_fingers: 1000,
            dummy_count_per_side: 3,
            aperture_wavelengths: 10.0,
            gap_wavelengths: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorDesign {
    pub id: String,
    pub idt: IdtSpec,
    pub plate: PlateSpec,
    pub mode: LambMode,
    pub target_impedance: f64,
    pub f_mid: f64,
    pub layer: Layer,
    pub dose: f64,
    pub c0_estimate: f64,
    pub achieved_impedance: f64,
}

impl ResonatorDesign {
    pub fn design_id(pitch: f64, mode: LambMode) -> String {
        format!("p{:05.0}nm_{mode}", pitch * 1e9)
    }
}

/// Sizes an IDT at `pitch` so its static impedance at the `mode` frequency
/// is at or just below `target_impedance`.
pub fn match_finger_count(
    pitch: f64,
    plate: &PlateSpec,
    cap: &CapacitanceModel,
    mode: LambMode,
    target_impedance: f64,
    opts: &MatchOptions,
) -> Result<ResonatorDesign, DesignError> {
    cap.validate()?;
    if !(target_impedance > 0.0) {
        return Err(DesignError::InvalidTarget(target_impedance));
    }
    let assignment = layer_assignment(pitch)?;
    let dose = recommend_dose(pitch / 2.0)?;
    let wavelength = 2.0 * pitch;
    let f_mid = frequency_at_pitch(plate, mode, pitch)?;
    let probe = IdtSpec::new(
        pitch,
        opts.aperture_wavelengths * wavelength,
        opts.gap_wavelengths * wavelength,
        2,
        opts.dummy_count_per_side,
    )?;
    let c_f = cap.finger_capacitance(&probe);
    // |Z| = 4/(2π f c_f n) ≤ target  ⇔  n ≥ 4/(2π f c_f target)
    let n_min = 4.0 / (2.0 * PI * f_mid * c_f * target_impedance);
    let mut n = ((n_min / 2.0).ceil() as u64 * 2).max(2);
    let z = |n: u64| 4.0 / (2.0 * PI * f_mid * c_f * n as f64);
    while n > 2 && z(n - 2) <= target_impedance {
        n -= 2;
    }
    while z(n) > target_impedance {
        n += 2;
    }
    if n > u64::from(opts.max_fingers) {
        return Err(DesignError::FingerCap { needed: n, cap: opts.max_fingers });
    }
    let idt = IdtSpec { n_fingers: n as u32, ..probe };
    let c0 = static_capacitance(&idt, cap);
    Ok(ResonatorDesign {
        id: ResonatorDesign::design_id(pitch, mode),
        idt,
        plate: plate.clone(),
        mode,
        target_impedance,
        f_mid,
        layer: assignment.idt,
        dose,
        c0_estimate: c0,
        achieved_impedance: impedance_magnitude(f_mid, c0),
    })
}

/// Exposure dose (mJ/cm²) for a finger width: the narrowest fingers need the
/// higher dose, everything else shares one.
pub fn recommend_dose(finger_width: f64) -> Result<f64, DesignError> {
    let lo = MIN_FINGER_WIDTH * (1.0 - RANGE_SLACK);
    let hi = MAX_FINGER_WIDTH * (1.0 + RANGE_SLACK);
    if !(finger_width >= lo && finger_width <= hi) {
        return Err(DesignError::DoseRange { width_nm: finger_width * 1e9 });
    }
    Ok(if finger_width <= MIN_FINGER_WIDTH + DOSE_WIDTH_TOLERANCE {
        DOSE_NARROW
    } else {
        DOSE_DEFAULT
    })
}

fn within(x: f64, (lo, hi): (f64, f64)) -> bool {
    x >= lo * (1.0 - RANGE_SLACK) && x <= hi * (1.0 + RANGE_SLACK)
}

pub fn layer_assignment(pitch: f64) -> Result<LayerAssignment, DesignError> {
    let pitch_nm = pitch * 1e9;
    if within(pitch, SMALL_RANGE) {
        Ok(LayerAssignment { idt: Layer::Small, pads: true })
    } else if within(pitch, LARGE_RANGE) {
        Ok(LayerAssignment { idt: Layer::Large, pads: true })
    } else if pitch > SMALL_RANGE.1 && pitch < LARGE_RANGE.0 {
        Err(DesignError::LayerGap { pitch_nm })
    } else {
        Err(DesignError::LayerRange { pitch_nm })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCount {
    pub pitch_m: f64,
    pub n_fingers: u32,
}

/// Pitch sweep shipped with the toolkit, with the two published finger
/// counts kept as reference metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignCatalog {
    pub pitches_m: Vec<f64>,
    pub reference_finger_counts: Vec<ReferenceCount>,
    pub target_impedance_ohm: f64,
}

impl DesignCatalog {
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../data/catalog.json")).expect("bundled catalog parses")
    }
}

/// Designs for every pitch, in input order.
pub fn design_sweep(
    pitches: &[f64],
    plate: &PlateSpec,
    cap: &CapacitanceModel,
    mode: LambMode,
    target_impedance: f64,
    opts: &MatchOptions,
    exec: crate::Execution,
) -> Vec<Result<ResonatorDesign, DesignError>> {
    exec.map(pitches, |&p| match_finger_count(p, plate, cap, mode, target_impedance, opts))
}
