//! One-port RF measurement plumbing: Touchstone files, S₁₁ ↔ Y conversion
//! and OSL calibration.

mod calibration;
mod touchstone;

pub use calibration::{apply_correction, osl_solve, CalStandards, ErrorBox, OslMeasurement, StandardModel};
pub use touchstone::{parse_touchstone, serialize_touchstone, DataFormat, FrequencyUnit, TouchstoneError, TouchstoneFile};

use crate::circuit::{AdmittanceTrace, CircuitError};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RfError {
    #[error("S11 = {0} is at the short-circuit singularity")]
    Singular(Complex64),
    #[error("reference impedance must be positive, got {0}")]
    InvalidZ0(f64),
    #[error("calibration failed at point {index} ({frequency:.6e} Hz): {message}")]
    Calibration { index: usize, frequency: f64, message: String },
    #[error("correction is singular for S11 = {0}")]
    Correction(Complex64),
    #[error("{0} error boxes for {1} points")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Touchstone(#[from] TouchstoneError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

const SINGULAR_GUARD: f64 = 1e-12;

/// Y = (1/z0)·(1 − s)/(1 + s).
pub fn s11_to_y(s: Complex64, z0: f64) -> Result<Complex64, RfError> {
    if !(z0 > 0.0) {
        return Err(RfError::InvalidZ0(z0));
    }
    let den = Complex64::new(1.0, 0.0) + s;
    if den.norm() <= SINGULAR_GUARD {
        return Err(RfError::Singular(s));
    }
    Ok((Complex64::new(1.0, 0.0) - s) / den / z0)
}

/// Inverse of [`s11_to_y`]: s = (1 − z0·y)/(1 + z0·y).
pub fn y_to_s11(y: Complex64, z0: f64) -> Result<Complex64, RfError> {
    if !(z0 > 0.0) {
        return Err(RfError::InvalidZ0(z0));
    }
    let zy = y * z0;
    let den = Complex64::new(1.0, 0.0) + zy;
    if den.norm() <= SINGULAR_GUARD {
        return Err(RfError::Singular(den));
    }
    Ok((Complex64::new(1.0, 0.0) - zy) / den)
}

/// Converts a file to an admittance trace, optionally correcting each point
/// with its error box first.
pub fn to_admittance_trace(file: &TouchstoneFile, boxes: Option<&[ErrorBox]>) -> Result<AdmittanceTrace, RfError> {
    if let Some(b) = boxes {
        if b.len() != file.points.len() {
            return Err(RfError::LengthMismatch(b.len(), file.points.len()));
        }
    }
    let mut f = Vec::with_capacity(file.points.len());
    let mut y = Vec::with_capacity(file.points.len());
    for (i, &(freq, s)) in file.points.iter().enumerate() {
        let s = match boxes {
            Some(b) => apply_correction(&b[i], s)?,
            None => s,
        };
        f.push(freq);
        y.push(s11_to_y(s, file.z0)?);
    }
    Ok(AdmittanceTrace::new(f, y)?)
}

/// Builds a file from an admittance trace (used to synthesise test data).
pub fn from_admittance_trace(
    trace: &AdmittanceTrace,
    z0: f64,
    unit: FrequencyUnit,
    format: DataFormat,
) -> Result<TouchstoneFile, RfError> {
    let points = trace
        .frequencies()
        .iter()
        .zip(trace.admittance())
        .map(|(&f, &y)| Ok((f, y_to_s11(y, z0)?)))
        .collect::<Result<Vec<_>, RfError>>()?;
    Ok(TouchstoneFile {
        frequency_unit: unit,
        format,
        z0,
        points,
        comments: Vec::new(),
    })
}
