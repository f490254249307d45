use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct TouchstoneError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> TouchstoneError {
    TouchstoneError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrequencyUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FrequencyUnit {
    pub const ALL: [FrequencyUnit; 4] = [FrequencyUnit::Hz, FrequencyUnit::KHz, FrequencyUnit::MHz, FrequencyUnit::GHz];

    pub fn multiplier(self) -> f64 {
        match self {
            FrequencyUnit::Hz => 1.0,
            FrequencyUnit::KHz => 1e3,
            FrequencyUnit::MHz => 1e6,
            FrequencyUnit::GHz => 1e9,
        }
    }

    fn token(self) -> &'static str {
        match self {
            FrequencyUnit::Hz => "HZ",
            FrequencyUnit::KHz => "KHZ",
            FrequencyUnit::MHz => "MHZ",
            FrequencyUnit::GHz => "GHZ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataFormat {
    RI,
    MA,
    DB,
}

impl DataFormat {
    pub const ALL: [DataFormat; 3] = [DataFormat::RI, DataFormat::MA, DataFormat::DB];

    fn token(self) -> &'static str {
        match self {
            DataFormat::RI => "RI",
            DataFormat::MA => "MA",
            DataFormat::DB => "DB",
        }
    }

    fn decode(self, a: f64, b: f64) -> Complex64 {
        match self {
            DataFormat::RI => Complex64::new(a, b),
            DataFormat::MA => Complex64::from_polar(a, b.to_radians()),
            DataFormat::DB => Complex64::from_polar(10f64.powf(a / 20.0), b.to_radians()),
        }
    }

    fn encode(self, s: Complex64) -> (f64, f64) {
        match self {
            DataFormat::RI => (s.re, s.im),
            DataFormat::MA => (s.norm(), s.arg().to_degrees()),
            DataFormat::DB => (20.0 * s.norm().log10(), s.arg().to_degrees()),
        }
    }
}

/// One-port Touchstone v1.1 data. Frequencies are stored in Hz and values
/// as complex S₁₁ regardless of the on-disk unit and format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchstoneFile {
    pub frequency_unit: FrequencyUnit,
    pub format: DataFormat,
    pub z0: f64,
    pub points: Vec<(f64, Complex64)>,
    /// Comment lines without the leading '!'.
    pub comments: Vec<String>,
}

impl TouchstoneFile {
    /// Same settings and comments, and every point equal within `tol`
    /// relative (frequency) and absolute (S).
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.frequency_unit == other.frequency_unit
            && self.format == other.format
            && self.z0 == other.z0
            && self.comments == other.comments
            && self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a.0 - b.0).abs() <= tol * a.0.abs().max(1.0) && (a.1 - b.1).norm() <= tol)
    }
}

/// Parses a one-port file. The option line is case-insensitive with
/// defaults GHz, MA and R 50; later option lines are ignored.
pub fn parse_touchstone(text: &str) -> Result<TouchstoneFile, TouchstoneError> {
    let mut unit = FrequencyUnit::GHz;
    let mut format = DataFormat::MA;
    let mut z0 = 50.0;
    let mut seen_option = false;
    let mut comments = Vec::new();
    let mut points: Vec<(f64, Complex64)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw.trim();
        if let Some(c) = trimmed.strip_prefix('!') {
            comments.push(c.to_string());
            continue;
        }
        let content = trimmed.split('!').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(opts) = content.strip_prefix('#') {
            if seen_option {
                continue;
            }
            seen_option = true;
            let toks: Vec<String> = opts.split_whitespace().map(|t| t.to_ascii_uppercase()).collect();
            let mut i = 0;
            while i < toks.len() {
                match toks[i].as_str() {
                    "HZ" => unit = FrequencyUnit::Hz,
                    "KHZ" => unit = FrequencyUnit::KHz,
                    "MHZ" => unit = FrequencyUnit::MHz,
                    "GHZ" => unit = FrequencyUnit::GHz,
                    "S" => {}
                    "Y" | "Z" | "H" | "G" => {
                        return Err(err(line_no, format!("parameter {} is not supported, only S", toks[i])));
                    }
                    "RI" => format = DataFormat::RI,
                    "MA" => format = DataFormat::MA,
                    "DB" => format = DataFormat::DB,
                    "R" => {
                        i += 1;
                        let v = toks
                            .get(i)
                            .and_then(|t| t.parse::<f64>().ok())
                            .ok_or_else(|| err(line_no, "R must be followed by a number"))?;
                        if !(v > 0.0) {
                            return Err(err(line_no, format!("reference impedance must be positive, got {v}")));
                        }
                        z0 = v;
                    }
                    other => return Err(err(line_no, format!("unknown option token '{other}'"))),
                }
                i += 1;
            }
            continue;
        }
        let cols: Vec<&str> = content.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(err(line_no, format!("expected 3 columns for a one-port row, found {}", cols.len())));
        }
        let mut vals = [0.0; 3];
        for (v, c) in vals.iter_mut().zip(&cols) {
            *v = c.parse().map_err(|_| err(line_no, format!("'{c}' is not a number")))?;
        }
        let f = vals[0] * unit.multiplier();
        if let Some(&(prev, _)) = points.last() {
            if !(f > prev) {
                return Err(err(line_no, format!("frequency {f:e} Hz does not increase")));
            }
        }
        if !f.is_finite() || f < 0.0 {
            return Err(err(line_no, format!("invalid frequency {}", cols[0])));
        }
        points.push((f, format.decode(vals[1], vals[2])));
    }
    if points.is_empty() {
        return Err(err(text.lines().count().max(1), "no data rows"));
    }
    Ok(TouchstoneFile {
        frequency_unit: unit,
        format,
        z0,
        points,
        comments,
    })
}

/// Writes the file in its own unit and format with full precision.
pub fn serialize_touchstone(file: &TouchstoneFile) -> String {
    let mut out = String::new();
    for c in &file.comments {
        let _ = writeln!(out, "!{c}");
    }
    let _ = writeln!(out, "# {} S {} R {}", file.frequency_unit.token(), file.format.token(), file.z0);
    let m = file.frequency_unit.multiplier();
    for &(f, s) in &file.points {
        let (a, b) = file.format.encode(s);
        let _ = writeln!(out, "{:e} {:e} {:e}", f / m, a, b);
    }
    out
}
