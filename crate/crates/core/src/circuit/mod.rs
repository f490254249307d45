//! Multi-branch modified Butterworth-Van Dyke (mBVD) model.
//!
//! Topology: a series resistance `r_s` feeding the parallel combination of
//! the static branch (`r_0` in series with `c_0`) and one series RLC
//! motional branch per acoustic mode:
//!
//! ```text
//!  Y(ω) = 1 / ( r_s + 1 / ( Y_static(ω) + Σ_i Y_branch,i(ω) ) )
//!  Y_static   = 1 / ( r_0 + 1/(jωc_0) )
//!  Y_branch,i = 1 / ( r_m,i + jωl_m,i + 1/(jωc_m,i) )
//! ```
//!
//! All quantities are SI (Hz, Ω, H, F, S).

mod deembed;
mod fit;

pub use deembed::de_embed_open_short;
pub use fit::{fit_mbvd, fit_mbvd_batch, FitOptions, FitOutcome, FitReport};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("branch index {index} out of range ({count} branches)")]
    BranchIndex { index: usize, count: usize },
    #[error("found {found} admittance peaks but {requested} branches were requested (deficit {})", requested - found)]
    InsufficientPeaks { requested: usize, found: usize },
    #[error("fit did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Box<FitOutcome>,
    },
    #[error("degenerate de-embedding fixture: {0}")]
    DegenerateFixture(&'static str),
}

/// Optional mode tag carried by a motional branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeTag {
    A0,
    S0,
    A1,
    S1,
    Spurious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionalBranch {
    pub r_m: f64,
    pub l_m: f64,
    pub c_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<ModeTag>,
}

impl MotionalBranch {
    pub fn new(r_m: f64, l_m: f64, c_m: f64) -> Self {
        Self {
            r_m,
            l_m,
            c_m,
            label: None,
        }
    }

    pub fn with_label(mut self, label: ModeTag) -> Self {
        self.label = Some(label);
        self
    }

    /// Series resonance 1/(2π√(l_m c_m)).
    pub fn resonance_frequency(&self) -> f64 {
        1.0 / (2.0 * PI * (self.l_m * self.c_m).sqrt())
    }

    fn admittance(&self, omega: f64) -> Complex64 {
        let z = Complex64::new(self.r_m, omega * self.l_m - 1.0 / (omega * self.c_m));
        z.inv()
    }

    fn validate(&self) -> Result<(), CircuitError> {
        if !(self.r_m >= 0.0 && self.r_m.is_finite()) {
            return Err(CircuitError::InvalidInput(format!("r_m must be >= 0, got {}", self.r_m)));
        }
        if !(self.l_m > 0.0 && self.l_m.is_finite()) {
            return Err(CircuitError::InvalidInput(format!("l_m must be > 0, got {}", self.l_m)));
        }
        if !(self.c_m > 0.0 && self.c_m.is_finite()) {
            return Err(CircuitError::InvalidInput(format!("c_m must be > 0, got {}", self.c_m)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticNetwork {
    pub c_0: f64,
    #[serde(default)]
    pub r_0: f64,
    #[serde(default)]
    pub r_s: f64,
}

impl StaticNetwork {
    pub fn new(c_0: f64, r_0: f64, r_s: f64) -> Self {
        Self { c_0, r_0, r_s }
    }

    fn admittance(&self, omega: f64) -> Complex64 {
        // r_0 + 1/(jωc_0)
        Complex64::new(self.r_0, -1.0 / (omega * self.c_0)).inv()
    }

    fn validate(&self) -> Result<(), CircuitError> {
        if !(self.c_0 > 0.0 && self.c_0.is_finite()) {
            return Err(CircuitError::InvalidInput(format!("c_0 must be > 0, got {}", self.c_0)));
        }
        if !(self.r_0 >= 0.0 && self.r_0.is_finite()) || !(self.r_s >= 0.0 && self.r_s.is_finite()) {
            return Err(CircuitError::InvalidInput("r_0 and r_s must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct MbvdModel {
    static_net: StaticNetwork,
    branches: Vec<MotionalBranch>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    static_net: StaticNetwork,
    #[serde(default)]
    branches: Vec<MotionalBranch>,
}

impl TryFrom<RawModel> for MbvdModel {
    type Error = CircuitError;
    fn try_from(raw: RawModel) -> Result<Self, Self::Error> {
        MbvdModel::new(raw.static_net, raw.branches)
    }
}

impl From<MbvdModel> for RawModel {
    fn from(m: MbvdModel) -> Self {
        RawModel {
            static_net: m.static_net,
            branches: m.branches,
        }
    }
}

impl MbvdModel {
    /// Validates every element and sorts branches by ascending resonance.
    /// Two branches sharing a resonance frequency are rejected.
    pub fn new(static_net: StaticNetwork, mut branches: Vec<MotionalBranch>) -> Result<Self, CircuitError> {
        static_net.validate()?;
        for b in &branches {
            b.validate()?;
        }
        branches.sort_by(|a, b| a.resonance_frequency().total_cmp(&b.resonance_frequency()));
        for w in branches.windows(2) {
            if w[0].resonance_frequency() >= w[1].resonance_frequency() {
                return Err(CircuitError::InvalidInput(format!(
                    "duplicate branch resonance at {} Hz",
                    w[0].resonance_frequency()
                )));
            }
        }
        Ok(Self { static_net, branches })
    }

    pub fn static_net(&self) -> &StaticNetwork {
        &self.static_net
    }

    pub fn branches(&self) -> &[MotionalBranch] {
        &self.branches
    }

    /// Admittance at a single frequency (Hz).
    pub fn admittance_at(&self, frequency: f64) -> Complex64 {
        let omega = 2.0 * PI * frequency;
        let y_par = self
            .branches
            .iter()
            .fold(self.static_net.admittance(omega), |acc, b| acc + b.admittance(omega));
        // Y = Y_par / (1 + r_s Y_par), finite even when Y_par blows up at a lossless resonance
        if !y_par.is_finite() {
            return if self.static_net.r_s > 0.0 {
                Complex64::new(1.0 / self.static_net.r_s, 0.0)
            } else {
                y_par
            };
        }
        y_par / (1.0 + self.static_net.r_s * y_par)
    }

    /// Returns a copy with every impedance multiplied by `s`.
    pub fn scaled_impedance(&self, s: f64) -> MbvdModel {
        MbvdModel {
            static_net: StaticNetwork {
                c_0: self.static_net.c_0 / s,
                r_0: self.static_net.r_0 * s,
                r_s: self.static_net.r_s * s,
            },
            branches: self
                .branches
                .iter()
                .map(|b| MotionalBranch {
                    r_m: b.r_m * s,
                    l_m: b.l_m * s,
                    c_m: b.c_m / s,
                    label: b.label,
                })
                .collect(),
        }
    }
}

/// Frequency grid plus complex admittance samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrace", into = "RawTrace")]
pub struct AdmittanceTrace {
    frequencies: Vec<f64>,
    admittance: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct RawTrace {
    frequencies: Vec<f64>,
    admittance: Vec<Complex64>,
}

impl TryFrom<RawTrace> for AdmittanceTrace {
    type Error = CircuitError;
    fn try_from(raw: RawTrace) -> Result<Self, Self::Error> {
        AdmittanceTrace::new(raw.frequencies, raw.admittance)
    }
}

impl From<AdmittanceTrace> for RawTrace {
    fn from(t: AdmittanceTrace) -> Self {
        RawTrace {
            frequencies: t.frequencies,
            admittance: t.admittance,
        }
    }
}

impl AdmittanceTrace {
    pub fn new(frequencies: Vec<f64>, admittance: Vec<Complex64>) -> Result<Self, CircuitError> {
        if frequencies.len() != admittance.len() {
            return Err(CircuitError::InvalidInput(format!(
                "{} frequencies but {} admittance samples",
                frequencies.len(),
                admittance.len()
            )));
        }
        check_frequency_grid(&frequencies)?;
        if admittance.iter().any(|y| !y.is_finite()) {
            return Err(CircuitError::InvalidInput("non-finite admittance sample".into()));
        }
        Ok(Self {
            frequencies,
            admittance,
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn admittance(&self) -> &[Complex64] {
        &self.admittance
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

fn check_frequency_grid(frequencies: &[f64]) -> Result<(), CircuitError> {
    if frequencies.len() < 2 {
        return Err(CircuitError::InvalidInput("at least two frequencies are required".into()));
    }
    if frequencies.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(CircuitError::InvalidInput("frequencies must be positive and finite".into()));
    }
    if let Some(i) = frequencies.windows(2).position(|w| w[1] <= w[0]) {
        return Err(CircuitError::InvalidInput(format!(
            "frequencies not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}

/// Evaluates the model on a strictly increasing, positive frequency grid.
pub fn mbvd_admittance(model: &MbvdModel, frequencies: &[f64]) -> Result<AdmittanceTrace, CircuitError> {
    check_frequency_grid(frequencies)?;
    let admittance = frequencies.iter().map(|&f| model.admittance_at(f)).collect();
    Ok(AdmittanceTrace {
        frequencies: frequencies.to_vec(),
        admittance,
    })
}

/// Per-mode figures of merit. `q_r` is `f64::INFINITY` for a lossless branch
/// (serialized as `null`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMetrics {
    pub f_r: f64,
    pub f_a: f64,
    #[serde(with = "unbounded")]
    pub q_r: f64,
    pub k_eff_sq: f64,
}

impl ModeMetrics {
    /// Builds metrics from f_r, Q and k², deriving f_a = f_r/√(1−k²)
    /// (equivalent to f_r√(1 + c_m/c_0)).
    pub fn from_coupling(f_r: f64, q_r: f64, k_eff_sq: f64) -> Self {
        Self {
            f_r,
            f_a: f_r / (1.0 - k_eff_sq).sqrt(),
            q_r,
            k_eff_sq,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.f_r > 0.0 && self.f_r < self.f_a && self.q_r > 0.0 && self.k_eff_sq > 0.0 && self.k_eff_sq < 1.0
    }
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// f_r, f_a, loaded Q and effective coupling of one branch.
///
/// Q_r = 1/(ω_r c_m (r_m + r_s)), k_eff² = c_m/(c_m + c_0), and
/// f_a = f_r √(1 + c_m/c_0) using this branch alone against c_0.
pub fn resonance_metrics(model: &MbvdModel, branch_index: usize) -> Result<ModeMetrics, CircuitError> {
    let branch = model.branches.get(branch_index).ok_or(CircuitError::BranchIndex {
        index: branch_index,
        count: model.branches.len(),
    })?;
    let c_0 = model.static_net.c_0;
    let f_r = branch.resonance_frequency();
    let omega_r = 2.0 * PI * f_r;
    let r_total = branch.r_m + model.static_net.r_s;
    let q_r = if r_total > 0.0 {
        1.0 / (omega_r * branch.c_m * r_total)
    } else {
        f64::INFINITY
    };
    Ok(ModeMetrics {
        f_r,
        f_a: f_r * (1.0 + branch.c_m / c_0).sqrt(),
        q_r,
        k_eff_sq: branch.c_m / (branch.c_m + c_0),
    })
}

/// Metrics for every branch in canonical order.
pub fn all_metrics(model: &MbvdModel) -> Vec<ModeMetrics> {
    (0..model.branches.len())
        .map(|i| resonance_metrics(model, i).expect("index in range"))
        .collect()
}
