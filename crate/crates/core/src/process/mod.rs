//! Process flows as data: layer-stack bookkeeping over a few lateral
//! columns, chemical-compatibility rules, etch budgets and ashing times.

mod fixtures;
mod rules;
mod stack;

pub use fixtures::{golden_flow, Adhesion, Mutation};
pub use rules::{check_compatibility, registry, FlowReport, Phase, Rule, RuleCode, RuleKind, Severity, Violation};
pub use stack::{simulate_stack, Column, Layer, StackState};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProcessError {
    #[error("no rate for {material} under {chemistry}{}", temperature.map(|t| format!(" at {t} °C")).unwrap_or_default())]
    MissingRate {
        material: String,
        chemistry: Chemistry,
        temperature: Option<f64>,
    },
    #[error("step {index} ({label}): {message}")]
    InvalidStep { index: usize, label: String, message: String },
    #[error("flow has no steps")]
    EmptyFlow,
    #[error("invalid rate table: {0}")]
    InvalidRates(String),
    #[error("invalid etch budget input: {0}")]
    InvalidBudget(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Deposit,
    SpinCoat,
    Expose,
    Develop,
    EtchDry,
    EtchIbe,
    EtchVapor,
    EtchWet,
    StripAsh,
    StripWet,
    Rinse,
    Release,
}

impl StepKind {
    pub fn is_additive(self) -> bool {
        matches!(self, StepKind::Deposit | StepKind::SpinCoat)
    }

    pub fn is_subtractive(self) -> bool {
        matches!(
            self,
            StepKind::EtchDry
                | StepKind::EtchIbe
                | StepKind::EtchVapor
                | StepKind::EtchWet
                | StepKind::StripAsh
                | StepKind::StripWet
                | StepKind::Release
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Chemistry {
    #[serde(rename = "TMA238WA")]
    Tma238wa,
    DiWater,
    Cl2Bcl3,
    C4f8O2,
    C4f8H2He,
    O2Plasma,
    FormingGas,
    #[serde(rename = "REMOVER_1165")]
    Remover1165,
    DiluteHf,
    Bhf,
    VaporHf,
    ArIon,
    Xef2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChemClass {
    Developer,
    Rinse,
    Chlorine,
    Fluorocarbon,
    OxygenAsh,
    ReducingAsh,
    SolventStrip,
    WetHf,
    VaporHf,
    IonMill,
    XenonDifluoride,
}

impl Chemistry {
    pub fn class(self) -> ChemClass {
        match self {
            Chemistry::Tma238wa => ChemClass::Developer,
            Chemistry::DiWater => ChemClass::Rinse,
            Chemistry::Cl2Bcl3 => ChemClass::Chlorine,
            Chemistry::C4f8O2 | Chemistry::C4f8H2He => ChemClass::Fluorocarbon,
            Chemistry::O2Plasma => ChemClass::OxygenAsh,
            Chemistry::FormingGas => ChemClass::ReducingAsh,
            Chemistry::Remover1165 => ChemClass::SolventStrip,
            Chemistry::DiluteHf | Chemistry::Bhf => ChemClass::WetHf,
            Chemistry::VaporHf => ChemClass::VaporHf,
            Chemistry::ArIon => ChemClass::IonMill,
            Chemistry::Xef2 => ChemClass::XenonDifluoride,
        }
    }
}

impl fmt::Display for Chemistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned));
        f.write_str(s.as_deref().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialClass {
    Substrate,
    Metal,
    Dielectric,
    Photoresist,
    Barc { developable: bool },
    Other,
}

impl MaterialClass {
    pub fn of(material: &str) -> Self {
        match material {
            "Si" => MaterialClass::Substrate,
            "Al" | "Pt" | "Ti" | "Mo" => MaterialClass::Metal,
            "AlN" | "AlScN" | "SiO2" => MaterialClass::Dielectric,
            "M108Y" | "M35G" => MaterialClass::Photoresist,
            "DS-K101" => MaterialClass::Barc { developable: true },
            "DUV42-P" => MaterialClass::Barc { developable: false },
            _ => MaterialClass::Other,
        }
    }

    pub fn is_organic(self) -> bool {
        matches!(self, MaterialClass::Photoresist | MaterialClass::Barc { .. })
    }
}

/// Rate key alias shared by every photoresist and BARC.
pub const ORGANIC: &str = "resist";

/// Angle/time segments repeated `repeats` times. Beam settings are kept
/// verbatim as metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbeRecipe {
    /// (tilt in degrees, seconds)
    pub segments: Vec<(f64, f64)>,
    pub repeats: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sidewall_angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_voltage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_current: Option<String>,
}

impl IbeRecipe {
    /// Total beam time in seconds.
    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.1).sum::<f64>() * f64::from(self.repeats)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessStep {
    /// Short id such as "c" or "g2".
    pub label: String,
    pub kind: Option<StepKind>,
    /// Deposited or coated material.
    pub material: Option<String>,
    /// Thickness added (additive steps) or removed (subtractive steps), m.
    pub thickness: Option<f64>,
    pub chemistry: Option<Chemistry>,
    pub temperature: Option<f64>,
    pub duration: Option<f64>,
    pub tool: Option<String>,
    pub recipe: Option<IbeRecipe>,
    /// Materials a selective etch or strip may remove.
    pub removes: Vec<String>,
    /// Columns cleared by an exposure.
    pub open: Vec<Column>,
    pub pulses: Option<u32>,
    pub note: Option<String>,
}

impl ProcessStep {
    pub fn new(label: &str, kind: StepKind) -> Self {
        Self {
            label: label.into(),
            kind: Some(kind),
            ..Default::default()
        }
    }

    pub fn kind(&self) -> StepKind {
        self.kind.expect("validated step")
    }

    /// Beam or process time: recipe total for IBE, else the duration.
    pub fn process_time(&self) -> Option<f64> {
        self.recipe.as_ref().map(IbeRecipe::total_time).or(self.duration)
    }

    pub fn validate(&self, index: usize) -> Result<(), ProcessError> {
        let bad = |m: &str| {
            Err(ProcessError::InvalidStep {
                index,
                label: self.label.clone(),
                message: m.into(),
            })
        };
        let Some(kind) = self.kind else {
            return bad("missing kind");
        };
        if kind.is_additive() {
            if self.material.as_deref().unwrap_or("").is_empty() {
                return bad("additive step needs a material");
            }
            if !self.thickness.is_some_and(|t| t > 0.0 && t.is_finite()) {
                return bad("additive step needs a positive thickness");
            }
        }
        if kind.is_subtractive() && self.chemistry.is_none() && self.recipe.is_none() {
            return bad("subtractive step needs a chemistry or recipe");
        }
        if matches!(kind, StepKind::Develop | StepKind::Rinse) && self.chemistry.is_none() {
            return bad("develop and rinse steps need a chemistry");
        }
        for (name, v) in [("duration", self.duration), ("thickness", self.thickness)] {
            if v.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                return bad(&format!("{name} must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub name: String,
    #[serde(default = "default_substrate")]
    pub substrate: String,
    #[serde(default = "default_substrate_thickness")]
    pub substrate_thickness: f64,
    /// XeF₂ pulses needed before the devices count as suspended.
    #[serde(default = "default_release_pulses")]
    pub release_pulses: u32,
    pub steps: Vec<ProcessStep>,
}

fn default_substrate() -> String {
    "Si".into()
}

fn default_substrate_thickness() -> f64 {
    525e-6
}

fn default_release_pulses() -> u32 {
    50
}

impl Flow {
    pub fn validate(&self) -> Result<(), ProcessError> {
        if self.steps.is_empty() {
            return Err(ProcessError::EmptyFlow);
        }
        self.steps.iter().enumerate().try_for_each(|(i, s)| s.validate(i))
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub material: String,
    pub chemistry: Chemistry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub nm_per_min: f64,
}

/// Etch, mill and ash rates. Lookups try the exact material, then the
/// organic alias for resists and BARCs; an entry with a temperature only
/// matches that temperature, one without matches any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub entries: Vec<RateEntry>,
}

impl Default for RateTable {
    /// Placeholder values, not measurements. IBE milling keeps resists at
    /// or below SiO₂ and AlN close to AlScN; ash rates are 100 nm/min in
    /// forming gas at 120 °C and 400 nm/min at 250 °C.
    fn default() -> Self {
        let e = |m: &str, c: Chemistry, t: Option<f64>, r: f64| RateEntry {
            material: m.into(),
            chemistry: c,
            temperature: t,
            nm_per_min: r,
        };
        let mut entries: Vec<RateEntry> = [
            ("AlScN", 20.0),
            ("AlN", 21.0),
            ("SiO2", 25.0),
            ("M35G", 22.0),
            ("M108Y", 22.0),
            (ORGANIC, 22.0),
            ("Pt", 30.0),
            ("Si", 25.0),
            ("Al", 35.0),
            ("Ti", 15.0),
        ]
        .iter()
        .map(|&(m, r)| e(m, Chemistry::ArIon, None, r))
        .collect();
        entries.push(e(ORGANIC, Chemistry::FormingGas, Some(120.0), 100.0));
        entries.push(e(ORGANIC, Chemistry::FormingGas, Some(250.0), 400.0));
        entries.push(e(ORGANIC, Chemistry::O2Plasma, None, 500.0));
        Self { entries }
    }
}

impl RateTable {
    pub fn validate(&self) -> Result<(), ProcessError> {
        for e in &self.entries {
            if !(e.nm_per_min > 0.0 && e.nm_per_min.is_finite()) {
                return Err(ProcessError::InvalidRates(format!(
                    "{} under {} has non-positive rate {}",
                    e.material, e.chemistry, e.nm_per_min
                )));
            }
        }
        Ok(())
    }

    fn find(&self, material: &str, chemistry: Chemistry, temperature: Option<f64>) -> Option<f64> {
        let hit = |e: &&RateEntry| {
            e.material == material
                && e.chemistry == chemistry
                && match e.temperature {
                    Some(t) => temperature.is_some_and(|x| (x - t).abs() < 1e-9),
                    None => true,
                }
        };
        // exact temperature match wins over a temperature-free entry
        let mut best: Option<&RateEntry> = None;
        for e in self.entries.iter().filter(hit) {
            if best.is_none() || (e.temperature.is_some() && best.is_some_and(|b| b.temperature.is_none())) {
                best = Some(e);
            }
        }
        best.map(|e| e.nm_per_min)
    }

    /// Rate in nm/min.
    pub fn rate(&self, material: &str, chemistry: Chemistry, temperature: Option<f64>) -> Result<f64, ProcessError> {
        self.find(material, chemistry, temperature)
            .or_else(|| {
                MaterialClass::of(material)
                    .is_organic()
                    .then(|| self.find(ORGANIC, chemistry, temperature))
                    .flatten()
            })
            .ok_or_else(|| ProcessError::MissingRate {
                material: material.into(),
                chemistry,
                temperature,
            })
    }

    /// Rate in m/s.
    pub fn rate_si(&self, material: &str, chemistry: Chemistry, temperature: Option<f64>) -> Result<f64, ProcessError> {
        Ok(self.rate(material, chemistry, temperature)? * 1e-9 / 60.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtchBudget {
    pub etch_time_s: f64,
    pub consumed_mask: f64,
    pub remaining_mask: f64,
    /// mask thickness − consumed; negative on failure.
    pub margin: f64,
    pub pass: bool,
}

/// Mask consumption for etching `target_depth·(1 + overetch)` of the target.
pub fn etch_budget(
    mask_material: &str,
    mask_thickness: f64,
    target_material: &str,
    target_depth: f64,
    overetch_fraction: f64,
    chemistry: Chemistry,
    rates: &RateTable,
) -> Result<EtchBudget, ProcessError> {
    for (name, v) in [
        ("mask_thickness", mask_thickness),
        ("target_depth", target_depth),
        ("overetch_fraction", overetch_fraction),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(ProcessError::InvalidBudget(format!("{name} must be non-negative")));
        }
    }
    let r_target = rates.rate_si(target_material, chemistry, None)?;
    let r_mask = rates.rate_si(mask_material, chemistry, None)?;
    let t = target_depth * (1.0 + overetch_fraction) / r_target;
    let consumed = t * r_mask;
    Ok(EtchBudget {
        etch_time_s: t,
        consumed_mask: consumed,
        remaining_mask: (mask_thickness - consumed).max(0.0),
        margin: mask_thickness - consumed,
        pass: consumed < mask_thickness,
    })
}

/// Forming-gas ashing time in seconds; only tabulated temperatures are
/// accepted.
pub fn ashing_time(resist_thickness: f64, temperature: f64, rates: &RateTable) -> Result<f64, ProcessError> {
    if !(resist_thickness >= 0.0 && resist_thickness.is_finite()) {
        return Err(ProcessError::InvalidBudget("resist thickness must be non-negative".into()));
    }
    let r = rates.rate(ORGANIC, Chemistry::FormingGas, Some(temperature))?;
    Ok(resist_thickness / (r * 1e-9 / 60.0))
}
