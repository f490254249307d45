//! Toolkit-wide configuration, loaded from one JSON document. Every field
//! has a default, so `{}` is a valid config.

use crate::design::{CapacitanceModel, DesignCatalog, DesignError, MatchOptions};
use crate::dispersion::{DispersionError, LambMode, PlateMaterial, PlateSpec};
use crate::layout::{IdtLayoutOptions, LayerMap, LayoutError, WaferGeometry};
use crate::process::{ProcessError, RateTable};
use crate::stats::{StatsError, VariationModel};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ConfigError {
            fn from(e: $t) -> Self {
                ConfigError::Invalid(e.to_string())
            }
        }
    )*};
}
invalid_from!(DispersionError, DesignError, LayoutError, ProcessError, StatsError);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub material: PlateMaterial,
    /// Piezoelectric plate thickness (m).
    pub thickness: f64,
    pub capacitance: CapacitanceModel,
    pub design_mode: LambMode,
    pub target_impedance: f64,
    pub matching: MatchOptions,
    /// Pitch sweep (m).
    pub pitches: Vec<f64>,
    pub layers: LayerMap,
    pub idt_layout: IdtLayoutOptions,
    /// Chip size (mm).
    pub chip_mm: (f64, f64),
    pub wafer: WaferGeometry,
    pub rates: RateTable,
    /// Optional rate table file, resolved relative to the config file;
    /// replaces `rates` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates_file: Option<PathBuf>,
    pub variation: VariationModel,
    /// Master seed for every stochastic command; overrides `variation.seed`.
    pub seed: u64,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        let catalog = DesignCatalog::builtin();
        let plate = PlateSpec::default_stack();
        Self {
            material: plate.material,
            thickness: plate.h,
            capacitance: CapacitanceModel::default(),
            design_mode: LambMode::S0,
            target_impedance: catalog.target_impedance_ohm,
            matching: MatchOptions::default(),
            pitches: catalog.pitches_m,
            layers: LayerMap::default(),
            idt_layout: IdtLayoutOptions::default(),
            chip_mm: (17.0, 3.0),
            wafer: WaferGeometry::default(),
            rates: RateTable::default(),
            rates_file: None,
            variation: VariationModel::default(),
            seed: VariationModel::default().seed,
        }
    }
}

impl ToolkitConfig {
    /// Reads, resolves referenced files, and validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.into(),
            source,
        })?;
        if let Some(rel) = &cfg.rates_file {
            let p = path.parent().unwrap_or(Path::new(".")).join(rel);
            let text = std::fs::read_to_string(&p).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
            cfg.rates = serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: p, source })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.plate()?;
        self.capacitance.validate()?;
        self.layers.validate()?;
        self.rates.validate()?;
        self.variation().validate()?;
        if !(self.target_impedance > 0.0 && self.target_impedance.is_finite()) {
            return Err(ConfigError::Invalid("target_impedance must be positive".into()));
        }
        if self.pitches.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(ConfigError::Invalid("pitches must be positive".into()));
        }
        if !(self.chip_mm.0 > 0.0 && self.chip_mm.1 > 0.0) {
            return Err(ConfigError::Invalid("chip size must be positive".into()));
        }
        let w = &self.wafer;
        if !(w.diameter_mm > 0.0 && w.edge_exclusion_mm >= 0.0 && w.street_mm >= 0.0 && 2.0 * w.edge_exclusion_mm < w.diameter_mm) {
            return Err(ConfigError::Invalid("wafer geometry out of range".into()));
        }
        Ok(())
    }

    pub fn plate(&self) -> Result<PlateSpec, ConfigError> {
        Ok(PlateSpec::new(self.material.clone(), self.thickness)?)
    }

    /// Variation model carrying the master seed.
    pub fn variation(&self) -> VariationModel {
        VariationModel {
            seed: self.seed,
            ..self.variation.clone()
        }
    }
}
