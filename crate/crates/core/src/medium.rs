//! Electrolyte state of the chamber fluid.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Limiting molar conductivity of NaCl at 25 °C, 126 S·cm²/mol, expressed in
/// S/m per mM (1 mM = 1 mol/m³, 1 S·cm²/mol = 1e-4 S·m²/mol).
pub const NACL_SIEMENS_PER_M_PER_MM: f64 = 126.0e-4;

/// Conductivity of ion-free water.
pub const PURE_WATER_S_PER_M: f64 = 5.5e-6;

pub const PBS_S_PER_M: f64 = 1.8;
pub const PHYSIOLOGICAL_BUFFER_S_PER_M: f64 = 1.5;
pub const CELL_MEDIUM_S_PER_M: f64 = 1.8;

pub const WATER_REL_PERMITTIVITY: f64 = 78.0;
pub const DEFAULT_TEMPERATURE_K: f64 = 298.0;

/// Conductivity of an aqueous NaCl solution.
///
/// Linear in concentration on top of the pure-water floor, so the map is
/// strictly increasing and positive at 0 mM.
pub fn conductivity_from_mm(nacl_mm: f64) -> Result<f64> {
    if !(nacl_mm >= 0.0) || !nacl_mm.is_finite() {
        return Err(SimError::InvalidInput(format!(
            "NaCl concentration must be a finite value >= 0 mM, got {nacl_mm}"
        )));
    }
    Ok(PURE_WATER_S_PER_M + NACL_SIEMENS_PER_M_PER_MM * nacl_mm)
}

/// Shorthand used throughout the models for reference conductivities.
pub fn sigma_of_mm(nacl_mm: f64) -> f64 {
    PURE_WATER_S_PER_M + NACL_SIEMENS_PER_M_PER_MM * nacl_mm.max(0.0)
}

/// Inverse of [`conductivity_from_mm`], clamped at 0 mM.
pub fn equivalent_mm(conductivity_s_per_m: f64) -> f64 {
    ((conductivity_s_per_m - PURE_WATER_S_PER_M) / NACL_SIEMENS_PER_M_PER_MM).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MediumLabel {
    #[serde(rename = "NaCl")]
    NaCl,
    #[serde(rename = "PBS")]
    Pbs,
    #[serde(rename = "physiological-buffer")]
    PhysiologicalBuffer,
    #[serde(rename = "cell-medium")]
    CellMedium,
}

impl MediumLabel {
    fn fixed_conductivity(self) -> Option<f64> {
        match self {
            MediumLabel::NaCl => None,
            MediumLabel::Pbs => Some(PBS_S_PER_M),
            MediumLabel::PhysiologicalBuffer => Some(PHYSIOLOGICAL_BUFFER_S_PER_M),
            MediumLabel::CellMedium => Some(CELL_MEDIUM_S_PER_M),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MediumLabel::NaCl => "NaCl",
            MediumLabel::Pbs => "PBS",
            MediumLabel::PhysiologicalBuffer => "physiological-buffer",
            MediumLabel::CellMedium => "cell-medium",
        }
    }
}

/// Chamber electrolyte. Buffers carry a fixed conductivity and an
/// NaCl-equivalent concentration used for the Debye length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MediumDoc", into = "MediumDoc")]
pub struct Medium {
    pub label: MediumLabel,
    pub nacl_mm: f64,
    pub conductivity_s_per_m: f64,
    pub rel_permittivity: f64,
    pub temperature_k: f64,
}

impl Medium {
    pub fn nacl(nacl_mm: f64) -> Result<Self> {
        Ok(Self {
            label: MediumLabel::NaCl,
            nacl_mm,
            conductivity_s_per_m: conductivity_from_mm(nacl_mm)?,
            rel_permittivity: WATER_REL_PERMITTIVITY,
            temperature_k: DEFAULT_TEMPERATURE_K,
        })
    }

    pub fn buffer(label: MediumLabel) -> Result<Self> {
        let sigma = label.fixed_conductivity().ok_or_else(|| {
            SimError::InvalidInput("NaCl media are built with Medium::nacl".into())
        })?;
        Ok(Self {
            label,
            nacl_mm: equivalent_mm(sigma),
            conductivity_s_per_m: sigma,
            rel_permittivity: WATER_REL_PERMITTIVITY,
            temperature_k: DEFAULT_TEMPERATURE_K,
        })
    }

    pub fn pbs() -> Self {
        Self::buffer(MediumLabel::Pbs).expect("fixed buffer")
    }

    pub fn physiological_buffer() -> Self {
        Self::buffer(MediumLabel::PhysiologicalBuffer).expect("fixed buffer")
    }

    pub fn cell_medium() -> Self {
        Self::buffer(MediumLabel::CellMedium).expect("fixed buffer")
    }

    /// Short human label, e.g. `0.1 mM NaCl` or `PBS`.
    pub fn describe(&self) -> String {
        match self.label {
            MediumLabel::NaCl => format!("{} mM NaCl", self.nacl_mm),
            other => other.as_str().to_string(),
        }
    }
}

/// Debye screening length of a 1:1 electrolyte at 298 K, in nm.
pub fn debye_length_nm(medium: &Medium) -> Result<f64> {
    if !(medium.nacl_mm > 0.0) {
        return Err(SimError::InvalidInput(format!(
            "Debye length needs a positive ionic strength, got {} mM",
            medium.nacl_mm
        )));
    }
    let molar = medium.nacl_mm * 1e-3;
    Ok(0.304 / molar.sqrt())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MediumDoc {
    label: MediumLabel,
    #[serde(rename = "nacl_mM", default, skip_serializing_if = "Option::is_none")]
    nacl_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conductivity_s_per_m: Option<f64>,
    #[serde(default = "default_permittivity")]
    rel_permittivity: f64,
    #[serde(default = "default_temperature")]
    temperature_k: f64,
}

fn default_permittivity() -> f64 {
    WATER_REL_PERMITTIVITY
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE_K
}

impl TryFrom<MediumDoc> for Medium {
    type Error = SimError;

    fn try_from(doc: MediumDoc) -> Result<Self> {
        let mut medium = match doc.label {
            MediumLabel::NaCl => {
                let mm = doc.nacl_mm.ok_or_else(|| {
                    SimError::invariant("medium.nacl_mM", "required for label NaCl")
                })?;
                let m = Medium::nacl(mm)
                    .map_err(|e| SimError::invariant("medium.nacl_mM", e.to_string()))?;
                if let Some(sigma) = doc.conductivity_s_per_m {
                    if (sigma - m.conductivity_s_per_m).abs() > 1e-12 * sigma.abs().max(1.0) {
                        return Err(SimError::invariant(
                            "medium.conductivity_s_per_m",
                            "NaCl conductivity is derived from nacl_mM and cannot be overridden",
                        ));
                    }
                }
                m
            }
            label => {
                if doc.nacl_mm.is_some() || doc.conductivity_s_per_m.is_some() {
                    // Serialized buffers echo their fixed values; accept them
                    // only when they agree.
                    let m = Medium::buffer(label)?;
                    if let Some(sigma) = doc.conductivity_s_per_m {
                        if sigma != m.conductivity_s_per_m {
                            return Err(SimError::invariant(
                                "medium.conductivity_s_per_m",
                                format!("{} has a fixed conductivity", label.as_str()),
                            ));
                        }
                    }
                }
                Medium::buffer(label)?
            }
        };
        if !(doc.rel_permittivity > 0.0) {
            return Err(SimError::invariant("medium.rel_permittivity", "must be > 0"));
        }
        if !(doc.temperature_k > 0.0) {
            return Err(SimError::invariant("medium.temperature_k", "must be > 0"));
        }
        medium.rel_permittivity = doc.rel_permittivity;
        medium.temperature_k = doc.temperature_k;
        Ok(medium)
    }
}

impl From<Medium> for MediumDoc {
    fn from(m: Medium) -> Self {
        let nacl = m.label == MediumLabel::NaCl;
        MediumDoc {
            label: m.label,
            nacl_mm: nacl.then_some(m.nacl_mm),
            conductivity_s_per_m: None,
            rel_permittivity: m.rel_permittivity,
            temperature_k: m.temperature_k,
        }
    }
}
