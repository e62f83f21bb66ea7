//! `.stinger` scenario documents (TOML, strict keys).

use serde::{Deserialize, Serialize};

use crate::agents::SizeClass;
use crate::chamber::{Chamber, JP_RADIUS_UM};
use crate::dep::{CaptureParams, CapsuleDielectricModel};
use crate::discharge::{ActivationModel, DischargeParams};
use crate::enzyme::EnzymeParams;
use crate::error::{Result, SimError};
use crate::field::FieldState;
use crate::geom::Vec2;
use crate::medium::Medium;
use crate::propulsion::PropulsionParams;
use crate::targets::TargetParams;

pub const SCHEMA_VERSION: u32 = 1;

fn default_version() -> u32 {
    SCHEMA_VERSION
}

fn default_dt() -> f64 {
    0.01
}

fn default_sample_interval() -> f64 {
    1.0
}

fn default_payload() -> f64 {
    1.0
}

fn default_kind() -> String {
    "TBO".into()
}

fn default_spheroid_radius() -> f64 {
    500.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JpSpec {
    pub position_um: Vec2,
    #[serde(default)]
    pub orientation_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsuleSpec {
    pub position_um: Vec2,
    #[serde(default = "default_size")]
    pub size: SizeClass,
    #[serde(default = "default_payload")]
    pub payload: f64,
    #[serde(default = "default_kind")]
    pub kind: String,
}

fn default_size() -> SizeClass {
    SizeClass::Small
}

/// Capsules scattered uniformly over a disc, placed from the roster stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSpec {
    pub count: u32,
    #[serde(default)]
    pub center_um: Vec2,
    pub radius_um: f64,
    #[serde(default = "default_size")]
    pub size: SizeClass,
    #[serde(default = "default_payload")]
    pub payload: f64,
    #[serde(default = "default_kind")]
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpheroidSpec {
    pub center_um: Vec2,
    #[serde(default = "default_spheroid_radius")]
    pub radius_um: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WormStart {
    Swimming,
    Paralyzed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WormSpec {
    pub position_um: Vec2,
    #[serde(default)]
    pub heading_rad: f64,
    /// Defaults to the configured swimming speed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_um_per_s: Option<f64>,
    pub state: WormStart,
}

/// A change to the world, from a script or a live client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlAction {
    /// Rotating magnet. Absent fields keep their value; `on` defaults to true.
    SetMagnet {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        heading: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rpm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on: Option<bool>,
    },
    /// AC electric field. Absent fields keep their value; `on` defaults to true.
    SetEfield {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        on: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        freq_hz: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vpp: Option<f64>,
    },
    InjectEnzyme {
        inlet: String,
        c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hold_s: Option<f64>,
    },
    SpawnAgents {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        jps: Vec<JpSpec>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        capsules: Vec<CapsuleSpec>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        worms: Vec<WormSpec>,
    },
}

impl ControlAction {
    pub fn name(&self) -> &'static str {
        match self {
            ControlAction::SetMagnet { .. } => "set_magnet",
            ControlAction::SetEfield { .. } => "set_efield",
            ControlAction::InjectEnzyme { .. } => "inject_enzyme",
            ControlAction::SpawnAgents { .. } => "spawn_agents",
        }
    }

    /// Field state after applying this action to `fs`, for field actions.
    pub fn apply_to_field(&self, fs: &FieldState) -> Option<FieldState> {
        match self {
            ControlAction::SetMagnet { heading, rpm, on } => {
                let mut next = *fs;
                next.b_on = on.unwrap_or(true);
                if let Some(h) = heading {
                    next.heading_rad = *h;
                }
                if let Some(r) = rpm {
                    next.rpm = *r;
                }
                Some(next.normalized())
            }
            ControlAction::SetEfield { on, freq_hz, vpp } => {
                let mut next = *fs;
                next.e_on = on.unwrap_or(true);
                if let Some(f) = freq_hz {
                    next.freq_hz = *f;
                }
                if let Some(v) = vpp {
                    next.vpp = *v;
                }
                Some(next)
            }
            _ => None,
        }
    }

    pub fn validate(&self, chamber: &Chamber, field: &str) -> Result<()> {
        let bad = |what: &str, why: &str| Err(SimError::invariant(format!("{field}.{what}"), why));
        match self {
            ControlAction::SetMagnet { heading, rpm, .. } => {
                if heading.is_some_and(|h| !h.is_finite()) {
                    return bad("heading", "must be finite");
                }
                if rpm.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
                    return bad("rpm", "must be >= 0");
                }
            }
            ControlAction::SetEfield { freq_hz, vpp, .. } => {
                if freq_hz.is_some_and(|f| !(1e3..=10e6).contains(&f)) {
                    return bad("freq_hz", "must lie in [1 kHz, 10 MHz]");
                }
                if vpp.is_some_and(|v| !(v >= 0.0 && v.is_finite())) {
                    return bad("vpp", "must be >= 0");
                }
            }
            ControlAction::InjectEnzyme { inlet, c, hold_s } => {
                chamber.inlet(inlet)?;
                if !(0.0..=5.0).contains(c) {
                    return bad("c", "must lie in [0, 5] % w/v");
                }
                if hold_s.is_some_and(|h| !(h >= 0.0)) {
                    return bad("hold_s", "must be >= 0");
                }
            }
            ControlAction::SpawnAgents { jps, capsules, worms } => {
                check_inside(chamber, jps.iter().map(|j| j.position_um), &format!("{field}.jps"))?;
                check_inside(chamber, capsules.iter().map(|c| c.position_um), &format!("{field}.capsules"))?;
                check_inside(chamber, worms.iter().map(|w| w.position_um), &format!("{field}.worms"))?;
                for (i, c) in capsules.iter().enumerate() {
                    if !(c.payload >= 0.0) {
                        return Err(SimError::invariant(format!("{field}.capsules[{i}].payload"), "must be >= 0"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_inside(chamber: &Chamber, points: impl Iterator<Item = Vec2>, field: &str) -> Result<()> {
    for (i, p) in points.enumerate() {
        if !p.is_finite() || !chamber.contains(p) {
            return Err(SimError::invariant(format!("{field}[{i}].position_um"), "must lie inside the chamber"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub t: f64,
    pub action: ControlAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordOptions {
    /// Spacing of the load and activation time series.
    pub sample_interval_s: f64,
}

impl Default for RecordOptions {
    fn default() -> Self {
        Self { sample_interval_s: default_sample_interval() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub duration: f64,
    pub medium: Medium,
    #[serde(default)]
    pub chamber: Chamber,
    #[serde(default)]
    pub field: FieldState,
    #[serde(default)]
    pub propulsion: PropulsionParams,
    #[serde(default, rename = "capsule-model")]
    pub capsule_model: CapsuleDielectricModel,
    #[serde(default)]
    pub capture: CaptureParams,
    #[serde(default)]
    pub activation: ActivationModel,
    #[serde(default)]
    pub discharge: DischargeParams,
    #[serde(default)]
    pub enzyme: EnzymeParams,
    #[serde(default)]
    pub targets: TargetParams,
    #[serde(default)]
    pub record: RecordOptions,
    #[serde(default)]
    pub jps: Vec<JpSpec>,
    #[serde(default)]
    pub capsules: Vec<CapsuleSpec>,
    #[serde(default)]
    pub capsule_scatter: Vec<ScatterSpec>,
    #[serde(default)]
    pub spheroids: Vec<SpheroidSpec>,
    #[serde(default)]
    pub worms: Vec<WormSpec>,
    #[serde(default)]
    pub script: Vec<ScriptEntry>,
}

impl Scenario {
    /// Empty chamber in the given medium with every default applied.
    pub fn new(medium: Medium) -> Self {
        Self {
            version: SCHEMA_VERSION,
            seed: 0,
            dt: default_dt(),
            duration: 0.0,
            medium,
            chamber: Chamber::default(),
            field: FieldState::default(),
            propulsion: PropulsionParams::default(),
            capsule_model: CapsuleDielectricModel::default(),
            capture: CaptureParams::default(),
            activation: ActivationModel::default(),
            discharge: DischargeParams::default(),
            enzyme: EnzymeParams::default(),
            targets: TargetParams::default(),
            record: RecordOptions::default(),
            jps: Vec::new(),
            capsules: Vec::new(),
            capsule_scatter: Vec::new(),
            spheroids: Vec::new(),
            worms: Vec::new(),
            script: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(SimError::invariant("version", format!("unsupported schema version {}", self.version)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::invariant("dt", "must be > 0"));
        }
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(SimError::invariant("duration", "must be >= 0"));
        }
        if !(self.record.sample_interval_s > 0.0) {
            return Err(SimError::invariant("record.sample_interval_s", "must be > 0"));
        }
        if !(self.field.gap_um > 0.0) || !(self.field.rpm >= 0.0) || !(self.field.vpp >= 0.0) {
            return Err(SimError::invariant("field", "gap must be > 0, rpm and vpp >= 0"));
        }
        if !(1e3..=10e6).contains(&self.field.freq_hz) {
            return Err(SimError::invariant("field.freq_hz", "must lie in [1 kHz, 10 MHz]"));
        }
        self.chamber.validate()?;
        self.propulsion.validate()?;
        self.capsule_model.validate()?;
        self.capture.validate()?;
        self.activation.validate()?;
        self.discharge.validate()?;
        self.enzyme.validate()?;
        self.targets.validate()?;

        check_inside(&self.chamber, self.jps.iter().map(|j| j.position_um), "jps")?;
        check_inside(&self.chamber, self.capsules.iter().map(|c| c.position_um), "capsules")?;
        check_inside(&self.chamber, self.spheroids.iter().map(|s| s.center_um), "spheroids")?;
        check_inside(&self.chamber, self.worms.iter().map(|w| w.position_um), "worms")?;
        for (i, c) in self.capsules.iter().enumerate() {
            if !(c.payload >= 0.0) {
                return Err(SimError::invariant(format!("capsules[{i}].payload"), "must be >= 0"));
            }
        }
        for (i, s) in self.capsule_scatter.iter().enumerate() {
            if !(s.radius_um >= 0.0) || !(s.payload >= 0.0) {
                return Err(SimError::invariant(format!("capsule_scatter[{i}]"), "radius and payload must be >= 0"));
            }
            if s.center_um.norm() + s.radius_um > self.chamber.radius_um {
                return Err(SimError::invariant(
                    format!("capsule_scatter[{i}].radius_um"),
                    "scatter disc must lie inside the chamber",
                ));
            }
        }
        for (i, s) in self.spheroids.iter().enumerate() {
            if !(s.radius_um > 0.0) {
                return Err(SimError::invariant(format!("spheroids[{i}].radius_um"), "must be > 0"));
            }
        }
        for (i, w) in self.worms.iter().enumerate() {
            if w.speed_um_per_s.is_some_and(|v| !(v >= 0.0)) {
                return Err(SimError::invariant(format!("worms[{i}].speed_um_per_s"), "must be >= 0"));
            }
        }
        let mut last = 0.0;
        for (i, entry) in self.script.iter().enumerate() {
            let field = format!("script[{i}]");
            if !(entry.t >= last && entry.t.is_finite()) {
                return Err(SimError::invariant(format!("{field}.t"), "script times must be >= 0 and nondecreasing"));
            }
            last = entry.t;
            entry.action.validate(&self.chamber, &format!("{field}.action"))?;
        }
        if self.chamber.radius_um <= 10.0 * JP_RADIUS_UM {
            return Err(SimError::invariant("chamber.radius_um", "must exceed ten JP radii"));
        }
        Ok(())
    }

    /// Number of steps covering `duration`.
    pub fn steps(&self) -> u64 {
        (self.duration / self.dt - 1e-9).ceil().max(0.0) as u64
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }
}

/// Parse and validate a scenario document.
pub fn load_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    scenario.validate()?;
    Ok(scenario)
}
