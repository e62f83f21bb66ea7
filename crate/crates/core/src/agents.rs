//! Janus particles and jellyfish capsules.

use serde::{Deserialize, Serialize};

use crate::dep::TrapSite;
use crate::geom::Vec2;

pub type JpId = u32;
pub type CapsuleId = u32;

/// A metallo-dielectric Janus particle. `orientation_rad` points from the
/// metallic cap towards the dielectric pole.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JanusParticle {
    pub id: JpId,
    pub position_um: Vec2,
    pub orientation_rad: f64,
    /// Cumulative distance travelled.
    pub path_um: f64,
    pub at_wall: bool,
}

impl JanusParticle {
    pub fn new(id: JpId, position_um: Vec2, orientation_rad: f64) -> Self {
        Self {
            id,
            position_um,
            orientation_rad,
            path_um: 0.0,
            at_wall: false,
        }
    }

    pub fn dielectric_axis(&self) -> Vec2 {
        Vec2::from_angle(self.orientation_rad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SizeClass {
    Small,
    Large,
}

/// Where an attached capsule is held.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttachSite {
    DielectricEquator,
    MetallicHemisphere,
    Adsorbed,
}

impl AttachSite {
    pub fn from_trap(site: TrapSite) -> Option<Self> {
        match site {
            TrapSite::DielectricEquator => Some(AttachSite::DielectricEquator),
            TrapSite::MetallicHemisphere => Some(AttachSite::MetallicHemisphere),
            TrapSite::None => None,
        }
    }

    pub fn is_dep(self) -> bool {
        !matches!(self, AttachSite::Adsorbed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attachment {
    pub jp: JpId,
    pub site: AttachSite,
    /// Bearing of the capsule centre relative to the JP orientation.
    pub bearing_rad: f64,
}

/// Discharge lifecycle, independent of attachment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lifecycle {
    Intact,
    Activated,
    Discharged,
    Empty,
}

/// Combined capsule state as reported in snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state")]
pub enum CapsulePhase {
    Free,
    Trapped { site: AttachSite, jp: JpId },
    Adsorbed { jp: JpId },
    Activated,
    Discharged,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub id: CapsuleId,
    pub size: SizeClass,
    pub position_um: Vec2,
    pub payload: f64,
    pub payload_kind: String,
    pub lifecycle: Lifecycle,
    pub attachment: Option<Attachment>,
    /// Completed activation stages.
    pub stage: u32,
}

impl Capsule {
    pub fn new(id: CapsuleId, size: SizeClass, position_um: Vec2, payload: f64, payload_kind: impl Into<String>) -> Self {
        Self {
            id,
            size,
            position_um,
            payload,
            payload_kind: payload_kind.into(),
            lifecycle: Lifecycle::Intact,
            attachment: None,
            stage: 0,
        }
    }

    pub fn phase(&self) -> CapsulePhase {
        match (self.lifecycle, self.attachment) {
            (Lifecycle::Intact, None) => CapsulePhase::Free,
            (Lifecycle::Intact, Some(a)) if a.site == AttachSite::Adsorbed => CapsulePhase::Adsorbed { jp: a.jp },
            (Lifecycle::Intact, Some(a)) => CapsulePhase::Trapped { site: a.site, jp: a.jp },
            (Lifecycle::Activated, _) => CapsulePhase::Activated,
            (Lifecycle::Discharged, _) => CapsulePhase::Discharged,
            (Lifecycle::Empty, _) => CapsulePhase::Empty,
        }
    }

    pub fn is_free_intact(&self) -> bool {
        self.lifecycle == Lifecycle::Intact && self.attachment.is_none()
    }

    /// Whether the capsule can still respond to the enzyme.
    pub fn is_armed(&self) -> bool {
        self.lifecycle == Lifecycle::Intact
    }
}
