//! Run log records and their JSONL encoding.

use serde::{Deserialize, Serialize};

use crate::agents::{AttachSite, CapsuleId, JpId};
use crate::discharge::DoseMode;
use crate::error::{Result, SimError};
use crate::field::FieldState;
use crate::geom::Vec2;
use crate::targets::{Reaction, TargetRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetachCause {
    Shear,
    FieldOff,
    SiteLost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "agent", content = "id", rename_all = "lowercase")]
pub enum AgentRef {
    Jp(JpId),
    Capsule(CapsuleId),
    Worm(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    FieldChanged {
        field: FieldState,
    },
    EnzymeInjected {
        inlet: String,
        c: f64,
        hold_s: f64,
    },
    CapsuleTrapped {
        capsule: CapsuleId,
        jp: JpId,
        site: AttachSite,
    },
    CapsuleDetached {
        capsule: CapsuleId,
        jp: JpId,
        cause: DetachCause,
    },
    ClusterFormed {
        members: Vec<JpId>,
    },
    ClusterDissolved {
        members: Vec<JpId>,
    },
    CapsuleActivated {
        capsule: CapsuleId,
    },
    TubuleEjected {
        capsule: CapsuleId,
        origin_um: Vec2,
        direction: Vec2,
        length_um: f64,
    },
    TargetPenetrated {
        capsule: CapsuleId,
        target: TargetRef,
        entry_um: f64,
        depth_um: f64,
    },
    DoseDelivered {
        capsule: CapsuleId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<TargetRef>,
        amount: f64,
        depth_um: f64,
        mode: DoseMode,
        position_um: Vec2,
        payload_kind: String,
        visible: bool,
    },
    CapsuleRecoiled {
        capsule: CapsuleId,
        jp: JpId,
    },
    WormReaction {
        worm: u32,
        #[serde(flatten)]
        reaction: Reaction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        capsule: Option<CapsuleId>,
    },
    WallContact {
        #[serde(flatten)]
        agent: AgentRef,
    },
    AgentsSpawned {
        jps: Vec<JpId>,
        capsules: Vec<CapsuleId>,
        worms: Vec<u32>,
    },
    SpheroidSwelling {
        spheroid: u32,
        exposure: f64,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::FieldChanged { .. } => "FieldChanged",
            EventKind::EnzymeInjected { .. } => "EnzymeInjected",
            EventKind::CapsuleTrapped { .. } => "CapsuleTrapped",
            EventKind::CapsuleDetached { .. } => "CapsuleDetached",
            EventKind::ClusterFormed { .. } => "ClusterFormed",
            EventKind::ClusterDissolved { .. } => "ClusterDissolved",
            EventKind::CapsuleActivated { .. } => "CapsuleActivated",
            EventKind::TubuleEjected { .. } => "TubuleEjected",
            EventKind::TargetPenetrated { .. } => "TargetPenetrated",
            EventKind::DoseDelivered { .. } => "DoseDelivered",
            EventKind::CapsuleRecoiled { .. } => "CapsuleRecoiled",
            EventKind::WormReaction { .. } => "WormReaction",
            EventKind::WallContact { .. } => "WallContact",
            EventKind::AgentsSpawned { .. } => "AgentsSpawned",
            EventKind::SpheroidSwelling { .. } => "SpheroidSwelling",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

/// One JSON object per line, newline terminated.
pub fn write_log<W: std::io::Write>(events: &[Event], mut w: W) -> std::io::Result<()> {
    for e in events {
        writeln!(w, "{}", e.to_line())?;
    }
    Ok(())
}

pub fn log_to_string(events: &[Event]) -> String {
    let mut s = String::new();
    for e in events {
        s.push_str(&e.to_line());
        s.push('\n');
    }
    s
}

/// Split a log into its lines, checking each parses as an event. Blank
/// trailing lines are ignored.
pub fn parse_log(text: &str) -> Result<Vec<(String, Event)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(line).map_err(|e| SimError::MalformedLog {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push((line.to_string(), event));
    }
    Ok(out)
}
