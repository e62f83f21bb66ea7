//! Circular microchamber with drilled inlet holes.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::geom::Vec2;

/// Janus particle diameter, µm.
pub const JP_DIAMETER_UM: f64 = 27.0;
pub const JP_RADIUS_UM: f64 = JP_DIAMETER_UM / 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inlet {
    pub name: String,
    pub center_um: Vec2,
    pub radius_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chamber {
    #[serde(default = "default_radius")]
    pub radius_um: f64,
    #[serde(default = "default_height")]
    pub height_um: f64,
    #[serde(default = "default_inlets")]
    pub inlets: Vec<Inlet>,
}

fn default_radius() -> f64 {
    4500.0
}

fn default_height() -> f64 {
    100.0
}

fn default_inlets() -> Vec<Inlet> {
    vec![
        Inlet {
            name: "left".into(),
            center_um: Vec2::new(-3900.0, 0.0),
            radius_um: 300.0,
        },
        Inlet {
            name: "right".into(),
            center_um: Vec2::new(3900.0, 0.0),
            radius_um: 300.0,
        },
    ]
}

impl Default for Chamber {
    fn default() -> Self {
        Self {
            radius_um: default_radius(),
            height_um: default_height(),
            inlets: default_inlets(),
        }
    }
}

impl Chamber {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_um > 10.0 * JP_RADIUS_UM) {
            return Err(SimError::invariant(
                "chamber.radius_um",
                "must exceed 10 JP radii",
            ));
        }
        if !(self.height_um > 0.0) {
            return Err(SimError::invariant("chamber.height_um", "must be > 0"));
        }
        for (i, inlet) in self.inlets.iter().enumerate() {
            if !(inlet.radius_um > 0.0)
                || inlet.center_um.norm() + inlet.radius_um >= self.radius_um
            {
                return Err(SimError::invariant(
                    format!("chamber.inlets[{i}]"),
                    "inlet must lie strictly inside the chamber disc",
                ));
            }
        }
        Ok(())
    }

    pub fn inlet(&self, name: &str) -> Result<&Inlet> {
        self.inlets
            .iter()
            .find(|i| i.name == name)
            .ok_or_else(|| SimError::UnknownInlet(name.to_string()))
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.norm() <= self.radius_um
    }

    /// Project `p` so that a body of radius `body_radius` stays inside.
    /// Returns the (possibly moved) point and whether it touched the wall.
    pub fn clamp(&self, p: Vec2, body_radius: f64) -> (Vec2, bool) {
        let limit = self.radius_um - body_radius;
        let r = p.norm();
        if r > limit {
            (p * (limit / r), true)
        } else {
            (p, false)
        }
    }
}
