//! Enzyme-triggered activation, tubule ejection, payload release and recoil.

use serde::{Deserialize, Serialize};

use crate::agents::{Capsule, CapsuleId, Lifecycle};
use crate::error::{Result, SimError};
use crate::geom::Vec2;
use crate::rng::RandomSource;
use crate::targets::{Hit, TargetRef};

/// Activation kinetics. Each armed capsule passes through `stages`
/// enzyme-driven transitions, each at hazard λ(C) = λ_max·min(C/C_ref, 1);
/// the last transition fires the capsule. One stage is a plain exponential
/// waiting time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActivationModel {
    pub lambda_max_per_s: f64,
    /// Concentration (% w/v) at which the hazard saturates.
    pub c_ref: f64,
    pub stages: u32,
}

impl Default for ActivationModel {
    /// Two stages, calibrated to 70 % activated after 300 s of saturating
    /// exposure.
    fn default() -> Self {
        Self {
            lambda_max_per_s: 8.130721610934012e-3,
            c_ref: 0.2,
            stages: 2,
        }
    }
}

impl ActivationModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_max_per_s >= 0.0) || !(self.c_ref > 0.0) || self.stages == 0 {
            return Err(SimError::invariant(
                "activation",
                "lambda_max_per_s >= 0, c_ref > 0 and stages >= 1 required",
            ));
        }
        Ok(())
    }

    pub fn hazard(&self, concentration: f64) -> f64 {
        if concentration <= 0.0 {
            return 0.0;
        }
        self.lambda_max_per_s * (concentration / self.c_ref).min(1.0)
    }

    /// Probability that a capsule has fired after `t_s` seconds at constant
    /// hazard `rate` (Erlang CDF).
    pub fn fired_fraction(&self, rate: f64, t_s: f64) -> f64 {
        erlang_cdf(self.stages, rate * t_s)
    }
}

fn erlang_cdf(stages: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    let mut tail = 1.0;
    for n in 1..stages {
        term *= x / n as f64;
        tail += term;
    }
    1.0 - (-x).exp() * tail
}

/// Saturating-exposure rate that fires `fraction` of capsules by `t_s`.
pub fn calibrate_activation(fraction: f64, t_s: f64, stages: u32) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) || !(t_s > 0.0) || stages == 0 {
        return Err(SimError::InvalidInput(
            "activation target needs 0 < fraction < 1, t > 0 and stages >= 1".into(),
        ));
    }
    if stages == 1 {
        return Ok(-(1.0 - fraction).ln() / t_s);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while erlang_cdf(stages, hi) < fraction {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if erlang_cdf(stages, mid) < fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi) / t_s)
}

/// Advance one armed capsule through `dt` of exposure. Returns true when it
/// fires; the capsule is then `Activated`.
pub fn activation_check(
    capsule: &mut Capsule,
    model: &ActivationModel,
    local_c: f64,
    dt: f64,
    rng: &mut RandomSource,
) -> bool {
    if !capsule.is_armed() {
        return false;
    }
    let rate = model.hazard(local_c);
    if rate <= 0.0 {
        return false;
    }
    if rng.chance(1.0 - (-rate * dt).exp()) {
        capsule.stage += 1;
        if capsule.stage >= model.stages {
            capsule.lifecycle = Lifecycle::Activated;
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DischargeParams {
    pub tubule_mean_um: f64,
    pub tubule_sd_um: f64,
    /// Share of the payload released at the tubule tip.
    pub f_tip: f64,
    pub p_recoil: f64,
}

impl Default for DischargeParams {
    fn default() -> Self {
        Self {
            tubule_mean_um: 298.0,
            tubule_sd_um: 20.0,
            f_tip: 0.8,
            p_recoil: 0.3,
        }
    }
}

impl DischargeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tubule_mean_um > 0.0) || !(self.tubule_sd_um >= 0.0) {
            return Err(SimError::invariant("discharge.tubule_mean_um", "tubule statistics must be positive"));
        }
        if !(0.0..=1.0).contains(&self.f_tip) || !(0.0..=1.0).contains(&self.p_recoil) {
            return Err(SimError::invariant("discharge.f_tip", "fractions must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tubule {
    pub capsule: CapsuleId,
    pub origin_um: Vec2,
    pub direction: Vec2,
    pub length_um: f64,
    pub ejected_at_s: f64,
}

impl Tubule {
    pub fn tip(&self) -> Vec2 {
        self.origin_um + self.direction * self.length_um
    }
}

/// Sample a tubule length from the truncated normal.
pub fn sample_tubule_length(params: &DischargeParams, rng: &mut RandomSource) -> f64 {
    loop {
        let l = rng.normal(params.tubule_mean_um, params.tubule_sd_um);
        if l > 0.0 {
            return l;
        }
    }
}

/// Evert the tubule of a just-activated capsule.
pub fn eject_tubule(capsule: &mut Capsule, params: &DischargeParams, t_s: f64, rng: &mut RandomSource) -> Tubule {
    let direction = Vec2::from_angle(rng.angle());
    let length_um = sample_tubule_length(params, rng);
    capsule.lifecycle = Lifecycle::Discharged;
    Tubule {
        capsule: capsule.id,
        origin_um: capsule.position_um,
        direction,
        length_um,
        ejected_at_s: t_s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoseMode {
    Tip,
    Path,
    Plume,
}

/// One unit of released payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dose {
    pub capsule: CapsuleId,
    pub target: Option<TargetRef>,
    pub amount: f64,
    pub depth_um: f64,
    pub mode: DoseMode,
    pub position_um: Vec2,
    pub payload_kind: String,
    /// Path deposition of a fluorescent payload leaves a visible trace.
    pub visible: bool,
}

/// Release the payload of a discharged capsule. A penetrating tubule splits it
/// into a tip share at depth and a remainder along the path; otherwise all of
/// it becomes an ambient plume at the tip. Leaves the capsule `Empty`.
pub fn release_payload(capsule: &mut Capsule, tubule: &Tubule, hit: Option<Hit>, f_tip: f64) -> Vec<Dose> {
    let payload = capsule.payload;
    capsule.payload = 0.0;
    capsule.lifecycle = Lifecycle::Empty;
    if payload <= 0.0 {
        return Vec::new();
    }
    let fluorescent = ["acridine-orange", "AO"].iter().any(|k| capsule.payload_kind.eq_ignore_ascii_case(k));
    let dose = |target, amount, depth_um, mode, position_um, visible| Dose {
        capsule: capsule.id,
        target,
        amount,
        depth_um,
        mode,
        position_um,
        payload_kind: capsule.payload_kind.clone(),
        visible,
    };
    match hit {
        Some(h) => {
            // Compute the larger share by multiplication; the difference is
            // then exact, so tip + path == payload bit for bit.
            let (tip, path) = if f_tip >= 0.5 {
                let tip = payload * f_tip;
                (tip, payload - tip)
            } else {
                let path = payload * (1.0 - f_tip);
                (payload - path, path)
            };
            let entry = tubule.origin_um + tubule.direction * h.entry_um;
            let tip_pos = entry + tubule.direction * h.depth_um;
            let mid = entry + tubule.direction * (0.5 * h.depth_um);
            let mut out = vec![dose(Some(h.target), tip, h.depth_um, DoseMode::Tip, tip_pos, fluorescent)];
            if path > 0.0 {
                out.push(dose(Some(h.target), path, 0.5 * h.depth_um, DoseMode::Path, mid, fluorescent));
            }
            out
        }
        None => vec![dose(None, payload, 0.0, DoseMode::Plume, tubule.tip(), fluorescent)],
    }
}

/// Rebound after discharge may knock an attached capsule loose.
pub fn recoil_detach(capsule: &Capsule, p_recoil: f64, rng: &mut RandomSource) -> bool {
    capsule.attachment.is_some() && rng.chance(p_recoil)
}
