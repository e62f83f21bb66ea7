//! Trap-site selection on the JP surface, DEP capture, adsorption, and
//! shear-induced detachment.

use serde::{Deserialize, Serialize};

use crate::agents::{AttachSite, Attachment, Capsule, CapsuleId, JanusParticle, SizeClass};
use crate::chamber::JP_RADIUS_UM;
use crate::field::FieldState;
use crate::geom::{wrap_angle, Vec2};
use crate::medium::{sigma_of_mm, Medium};
use crate::rng::RandomSource;

use super::dielectric::{cm_factor_re, CapsuleDielectricModel};

/// |Re K| below this counts as no net DEP force.
pub const TRAP_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrapSite {
    /// pDEP trap at the equator of the dielectric hemisphere.
    DielectricEquator,
    /// nDEP trap on the metal-coated hemisphere.
    MetallicHemisphere,
    None,
}

impl TrapSite {
    pub fn as_str(self) -> &'static str {
        match self {
            TrapSite::DielectricEquator => "equator",
            TrapSite::MetallicHemisphere => "metallic",
            TrapSite::None => "none",
        }
    }
}

pub fn trap_site_for(medium: &Medium, freq_hz: f64, model: &CapsuleDielectricModel) -> TrapSite {
    let k = cm_factor_re(model, medium, freq_hz);
    if k > TRAP_TOLERANCE {
        TrapSite::DielectricEquator
    } else if k < -TRAP_TOLERANCE {
        TrapSite::MetallicHemisphere
    } else {
        TrapSite::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureParams {
    pub small_diameter_um: f64,
    pub large_diameter_um: f64,
    /// Capture radius as a multiple of capsule diameter.
    pub capture_radius_factor: f64,
    pub equator_capacity: u32,
    pub metallic_capacity: u32,
    /// Global cap on capsules held by one JP.
    pub per_jp_cap: u32,
    /// Non-specific adsorption is active at and above this concentration.
    #[serde(rename = "adsorption_nacl_mM")]
    pub adsorption_nacl_mm: f64,
    /// Full shear hazard applies to DEP-trapped capsules below this.
    #[serde(rename = "shear_nacl_mM")]
    pub shear_nacl_mm: f64,
    /// Detach hazard at 100 rpm, 1/s.
    pub shear_hazard_per_s: f64,
    /// Hazard multiplier for capsules held by adsorption.
    pub adsorbed_shear_factor: f64,
    /// Clustering contact distance as a multiple of the JP diameter.
    pub contact_factor: f64,
    /// Capsule capacity of clusters of 2..=10 JPs.
    pub cluster_capacity: u32,
    /// Largest cluster that still moves at full speed.
    pub cluster_full_speed_max: u32,
}

impl Default for CaptureParams {
    fn default() -> Self {
        Self {
            small_diameter_um: 5.0,
            large_diameter_um: 10.0,
            capture_radius_factor: 1.5,
            equator_capacity: 5,
            metallic_capacity: 5,
            per_jp_cap: 12,
            adsorption_nacl_mm: 10.0,
            shear_nacl_mm: 1.0,
            shear_hazard_per_s: 0.02,
            adsorbed_shear_factor: 0.05,
            contact_factor: 1.1,
            cluster_capacity: 10,
            cluster_full_speed_max: 6,
        }
    }
}

impl CaptureParams {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::SimError;
        if !(self.small_diameter_um > 0.0 && self.large_diameter_um > 0.0) {
            return Err(SimError::invariant("capture.small_diameter_um", "capsule sizes must be > 0"));
        }
        if !(self.capture_radius_factor > 0.0 && self.contact_factor > 0.0) {
            return Err(SimError::invariant("capture.capture_radius_factor", "must be > 0"));
        }
        if self.shear_hazard_per_s < 0.0 || !(0.0..=0.1).contains(&self.adsorbed_shear_factor) {
            return Err(SimError::invariant(
                "capture.adsorbed_shear_factor",
                "hazards must be >= 0 and adsorbed factor <= 0.1",
            ));
        }
        if self.cluster_full_speed_max == 0 {
            return Err(SimError::invariant("capture.cluster_full_speed_max", "must be >= 1"));
        }
        Ok(())
    }

    pub fn diameter_um(&self, size: SizeClass) -> f64 {
        match size {
            SizeClass::Small => self.small_diameter_um,
            SizeClass::Large => self.large_diameter_um,
        }
    }

    pub fn capture_radius_um(&self, size: SizeClass) -> f64 {
        self.capture_radius_factor * self.diameter_um(size)
    }

    pub fn contact_distance_um(&self) -> f64 {
        self.contact_factor * 2.0 * JP_RADIUS_UM
    }

    pub fn adsorption_active(&self, medium: &Medium) -> bool {
        medium.conductivity_s_per_m >= sigma_of_mm(self.adsorption_nacl_mm)
    }

    /// Where an attached capsule sits in the chamber.
    pub fn attached_position(&self, jp: &JanusParticle, capsule: &Capsule, bearing_rad: f64) -> Vec2 {
        let r = JP_RADIUS_UM + 0.5 * self.diameter_um(capsule.size);
        jp.position_um + Vec2::from_angle(jp.orientation_rad + bearing_rad) * r
    }
}

/// Occupancy seen by a capture attempt.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CaptureSlots {
    pub equator: u32,
    pub metallic: u32,
    pub jp_total: u32,
    pub cluster_total: u32,
    pub cluster_capacity: u32,
}

fn snap(bearing: f64, centre: f64, half_width: f64) -> f64 {
    let d = wrap_angle(bearing - centre + std::f64::consts::PI) - std::f64::consts::PI;
    centre + d.clamp(-half_width, half_width)
}

/// Try to attach a free capsule to a JP. Capture is deterministic once the
/// capsule is within the capture radius of an active trap site (DEP channel)
/// or of the JP surface (adsorption channel, field independent).
pub fn attempt_capture(
    params: &CaptureParams,
    jp: &JanusParticle,
    capsule: &Capsule,
    fs: &FieldState,
    medium: &Medium,
    site: TrapSite,
    slots: CaptureSlots,
) -> Option<Attachment> {
    use std::f64::consts::{FRAC_PI_2, PI};

    if !capsule.is_free_intact() {
        return None;
    }
    if slots.jp_total >= params.per_jp_cap || slots.cluster_total >= slots.cluster_capacity {
        return None;
    }
    let reach = params.capture_radius_um(capsule.size);
    let rel = capsule.position_um - jp.position_um;
    let bearing = wrap_angle(rel.angle() - jp.orientation_rad);
    let axis = jp.dielectric_axis();

    if fs.e_on && fs.vpp > 0.0 {
        match site {
            TrapSite::DielectricEquator if slots.equator < params.equator_capacity => {
                let side = axis.perp() * JP_RADIUS_UM;
                let d = (rel - side).norm().min((rel + side).norm());
                if d <= reach {
                    let centre = if rel.dot(side) >= 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 };
                    return Some(Attachment {
                        jp: jp.id,
                        site: AttachSite::DielectricEquator,
                        bearing_rad: snap(bearing, centre, 0.6),
                    });
                }
            }
            TrapSite::MetallicHemisphere if slots.metallic < params.metallic_capacity => {
                let pole = axis * -JP_RADIUS_UM;
                if (rel - pole).norm() <= reach {
                    return Some(Attachment {
                        jp: jp.id,
                        site: AttachSite::MetallicHemisphere,
                        bearing_rad: snap(bearing, PI, 0.9),
                    });
                }
            }
            _ => {}
        }
    }

    if params.adsorption_active(medium) && rel.norm() - JP_RADIUS_UM <= reach {
        return Some(Attachment {
            jp: jp.id,
            site: AttachSite::Adsorbed,
            bearing_rad: bearing,
        });
    }
    None
}

/// Shear detachment under magnetic rolling. Draws exactly one uniform per
/// attached capsule, in the order given, whenever the magnet is active.
pub fn shear_detach(
    params: &CaptureParams,
    attached: &[&Capsule],
    fs: &FieldState,
    medium: &Medium,
    dt: f64,
    rng: &mut RandomSource,
) -> Vec<CapsuleId> {
    if !fs.magnet_active() {
        return Vec::new();
    }
    let base = params.shear_hazard_per_s * fs.rpm / 100.0;
    let low_salt = medium.conductivity_s_per_m < sigma_of_mm(params.shear_nacl_mm);
    let mut out = Vec::new();
    for c in attached {
        let Some(att) = c.attachment else { continue };
        let rate = if low_salt && att.site.is_dep() {
            base
        } else {
            base * params.adsorbed_shear_factor
        };
        let p = 1.0 - (-rate * dt).exp();
        if rng.chance(p) {
            out.push(c.id);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn nacl(mm: f64) -> Medium {
        Medium::nacl(mm).unwrap()
    }

    fn model() -> CapsuleDielectricModel {
        CapsuleDielectricModel::default()
    }

    fn slots() -> CaptureSlots {
        CaptureSlots { cluster_capacity: 12, ..Default::default() }
    }

    #[test]
    fn trap_sites_follow_observed_table() {
        let m = model();
        assert_eq!(trap_site_for(&nacl(0.01), 2e6, &m), TrapSite::DielectricEquator);
        assert_eq!(trap_site_for(&nacl(10.0), 2e6, &m), TrapSite::MetallicHemisphere);
        assert_eq!(trap_site_for(&nacl(1.0), 2e6, &m), TrapSite::DielectricEquator);
        assert_eq!(trap_site_for(&nacl(1.0), 2e3, &m), TrapSite::MetallicHemisphere);
    }

    #[test]
    fn dc_balanced_capsule_has_no_trap() {
        let med = nacl(1.0);
        let m = CapsuleDielectricModel { sigma_p_s_per_m: med.conductivity_s_per_m, eps_p_rel: 400.0 };
        assert_eq!(trap_site_for(&med, 1e3, &m), TrapSite::None);
    }

    #[test]
    fn equator_capture_fills_five_slots() {
        let p = CaptureParams::default();
        let jp = JanusParticle::new(0, Vec2::ZERO, 0.0);
        let fs = FieldState::default().with_efield(2e3, 15.0);
        let med = nacl(0.1);
        let site = trap_site_for(&med, 2e3, &model());
        let mut s = slots();
        let mut captured = 0;
        for k in 0..7 {
            // alternate sides of the equator, just outside the surface
            let y = if k % 2 == 0 { 16.0 } else { -16.0 };
            let c = Capsule::new(k, SizeClass::Small, Vec2::new(0.0, y), 1.0, "TBO");
            if let Some(a) = attempt_capture(&p, &jp, &c, &fs, &med, site, s) {
                assert_eq!(a.site, AttachSite::DielectricEquator);
                s.equator += 1;
                s.jp_total += 1;
                s.cluster_total += 1;
                captured += 1;
            }
        }
        assert_eq!(captured, 5);
    }

    #[test]
    fn no_field_no_capture_at_low_salt() {
        let p = CaptureParams::default();
        let jp = JanusParticle::new(0, Vec2::ZERO, 0.0);
        let med = nacl(0.1);
        let c = Capsule::new(0, SizeClass::Small, Vec2::new(0.0, 16.0), 1.0, "TBO");
        let site = trap_site_for(&med, 2e3, &model());
        assert!(attempt_capture(&p, &jp, &c, &FieldState::default(), &med, site, slots()).is_none());
    }

    #[test]
    fn adsorption_without_field_at_high_salt() {
        let p = CaptureParams::default();
        let jp = JanusParticle::new(0, Vec2::ZERO, 0.0);
        let med = nacl(10.0);
        let c = Capsule::new(0, SizeClass::Small, Vec2::new(17.0, 0.0), 1.0, "TBO");
        let a = attempt_capture(&p, &jp, &c, &FieldState::default(), &med, TrapSite::None, slots()).unwrap();
        assert_eq!(a.site, AttachSite::Adsorbed);
    }

    #[test]
    fn global_cap_blocks_capture() {
        let p = CaptureParams::default();
        let jp = JanusParticle::new(0, Vec2::ZERO, 0.0);
        let med = nacl(10.0);
        let c = Capsule::new(0, SizeClass::Small, Vec2::new(17.0, 0.0), 1.0, "TBO");
        let full = CaptureSlots { jp_total: 12, cluster_capacity: 12, cluster_total: 12, ..Default::default() };
        assert!(attempt_capture(&p, &jp, &c, &FieldState::default(), &med, TrapSite::None, full).is_none());
    }

    fn attached(n: u32, site: AttachSite) -> Vec<Capsule> {
        (0..n)
            .map(|i| {
                let mut c = Capsule::new(i, SizeClass::Small, Vec2::ZERO, 1.0, "TBO");
                c.attachment = Some(Attachment { jp: 0, site, bearing_rad: 0.0 });
                c
            })
            .collect()
    }

    #[test]
    fn no_rolling_no_detachment() {
        let p = CaptureParams::default();
        let caps = attached(5, AttachSite::DielectricEquator);
        let refs: Vec<&Capsule> = caps.iter().collect();
        let mut rng = RandomSource::new(1, Stream::Shear);
        let fs = FieldState::default().with_magnet(0.0, 0.0);
        assert!(shear_detach(&p, &refs, &fs, &nacl(0.1), 1e3, &mut rng).is_empty());
    }

    #[test]
    fn adsorbed_capsules_barely_detach() {
        let p = CaptureParams::default();
        let fs = FieldState::default().with_magnet(0.0, 100.0);
        let dep = attached(2000, AttachSite::DielectricEquator);
        let ads = attached(2000, AttachSite::Adsorbed);
        let dt = 10.0;
        let mut rng = RandomSource::new(3, Stream::Shear);
        let n_dep = shear_detach(&p, &dep.iter().collect::<Vec<_>>(), &fs, &nacl(0.1), dt, &mut rng).len();
        let n_ads = shear_detach(&p, &ads.iter().collect::<Vec<_>>(), &fs, &nacl(10.0), dt, &mut rng).len();
        // expected counts 2000*(1-e^{-0.2}) ≈ 363 and 2000*(1-e^{-0.01}) ≈ 20
        assert!((300..430).contains(&n_dep), "{n_dep}");
        assert!(n_ads < 40, "{n_ads}");
        assert!(p.adsorbed_shear_factor <= 0.1);
    }
}
