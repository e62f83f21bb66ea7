//! Janus-particle propulsion: electrokinetic self-propulsion (ICEP / sDEP),
//! magnetic rolling, and their superposition.
//!
//! Velocity magnitudes are configuration defaults; what the model commits to
//! is the sign of each contribution, the mode map and the conductivity trends.

use serde::{Deserialize, Serialize};

use crate::dep::{trap_site_for, CapsuleDielectricModel, TrapSite};
use crate::error::{Result, SimError};
use crate::field::FieldState;
use crate::geom::Vec2;
use crate::medium::{sigma_of_mm, Medium};

pub const MIN_FREQ_HZ: f64 = 1e3;
pub const MAX_FREQ_HZ: f64 = 10e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PropulsionMode {
    /// Induced-charge electrophoresis, dielectric hemisphere forward.
    #[serde(rename = "ICEP")]
    Icep,
    /// Self-dielectrophoresis, metallic hemisphere forward.
    #[serde(rename = "sDEP")]
    Sdep,
    #[serde(rename = "none")]
    None,
}

impl PropulsionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PropulsionMode::Icep => "ICEP",
            PropulsionMode::Sdep => "sDEP",
            PropulsionMode::None => "none",
        }
    }
}

/// A (concentration, transition frequency) anchor of the ICEP→sDEP map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionAnchor {
    #[serde(rename = "nacl_mM")]
    pub nacl_mm: f64,
    pub freq_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropulsionParams {
    /// Electrokinetic speed at the reference conductivity and voltage.
    pub amp_ref_um_per_s: f64,
    #[serde(rename = "amp_ref_nacl_mM")]
    pub amp_ref_nacl_mm: f64,
    pub ref_vpp: f64,
    /// Electrokinetic propulsion vanishes at and above this concentration.
    #[serde(rename = "dead_nacl_mM")]
    pub dead_nacl_mm: f64,
    pub transition: Vec<TransitionAnchor>,
    /// Upper cutoff of sDEP propulsion.
    pub sdep_stop_hz: f64,
    pub sdep_gain: f64,
    /// sDEP below this conductivity pins the JP to the substrate (mode none).
    /// Zero disables sticking.
    pub stick_sigma_s_per_m: f64,
    /// Rolling speed at 100 rpm in 1 mM NaCl.
    pub roll_ref_um_per_s: f64,
    /// Friction gain slope per decade of conductivity, relative to 1 mM.
    pub friction_per_decade: f64,
    pub friction_min: f64,
    pub friction_max: f64,
    /// Translational jitter, µm/√s. Zero disables it.
    pub brownian_um_per_sqrt_s: f64,
}

impl Default for PropulsionParams {
    fn default() -> Self {
        Self {
            amp_ref_um_per_s: 15.0,
            amp_ref_nacl_mm: 0.1,
            ref_vpp: 15.0,
            dead_nacl_mm: 10.0,
            transition: vec![
                TransitionAnchor { nacl_mm: 0.1, freq_hz: 50e3 },
                TransitionAnchor { nacl_mm: 1.0, freq_hz: 300e3 },
                TransitionAnchor { nacl_mm: 10.0, freq_hz: 20e6 },
            ],
            sdep_stop_hz: 1e6,
            sdep_gain: 1.0,
            stick_sigma_s_per_m: 0.0,
            roll_ref_um_per_s: 20.0,
            friction_per_decade: 0.05,
            friction_min: 0.5,
            friction_max: 1.5,
            brownian_um_per_sqrt_s: 0.0,
        }
    }
}

impl PropulsionParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |f: &str, why: &str| Err(SimError::invariant(format!("propulsion.{f}"), why));
        if self.transition.len() < 2 {
            return bad("transition", "needs at least two anchors");
        }
        for w in self.transition.windows(2) {
            if !(w[1].nacl_mm > w[0].nacl_mm && w[1].freq_hz > w[0].freq_hz) {
                return bad("transition", "anchors must increase in both concentration and frequency");
            }
        }
        if self.transition.iter().any(|a| !(a.nacl_mm > 0.0 && a.freq_hz > 0.0)) {
            return bad("transition", "anchors must be positive");
        }
        if !(self.amp_ref_nacl_mm > 0.0 && self.amp_ref_nacl_mm < self.dead_nacl_mm) {
            return bad("amp_ref_nacl_mM", "must lie below dead_nacl_mM");
        }
        if !(self.ref_vpp > 0.0) || !(self.sdep_stop_hz > 0.0) {
            return bad("ref_vpp", "reference voltage and sDEP cutoff must be > 0");
        }
        if self.amp_ref_um_per_s < 0.0 || self.roll_ref_um_per_s < 0.0 {
            return bad("amp_ref_um_per_s", "speeds must be >= 0");
        }
        if self.friction_per_decade < 0.0 || !(self.friction_min <= 1.0 && 1.0 <= self.friction_max) {
            return bad("friction_per_decade", "friction gain must be nondecreasing with g(1 mM) = 1");
        }
        if self.brownian_um_per_sqrt_s < 0.0 {
            return bad("brownian_um_per_sqrt_s", "must be >= 0");
        }
        Ok(())
    }

    /// ICEP→sDEP transition frequency, log-log interpolated through the
    /// anchors and extrapolated along the end segments.
    pub fn transition_hz(&self, sigma: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .transition
            .iter()
            .map(|a| (sigma_of_mm(a.nacl_mm).ln(), a.freq_hz.ln()))
            .collect();
        let x = sigma.ln();
        let seg = pts
            .windows(2)
            .position(|w| x <= w[1].0)
            .unwrap_or(pts.len() - 2);
        let (x0, y0) = pts[seg];
        let (x1, y1) = pts[seg + 1];
        (y0 + (y1 - y0) * (x - x0) / (x1 - x0)).exp()
    }

    /// Electrokinetic amplitude at the reference voltage, µm/s.
    pub fn amplitude(&self, sigma: f64) -> f64 {
        let dead = sigma_of_mm(self.dead_nacl_mm);
        if sigma >= dead {
            return 0.0;
        }
        let reference = sigma_of_mm(self.amp_ref_nacl_mm);
        self.amp_ref_um_per_s * (dead / sigma).ln() / (dead / reference).ln()
    }

    /// Wall-friction gain of magnetic rolling, normalized to 1 at 1 mM.
    pub fn friction_gain(&self, sigma: f64) -> f64 {
        let g = 1.0 + self.friction_per_decade * (sigma / sigma_of_mm(1.0)).log10();
        g.clamp(self.friction_min, self.friction_max)
    }

    /// Shape factor in `[0, 1]` for the given mode and frequency.
    fn mode_shape(&self, mode: PropulsionMode, freq: f64, f_c: f64) -> f64 {
        match mode {
            PropulsionMode::Icep => (1.0 - freq / f_c).max(0.0),
            PropulsionMode::Sdep => {
                let span = (self.sdep_stop_hz / f_c).ln();
                if span <= 0.0 {
                    return 0.0;
                }
                let u = (freq / f_c).ln() / span;
                self.sdep_gain * (std::f64::consts::PI * u).sin().max(0.0)
            }
            PropulsionMode::None => 0.0,
        }
    }
}

/// Electrokinetic mode of a free JP.
pub fn electric_mode(params: &PropulsionParams, medium: &Medium, freq_hz: f64) -> Result<PropulsionMode> {
    if !(MIN_FREQ_HZ..=MAX_FREQ_HZ).contains(&freq_hz) {
        return Err(SimError::InvalidInput(format!(
            "frequency {freq_hz} Hz outside the supported band [1 kHz, 10 MHz]"
        )));
    }
    let sigma = medium.conductivity_s_per_m;
    if params.amplitude(sigma) <= 0.0 {
        return Ok(PropulsionMode::None);
    }
    let f_c = params.transition_hz(sigma);
    let mode = if freq_hz < f_c {
        PropulsionMode::Icep
    } else if freq_hz < params.sdep_stop_hz {
        if sigma < params.stick_sigma_s_per_m {
            PropulsionMode::None
        } else {
            PropulsionMode::Sdep
        }
    } else {
        PropulsionMode::None
    };
    Ok(mode)
}

/// Electrokinetic velocity of a JP whose dielectric hemisphere points along
/// `orientation_rad`. Zero when the field is off or the mode is none.
pub fn electric_velocity(
    params: &PropulsionParams,
    orientation_rad: f64,
    medium: &Medium,
    fs: &FieldState,
) -> Result<Vec2> {
    if !fs.e_on || fs.vpp == 0.0 {
        return Ok(Vec2::ZERO);
    }
    let mode = electric_mode(params, medium, fs.freq_hz)?;
    let sigma = medium.conductivity_s_per_m;
    let f_c = params.transition_hz(sigma);
    let v_scale = (fs.vpp / params.ref_vpp).powi(2);
    let speed = params.amplitude(sigma) * v_scale * params.mode_shape(mode, fs.freq_hz, f_c);
    let dielectric_forward = Vec2::from_angle(orientation_rad);
    Ok(match mode {
        PropulsionMode::Icep => dielectric_forward * speed,
        PropulsionMode::Sdep => dielectric_forward * -speed,
        PropulsionMode::None => Vec2::ZERO,
    })
}

/// Rolling velocity along the magnet heading.
pub fn magnetic_velocity(params: &PropulsionParams, fs: &FieldState, medium: &Medium) -> Vec2 {
    if !fs.b_on {
        return Vec2::ZERO;
    }
    let speed = params.roll_ref_um_per_s * (fs.rpm / 100.0) * params.friction_gain(medium.conductivity_s_per_m);
    Vec2::from_angle(fs.heading_rad) * speed
}

/// Superpose electric and magnetic contributions. The angle is measured from
/// the rolling direction to the resulting direction of motion; it is zero when
/// either contribution is absent.
pub fn combined_velocity(v_e: Vec2, v_m: Vec2) -> (Vec2, f64) {
    let sum = v_e + v_m;
    if v_e == Vec2::ZERO || v_m == Vec2::ZERO || sum == Vec2::ZERO {
        return (sum, 0.0);
    }
    (sum, v_m.cross(sum).atan2(v_m.dot(sum)))
}

/// Joint classification of JP propulsion and capsule trap site.
pub fn behavior_map(
    params: &PropulsionParams,
    model: &CapsuleDielectricModel,
    medium: &Medium,
    freq_hz: f64,
) -> Result<(PropulsionMode, TrapSite)> {
    let mode = electric_mode(params, medium, freq_hz)?;
    Ok((mode, trap_site_for(medium, freq_hz, model)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn nacl(mm: f64) -> Medium {
        Medium::nacl(mm).unwrap()
    }

    #[test]
    fn icep_at_low_conductivity_and_frequency() {
        let p = PropulsionParams::default();
        assert_eq!(electric_mode(&p, &nacl(0.1), 2e3).unwrap(), PropulsionMode::Icep);
    }

    #[test]
    fn ten_mm_is_magnetic_only() {
        let p = PropulsionParams::default();
        assert_eq!(electric_mode(&p, &nacl(10.0), 2e6).unwrap(), PropulsionMode::None);
        let fs = FieldState::default().with_efield(2e6, 15.0);
        for f in [2e3, 10e3, 100e3, 2e6] {
            let fs = FieldState { freq_hz: f, ..fs };
            assert!(electric_velocity(&p, 0.3, &nacl(10.0), &fs).unwrap().norm() < 1e-9);
        }
    }

    #[test]
    fn very_dilute_limit_is_icep_below_transition() {
        let p = PropulsionParams::default();
        let m = nacl(1e-4);
        let f_c = p.transition_hz(m.conductivity_s_per_m);
        let mut f = MIN_FREQ_HZ;
        while f < f_c.min(MAX_FREQ_HZ) {
            assert_eq!(electric_mode(&p, &m, f).unwrap(), PropulsionMode::Icep);
            f *= 1.1;
        }
    }

    #[test]
    fn out_of_band_frequency_rejected() {
        let p = PropulsionParams::default();
        assert!(electric_mode(&p, &nacl(1.0), 500.0).is_err());
        assert!(electric_mode(&p, &nacl(1.0), 20e6).is_err());
    }

    #[test]
    fn icep_moves_dielectric_side_forward() {
        let p = PropulsionParams::default();
        let fs = FieldState::default().with_efield(2e3, 15.0);
        let theta = 1.1;
        let v = electric_velocity(&p, theta, &nacl(0.1), &fs).unwrap();
        let dir = v.normalized();
        assert!((dir - Vec2::from_angle(theta)).norm() < 1e-12);
    }

    #[test]
    fn sdep_moves_metal_side_forward() {
        let p = PropulsionParams::default();
        let fs = FieldState::default().with_efield(200e3, 15.0);
        let v = electric_velocity(&p, 0.0, &nacl(0.1), &fs).unwrap();
        assert!(v.x < 0.0 && v.y.abs() < 1e-12);
    }

    #[test]
    fn zero_volts_zero_velocity() {
        let p = PropulsionParams::default();
        let fs = FieldState::default().with_efield(2e3, 0.0);
        assert_eq!(electric_velocity(&p, 0.0, &nacl(0.1), &fs).unwrap(), Vec2::ZERO);
    }

    #[test]
    fn electric_speed_scales_with_vpp_squared() {
        let p = PropulsionParams::default();
        let a = electric_velocity(&p, 0.0, &nacl(0.1), &FieldState::default().with_efield(2e3, 15.0)).unwrap();
        let b = electric_velocity(&p, 0.0, &nacl(0.1), &FieldState::default().with_efield(2e3, 7.5)).unwrap();
        assert!((a.norm() / b.norm() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rolling_is_linear_in_rpm() {
        let p = PropulsionParams::default();
        let m = nacl(1.0);
        let v100 = magnetic_velocity(&p, &FieldState::default().with_magnet(0.0, 100.0), &m);
        let v200 = magnetic_velocity(&p, &FieldState::default().with_magnet(0.0, 200.0), &m);
        assert_eq!(v200.norm(), 2.0 * v100.norm());
        assert!((v100.norm() - p.roll_ref_um_per_s).abs() < 1e-12);
        assert_eq!(magnetic_velocity(&p, &FieldState::default().with_magnet(0.0, 0.0), &m), Vec2::ZERO);
    }

    #[test]
    fn rolling_speeds_up_with_salt() {
        let p = PropulsionParams::default();
        let s = |mm: f64| p.friction_gain(sigma_of_mm(mm));
        assert!(s(10.0) >= s(0.01));
        assert!((s(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rolling_ignores_efield_frequency() {
        let p = PropulsionParams::default();
        let m = nacl(0.1);
        let base = FieldState::default().with_magnet(0.7, 100.0);
        let v1 = magnetic_velocity(&p, &base.with_efield(2e3, 15.0), &m);
        let v2 = magnetic_velocity(&p, &base.with_efield(2e6, 15.0), &m);
        assert_eq!(v1, v2);
    }

    #[test]
    fn combined_angle_cases() {
        let (_, th) = combined_velocity(Vec2::ZERO, Vec2::new(3.0, 0.0));
        assert_eq!(th, 0.0);
        let (_, th) = combined_velocity(Vec2::new(0.0, 2.0), Vec2::new(2.0, 0.0));
        assert!((th - FRAC_PI_4).abs() < 1e-12);
        let (v, th) = combined_velocity(Vec2::ZERO, Vec2::ZERO);
        assert_eq!((v, th), (Vec2::ZERO, 0.0));
    }

    #[test]
    fn amplitude_and_transition_trends() {
        let p = PropulsionParams::default();
        let mut prev_a = f64::INFINITY;
        let mut prev_fc = 0.0;
        let mut mm = 0.01;
        while mm < 10.0 {
            let s = sigma_of_mm(mm);
            assert!(p.amplitude(s) < prev_a);
            assert!(p.transition_hz(s) > prev_fc);
            prev_a = p.amplitude(s);
            prev_fc = p.transition_hz(s);
            mm *= 1.1;
        }
        assert_eq!(p.amplitude(sigma_of_mm(10.0)), 0.0);
        assert!((p.amplitude(sigma_of_mm(0.1)) - 15.0).abs() < 1e-9);
        assert!((p.transition_hz(sigma_of_mm(1.0)) - 300e3).abs() < 1e-6);
    }

    #[test]
    fn single_transition_per_conductivity() {
        let p = PropulsionParams::default();
        for mm in [0.01, 0.1, 0.5, 1.0, 3.0] {
            let m = nacl(mm);
            let mut changes = 0;
            let mut prev = electric_mode(&p, &m, MIN_FREQ_HZ).unwrap();
            let mut f = MIN_FREQ_HZ;
            while f <= MAX_FREQ_HZ {
                let mode = electric_mode(&p, &m, f).unwrap();
                if prev == PropulsionMode::Icep && mode == PropulsionMode::Sdep {
                    changes += 1;
                }
                assert!(!(prev != PropulsionMode::Icep && mode == PropulsionMode::Icep));
                prev = mode;
                f *= 1.02;
            }
            assert!(changes <= 1);
        }
    }
}
