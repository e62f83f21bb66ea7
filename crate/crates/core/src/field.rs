//! Applied electric and rotating-magnetic field settings.

use serde::{Deserialize, Serialize};

use crate::geom::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldState {
    #[serde(default)]
    pub e_on: bool,
    #[serde(default = "default_freq")]
    pub freq_hz: f64,
    #[serde(default)]
    pub vpp: f64,
    /// Electrode gap, i.e. chamber height.
    #[serde(default = "default_gap")]
    pub gap_um: f64,
    #[serde(default)]
    pub b_on: bool,
    #[serde(default)]
    pub heading_rad: f64,
    #[serde(default)]
    pub rpm: f64,
}

fn default_freq() -> f64 {
    10e3
}

fn default_gap() -> f64 {
    100.0
}

impl Default for FieldState {
    fn default() -> Self {
        Self {
            e_on: false,
            freq_hz: default_freq(),
            vpp: 0.0,
            gap_um: default_gap(),
            b_on: false,
            heading_rad: 0.0,
            rpm: 0.0,
        }
    }
}

impl FieldState {
    pub fn with_efield(mut self, freq_hz: f64, vpp: f64) -> Self {
        self.e_on = true;
        self.freq_hz = freq_hz;
        self.vpp = vpp;
        self
    }

    pub fn with_magnet(mut self, heading_rad: f64, rpm: f64) -> Self {
        self.b_on = true;
        self.heading_rad = wrap_angle(heading_rad);
        self.rpm = rpm;
        self
    }

    pub fn normalized(mut self) -> Self {
        self.heading_rad = wrap_angle(self.heading_rad);
        self
    }

    pub fn magnet_active(&self) -> bool {
        self.b_on && self.rpm > 0.0
    }
}

/// Peak field between parallel-plate electrodes, V/m.
pub fn field_amplitude_v_per_m(fs: &FieldState) -> f64 {
    if !fs.e_on {
        return 0.0;
    }
    (fs.vpp / 2.0) / (fs.gap_um * 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_plate_amplitude() {
        let fs = FieldState::default().with_efield(10e3, 15.0);
        assert!((field_amplitude_v_per_m(&fs) - 7.5e4).abs() < 1e-6);
    }

    #[test]
    fn zero_when_off_or_unpowered() {
        let fs = FieldState::default().with_efield(10e3, 0.0);
        assert_eq!(field_amplitude_v_per_m(&fs), 0.0);
        let mut off = FieldState::default().with_efield(10e3, 15.0);
        off.e_on = false;
        assert_eq!(field_amplitude_v_per_m(&off), 0.0);
    }

    #[test]
    fn heading_is_wrapped() {
        let fs = FieldState::default().with_magnet(-std::f64::consts::PI, 100.0);
        assert!((fs.heading_rad - std::f64::consts::PI).abs() < 1e-12);
    }
}
