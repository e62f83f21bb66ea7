//! Built-in scenarios for the reference experiments.

use std::f64::consts::PI;

use crate::agents::SizeClass;
use crate::chamber::JP_RADIUS_UM;
use crate::discharge::DischargeParams;
use crate::engine::scenario::{
    CapsuleSpec, ControlAction, JpSpec, ScatterSpec, Scenario, ScriptEntry, SpheroidSpec, WormSpec, WormStart,
};
use crate::error::Result;
use crate::field::FieldState;
use crate::geom::Vec2;
use crate::medium::Medium;
use crate::propulsion::{combined_velocity, electric_velocity, magnetic_velocity};
use crate::rng::{RandomSource, Stream};
use crate::targets::calibrate_standoff;

pub const NAMES: &[&str] = &["transport", "behavior-cell", "open-activation", "shear-rolling", "shear-static", "mission", "worm"];

pub fn by_name(name: &str, seed: u64) -> Option<Scenario> {
    Some(match name {
        "transport" => transport(seed),
        "behavior-cell" => behavior_cell(0.1, 2e3, seed),
        "open-activation" => open_activation(10_000, seed),
        "shear-rolling" => shear_load(true, seed),
        "shear-static" => shear_load(false, seed),
        "mission" => spheroid_mission(seed).ok()?,
        "worm" => worm_assay(seed),
        _ => return None,
    })
}

fn ring(center: Vec2, radius: f64, n: usize, phase: f64, size: SizeClass, kind: &str) -> Vec<CapsuleSpec> {
    (0..n)
        .map(|i| {
            let a = phase + 2.0 * PI * i as f64 / n as f64;
            CapsuleSpec { position_um: center + Vec2::from_angle(a) * radius, size, payload: 1.0, kind: kind.into() }
        })
        .collect()
}

fn set_magnet(t: f64, heading: f64, rpm: f64) -> ScriptEntry {
    ScriptEntry { t, action: ControlAction::SetMagnet { heading: Some(heading), rpm: Some(rpm), on: Some(true) } }
}

fn magnet_off(t: f64) -> ScriptEntry {
    ScriptEntry { t, action: ControlAction::SetMagnet { heading: None, rpm: None, on: Some(false) } }
}

/// One JP in PBS picking up capsules while rolling east under a 10 kHz field.
pub fn transport(seed: u64) -> Scenario {
    let mut s = Scenario::new(Medium::pbs());
    s.seed = seed;
    s.duration = 30.0;
    s.field = FieldState::default().with_efield(10e3, 15.0).with_magnet(0.0, 100.0);
    s.jps.push(JpSpec { position_um: Vec2::new(-300.0, 0.0), orientation_rad: PI / 2.0 });
    s.capsules = ring(Vec2::new(-300.0, 0.0), JP_RADIUS_UM + 4.0, 6, 0.3, SizeClass::Small, "TBO");
    s
}

/// One free JP under a fixed AC field among scattered capsules.
pub fn behavior_cell(nacl_mm: f64, freq_hz: f64, seed: u64) -> Scenario {
    let mut s = Scenario::new(Medium::nacl(nacl_mm).expect("valid concentration"));
    s.seed = seed;
    s.duration = 60.0;
    s.field = FieldState::default().with_efield(freq_hz, 15.0);
    s.jps.push(JpSpec { position_um: Vec2::ZERO, orientation_rad: 0.0 });
    s.capsule_scatter.push(ScatterSpec {
        count: 400,
        center_um: Vec2::ZERO,
        radius_um: 1200.0,
        size: SizeClass::Small,
        payload: 1.0,
        kind: "TBO".into(),
    });
    s
}

/// Free capsules spread through the chamber with a saturating enzyme
/// concentration present from the start.
pub fn open_activation(capsules: u32, seed: u64) -> Scenario {
    let mut s = Scenario::new(Medium::physiological_buffer());
    s.seed = seed;
    s.dt = 0.1;
    s.duration = 660.0;
    s.record.sample_interval_s = 10.0;
    s.enzyme.initial_uniform = Some(1.0);
    s.capsule_scatter.push(ScatterSpec {
        count: capsules,
        center_um: Vec2::ZERO,
        radius_um: 4000.0,
        size: SizeClass::Small,
        payload: 1.0,
        kind: "TBO".into(),
    });
    s
}

pub const SHEAR_JPS: usize = 16;
pub const SHEAR_DURATION_S: f64 = 10_000.0;
const SHEAR_TURN_EVERY_S: f64 = 120.0;
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

/// JPs wandering through a field of free capsules in 0.1 mM NaCl at 2 kHz.
/// With `rolling` the magnet drives them at 100 rpm, aimed so that the
/// combined rolling and ICEP motion follows the scripted course; otherwise
/// they move by ICEP alone. The course turns by the golden angle every two
/// minutes so the swarm keeps meeting fresh capsules.
pub fn shear_load(rolling: bool, seed: u64) -> Scenario {
    let mut s = Scenario::new(Medium::nacl(0.1).expect("valid concentration"));
    s.seed = seed;
    s.duration = if rolling { SHEAR_DURATION_S } else { 360.0 };
    s.field = FieldState::default().with_efield(2e3, 15.0);
    for i in 0..SHEAR_JPS {
        let (row, col) = ((i / 4) as f64, (i % 4) as f64);
        let p = Vec2::new(-1500.0 + 1000.0 * col, -1500.0 + 1000.0 * row);
        s.jps.push(JpSpec { position_um: p, orientation_rad: 0.0 });
    }
    s.capsule_scatter.push(ScatterSpec {
        count: 3000,
        center_um: Vec2::ZERO,
        radius_um: 4400.0,
        size: SizeClass::Small,
        payload: 1.0,
        kind: "TBO".into(),
    });
    if rolling {
        let probe = s.field.with_magnet(0.0, 100.0);
        let v_m = magnetic_velocity(&s.propulsion, &probe, &s.medium);
        let v_e = electric_velocity(&s.propulsion, PI / 2.0, &s.medium, &probe).expect("valid field");
        let (_, theta) = combined_velocity(v_e, v_m);
        s.field = s.field.with_magnet(-theta, 100.0);
        let turns = (s.duration / SHEAR_TURN_EVERY_S).ceil() as usize;
        s.script = (1..turns)
            .map(|k| {
                let course = crate::geom::wrap_angle(k as f64 * GOLDEN_ANGLE);
                set_magnet(k as f64 * SHEAR_TURN_EVERY_S, crate::geom::wrap_angle(course - theta), 100.0)
            })
            .collect();
    }
    s
}

pub const MISSION_SPHEROID_CENTER: Vec2 = Vec2 { x: -3300.0, y: 600.0 };
pub const MISSION_SPHEROID_RADIUS_UM: f64 = 500.0;
pub const MISSION_START: Vec2 = Vec2 { x: 3900.0, y: 0.0 };
pub const MISSION_WAYPOINT: Vec2 = Vec2 { x: 0.0, y: 2000.0 };
pub const MISSION_JPS: usize = 4;
pub const MISSION_CAPSULES_PER_JP: usize = 10;

/// Standoff from the spheroid centre giving the reference hit fraction.
pub fn mission_standoff_um(discharge: &DischargeParams) -> Result<f64> {
    let mut rng = RandomSource::new(0, Stream::MonteCarlo);
    Ok(calibrate_standoff(MISSION_SPHEROID_RADIUS_UM, discharge, 0.23, 100_000, &mut rng)?.d_star_um)
}

/// A swarm of capsule-laden JPs in cell medium is rolled from the right
/// inlet past a waypoint to the calibrated standoff south of a spheroid,
/// then enzyme is infused from the left inlet.
pub fn spheroid_mission(seed: u64) -> Result<Scenario> {
    let mut s = Scenario::new(Medium::cell_medium());
    s.seed = seed;
    s.dt = 0.02;
    s.record.sample_interval_s = 5.0;
    let d_star = mission_standoff_um(&s.discharge)?;
    let stop = MISSION_SPHEROID_CENTER + Vec2::new(0.0, -d_star);

    let spacing = 40.0;
    let offsets: Vec<Vec2> =
        (0..MISSION_JPS).map(|i| Vec2::new((i as f64 - 0.5 * (MISSION_JPS - 1) as f64) * spacing, 0.0)).collect();
    for (i, off) in offsets.iter().enumerate() {
        let p = MISSION_START + *off;
        s.jps.push(JpSpec { position_um: p, orientation_rad: PI / 2.0 });
        let phase = 0.37 * i as f64;
        s.capsules.extend(ring(p, JP_RADIUS_UM + 3.0, MISSION_CAPSULES_PER_JP, phase, SizeClass::Small, "TBO"));
    }
    s.spheroids.push(SpheroidSpec { center_um: MISSION_SPHEROID_CENTER, radius_um: MISSION_SPHEROID_RADIUS_UM });

    let rpm = 100.0;
    let probe = FieldState::default().with_magnet(0.0, rpm);
    let speed = magnetic_velocity(&s.propulsion, &probe, &s.medium).norm();
    let leg1 = MISSION_WAYPOINT - MISSION_START;
    let leg2 = stop - MISSION_WAYPOINT;
    let t1 = 1.0 + leg1.norm() / speed;
    let t2 = t1 + leg2.norm() / speed;
    let t_inject = t2 + 5.0;
    s.script = vec![
        set_magnet(1.0, leg1.angle(), rpm),
        set_magnet(t1, leg2.angle(), rpm),
        magnet_off(t2),
        ScriptEntry {
            t: t_inject,
            action: ControlAction::InjectEnzyme { inlet: "left".into(), c: 1.0, hold_s: Some(600.0) },
        },
    ];
    s.duration = (t_inject + 600.0).ceil();
    Ok(s)
}

/// Levamisole-paralyzed worms next to capsule-laden JPs in physiological
/// buffer, with one freely swimming worm for contrast.
pub fn worm_assay(seed: u64) -> Scenario {
    let mut s = Scenario::new(Medium::physiological_buffer());
    s.seed = seed;
    s.duration = 900.0;
    s.dt = 0.05;
    let sites = [(Vec2::new(-1500.0, 0.0), SizeClass::Small), (Vec2::new(1500.0, 0.0), SizeClass::Large)];
    for (i, (c, size)) in sites.iter().enumerate() {
        s.worms.push(WormSpec { position_um: *c, heading_rad: 0.0, speed_um_per_s: None, state: WormStart::Paralyzed });
        for k in 0..3 {
            let p = *c + Vec2::new((k as f64 - 1.0) * 80.0, -30.0);
            s.jps.push(JpSpec { position_um: p, orientation_rad: PI / 2.0 });
            let phase = 0.5 * (i * 3 + k) as f64;
            s.capsules.extend(ring(p, JP_RADIUS_UM + 4.0, 6, phase, *size, "AO"));
        }
    }
    s.worms.push(WormSpec {
        position_um: Vec2::new(0.0, 2500.0),
        heading_rad: 0.0,
        speed_um_per_s: None,
        state: WormStart::Swimming,
    });
    s.script = ["left", "right"]
        .into_iter()
        .map(|inlet| ScriptEntry {
            t: 5.0,
            action: ControlAction::InjectEnzyme { inlet: inlet.into(), c: 1.0, hold_s: Some(900.0) },
        })
        .collect();
    s
}
