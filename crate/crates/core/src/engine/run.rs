//! Batch runs, run metrics and log replay.

use serde::{Deserialize, Serialize};

use crate::discharge::DoseMode;
use crate::error::Result;
use crate::targets::TargetRef;

use super::events::{log_to_string, parse_log, Event};
use super::scenario::{Scenario, SCHEMA_VERSION};
use super::world::{Sample, Snapshot, World};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema_version: u32,
    pub seed: u64,
    pub dt: f64,
    pub duration: f64,
    pub steps: u64,
    pub enzyme_d_eff_um2_per_s: f64,
    /// The enzyme transport coefficient is a fitted effective dispersion
    /// that lumps injection-driven flow with molecular diffusion.
    pub enzyme_d_eff_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDose {
    pub target: TargetRef,
    pub tip: f64,
    pub path: f64,
    pub total: f64,
    pub max_depth_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_path_um: f64,
    pub max_path_um: f64,
    /// Time-averaged intact capsules per JP.
    pub mean_load_per_jp: f64,
    pub max_load_per_jp: u32,
    pub max_equator_load: u32,
    pub capsules: usize,
    pub activated_fraction: f64,
    pub first_activation_s: Option<f64>,
    pub tubules: usize,
    pub penetrations: usize,
    /// Penetrations over ejected tubules, zero when none were ejected.
    pub hit_fraction: f64,
    pub penetration_depths_um: Vec<f64>,
    pub dose_by_target: Vec<TargetDose>,
    pub ambient_plume: f64,
    pub payload_initial: f64,
    pub payload_remaining: f64,
    pub payload_delivered: f64,
    pub payload_mismatches: usize,
    pub swollen_spheroids: Vec<u32>,
    pub series: Vec<Sample>,
}

impl Metrics {
    pub fn from_world(world: &World) -> Self {
        let n_jp = world.jps.len();
        let mean_path_um = if n_jp == 0 { 0.0 } else { world.jps.iter().map(|j| j.path_um).sum::<f64>() / n_jp as f64 };
        let max_path_um = world.jps.iter().map(|j| j.path_um).fold(0.0, f64::max);
        let ledger = &world.ledger;
        let mean_load_per_jp = if ledger.load_time_s > 0.0 { ledger.load_integral / ledger.load_time_s } else { world.mean_load() };

        let mut targets: Vec<TargetDose> = world
            .dose_by_target()
            .into_iter()
            .map(|(target, _)| TargetDose { target, tip: 0.0, path: 0.0, total: 0.0, max_depth_um: 0.0 })
            .collect();
        let mut ambient_plume = 0.0;
        for (_, dose) in &ledger.doses {
            match dose.target.and_then(|t| targets.iter_mut().find(|d| d.target == t)) {
                Some(entry) => {
                    match dose.mode {
                        DoseMode::Tip => entry.tip += dose.amount,
                        DoseMode::Path => entry.path += dose.amount,
                        DoseMode::Plume => {}
                    }
                    entry.total += dose.amount;
                    entry.max_depth_um = entry.max_depth_um.max(dose.depth_um);
                }
                None => ambient_plume += dose.amount,
            }
        }
        let tubules = ledger.tubules_ejected;
        Metrics {
            mean_path_um,
            max_path_um,
            mean_load_per_jp,
            max_load_per_jp: ledger.max_load,
            max_equator_load: ledger.max_equator_load,
            capsules: world.capsules.len(),
            activated_fraction: world.activated_fraction(),
            first_activation_s: ledger.first_activation_s,
            tubules,
            penetrations: ledger.penetrations,
            hit_fraction: if tubules == 0 { 0.0 } else { ledger.penetrations as f64 / tubules as f64 },
            penetration_depths_um: ledger.penetration_depths_um.clone(),
            dose_by_target: targets,
            ambient_plume,
            payload_initial: ledger.initial_payload.iter().sum(),
            payload_remaining: world.capsules.iter().map(|c| c.payload).sum(),
            payload_delivered: ledger.delivered.iter().sum(),
            payload_mismatches: world.payload_mismatches(),
            swollen_spheroids: world.spheroids.iter().filter(|s| s.swollen).map(|s| s.id).collect(),
            series: ledger.series.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub events: Vec<Event>,
    pub metrics: Metrics,
    pub final_state: Snapshot,
}

impl RunRecord {
    pub fn log(&self) -> String {
        log_to_string(&self.events)
    }
}

pub fn run_meta(scenario: &Scenario) -> RunMeta {
    RunMeta {
        schema_version: SCHEMA_VERSION,
        seed: scenario.seed,
        dt: scenario.dt,
        duration: scenario.duration,
        steps: scenario.steps(),
        enzyme_d_eff_um2_per_s: scenario.enzyme.d_eff_um2_per_s,
        enzyme_d_eff_note: "effective dispersion fitted to observed arrival times; includes injection-driven flow".into(),
    }
}

/// Run a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunRecord> {
    let mut world = World::new(scenario)?;
    let events = world.run_to_end()?;
    Ok(finish(world, events))
}

pub fn finish(world: World, events: Vec<Event>) -> RunRecord {
    RunRecord {
        meta: run_meta(&world.scenario),
        metrics: Metrics::from_world(&world),
        final_state: world.snapshot(None),
        events,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Verdict {
    Identical { events: usize },
    /// First line where the recorded and regenerated logs differ.
    Diverged {
        index: usize,
        t: Option<f64>,
        expected: Option<String>,
        actual: Option<String>,
    },
}

/// Re-run the scenario and compare its log with a recorded one line by line.
pub fn replay(scenario: &Scenario, recorded: &str) -> Result<Verdict> {
    let recorded = parse_log(recorded)?;
    let fresh = run(scenario)?;
    let actual: Vec<String> = fresh.events.iter().map(Event::to_line).collect();
    let n = recorded.len().max(actual.len());
    for i in 0..n {
        let exp = recorded.get(i);
        let act = actual.get(i);
        if exp.map(|(l, _)| l) != act {
            let t = exp.map(|(_, e)| e.t).or_else(|| fresh.events.get(i).map(|e| e.t));
            return Ok(Verdict::Diverged { index: i, t, expected: exp.map(|(l, _)| l.clone()), actual: act.cloned() });
        }
    }
    Ok(Verdict::Identical { events: actual.len() })
}
