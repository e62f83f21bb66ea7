//! Parameter sweeps, Monte-Carlo replicate studies and calibrations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dep::{calibrate_capsule_model, CalibrationReport, DepConstraint};
use crate::discharge::{calibrate_activation, ActivationModel};
use crate::engine::{run, RunRecord, Scenario};
use crate::error::{Result, SimError};
use crate::propulsion::behavior_map;
use crate::rng::{RandomSource, Stream};
use crate::targets::{calibrate_standoff, StandoffReport, TargetRef};

pub const DEFAULT_RUN_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the scenario document, e.g. `field.freq_hz`.
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    #[serde(default = "one")]
    pub replicates: u32,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_cap")]
    pub max_runs: usize,
}

fn one() -> u32 {
    1
}

fn default_cap() -> usize {
    DEFAULT_RUN_CAP
}

impl SweepSpec {
    pub fn cells(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(SimError::invariant("replicates", "must be at least 1"));
        }
        for (i, a) in self.axes.iter().enumerate() {
            if a.values.is_empty() {
                return Err(SimError::invariant(format!("axes[{i}].values"), "must not be empty"));
            }
        }
        let runs = self.cells().saturating_mul(self.replicates as usize);
        if runs > self.max_runs {
            return Err(SimError::invariant("axes", format!("{runs} runs exceed the cap of {}", self.max_runs)));
        }
        Ok(())
    }
}

pub fn load_sweep_spec(text: &str) -> Result<SweepSpec> {
    let spec: SweepSpec = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

/// Set a dotted path in a scenario, going through its serialized form so
/// that every document key is addressable.
pub fn set_path(scenario: &Scenario, path: &str, value: &Value) -> Result<Scenario> {
    let mut doc = serde_json::to_value(scenario).map_err(|e| SimError::Parse(e.to_string()))?;
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().ok_or_else(|| SimError::invariant("path", "empty"))?;
    let mut node = &mut doc;
    for key in parents {
        node = node
            .get_mut(*key)
            .ok_or_else(|| SimError::invariant(path, format!("no key {key:?}")))?;
    }
    let obj = node.as_object_mut().ok_or_else(|| SimError::invariant(path, "parent is not a table"))?;
    obj.insert(last.to_string(), value.clone());
    if *last == "nacl_mM" {
        // Derived from the concentration; a stale value would be rejected.
        obj.remove("conductivity_s_per_m");
    }
    let out: Scenario = serde_json::from_value(doc).map_err(|e| SimError::invariant(path, e.to_string()))?;
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Axis values of this cell, in axis order.
    pub cell: Vec<Value>,
    pub medium: String,
    pub freq_hz: f64,
    pub mode: String,
    pub trap_site: String,
    pub mean_load: f64,
    pub replicates: u32,
}

/// Cartesian sweep. Rows come back in axis order (first axis outermost)
/// however the runs were scheduled.
pub fn sweep(base: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let n = spec.cells();
    let mut cells = Vec::with_capacity(n);
    for index in 0..n {
        let mut rem = index;
        let mut coords = vec![0; spec.axes.len()];
        for (k, axis) in spec.axes.iter().enumerate().rev() {
            coords[k] = rem % axis.values.len();
            rem /= axis.values.len();
        }
        let mut s = base.clone();
        let mut cell = Vec::new();
        for (k, axis) in spec.axes.iter().enumerate() {
            let v = &axis.values[coords[k]];
            s = set_path(&s, &axis.path, v)?;
            cell.push(v.clone());
        }
        cells.push((cell, s));
    }
    let jobs: Vec<(usize, u32)> = (0..n).flat_map(|c| (0..spec.replicates).map(move |r| (c, r))).collect();
    let loads: Vec<f64> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let mut s = cells[c].1.clone();
            s.seed = spec.seed_base.wrapping_add(r as u64);
            Ok(run(&s)?.metrics.mean_load_per_jp)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(n);
    for (c, (cell, s)) in cells.into_iter().enumerate() {
        let (mode, site) = behavior_map(&s.propulsion, &s.capsule_model, &s.medium, s.field.freq_hz)?;
        let reps = &loads[c * spec.replicates as usize..(c + 1) * spec.replicates as usize];
        let total: f64 = reps.iter().sum();
        rows.push(SweepRow {
            cell,
            medium: s.medium.describe(),
            freq_hz: s.field.freq_hz,
            mode: mode.as_str().into(),
            trap_site: site.as_str().into(),
            mean_load: total / spec.replicates as f64,
            replicates: spec.replicates,
        });
    }
    Ok(rows)
}

/// Mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub sd: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Interval {
    /// With a single value the interval collapses onto it.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN, lo: f64::NAN, hi: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Self { mean, sd: 0.0, lo: mean, hi: mean, n };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let half = 1.96 * sd / (n as f64).sqrt();
        Self { mean, sd, lo: mean - half, hi: mean + half, n }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: f64,
    pub activated: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDoseInterval {
    pub target: TargetRef,
    pub dose: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub replicates: usize,
    pub seed_base: u64,
    /// Per-replicate penetrations over ejected tubules; replicates without
    /// ejections are left out.
    pub hit_fraction: Interval,
    /// All penetrations over all ejected tubules.
    pub pooled_hit_fraction: f64,
    /// Share of replicates with at least one penetration.
    pub any_penetration: f64,
    pub transported_um: Interval,
    pub dose_by_target: Vec<TargetDoseInterval>,
    pub activation_curve: Vec<CurvePoint>,
}

pub fn monte_carlo_records(scenario: &Scenario, n: usize, seed_base: u64) -> Result<Vec<RunRecord>> {
    if n == 0 {
        return Err(SimError::invariant("replicates", "must be at least 1"));
    }
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = scenario.clone();
            s.seed = seed_base.wrapping_add(i as u64);
            run(&s)
        })
        .collect()
}

pub fn monte_carlo(scenario: &Scenario, n: usize, seed_base: u64) -> Result<McReport> {
    let records = monte_carlo_records(scenario, n, seed_base)?;
    Ok(summarize(&records, seed_base))
}

pub fn summarize(records: &[RunRecord], seed_base: u64) -> McReport {
    let metrics: Vec<_> = records.iter().map(|r| &r.metrics).collect();
    let fractions: Vec<f64> = metrics.iter().filter(|m| m.tubules > 0).map(|m| m.hit_fraction).collect();
    let tubules: usize = metrics.iter().map(|m| m.tubules).sum();
    let hits: usize = metrics.iter().map(|m| m.penetrations).sum();
    let any = metrics.iter().filter(|m| m.penetrations > 0).count();

    let mut dose_by_target = Vec::new();
    if let Some(first) = metrics.first() {
        for (k, td) in first.dose_by_target.iter().enumerate() {
            let doses: Vec<f64> = metrics.iter().map(|m| m.dose_by_target.get(k).map_or(0.0, |d| d.total)).collect();
            dose_by_target.push(TargetDoseInterval { target: td.target, dose: Interval::of(&doses) });
        }
    }
    let points = metrics.iter().map(|m| m.series.len()).min().unwrap_or(0);
    let activation_curve = (0..points)
        .map(|i| {
            let values: Vec<f64> = metrics.iter().map(|m| m.series[i].activated_fraction).collect();
            CurvePoint { t: metrics[0].series[i].t, activated: Interval::of(&values) }
        })
        .collect();
    let n = records.len();
    McReport {
        replicates: n,
        seed_base,
        hit_fraction: Interval::of(&fractions),
        pooled_hit_fraction: if tubules == 0 { 0.0 } else { hits as f64 / tubules as f64 },
        any_penetration: if n == 0 { 0.0 } else { any as f64 / n as f64 },
        transported_um: Interval::of(&metrics.iter().map(|m| m.mean_path_um).collect::<Vec<_>>()),
        dose_by_target,
        activation_curve,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationCalibration {
    pub fraction: f64,
    pub t_s: f64,
    pub stages: u32,
    pub lambda_max_per_s: f64,
    /// Fired fraction under saturation at a few reference times.
    pub curve: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Calibration {
    CapsuleModel(CalibrationReport),
    Standoff(StandoffReport),
    Activation(ActivationCalibration),
}

pub fn calibrate_capsule() -> Result<Calibration> {
    Ok(Calibration::CapsuleModel(calibrate_capsule_model(&DepConstraint::observed(), 0.0)?))
}

pub fn calibrate_standoff_report(
    radius_um: f64,
    target: f64,
    samples: usize,
    seed: u64,
    scenario: &Scenario,
) -> Result<Calibration> {
    let mut rng = RandomSource::new(seed, Stream::MonteCarlo);
    Ok(Calibration::Standoff(calibrate_standoff(radius_um, &scenario.discharge, target, samples, &mut rng)?))
}

pub fn calibrate_activation_report(fraction: f64, t_s: f64, stages: u32) -> Result<Calibration> {
    let lambda = calibrate_activation(fraction, t_s, stages)?;
    let model = ActivationModel { lambda_max_per_s: lambda, stages, ..ActivationModel::default() };
    let rate = model.hazard(f64::INFINITY);
    let curve = [60.0, 120.0, 300.0, 660.0].into_iter().map(|t| (t, model.fired_fraction(rate, t))).collect();
    Ok(Calibration::Activation(ActivationCalibration { fraction, t_s, stages, lambda_max_per_s: lambda, curve }))
}
