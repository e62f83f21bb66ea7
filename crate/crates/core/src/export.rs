//! CSV and binary exports of run results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::batch::SweepRow;
use crate::discharge::DoseMode;
use crate::engine::{write_log, EventKind, RunRecord};
use crate::enzyme::EnzymeGrid;
use crate::error::{Result, SimError};

#[derive(Debug, Serialize)]
struct DoseRow<'a> {
    t: f64,
    capsule: u32,
    target_kind: &'a str,
    target_id: Option<u32>,
    mode: &'a str,
    depth_um: f64,
    amount: f64,
    x_um: f64,
    y_um: f64,
    payload_kind: &'a str,
    visible: bool,
}

fn csv_err(e: csv::Error) -> SimError {
    SimError::Io(std::io::Error::other(e))
}

/// One row per delivered dose, in log order.
pub fn write_doses_csv<W: Write>(record: &RunRecord, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for e in &record.events {
        let EventKind::DoseDelivered { capsule, target, amount, depth_um, mode, position_um, payload_kind, visible } = &e.kind
        else {
            continue;
        };
        let target_kind = match target {
            Some(t) => match t.kind {
                crate::targets::TargetKind::Spheroid => "spheroid",
                crate::targets::TargetKind::Worm => "worm",
            },
            None => "ambient",
        };
        out.serialize(DoseRow {
            t: e.t,
            capsule: *capsule,
            target_kind,
            target_id: target.map(|t| t.id),
            mode: match mode {
                DoseMode::Tip => "tip",
                DoseMode::Path => "path",
                DoseMode::Plume => "plume",
            },
            depth_um: *depth_um,
            amount: *amount,
            x_um: position_um.x,
            y_um: position_um.y,
            payload_kind,
            visible: *visible,
        })
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Load and activation time series.
pub fn write_series_csv<W: Write>(record: &RunRecord, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for s in &record.metrics.series {
        out.serialize(s).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct FlatSweepRow<'a> {
    medium: &'a str,
    freq_hz: f64,
    mode: &'a str,
    trap_site: &'a str,
    mean_load: f64,
    replicates: u32,
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(FlatSweepRow {
            medium: &r.medium,
            freq_hz: r.freq_hz,
            mode: &r.mode,
            trap_site: &r.trap_site,
            mean_load: r.mean_load,
            replicates: r.replicates,
        })
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

/// Files written by [`write_run_artifacts`].
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub events: PathBuf,
    pub metrics: PathBuf,
    pub doses: PathBuf,
    pub series: PathBuf,
}

/// Write the event log, metrics summary and CSV exports under `dir`,
/// prefixed with `stem`.
pub fn write_run_artifacts(record: &RunRecord, dir: &Path, stem: &str) -> Result<Artifacts> {
    fs::create_dir_all(dir)?;
    let a = Artifacts {
        events: dir.join(format!("{stem}.events.jsonl")),
        metrics: dir.join(format!("{stem}.metrics.json")),
        doses: dir.join(format!("{stem}.doses.csv")),
        series: dir.join(format!("{stem}.series.csv")),
    };
    write_log(&record.events, std::io::BufWriter::new(fs::File::create(&a.events)?))?;
    let summary = serde_json::json!({ "meta": record.meta, "metrics": record.metrics });
    fs::write(&a.metrics, serde_json::to_string_pretty(&summary).expect("metrics serialize"))?;
    write_doses_csv(record, fs::File::create(&a.doses)?)?;
    write_series_csv(record, fs::File::create(&a.series)?)?;
    Ok(a)
}

pub fn write_grid(grid: &EnzymeGrid, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    grid.write_binary(&mut f)?;
    f.flush()?;
    Ok(())
}
