use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use stinger::batch::{self, Calibration};
use stinger::engine::{self, Scenario, Verdict, World};
use stinger::export;
use stinger::gateway::{self, GatewayConfig};
use stinger::{presets, SimError};

#[derive(Parser)]
#[command(name = "stinger", version, about = "Capsule-carrying Janus microrobot simulator")]
struct Cli {
    /// Seed overriding the scenario's own.
    #[arg(long, global = true, env = "STINGER_SEED")]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Enzyme grid cell size in µm.
    #[arg(long, global = true)]
    grid_cell: Option<f64>,
    /// Simulated seconds per wall-clock second when serving.
    #[arg(long, global = true, default_value_t = 1.0)]
    time_scale: f64,
    #[arg(long, global = true, default_value_t = 7878)]
    port: u16,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its event log, metrics and CSV exports.
    Run { scenario: String },
    /// Sweep scenario parameters and tabulate the behaviour map.
    Sweep { scenario: String, spec: PathBuf },
    /// Derive model parameters from reference observations.
    Calibrate {
        #[arg(value_enum)]
        kind: CalibrationKind,
        /// Scenario supplying discharge parameters (standoff).
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, default_value_t = 0.7)]
        fraction: f64,
        #[arg(long, default_value_t = 300.0)]
        time: f64,
        #[arg(long, default_value_t = 1)]
        stages: u32,
        #[arg(long, default_value_t = 500.0)]
        radius: f64,
        #[arg(long, default_value_t = 0.23)]
        target: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Monte-Carlo replicates over consecutive seeds.
    Mc {
        scenario: String,
        #[arg(short = 'n', long, default_value_t = 20)]
        replicates: usize,
    },
    /// Serve a live steering session over TCP.
    Serve {
        scenario: String,
        #[arg(long)]
        paused: bool,
        /// Stop once the scenario duration is covered.
        #[arg(long)]
        exit_when_finished: bool,
    },
    /// Re-run a scenario and compare with a recorded event log.
    Replay { scenario: String, log: PathBuf },
    /// Write the resolved scenario file and, with --run, the final enzyme grid
    /// and dose tables.
    Export {
        scenario: String,
        #[arg(long)]
        run: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CalibrationKind {
    CapsuleModel,
    Standoff,
    Activation,
}

enum Failure {
    Scenario(String),
    Runtime(String),
    Busy(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Scenario(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Busy(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Scenario(m) | Failure::Runtime(m) | Failure::Busy(m) => m,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Exit status for a replay that diverged.
const DIVERGED: u8 = 1;

struct Outcome {
    summary: Value,
    code: u8,
}

impl From<Value> for Outcome {
    fn from(summary: Value) -> Self {
        Self { summary, code: 0 }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.summary).expect("summary serializes"));
            ExitCode::from(out.code)
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            println!("{}", json!({ "error": f.message(), "exit_code": f.code() }));
            ExitCode::from(f.code())
        }
    }
}

/// `preset:<name>` selects a built-in scenario; anything else is a file.
fn load(cli: &Cli, source: &str) -> Result<(Scenario, String), Failure> {
    let (mut scenario, stem) = if let Some(name) = source.strip_prefix("preset:") {
        let s = presets::by_name(name, 0).ok_or_else(|| {
            Failure::Scenario(format!("unknown preset {name:?}; known: {}", presets::NAMES.join(", ")))
        })?;
        (s, name.to_string())
    } else {
        let path = Path::new(source);
        let text = fs::read_to_string(path).map_err(|e| Failure::Scenario(format!("{}: {e}", path.display())))?;
        let s = engine::load_scenario(&text).map_err(|e| Failure::Scenario(format!("{}: {e}", path.display())))?;
        let stem = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
        (s, stem)
    };
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(cell) = cli.grid_cell {
        scenario.enzyme.cell_um = cell;
    }
    scenario.validate().map_err(|e| Failure::Scenario(format!("{source}: {e}")))?;
    Ok((scenario, stem))
}

fn dispatch(cli: &Cli) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Run { scenario } => cmd_run(cli, scenario),
        Command::Sweep { scenario, spec } => cmd_sweep(cli, scenario, spec),
        Command::Calibrate { kind, scenario, fraction, time, stages, radius, target, samples } => {
            let report = match kind {
                CalibrationKind::CapsuleModel => batch::calibrate_capsule(),
                CalibrationKind::Activation => batch::calibrate_activation_report(*fraction, *time, *stages),
                CalibrationKind::Standoff => {
                    let base = match scenario {
                        Some(s) => load(cli, s)?.0,
                        None => Scenario::new(stinger::medium::Medium::cell_medium()),
                    };
                    batch::calibrate_standoff_report(*radius, *target, *samples, cli.seed.unwrap_or(0), &base)
                }
            }
            .map_err(|e| match e {
                SimError::InvalidInput(_) => Failure::Scenario(e.to_string()),
                e => runtime(e),
            })?;
            describe_calibration(&report);
            Ok(serde_json::to_value(&report).expect("report serializes").into())
        }
        Command::Mc { scenario, replicates } => {
            let (s, stem) = load(cli, scenario)?;
            let seed_base = s.seed;
            eprintln!("running {replicates} replicates of {stem} from seed {seed_base}");
            let report = batch::monte_carlo(&s, *replicates, seed_base).map_err(runtime)?;
            let value = serde_json::to_value(&report).expect("report serializes");
            write(&cli.out, &format!("{stem}.mc.json"), &serde_json::to_string_pretty(&value).unwrap())?;
            eprintln!(
                "hit fraction {:.3} [{:.3}, {:.3}], pooled {:.3}",
                report.hit_fraction.mean, report.hit_fraction.lo, report.hit_fraction.hi, report.pooled_hit_fraction
            );
            Ok(value.into())
        }
        Command::Serve { scenario, paused, exit_when_finished } => {
            let (s, stem) = load(cli, scenario)?;
            let listener = gateway::bind(cli.port).map_err(|e| {
                if gateway::is_addr_in_use(&e) {
                    Failure::Busy(format!("port {} is already in use", cli.port))
                } else {
                    runtime(e)
                }
            })?;
            let config = GatewayConfig {
                time_scale: cli.time_scale,
                start_paused: *paused,
                exit_when_finished: *exit_when_finished,
                ..GatewayConfig::default()
            };
            eprintln!("serving {stem} on 127.0.0.1:{}", listener.local_addr().map_err(runtime)?.port());
            let session = gateway::serve(listener, &s, &config).map_err(|e| match e {
                SimError::InvalidInput(_) => Failure::Scenario(e.to_string()),
                e => runtime(e),
            })?;
            let record = engine::finish(session.world, session.events);
            let log = write(&cli.out, &format!("{stem}.live.events.jsonl"), &record.log())?;
            Ok(json!({ "command": "serve", "events": record.events.len(), "t": record.final_state.t, "log": log }).into())
        }
        Command::Replay { scenario, log } => {
            let (s, _) = load(cli, scenario)?;
            let text = fs::read_to_string(log).map_err(|e| Failure::Scenario(format!("{}: {e}", log.display())))?;
            let verdict = engine::replay(&s, &text).map_err(|e| match e {
                SimError::MalformedLog { .. } => Failure::Scenario(format!("{}: {e}", log.display())),
                e => runtime(e),
            })?;
            let code = match &verdict {
                Verdict::Identical { events } => {
                    eprintln!("identical: {events} events");
                    0
                }
                Verdict::Diverged { index, t, .. } => {
                    eprintln!("diverged at event {index} (t = {t:?})");
                    DIVERGED
                }
            };
            Ok(Outcome { summary: serde_json::to_value(&verdict).expect("verdict serializes"), code })
        }
        Command::Export { scenario, run } => {
            let (s, stem) = load(cli, scenario)?;
            let mut files = vec![write(&cli.out, &format!("{stem}.stinger"), &s.to_toml())?];
            if *run {
                let mut world = World::new(&s).map_err(runtime)?;
                let events = world.run_to_end().map_err(runtime)?;
                let grid = cli.out.join(format!("{stem}.grid.bin"));
                export::write_grid(&world.grid, &grid).map_err(runtime)?;
                files.push(grid);
                let record = engine::finish(world, events);
                let doses = cli.out.join(format!("{stem}.doses.csv"));
                export::write_doses_csv(&record, fs::File::create(&doses).map_err(runtime)?).map_err(runtime)?;
                files.push(doses);
                let series = cli.out.join(format!("{stem}.series.csv"));
                export::write_series_csv(&record, fs::File::create(&series).map_err(runtime)?).map_err(runtime)?;
                files.push(series);
            }
            for f in &files {
                eprintln!("wrote {}", f.display());
            }
            Ok(json!({ "command": "export", "files": files }).into())
        }
    }
}

fn cmd_run(cli: &Cli, source: &str) -> Result<Outcome, Failure> {
    let (s, stem) = load(cli, source)?;
    eprintln!("running {stem}: seed {}, {} steps of {} s", s.seed, s.steps(), s.dt);
    let record = engine::run(&s).map_err(runtime)?;
    let files = export::write_run_artifacts(&record, &cli.out, &stem).map_err(runtime)?;
    let m = &record.metrics;
    eprintln!(
        "{} events; mean path {:.0} µm; activated {:.3}; {} tubules, {} penetrations",
        record.events.len(),
        m.mean_path_um,
        m.activated_fraction,
        m.tubules,
        m.penetrations
    );
    Ok(json!({
        "command": "run",
        "scenario": stem,
        "seed": s.seed,
        "events": record.events.len(),
        "metrics": {
            "mean_path_um": m.mean_path_um,
            "mean_load_per_jp": m.mean_load_per_jp,
            "activated_fraction": m.activated_fraction,
            "tubules": m.tubules,
            "penetrations": m.penetrations,
            "hit_fraction": m.hit_fraction,
            "payload_mismatches": m.payload_mismatches,
        },
        "artifacts": {
            "events": files.events,
            "metrics": files.metrics,
            "doses": files.doses,
            "series": files.series,
        },
    })
    .into())
}

fn cmd_sweep(cli: &Cli, source: &str, spec_path: &Path) -> Result<Outcome, Failure> {
    let (s, stem) = load(cli, source)?;
    let text =
        fs::read_to_string(spec_path).map_err(|e| Failure::Scenario(format!("{}: {e}", spec_path.display())))?;
    let mut spec =
        batch::load_sweep_spec(&text).map_err(|e| Failure::Scenario(format!("{}: {e}", spec_path.display())))?;
    if let Some(seed) = cli.seed {
        spec.seed_base = seed;
    }
    eprintln!("sweeping {stem}: {} cells x {} replicates", spec.cells(), spec.replicates);
    let rows = batch::sweep(&s, &spec).map_err(|e| match e {
        SimError::Invariant { .. } | SimError::Parse(_) => Failure::Scenario(e.to_string()),
        e => runtime(e),
    })?;
    fs::create_dir_all(&cli.out).map_err(runtime)?;
    let csv = cli.out.join(format!("{stem}.sweep.csv"));
    export::write_sweep_csv(&rows, fs::File::create(&csv).map_err(runtime)?).map_err(runtime)?;
    for r in &rows {
        eprintln!("{:>12} {:>10.0} Hz  {:<5} {:<9} load {:.2}", r.medium, r.freq_hz, r.mode, r.trap_site, r.mean_load);
    }
    Ok(json!({ "command": "sweep", "rows": rows, "csv": csv }).into())
}

fn describe_calibration(report: &Calibration) {
    match report {
        Calibration::CapsuleModel(r) => eprintln!(
            "sigma_p = {:.4e} S/m, eps_p = {:.1}; {} of {} candidates feasible",
            r.model.sigma_p_s_per_m, r.model.eps_p_rel, r.feasible, r.candidates
        ),
        Calibration::Standoff(r) => {
            eprintln!("d* = {:.1} µm from the centre (hit fraction {:.4})", r.d_star_um, r.fraction)
        }
        Calibration::Activation(r) => eprintln!("lambda_max = {:.4e} 1/s ({} stages)", r.lambda_max_per_s, r.stages),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(runtime)?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(runtime)?;
    Ok(path)
}
