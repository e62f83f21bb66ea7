//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use stinger::agents::{Capsule, SizeClass};
use stinger::batch::{monte_carlo_records, sweep, SweepAxis, SweepSpec};
use stinger::dep::{calibrate_capsule_model, CapsuleDielectricModel, DepConstraint};
use stinger::discharge::{eject_tubule, DischargeParams, Tubule};
use stinger::engine::{replay, run, EventKind, RunRecord, Scenario, Verdict, World};
use stinger::enzyme::{EnzymeGrid, DEFAULT_D_EFF_UM2_PER_S};
use stinger::geom::Vec2;
use stinger::medium::Medium;
use stinger::presets;
use stinger::rng::{RandomSource, Stream};
use stinger::targets::{
    calibrate_standoff, penetration_test, worm_penetration, worm_react, Reaction, Spheroid, TargetKind, TargetParams,
    Worm, WormState,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Runs kept for the determinism and conservation checks.
#[derive(Default)]
struct Archive {
    runs: Vec<(String, Scenario, RunRecord)>,
}

impl Archive {
    fn keep(&mut self, name: &str, s: &Scenario, r: &RunRecord) {
        self.runs.push((name.to_string(), s.clone(), r.clone()));
    }
}

// Complex permittivity arithmetic for the CM oracle.
#[derive(Clone, Copy)]
struct C(f64, f64);

impl C {
    fn sub(self, o: C) -> C {
        C(self.0 - o.0, self.1 - o.1)
    }
    fn add(self, o: C) -> C {
        C(self.0 + o.0, self.1 + o.1)
    }
    fn scale(self, k: f64) -> C {
        C(self.0 * k, self.1 * k)
    }
    fn div(self, o: C) -> C {
        let d = o.0 * o.0 + o.1 * o.1;
        C((self.0 * o.0 + self.1 * o.1) / d, (self.1 * o.0 - self.0 * o.1) / d)
    }
}

fn cm_oracle(model: &CapsuleDielectricModel, medium: &Medium, f: f64) -> f64 {
    let e0 = 8.8541878128e-12;
    let w = 2.0 * PI * f;
    let ep = C(model.eps_p_rel * e0, -model.sigma_p_s_per_m / w);
    let em = C(medium.rel_permittivity * e0, -medium.conductivity_s_per_m / w);
    ep.sub(em).div(ep.add(em.scale(2.0))).0
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

fn dep_sign_map() -> Outcome {
    let report = calibrate_capsule_model(&DepConstraint::observed(), 0.0).expect("calibration");
    let model = report.model;
    let freqs = log_grid(1e3, 2e6, 4001);
    let mut lines = Vec::new();
    let mut ok = model == CapsuleDielectricModel::default();
    for (mm, want) in [(0.01, Some(1.0)), (0.1, Some(1.0)), (10.0, Some(-1.0)), (1.0, None)] {
        let medium = Medium::nacl(mm).unwrap();
        let k: Vec<f64> = freqs.iter().map(|&f| cm_oracle(&model, &medium, f)).collect();
        match want {
            Some(sign) => {
                let good = k.iter().all(|v| v.signum() == sign && *v != 0.0);
                ok &= good;
                lines.push(format!("{mm} mM {}", if sign > 0.0 { "pDEP" } else { "nDEP" }));
            }
            None => {
                let changes: Vec<usize> = (1..k.len()).filter(|&i| k[i].signum() != k[i - 1].signum()).collect();
                let one = changes.len() == 1;
                let at = changes.first().map(|&i| freqs[i]).unwrap_or(f64::NAN);
                let inside = (100e3..=500e3).contains(&at);
                let rising = k[0] < 0.0 && *k.last().unwrap() > 0.0;
                ok &= one && inside && rising;
                lines.push(format!("1 mM crossovers={} at {:.0} kHz", changes.len(), at / 1e3));
            }
        }
    }
    outcome(ok, format!("sigma_p={:.4} eps_p={:.1}; {}", model.sigma_p_s_per_m, model.eps_p_rel, lines.join(", ")))
}

fn behavior_map() -> Outcome {
    let spec = SweepSpec {
        axes: vec![
            SweepAxis { path: "medium.nacl_mM".into(), values: vec![json!(0.01), json!(0.1), json!(1.0), json!(10.0)] },
            SweepAxis {
                path: "field.freq_hz".into(),
                values: vec![json!(2e3), json!(10e3), json!(100e3), json!(500e3), json!(2e6)],
            },
        ],
        replicates: 1,
        seed_base: 0,
        max_runs: 100,
    };
    let rows = sweep(&presets::behavior_cell(0.1, 2e3, 0), &spec).expect("sweep");
    // ICEP below the transition frequency, sDEP above it up to 1 MHz, no
    // electric drive in 10 mM or above 1 MHz. Capsules sit on the dielectric
    // equator under pDEP and on the metallic side under nDEP; 1 mM crosses
    // over between 100 and 500 kHz.
    let expected: [[(&str, &str); 5]; 4] = [
        [("ICEP", "equator"), ("sDEP", "equator"), ("sDEP", "equator"), ("sDEP", "equator"), ("none", "equator")],
        [("ICEP", "equator"), ("ICEP", "equator"), ("sDEP", "equator"), ("sDEP", "equator"), ("none", "equator")],
        [("ICEP", "metallic"), ("ICEP", "metallic"), ("ICEP", "metallic"), ("sDEP", "equator"), ("none", "equator")],
        [("none", "metallic"); 5],
    ];
    let mut wrong = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        let (m, site) = expected[k / 5][k % 5];
        if row.mode != m || row.trap_site != site {
            wrong.push(format!("{}@{}: {}/{}", row.medium, row.freq_hz, row.mode, row.trap_site));
        }
    }
    let ok = rows.len() == 20 && wrong.is_empty();
    outcome(ok, format!("{} rows, {} mismatches {:?}", rows.len(), wrong.len(), wrong))
}

fn activation(archive: &mut Archive) -> Outcome {
    let s = presets::open_activation(10_000, 1);
    let r = run(&s).expect("run");
    let at = |t: f64| {
        r.metrics
            .series
            .iter()
            .find(|p| (p.t - t).abs() < 1e-6)
            .map(|p| p.activated_fraction)
            .unwrap_or(f64::NAN)
    };
    let (f300, f660) = (at(300.0), at(660.0));
    archive.keep("open-activation", &s, &r);
    outcome((f300 - 0.70).abs() <= 0.02 && f660 >= 0.95, format!("f(300 s)={f300:.4}, f(660 s)={f660:.4}"))
}

fn tubules() -> Outcome {
    let params = DischargeParams::default();
    let mut rng = RandomSource::new(7, Stream::Ejection);
    let n = 10_000;
    let mut lengths = Vec::with_capacity(n);
    let mut bins = [0u32; 36];
    for i in 0..n {
        let mut c = Capsule::new(i as u32, SizeClass::Small, Vec2::ZERO, 1.0, "TBO");
        let t: Tubule = eject_tubule(&mut c, &params, 0.0, &mut rng);
        lengths.push(t.length_um);
        let a = t.direction.y.atan2(t.direction.x).rem_euclid(2.0 * PI);
        bins[((a / (2.0 * PI) * 36.0) as usize).min(35)] += 1;
    }
    let mean = lengths.iter().sum::<f64>() / n as f64;
    let sd = (lengths.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let expected = n as f64 / 36.0;
    let chi2: f64 = bins.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = ChiSquared::new(35.0).unwrap().sf(chi2);
    let ok = (296.0..=300.0).contains(&mean) && (18.0..=22.0).contains(&sd) && p > 0.01;
    outcome(ok, format!("mean={mean:.2} µm, sd={sd:.2} µm, chi2={chi2:.1} p={p:.3}"))
}

/// Brute-force oracle: the segment enters the open disc iff its closest
/// point to the centre lies inside.
fn segment_hits_disc(origin: Vec2, dir: Vec2, len: f64, center: Vec2, r: f64) -> bool {
    let s = ((center - origin).dot(dir)).clamp(0.0, len);
    (origin + dir * s).distance(center) < r
}

fn penetration() -> Outcome {
    let radius = presets::MISSION_SPHEROID_RADIUS_UM;
    let params = DischargeParams::default();
    let mut rng = RandomSource::new(0, Stream::MonteCarlo);
    let report = calibrate_standoff(radius, &params, 0.23, 100_000, &mut rng).expect("standoff");
    let d = report.d_star_um;

    // Fresh draws, scored by the oracle.
    let mut check = RandomSource::new(99, Stream::MonteCarlo);
    let n = 100_000;
    let mut hits = 0;
    for _ in 0..n {
        let dir = Vec2::from_angle(check.angle());
        let len = stinger::discharge::sample_tubule_length(&params, &mut check);
        if segment_hits_disc(Vec2::new(d, 0.0), dir, len, Vec2::ZERO, radius) {
            hits += 1;
        }
    }
    let fraction = hits as f64 / n as f64;

    let spheroid = Spheroid::new(0, Vec2::ZERO, radius);
    let mut cases = RandomSource::new(3, Stream::MonteCarlo);
    let mut disagreements = 0;
    for _ in 0..10_000 {
        let origin = Vec2::new(cases.uniform() * 2400.0 - 1200.0, cases.uniform() * 2400.0 - 1200.0);
        let dir = Vec2::from_angle(cases.angle());
        let len = cases.uniform() * 800.0;
        let t = Tubule { capsule: 0, origin_um: origin, direction: dir, length_um: len, ejected_at_s: 0.0 };
        let got = penetration_test(&t, &spheroid);
        let want = segment_hits_disc(origin, dir, len, Vec2::ZERO, radius);
        let depth_ok = got.as_ref().is_none_or(|h| h.depth_um > 0.0 && h.depth_um <= 2.0 * radius + 1e-9);
        if got.is_some() != want || !depth_ok {
            disagreements += 1;
        }
    }
    let ok = d > radius && d <= radius + 300.0 && (fraction - 0.23).abs() <= 0.03 && disagreements == 0;
    outcome(
        ok,
        format!("d*={d:.1} µm (R+{:.1}), MC fraction={fraction:.4}, oracle disagreements={disagreements}/10000", d - radius),
    )
}

fn diffusion() -> Outcome {
    // Slab: a held column at x = 0 feeding a long channel.
    let slab = |d: f64, cell: f64, nx: usize| {
        let mut g = EnzymeGrid::rectangle(nx, 3, cell, d);
        let column: Vec<usize> = (0..3).map(|j| j * nx).collect();
        g.add_source(column, 1.0, 1e9);
        g
    };
    let d = DEFAULT_D_EFF_UM2_PER_S;
    let cell = 10.0;
    let nx = 600;
    let mut g = slab(d, cell, nx);
    let dt = 0.8 * g.stable_dt();
    let mut t = 0.0;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for target in [10.0, 50.0, 200.0] {
        while t < target - 1e-9 {
            let h = dt.min(target - t);
            g.diffuse_step(h).unwrap();
            t += h;
        }
        let mut err: f64 = 0.0;
        for i in 1..nx {
            let x = i as f64 * cell;
            let exact = erfc(x / (2.0 * (d * t).sqrt()));
            if exact < 0.01 {
                break;
            }
            err = err.max((g.value(i, 1) - exact).abs() / exact);
        }
        parts.push(format!("t={target}s err={:.2}%", 100.0 * err));
        worst = worst.max(err);
    }

    // Arrival 1 mm from the source on the default 50 µm mesh.
    let cell = 50.0;
    let mut g = slab(d, cell, 200);
    let dt = 0.8 * g.stable_dt();
    let probe = (1000.0 / cell) as usize;
    let mut t = 0.0;
    while g.value(probe, 1) < 0.1 && t < 500.0 {
        g.diffuse_step(dt).unwrap();
        t += dt;
    }
    let ok = worst < 0.02 && (t - 50.0).abs() <= 15.0;
    outcome(ok, format!("{}; 1 mm arrival at {t:.1} s", parts.join(", ")))
}

fn shear(archive: &mut Archive) -> Outcome {
    let rolling = presets::shear_load(true, 1);
    let r = run(&rolling).expect("run");
    let mean = r.metrics.mean_load_per_jp;
    archive.keep("shear-rolling", &rolling, &r);
    let fixed = presets::shear_load(false, 1);
    let f = run(&fixed).expect("run");
    let eq = f.metrics.max_equator_load;
    archive.keep("shear-static", &fixed, &f);
    let ok = (1.0..=2.0).contains(&mean) && (4..=5).contains(&eq);
    outcome(ok, format!("rolling mean load {mean:.3} per JP; static max equator load {eq}"))
}

fn mission(archive: &mut Archive) -> Outcome {
    let s = presets::spheroid_mission(0).expect("mission");
    let records = monte_carlo_records(&s, 50, 1000).expect("mc");
    let min_path = records.iter().map(|r| r.metrics.mean_path_um).fold(f64::INFINITY, f64::min);
    let successes = records
        .iter()
        .filter(|r| {
            r.events.iter().any(|e| {
                matches!(e.kind, EventKind::TargetPenetrated { target, depth_um, .. }
                    if target.kind == TargetKind::Spheroid && depth_um <= 300.0)
            })
        })
        .count();
    let tubules: usize = records.iter().map(|r| r.metrics.tubules).sum();
    let hits: usize = records.iter().map(|r| r.metrics.penetrations).sum();
    for (i, r) in records.iter().enumerate().take(3) {
        let mut si = s.clone();
        si.seed = 1000 + i as u64;
        archive.keep(&format!("mission#{i}"), &si, r);
    }
    // Conservation is checked on every replicate.
    for (i, r) in records.iter().enumerate().skip(3) {
        let mut si = s.clone();
        si.seed = 1000 + i as u64;
        archive.runs.push((format!("mission#{i}"), si, RunRecord { events: Vec::new(), ..r.clone() }));
    }
    let ok = min_path >= 7000.0 && successes * 10 >= 50 * 9;
    outcome(
        ok,
        format!(
            "min transport {:.0} µm; {successes}/50 replicates penetrated within 300 µm; pooled hit fraction {:.3}",
            min_path,
            hits as f64 / tubules.max(1) as f64
        ),
    )
}

fn worms(archive: &mut Archive) -> Outcome {
    let params = TargetParams::default();
    let mut table_ok = true;
    for (size, want) in [(SizeClass::Small, Reaction::Coiling { until_s: 130.0 }), (SizeClass::Large, Reaction::Vigorous { until_s: 280.0 })]
    {
        let mut w = Worm::new(0, Vec2::ZERO, 0.0, 0.0, WormState::Paralyzed);
        table_ok &= worm_react(&mut w, size, 10.0, &params) == Some(want);
    }

    // Engine: paralyzed worms with small and large capsules.
    let mut engine_ok = true;
    let mut seen = [0usize; 2];
    for seed in 1..=3 {
        let s = presets::worm_assay(seed);
        let r = run(&s).expect("run");
        let mut started: [Option<f64>; 3] = [None; 3];
        for e in &r.events {
            if let EventKind::WormReaction { worm, reaction, capsule } = e.kind {
                let w = worm as usize;
                match (w, reaction, capsule) {
                    (0, Reaction::Coiling { until_s }, Some(_)) => {
                        engine_ok &= (until_s - e.t - 120.0).abs() < 1e-9;
                        started[0] = Some(e.t);
                        seen[0] += 1;
                    }
                    (1, Reaction::Vigorous { until_s }, Some(_)) => {
                        engine_ok &= (until_s - e.t - 270.0).abs() < 1e-9;
                        started[1] = Some(e.t);
                        seen[1] += 1;
                    }
                    (0 | 1, Reaction::Ceased, None) => {
                        let dur = if w == 0 { 120.0 } else { 270.0 };
                        let t0 = started[w].unwrap_or(f64::NAN);
                        engine_ok &= e.t - t0 >= dur - 1e-9 && e.t - t0 < dur + s.dt + 1e-9;
                    }
                    _ => engine_ok = false,
                }
            }
            if let EventKind::TargetPenetrated { target, .. } = e.kind {
                engine_ok &= !(target.kind == TargetKind::Worm && target.id == 2);
            }
        }
        archive.keep(&format!("worm#{seed}"), &s, &r);
    }
    engine_ok &= seen[0] > 0 && seen[1] > 0;

    // A fast swimmer is never entered, even by tubules aimed through its body.
    let mut rng = RandomSource::new(5, Stream::MonteCarlo);
    let mut swimmer_hits = 0;
    let mut control_hits = 0;
    for _ in 0..1000 {
        let heading = rng.angle();
        let swimmer = Worm::new(0, Vec2::ZERO, heading, params.worm_swim_um_per_s, WormState::Swimming);
        let still = Worm::new(0, Vec2::ZERO, heading, 0.0, WormState::Paralyzed);
        let along = (rng.uniform() - 0.5) * 0.8 * params.worm_length_um;
        let aim = Vec2::from_angle(heading) * along;
        let back = rng.angle();
        let origin = aim + Vec2::from_angle(back) * 150.0;
        let t = Tubule {
            capsule: 0,
            origin_um: origin,
            direction: Vec2::from_angle(back + PI),
            length_um: 298.0,
            ejected_at_s: 0.0,
        };
        swimmer_hits += worm_penetration(&t, &swimmer, &params).is_some() as usize;
        control_hits += worm_penetration(&t, &still, &params).is_some() as usize;
    }
    let ok = table_ok && engine_ok && swimmer_hits == 0 && control_hits == 1000;
    outcome(
        ok,
        format!(
            "table {}, engine {} (coiling x{}, vigorous x{}), swimmer hits {swimmer_hits}/1000 (paralyzed control {control_hits}/1000)",
            if table_ok { "exact" } else { "WRONG" },
            if engine_ok { "exact" } else { "WRONG" },
            seen[0],
            seen[1]
        ),
    )
}

fn determinism(archive: &mut Archive) -> Outcome {
    for (name, s) in [("transport", presets::transport(1)), ("behavior-cell", presets::behavior_cell(1.0, 2e3, 1))] {
        let r = run(&s).expect("run");
        archive.keep(name, &s, &r);
    }
    let mut bad = Vec::new();
    let mut checked = 0;
    for (name, s, r) in &archive.runs {
        if r.events.is_empty() && name.starts_with("mission#") {
            continue;
        }
        checked += 1;
        let log = r.log();
        match replay(s, &log) {
            Ok(Verdict::Identical { .. }) => {}
            other => bad.push(format!("{name}: {other:?}")),
        }
    }
    outcome(bad.is_empty(), format!("{checked} scenarios replayed byte-identical; {} diverged {:?}", bad.len(), bad))
}

fn conservation(archive: &Archive) -> Outcome {
    let mut bad = Vec::new();
    for (name, s, r) in &archive.runs {
        let initial = World::new(s).expect("world").capsules.len();
        if r.final_state.capsules.len() != initial || r.metrics.payload_mismatches != 0 {
            bad.push(name.clone());
        }
    }
    outcome(bad.is_empty(), format!("{} runs checked, violations in {:?}", archive.runs.len(), bad))
}

fn main() {
    let mut archive = Archive::default();
    let mut results: Vec<(&str, Duration, Option<Duration>, Outcome)> = Vec::new();
    let mut check = |name: &'static str, budget: Option<Duration>, f: &mut dyn FnMut(&mut Archive) -> Outcome| {
        let start = Instant::now();
        let out = f(&mut archive);
        let elapsed = start.elapsed();
        let within = budget.is_none_or(|b| elapsed <= b);
        let out = Outcome { pass: out.pass && within, ..out };
        println!(
            "{} {name}: {} [{:.1} s{}]",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            budget.map(|b| format!(" / {:.0} s budget", b.as_secs_f64())).unwrap_or_default()
        );
        results.push((name, elapsed, budget, out));
    };
    let secs = |s: u64| Some(Duration::from_secs(s));

    check("dep-sign-map", secs(1), &mut |_| dep_sign_map());
    check("behavior-map", secs(60), &mut |_| behavior_map());
    check("activation-kinetics", secs(30), &mut activation);
    check("tubule-statistics", secs(5), &mut |_| tubules());
    check("penetration-fraction", secs(60), &mut |_| penetration());
    check("diffusion-solver", secs(30), &mut |_| diffusion());
    check("shear-load", secs(60), &mut shear);
    check("mission", secs(300), &mut mission);
    check("worm-state-machine", None, &mut worms);
    check("determinism-replay", None, &mut determinism);
    check("conservation", None, &mut |a| conservation(a));

    let failed = results.iter().filter(|r| !r.3.pass).count();
    println!("{} of {} acceptance criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
