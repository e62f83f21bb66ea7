//! World state and the fixed-order step pipeline.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::agents::{AttachSite, Capsule, CapsuleId, CapsulePhase, JanusParticle, JpId, Lifecycle, SizeClass};
use crate::chamber::JP_RADIUS_UM;
use crate::dep::{attempt_capture, shear_detach, trap_site_for, update_clusters, CaptureSlots, ClusterChange, ClusterTable};
use crate::discharge::{activation_check, eject_tubule, recoil_detach, release_payload, Dose, DoseMode, Tubule};
use crate::enzyme::EnzymeGrid;
use crate::error::{Result, SimError};
use crate::field::FieldState;
use crate::geom::{wrap_angle, Vec2};
use crate::propulsion::{electric_velocity, magnetic_velocity};
use crate::rng::{RandomSource, Stream};
use crate::targets::{
    ambient_exposure, penetration_test, worm_penetration, worm_react, worm_step, DoseRecord, Hit, Spheroid, TargetKind,
    TargetRef, Worm, WormState,
};

use super::events::{AgentRef, DetachCause, Event, EventKind};
use super::scenario::{CapsuleSpec, ControlAction, JpSpec, Scenario, WormSpec, WormStart};

/// Diffusion substeps run at no more than this fraction of the stability
/// bound, which keeps the checkerboard mode damped.
const DIFFUSION_SAFETY: f64 = 0.8;

/// Free intact capsules bucketed by position. Free capsules do not move, so
/// the index only changes on capture and release.
#[derive(Debug, Clone, Default)]
struct FreeIndex {
    cell_um: f64,
    buckets: HashMap<(i64, i64), Vec<CapsuleId>>,
}

impl FreeIndex {
    fn new(cell_um: f64) -> Self {
        Self { cell_um, buckets: HashMap::new() }
    }

    fn key(&self, p: Vec2) -> (i64, i64) {
        ((p.x / self.cell_um).floor() as i64, (p.y / self.cell_um).floor() as i64)
    }

    fn insert(&mut self, id: CapsuleId, p: Vec2) {
        let k = self.key(p);
        self.buckets.entry(k).or_default().push(id);
    }

    fn remove(&mut self, id: CapsuleId, p: Vec2) {
        let k = self.key(p);
        if let Some(v) = self.buckets.get_mut(&k) {
            v.retain(|&c| c != id);
        }
    }

    /// Ids within the bounding square of the query circle, sorted.
    fn query(&self, center: Vec2, radius: f64) -> Vec<CapsuleId> {
        let (x0, y0) = self.key(center - Vec2::new(radius, radius));
        let (x1, y1) = self.key(center + Vec2::new(radius, radius));
        let mut out = Vec::new();
        for i in x0..=x1 {
            for j in y0..=y1 {
                if let Some(v) = self.buckets.get(&(i, j)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

#[derive(Debug, Clone)]
struct Streams {
    propulsion: RandomSource,
    shear: RandomSource,
    activation: RandomSource,
    ejection: RandomSource,
    recoil: RandomSource,
    worms: RandomSource,
}

impl Streams {
    fn new(seed: u64) -> Self {
        Self {
            propulsion: RandomSource::new(seed, Stream::Propulsion),
            shear: RandomSource::new(seed, Stream::Shear),
            activation: RandomSource::new(seed, Stream::Activation),
            ejection: RandomSource::new(seed, Stream::Ejection),
            recoil: RandomSource::new(seed, Stream::Recoil),
            worms: RandomSource::new(seed, Stream::Worms),
        }
    }

    fn cursors(&self) -> Vec<(String, u128)> {
        [
            ("propulsion", &self.propulsion),
            ("shear", &self.shear),
            ("activation", &self.activation),
            ("ejection", &self.ejection),
            ("recoil", &self.recoil),
            ("worms", &self.worms),
        ]
        .into_iter()
        .map(|(n, r)| (n.to_string(), r.cursor()))
        .collect()
    }
}

/// One time-series sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// Intact capsules attached per JP.
    pub mean_load: f64,
    pub max_load: u32,
    /// Capsules with ejected tubules over all capsules.
    pub activated_fraction: f64,
}

/// Running totals behind the run metrics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub initial_payload: Vec<f64>,
    pub delivered: Vec<f64>,
    pub doses: Vec<(f64, Dose)>,
    pub tubules_ejected: usize,
    pub penetrations: usize,
    pub penetration_depths_um: Vec<f64>,
    pub load_integral: f64,
    pub load_time_s: f64,
    pub max_load: u32,
    pub max_equator_load: u32,
    pub first_activation_s: Option<f64>,
    pub series: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JpView {
    pub id: JpId,
    pub position_um: Vec2,
    pub orientation_rad: f64,
    pub cluster: usize,
    pub load: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapsuleView {
    pub id: CapsuleId,
    pub position_um: Vec2,
    pub size: SizeClass,
    #[serde(flatten)]
    pub phase: CapsulePhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridView {
    pub nx: usize,
    pub ny: usize,
    pub cell_um: f64,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMetrics {
    pub mean_load: f64,
    pub activated_fraction: f64,
    pub tubules: usize,
    pub penetrations: usize,
    pub dose_by_target: Vec<(TargetRef, f64)>,
}

/// Read-only view of the world for clients and final reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub field: FieldState,
    pub jps: Vec<JpView>,
    pub capsules: Vec<CapsuleView>,
    pub tubules: Vec<Tubule>,
    pub spheroids: Vec<Spheroid>,
    pub worms: Vec<Worm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enzyme: Option<GridView>,
    pub metrics: SnapshotMetrics,
    pub rng_cursors: Vec<(String, u128)>,
}

pub struct World {
    pub scenario: Scenario,
    step_index: u64,
    pub field: FieldState,
    pub jps: Vec<JanusParticle>,
    pub capsules: Vec<Capsule>,
    pub spheroids: Vec<Spheroid>,
    pub worms: Vec<Worm>,
    pub tubules: Vec<Tubule>,
    pub grid: EnzymeGrid,
    pub clusters: ClusterTable,
    pub ledger: Ledger,
    held: Vec<Vec<CapsuleId>>,
    free: FreeIndex,
    streams: Streams,
    script_cursor: usize,
    queued: Vec<(f64, ControlAction)>,
    diffusion_debt_s: f64,
    sample_every: u64,
}

impl World {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let s = scenario.clone();
        let mut grid = EnzymeGrid::for_chamber(&s.chamber, s.enzyme.cell_um, s.enzyme.d_eff_um2_per_s);
        if let Some(c) = s.enzyme.initial_uniform {
            grid.fill(c);
        }
        let sample_every = ((s.record.sample_interval_s / s.dt).round() as u64).max(1);
        let mut world = Self {
            field: s.field.normalized(),
            jps: Vec::new(),
            capsules: Vec::new(),
            spheroids: Vec::new(),
            worms: Vec::new(),
            tubules: Vec::new(),
            grid,
            clusters: ClusterTable::default(),
            ledger: Ledger::default(),
            held: Vec::new(),
            free: FreeIndex::new(64.0),
            streams: Streams::new(s.seed),
            script_cursor: 0,
            queued: Vec::new(),
            diffusion_debt_s: 0.0,
            sample_every,
            step_index: 0,
            scenario: s,
        };
        let jps = world.scenario.jps.clone();
        let capsules = world.scenario.capsules.clone();
        let worms = world.scenario.worms.clone();
        world.add_jps(&jps);
        world.add_capsules(&capsules);
        let mut roster = RandomSource::new(world.scenario.seed, Stream::Roster);
        for scatter in world.scenario.capsule_scatter.clone() {
            let specs: Vec<CapsuleSpec> = (0..scatter.count)
                .map(|_| {
                    let r = scatter.radius_um * roster.uniform().sqrt();
                    let p = scatter.center_um + Vec2::from_angle(roster.angle()) * r;
                    CapsuleSpec { position_um: p, size: scatter.size, payload: scatter.payload, kind: scatter.kind.clone() }
                })
                .collect();
            world.add_capsules(&specs);
        }
        for (i, sp) in world.scenario.spheroids.iter().enumerate() {
            world.spheroids.push(Spheroid::new(i as u32, sp.center_um, sp.radius_um));
        }
        world.add_worms(&worms);
        world.clusters = update_clusters(&world.jps, &world.scenario.capture, &ClusterTable::default()).0;
        world.record_sample();
        Ok(world)
    }

    pub fn t(&self) -> f64 {
        self.step_index as f64 * self.scenario.dt
    }

    pub fn step_index(&self) -> u64 {
        self.step_index
    }

    pub fn is_finished(&self) -> bool {
        self.step_index >= self.scenario.steps()
    }

    fn add_jps(&mut self, specs: &[JpSpec]) -> Vec<JpId> {
        let mut ids = Vec::new();
        for spec in specs {
            let id = self.jps.len() as JpId;
            let (p, _) = self.scenario.chamber.clamp(spec.position_um, JP_RADIUS_UM);
            self.jps.push(JanusParticle::new(id, p, wrap_angle(spec.orientation_rad)));
            self.held.push(Vec::new());
            ids.push(id);
        }
        ids
    }

    fn add_capsules(&mut self, specs: &[CapsuleSpec]) -> Vec<CapsuleId> {
        let mut ids = Vec::new();
        for spec in specs {
            let id = self.capsules.len() as CapsuleId;
            let r = 0.5 * self.scenario.capture.diameter_um(spec.size);
            let (p, _) = self.scenario.chamber.clamp(spec.position_um, r);
            self.capsules.push(Capsule::new(id, spec.size, p, spec.payload, spec.kind.clone()));
            self.ledger.initial_payload.push(spec.payload);
            self.ledger.delivered.push(0.0);
            self.free.insert(id, p);
            ids.push(id);
        }
        ids
    }

    fn add_worms(&mut self, specs: &[WormSpec]) -> Vec<u32> {
        let mut ids = Vec::new();
        for spec in specs {
            let id = self.worms.len() as u32;
            let state = match spec.state {
                WormStart::Swimming => WormState::Swimming,
                WormStart::Paralyzed => WormState::Paralyzed,
            };
            let speed = spec.speed_um_per_s.unwrap_or(self.scenario.targets.worm_swim_um_per_s);
            let half = 0.5 * self.scenario.targets.worm_length_um;
            let (p, _) = self.scenario.chamber.clamp(spec.position_um, half);
            self.worms.push(Worm::new(id, p, spec.heading_rad, speed, state));
            ids.push(id);
        }
        ids
    }

    /// Queue a live control. It is applied at the first step boundary at or
    /// after `at` (now when absent).
    pub fn enqueue(&mut self, action: ControlAction, at: Option<f64>) -> Result<()> {
        action.validate(&self.scenario.chamber, "action")?;
        if let Some(t) = at {
            if !t.is_finite() {
                return Err(SimError::InvalidInput("action time must be finite".into()));
            }
        }
        let due = at.unwrap_or_else(|| self.t());
        self.queued.push((due, action));
        Ok(())
    }

    fn apply_action(&mut self, action: &ControlAction, t: f64, events: &mut Vec<Event>) -> Result<()> {
        if let Some(next) = action.apply_to_field(&self.field) {
            self.field = next;
            events.push(Event { t, kind: EventKind::FieldChanged { field: next } });
            return Ok(());
        }
        match action {
            ControlAction::InjectEnzyme { inlet, c, hold_s } => {
                let hold = hold_s.unwrap_or(self.scenario.enzyme.hold_s);
                self.grid.inject(&self.scenario.chamber, inlet, *c, hold)?;
                events.push(Event { t, kind: EventKind::EnzymeInjected { inlet: inlet.clone(), c: *c, hold_s: hold } });
            }
            ControlAction::SpawnAgents { jps, capsules, worms } => {
                let jps = self.add_jps(jps);
                let capsules = self.add_capsules(capsules);
                let worms = self.add_worms(worms);
                events.push(Event { t, kind: EventKind::AgentsSpawned { jps, capsules, worms } });
            }
            ControlAction::SetMagnet { .. } | ControlAction::SetEfield { .. } => unreachable!("field actions handled above"),
        }
        Ok(())
    }

    fn apply_due(&mut self, t: f64, events: &mut Vec<Event>) -> Result<()> {
        let due = t + 1e-6 * self.scenario.dt;
        while let Some(entry) = self.scenario.script.get(self.script_cursor) {
            if entry.t > due {
                break;
            }
            let action = entry.action.clone();
            self.script_cursor += 1;
            self.apply_action(&action, t, events)?;
        }
        if self.queued.iter().any(|(at, _)| *at <= due) {
            let (ready, later): (Vec<_>, Vec<_>) = std::mem::take(&mut self.queued).into_iter().partition(|(at, _)| *at <= due);
            self.queued = later;
            for (_, action) in ready {
                self.apply_action(&action, t, events)?;
            }
        }
        Ok(())
    }

    /// Advance by one step of the scenario dt and return the events emitted.
    pub fn step(&mut self) -> Result<Vec<Event>> {
        let dt = self.scenario.dt;
        let t0 = self.t();
        let t1 = (self.step_index + 1) as f64 * dt;
        let mut events = Vec::new();

        self.apply_due(t0, &mut events)?;
        if self.clusters.of_jp.len() != self.jps.len() {
            self.clusters = update_clusters(&self.jps, &self.scenario.capture, &self.clusters).0;
        }
        let velocities = self.jp_velocities()?;
        self.integrate(&velocities, dt, t1, &mut events)?;
        for w in 0..self.worms.len() {
            if let Some(reaction) =
                worm_step(&mut self.worms[w], &self.scenario.targets, &self.scenario.chamber, t1, dt, &mut self.streams.worms)
            {
                events.push(Event { t: t1, kind: EventKind::WormReaction { worm: w as u32, reaction, capsule: None } });
            }
        }

        let (table, changes) = update_clusters(&self.jps, &self.scenario.capture, &self.clusters);
        self.clusters = table;
        for change in changes {
            let kind = match change {
                ClusterChange::Formed(members) => EventKind::ClusterFormed { members },
                ClusterChange::Dissolved(members) => EventKind::ClusterDissolved { members },
            };
            events.push(Event { t: t1, kind });
        }

        self.capture_and_detach(dt, t1, &mut events);
        self.diffuse(dt)?;
        let fired = self.activate(dt, t1, &mut events);
        for c in fired {
            self.discharge(c, t1, &mut events);
        }

        self.step_index += 1;
        self.accumulate_load(dt);
        if self.step_index % self.sample_every == 0 {
            self.record_sample();
        }
        Ok(events)
    }

    /// Step until the scenario duration is covered.
    pub fn run_to_end(&mut self) -> Result<Vec<Event>> {
        let mut log = Vec::new();
        while !self.is_finished() {
            log.extend(self.step()?);
        }
        Ok(log)
    }

    fn jp_velocities(&mut self) -> Result<Vec<Vec2>> {
        let s = &self.scenario;
        let fs = self.field;
        let rolling = fs.magnet_active();
        let v_m = magnetic_velocity(&s.propulsion, &fs, &s.medium);
        let mut out = Vec::with_capacity(self.jps.len());
        for jp in &mut self.jps {
            if rolling && fs.e_on {
                // Rolling keeps the Janus boundary in the plane of rotation:
                // the dielectric axis turns perpendicular to the heading, on
                // whichever side is nearer.
                let left = wrap_angle(fs.heading_rad + std::f64::consts::FRAC_PI_2);
                let right = wrap_angle(fs.heading_rad - std::f64::consts::FRAC_PI_2);
                let gap = |a: f64| (wrap_angle(a - jp.orientation_rad + std::f64::consts::PI) - std::f64::consts::PI).abs();
                jp.orientation_rad = if gap(left) <= gap(right) { left } else { right };
            }
            let v_e = electric_velocity(&s.propulsion, jp.orientation_rad, &s.medium, &fs)?;
            let mut v = v_e + v_m;
            let b = s.propulsion.brownian_um_per_sqrt_s;
            if b > 0.0 {
                let sd = b / s.dt.sqrt();
                v += Vec2::new(self.streams.propulsion.normal(0.0, sd), self.streams.propulsion.normal(0.0, sd));
            }
            out.push(v);
        }
        Ok(out)
    }

    fn integrate(&mut self, velocities: &[Vec2], dt: f64, t1: f64, events: &mut Vec<Event>) -> Result<()> {
        for cluster in &self.clusters.clusters {
            let n = cluster.members.len() as f64;
            let mean = cluster
                .members
                .iter()
                .fold(Vec2::ZERO, |acc, &m| acc + velocities[m as usize])
                * (1.0 / n);
            let v = mean * cluster.speed_multiplier;
            for &m in &cluster.members {
                let jp = &mut self.jps[m as usize];
                let (p, at_wall) = self.scenario.chamber.clamp(jp.position_um + v * dt, JP_RADIUS_UM);
                if at_wall && !jp.at_wall {
                    events.push(Event { t: t1, kind: EventKind::WallContact { agent: AgentRef::Jp(m) } });
                }
                jp.at_wall = at_wall;
                jp.path_um += (p - jp.position_um).norm();
                jp.position_um = p;
                if !p.is_finite() {
                    return Err(SimError::NonFinite { t: t1, what: format!("jp {m} position") });
                }
            }
        }
        for (j, held) in self.held.iter().enumerate() {
            let jp = &self.jps[j];
            for &c in held {
                let capsule = &self.capsules[c as usize];
                let Some(att) = capsule.attachment else { continue };
                let p = self.scenario.capture.attached_position(jp, capsule, att.bearing_rad);
                let r = 0.5 * self.scenario.capture.diameter_um(capsule.size);
                self.capsules[c as usize].position_um = self.scenario.chamber.clamp(p, r).0;
            }
        }
        Ok(())
    }

    fn slots(&self, j: usize) -> CaptureSlots {
        let mut slots = CaptureSlots::default();
        for &c in &self.held[j] {
            match self.capsules[c as usize].attachment.map(|a| a.site) {
                Some(AttachSite::DielectricEquator) => slots.equator += 1,
                Some(AttachSite::MetallicHemisphere) => slots.metallic += 1,
                _ => {}
            }
        }
        slots.jp_total = self.held[j].len() as u32;
        let cluster = self.clusters.cluster_of(j as JpId);
        slots.cluster_total = cluster.members.iter().map(|&m| self.held[m as usize].len() as u32).sum();
        slots.cluster_capacity = cluster.capsule_capacity;
        slots
    }

    /// Put a released capsule just outside capture reach and make it
    /// capturable again if still intact. Shear leaves capsules behind the
    /// rolling JP; other releases push them radially outward.
    fn release(&mut self, c: CapsuleId, j: usize, sheared: bool) {
        self.held[j].retain(|&x| x != c);
        let jp_pos = self.jps[j].position_um;
        let capture = &self.scenario.capture;
        let capsule = &mut self.capsules[c as usize];
        capsule.attachment = None;
        let mut dir = (capsule.position_um - jp_pos).normalized();
        if sheared {
            dir = Vec2::from_angle(self.field.heading_rad + std::f64::consts::PI);
        } else if dir == Vec2::ZERO {
            dir = Vec2::from_angle(self.field.heading_rad + std::f64::consts::PI);
        }
        let d = capture.diameter_um(capsule.size);
        let target = jp_pos + dir * (JP_RADIUS_UM + capture.capture_radius_um(capsule.size) + d);
        capsule.position_um = self.scenario.chamber.clamp(target, 0.5 * d).0;
        if capsule.is_free_intact() {
            let p = capsule.position_um;
            self.free.insert(c, p);
        }
    }

    fn capture_and_detach(&mut self, dt: f64, t1: f64, events: &mut Vec<Event>) {
        let s = &self.scenario;
        let site = trap_site_for(&s.medium, self.field.freq_hz, &s.capsule_model);
        let dep_on = self.field.e_on && self.field.vpp > 0.0;
        let adsorbing = s.capture.adsorption_active(&s.medium);

        if !adsorbing {
            let current = crate::agents::AttachSite::from_trap(site);
            for j in 0..self.jps.len() {
                for c in self.held[j].clone() {
                    let Some(att) = self.capsules[c as usize].attachment else { continue };
                    if !att.site.is_dep() {
                        continue;
                    }
                    let cause = if !dep_on {
                        DetachCause::FieldOff
                    } else if current != Some(att.site) {
                        DetachCause::SiteLost
                    } else {
                        continue;
                    };
                    self.release(c, j, false);
                    events.push(Event { t: t1, kind: EventKind::CapsuleDetached { capsule: c, jp: j as JpId, cause } });
                }
            }
        }

        if dep_on || adsorbing {
            let reach = JP_RADIUS_UM + self.scenario.capture.capture_radius_um(SizeClass::Large);
            for j in 0..self.jps.len() {
                let candidates = self.free.query(self.jps[j].position_um, reach);
                if candidates.is_empty() {
                    continue;
                }
                let mut slots = self.slots(j);
                for c in candidates {
                    let s = &self.scenario;
                    let Some(att) =
                        attempt_capture(&s.capture, &self.jps[j], &self.capsules[c as usize], &self.field, &s.medium, site, slots)
                    else {
                        continue;
                    };
                    let old = self.capsules[c as usize].position_um;
                    self.free.remove(c, old);
                    let pos = s.capture.attached_position(&self.jps[j], &self.capsules[c as usize], att.bearing_rad);
                    let r = 0.5 * s.capture.diameter_um(self.capsules[c as usize].size);
                    let capsule = &mut self.capsules[c as usize];
                    capsule.attachment = Some(att);
                    capsule.position_um = s.chamber.clamp(pos, r).0;
                    let held = &mut self.held[j];
                    let at = held.partition_point(|&x| x < c);
                    held.insert(at, c);
                    match att.site {
                        AttachSite::DielectricEquator => slots.equator += 1,
                        AttachSite::MetallicHemisphere => slots.metallic += 1,
                        AttachSite::Adsorbed => {}
                    }
                    slots.jp_total += 1;
                    slots.cluster_total += 1;
                    events.push(Event { t: t1, kind: EventKind::CapsuleTrapped { capsule: c, jp: j as JpId, site: att.site } });
                }
            }
        }

        if self.field.magnet_active() {
            let order: Vec<(usize, CapsuleId)> =
                self.held.iter().enumerate().flat_map(|(j, h)| h.iter().map(move |&c| (j, c))).collect();
            if order.is_empty() {
                return;
            }
            let refs: Vec<&Capsule> = order.iter().map(|&(_, c)| &self.capsules[c as usize]).collect();
            let s = &self.scenario;
            let gone = shear_detach(&s.capture, &refs, &self.field, &s.medium, dt, &mut self.streams.shear);
            for c in gone {
                let j = order.iter().find(|&&(_, x)| x == c).map(|&(j, _)| j).expect("detached capsule was held");
                self.release(c, j, true);
                events.push(Event {
                    t: t1,
                    kind: EventKind::CapsuleDetached { capsule: c, jp: j as JpId, cause: DetachCause::Shear },
                });
            }
        }
    }

    fn diffuse(&mut self, dt: f64) -> Result<()> {
        if !self.grid.is_active() {
            self.diffusion_debt_s = 0.0;
            return Ok(());
        }
        self.diffusion_debt_s += dt;
        let limit = DIFFUSION_SAFETY * self.grid.stable_dt();
        if self.diffusion_debt_s >= limit {
            let n = (self.diffusion_debt_s / limit).ceil().max(1.0);
            let sub = self.diffusion_debt_s / n;
            for _ in 0..n as usize {
                self.grid.diffuse_step(sub)?;
            }
            self.diffusion_debt_s = 0.0;
        }
        Ok(())
    }

    fn activate(&mut self, dt: f64, t1: f64, events: &mut Vec<Event>) -> Vec<CapsuleId> {
        let mut fired = Vec::new();
        if !self.grid.is_active() {
            return fired;
        }
        let model = &self.scenario.activation;
        for capsule in &mut self.capsules {
            if !capsule.is_armed() {
                continue;
            }
            let c = self.grid.sample(capsule.position_um);
            if activation_check(capsule, model, c, dt, &mut self.streams.activation) {
                if capsule.attachment.is_none() {
                    self.free.remove(capsule.id, capsule.position_um);
                }
                events.push(Event { t: t1, kind: EventKind::CapsuleActivated { capsule: capsule.id } });
                fired.push(capsule.id);
            }
        }
        if !fired.is_empty() && self.ledger.first_activation_s.is_none() {
            self.ledger.first_activation_s = Some(t1);
        }
        fired
    }

    fn first_hit(&self, tubule: &Tubule) -> Option<Hit> {
        let spheroid_hits = self.spheroids.iter().filter_map(|s| penetration_test(tubule, s));
        let worm_hits = self.worms.iter().filter_map(|w| worm_penetration(tubule, w, &self.scenario.targets));
        spheroid_hits
            .chain(worm_hits)
            .min_by(|a, b| a.entry_um.total_cmp(&b.entry_um).then(a.target.cmp(&b.target)))
    }

    fn discharge(&mut self, c: CapsuleId, t1: f64, events: &mut Vec<Event>) {
        let params = self.scenario.discharge.clone();
        let tubule = eject_tubule(&mut self.capsules[c as usize], &params, t1, &mut self.streams.ejection);
        self.ledger.tubules_ejected += 1;
        events.push(Event {
            t: t1,
            kind: EventKind::TubuleEjected {
                capsule: c,
                origin_um: tubule.origin_um,
                direction: tubule.direction,
                length_um: tubule.length_um,
            },
        });
        let hit = self.first_hit(&tubule);
        if let Some(h) = hit {
            self.ledger.penetrations += 1;
            self.ledger.penetration_depths_um.push(h.depth_um);
            events.push(Event {
                t: t1,
                kind: EventKind::TargetPenetrated { capsule: c, target: h.target, entry_um: h.entry_um, depth_um: h.depth_um },
            });
            if h.target.kind == TargetKind::Worm {
                let size = self.capsules[c as usize].size;
                let worm = &mut self.worms[h.target.id as usize];
                if let Some(reaction) = worm_react(worm, size, t1, &self.scenario.targets) {
                    events.push(Event {
                        t: t1,
                        kind: EventKind::WormReaction { worm: h.target.id, reaction, capsule: Some(c) },
                    });
                }
            }
        }
        let doses = release_payload(&mut self.capsules[c as usize], &tubule, hit, params.f_tip);
        for dose in doses {
            self.ledger.delivered[c as usize] += dose.amount;
            let record = DoseRecord { t: t1, depth_um: dose.depth_um, amount: dose.amount };
            match dose.target {
                Some(TargetRef { kind: TargetKind::Spheroid, id }) => self.spheroids[id as usize].doses.push(record),
                Some(TargetRef { kind: TargetKind::Worm, id }) => self.worms[id as usize].doses.push(record),
                None => {}
            }
            events.push(Event {
                t: t1,
                kind: EventKind::DoseDelivered {
                    capsule: c,
                    target: dose.target,
                    amount: dose.amount,
                    depth_um: dose.depth_um,
                    mode: dose.mode,
                    position_um: dose.position_um,
                    payload_kind: dose.payload_kind.clone(),
                    visible: dose.visible,
                },
            });
            if dose.mode == DoseMode::Plume {
                for s in &mut self.spheroids {
                    if ambient_exposure(s, &dose, &self.scenario.targets) {
                        events.push(Event { t: t1, kind: EventKind::SpheroidSwelling { spheroid: s.id, exposure: s.exposure } });
                    }
                }
            }
            self.ledger.doses.push((t1, dose));
        }
        if let Some(att) = self.capsules[c as usize].attachment {
            if recoil_detach(&self.capsules[c as usize], params.p_recoil, &mut self.streams.recoil) {
                self.release(c, att.jp as usize, false);
                events.push(Event { t: t1, kind: EventKind::CapsuleRecoiled { capsule: c, jp: att.jp } });
            }
        }
        self.tubules.push(tubule);
    }

    fn loads(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.held.iter().map(|h| {
            let mut total = 0;
            let mut equator = 0;
            for &c in h {
                let capsule = &self.capsules[c as usize];
                if capsule.lifecycle == Lifecycle::Intact {
                    total += 1;
                    if capsule.attachment.is_some_and(|a| a.site == AttachSite::DielectricEquator) {
                        equator += 1;
                    }
                }
            }
            (total, equator)
        })
    }

    fn accumulate_load(&mut self, dt: f64) {
        if self.jps.is_empty() {
            return;
        }
        let mut sum = 0u32;
        let mut max = 0u32;
        let mut max_eq = 0u32;
        for (total, eq) in self.loads() {
            sum += total;
            max = max.max(total);
            max_eq = max_eq.max(eq);
        }
        self.ledger.load_integral += sum as f64 / self.jps.len() as f64 * dt;
        self.ledger.load_time_s += dt;
        self.ledger.max_load = self.ledger.max_load.max(max);
        self.ledger.max_equator_load = self.ledger.max_equator_load.max(max_eq);
    }

    pub fn mean_load(&self) -> f64 {
        if self.jps.is_empty() {
            return 0.0;
        }
        self.loads().map(|(t, _)| t as f64).sum::<f64>() / self.jps.len() as f64
    }

    /// Capsules with ejected tubules over all capsules.
    pub fn activated_fraction(&self) -> f64 {
        if self.capsules.is_empty() {
            return 0.0;
        }
        let n = self
            .capsules
            .iter()
            .filter(|c| matches!(c.lifecycle, Lifecycle::Discharged | Lifecycle::Empty))
            .count();
        n as f64 / self.capsules.len() as f64
    }

    fn record_sample(&mut self) {
        let sample = Sample {
            t: self.t(),
            mean_load: self.mean_load(),
            max_load: self.loads().map(|(t, _)| t).max().unwrap_or(0),
            activated_fraction: self.activated_fraction(),
        };
        self.ledger.series.push(sample);
    }

    /// Capsules whose current payload plus delivered dose differs from their
    /// initial payload. Zero in every valid run.
    pub fn payload_mismatches(&self) -> usize {
        self.capsules
            .iter()
            .filter(|c| {
                let i = c.id as usize;
                c.payload + self.ledger.delivered[i] != self.ledger.initial_payload[i]
            })
            .count()
    }

    pub fn capsules_attached_twice(&self) -> usize {
        let mut seen = vec![0u8; self.capsules.len()];
        for h in &self.held {
            for &c in h {
                seen[c as usize] += 1;
            }
        }
        seen.iter().filter(|&&n| n > 1).count()
    }

    pub fn dose_by_target(&self) -> Vec<(TargetRef, f64)> {
        let mut out: Vec<(TargetRef, f64)> = self.spheroids.iter().map(|s| (s.target_ref(), s.total_dose())).collect();
        out.extend(self.worms.iter().map(|w| (w.target_ref(), w.doses.iter().map(|d| d.amount).sum())));
        out
    }

    pub fn snapshot(&self, grid_factor: Option<usize>) -> Snapshot {
        let loads: Vec<u32> = self.loads().map(|(t, _)| t).collect();
        Snapshot {
            t: self.t(),
            field: self.field,
            jps: self
                .jps
                .iter()
                .map(|j| JpView {
                    id: j.id,
                    position_um: j.position_um,
                    orientation_rad: j.orientation_rad,
                    cluster: self.clusters.of_jp.get(j.id as usize).copied().unwrap_or(j.id as usize),
                    load: loads[j.id as usize],
                })
                .collect(),
            capsules: self
                .capsules
                .iter()
                .map(|c| CapsuleView { id: c.id, position_um: c.position_um, size: c.size, phase: c.phase() })
                .collect(),
            tubules: self.tubules.clone(),
            spheroids: self.spheroids.clone(),
            worms: self.worms.clone(),
            enzyme: grid_factor.map(|f| {
                let (nx, ny, values) = self.grid.downsample(f);
                GridView { nx, ny, cell_um: self.grid.cell_um() * f as f64, values }
            }),
            metrics: SnapshotMetrics {
                mean_load: self.mean_load(),
                activated_fraction: self.activated_fraction(),
                tubules: self.tubules.len(),
                penetrations: self.ledger.penetrations,
                dose_by_target: self.dose_by_target(),
            },
            rng_cursors: self.streams.cursors(),
        }
    }
}
