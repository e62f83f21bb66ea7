//! Live steering over a local TCP socket.
//!
//! Messages are JSON objects, one per line. Clients send control actions
//! (`set_magnet`, `set_efield`, `inject_enzyme`, `spawn_agents`) plus
//! `pause`, `resume` and `set_time_scale`. Any message may carry an `id`,
//! echoed in the reply; control actions may carry `t`, the simulated time at
//! which they should apply. The server sends `snapshot`, `event`, `ack` and
//! `error` messages.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::engine::{ControlAction, Event, Scenario, Snapshot, World};
use crate::error::{Result, SimError};

pub const MIN_TIME_SCALE: f64 = 0.1;
pub const MAX_TIME_SCALE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    pub snapshot_hz: f64,
    pub time_scale: f64,
    pub start_paused: bool,
    /// Enzyme grid downsampling factor in snapshots.
    pub grid_factor: usize,
    /// Close the session once the scenario duration is covered.
    pub exit_when_finished: bool,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { snapshot_hz: 20.0, time_scale: 1.0, start_paused: false, grid_factor: 8, exit_when_finished: false }
    }
}

/// Server to client messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot {
        paused: bool,
        finished: bool,
        time_scale: f64,
        state: Box<Snapshot>,
    },
    Event {
        event: Event,
    },
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<Value>,
        action: String,
        /// Simulated time at which the action applies.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<Value>,
        message: String,
    },
}

/// Client to server messages, decoded.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientMessage {
    Control { action: ControlAction, at: Option<f64> },
    Pause,
    Resume,
    SetTimeScale(f64),
}

/// Decode one client line. The `id` is returned separately so that errors
/// can still echo it.
pub fn parse_client_message(line: &str) -> (Option<Value>, std::result::Result<ClientMessage, String>) {
    let mut value: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return (None, Err(format!("malformed message: {e}"))),
    };
    let Some(obj) = value.as_object_mut() else {
        return (None, Err("message must be a JSON object".into()));
    };
    let id = obj.remove("id");
    let kind = match obj.get("type").and_then(Value::as_str) {
        Some(k) => k.to_string(),
        None => return (id, Err("message needs a string \"type\"".into())),
    };
    let msg = match kind.as_str() {
        "pause" => Ok(ClientMessage::Pause),
        "resume" => Ok(ClientMessage::Resume),
        "set_time_scale" => match obj.get("scale").and_then(Value::as_f64) {
            Some(s) if (MIN_TIME_SCALE..=MAX_TIME_SCALE).contains(&s) => Ok(ClientMessage::SetTimeScale(s)),
            Some(s) => Err(format!("time scale {s} outside [{MIN_TIME_SCALE}, {MAX_TIME_SCALE}]")),
            None => Err("set_time_scale needs a numeric \"scale\"".into()),
        },
        _ => {
            let at = match obj.remove("t") {
                None | Some(Value::Null) => Ok(None),
                Some(Value::Number(n)) => Ok(n.as_f64()),
                Some(_) => Err("\"t\" must be a number".to_string()),
            };
            at.and_then(|at| {
                serde_json::from_value::<ControlAction>(value)
                    .map(|action| ClientMessage::Control { action, at })
                    .map_err(|e| format!("invalid {kind}: {e}"))
            })
        }
    };
    (id, msg)
}

/// Bind the gateway port on localhost.
pub fn bind(port: u16) -> Result<TcpListener> {
    TcpListener::bind(("127.0.0.1", port)).map_err(SimError::Io)
}

pub fn is_addr_in_use(err: &SimError) -> bool {
    matches!(err, SimError::Io(e) if e.kind() == ErrorKind::AddrInUse)
}

enum Incoming {
    Line(String),
    Closed,
}

struct Client {
    writer: TcpStream,
    rx: Receiver<Incoming>,
}

impl Client {
    fn attach(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        let (tx, rx) = channel();
        thread::spawn(move || {
            for line in BufReader::new(reader).lines() {
                match line {
                    Ok(l) if l.trim().is_empty() => continue,
                    Ok(l) => {
                        if tx.send(Incoming::Line(l)).is_err() {
                            return;
                        }
                    }
                    Err(_) => break,
                }
            }
            let _ = tx.send(Incoming::Closed);
        });
        Ok(Self { writer: stream, rx })
    }

    fn send(&mut self, msg: &ServerMessage) -> bool {
        let mut line = serde_json::to_string(msg).expect("server messages serialize");
        line.push('\n');
        self.writer.write_all(line.as_bytes()).is_ok()
    }
}

/// Everything the session produced, for logging and equivalence checks.
pub struct SessionOutcome {
    pub events: Vec<Event>,
    pub world: World,
}

/// Pacing state for real-time scaled stepping.
struct Clock {
    scale: f64,
    anchor_wall: Instant,
    anchor_sim: f64,
}

impl Clock {
    fn new(scale: f64, sim_t: f64) -> Self {
        Self { scale, anchor_wall: Instant::now(), anchor_sim: sim_t }
    }

    fn target(&self) -> f64 {
        self.anchor_sim + self.anchor_wall.elapsed().as_secs_f64() * self.scale
    }

    fn rebase(&mut self, sim_t: f64) {
        self.anchor_wall = Instant::now();
        self.anchor_sim = sim_t;
    }
}

/// Run a live session on an already bound listener. Clients are served one
/// at a time; a disconnect pauses the simulation until the next client
/// resumes it.
pub fn serve(listener: TcpListener, scenario: &Scenario, config: &GatewayConfig) -> Result<SessionOutcome> {
    if !(MIN_TIME_SCALE..=MAX_TIME_SCALE).contains(&config.time_scale) || !(config.snapshot_hz > 0.0) {
        return Err(SimError::InvalidInput("time scale or snapshot rate out of range".into()));
    }
    let mut world = World::new(scenario)?;
    let mut log = Vec::new();
    let mut paused = config.start_paused;
    let mut clock = Clock::new(config.time_scale, world.t());
    let period = Duration::from_secs_f64(1.0 / config.snapshot_hz);

    'accept: loop {
        let (stream, _) = listener.accept()?;
        let mut client = Client::attach(stream)?;
        clock.rebase(world.t());
        let mut next_snapshot = Instant::now();

        loop {
            let wait = next_snapshot.saturating_duration_since(Instant::now()).min(Duration::from_millis(2));
            let mut pending = Vec::new();
            match client.rx.recv_timeout(wait) {
                Ok(m) => pending.push(m),
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => pending.push(Incoming::Closed),
            }
            pending.extend(client.rx.try_iter());

            for incoming in pending {
                let line = match incoming {
                    Incoming::Line(l) => l,
                    Incoming::Closed => {
                        paused = true;
                        continue 'accept;
                    }
                };
                let (id, parsed) = parse_client_message(&line);
                let reply = match parsed {
                    Err(message) => ServerMessage::Error { id, message },
                    Ok(ClientMessage::Pause) => {
                        paused = true;
                        ServerMessage::Ack { id, action: "pause".into(), at: Some(world.t()) }
                    }
                    Ok(ClientMessage::Resume) => {
                        paused = false;
                        clock.rebase(world.t());
                        ServerMessage::Ack { id, action: "resume".into(), at: Some(world.t()) }
                    }
                    Ok(ClientMessage::SetTimeScale(s)) => {
                        clock.scale = s;
                        clock.rebase(world.t());
                        ServerMessage::Ack { id, action: "set_time_scale".into(), at: None }
                    }
                    Ok(ClientMessage::Control { action, at }) => {
                        let name = action.name().to_string();
                        let due = at.unwrap_or_else(|| world.t()).max(world.t());
                        match world.enqueue(action, at) {
                            Ok(()) => ServerMessage::Ack { id, action: name, at: Some(due) },
                            Err(e) => ServerMessage::Error { id, message: e.to_string() },
                        }
                    }
                };
                if !client.send(&reply) {
                    paused = true;
                    continue 'accept;
                }
            }

            if !paused && !world.is_finished() {
                let target = clock.target();
                let deadline = next_snapshot.max(Instant::now()) + period;
                while world.t() < target && !world.is_finished() && Instant::now() < deadline {
                    let events = world.step()?;
                    for event in &events {
                        if !client.send(&ServerMessage::Event { event: event.clone() }) {
                            paused = true;
                            log.extend(events);
                            continue 'accept;
                        }
                    }
                    log.extend(events);
                }
            }

            if Instant::now() >= next_snapshot {
                let msg = ServerMessage::Snapshot {
                    paused,
                    finished: world.is_finished(),
                    time_scale: clock.scale,
                    state: Box::new(world.snapshot(Some(config.grid_factor))),
                };
                if !client.send(&msg) {
                    paused = true;
                    continue 'accept;
                }
                next_snapshot += period;
                if next_snapshot < Instant::now() {
                    next_snapshot = Instant::now() + period;
                }
            }

            if world.is_finished() && config.exit_when_finished {
                let _ = client.writer.flush();
                let _ = client.writer.shutdown(std::net::Shutdown::Both);
                break 'accept;
            }
        }
    }
    Ok(SessionOutcome { events: log, world })
}
