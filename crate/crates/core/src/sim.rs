//! The simulated network: nodes, shared medium and workloads wired onto the
//! event scheduler.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{mix64, EventHandle, RngStream, Scheduler, StreamPurpose};
use crate::frame::{AppMessage, Dest, EventId, Frame, FrameKind, NodeId, Payload};
use crate::mac::{Mac, MacEnv, MacParams, MacTimer, MacVariant};
use crate::metrics::{Collector, EnergyParams, MetricsError, RadioTime, RunMetrics};
use crate::radio::{self, ArrivingSignal, ChannelModel, RadioParams, SPEED_OF_LIGHT};
use crate::routing::{RouteAction, Router, RoutingParams};
use crate::scenario::{self, Position, ScenarioParams, Target};

/// Everything one run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub radio: RadioParams,
    pub mac: MacParams,
    pub routing: RoutingParams,
    pub scenario: ScenarioParams,
    pub energy: EnergyParams,
    /// s at the end of the run whose events are not counted
    pub truncation_guard: f64,
    pub allow_short_retx_delay: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::preset("uwb").expect("uwb preset")
    }
}

impl SimConfig {
    /// Radio and energy columns for `name` with matching MAC defaults.
    ///
    /// `"oqpsk"` selects the CSMA/CA baseline with an ACK wait scaled to the
    /// 250 kb/s airtime.
    pub fn preset(name: &str) -> Option<Self> {
        let radio = RadioParams::preset(name)?;
        let energy = EnergyParams::preset(name)?;
        let mac = match name {
            "oqpsk" => MacParams {
                variant: MacVariant::CsmaCa,
                retx_delay: 0.012,
                slot_size: 0.006,
                ..MacParams::default()
            },
            _ => MacParams::default(),
        };
        Some(SimConfig {
            radio,
            mac,
            routing: RoutingParams::default(),
            scenario: ScenarioParams::default(),
            energy,
            truncation_guard: 5.0,
            allow_short_retx_delay: false,
        })
    }

    pub fn data_airtime(&self) -> f64 {
        self.radio.airtime(self.mac.data_bits)
    }

    pub fn max_propagation_delay(&self) -> f64 {
        self.scenario.diagonal() / SPEED_OF_LIGHT
    }

    /// Checks every parameter invariant; returns warnings on success and the
    /// offending key on failure.
    pub fn validate(&self) -> Result<Vec<String>, (&'static str, String)> {
        self.radio.validate()?;
        self.scenario.validate()?;
        self.energy.validate()?;
        if !(self.truncation_guard >= 0.0 && self.truncation_guard < self.scenario.sim_duration) {
            return Err((
                "metrics.truncation_guard",
                "must be in [0, scenario.sim_duration)".into(),
            ));
        }
        if self.scenario.placement == scenario::Placement::JitteredGrid {
            let max_pitch = scenario::MAX_PITCH_FRACTION * self.radio.max_hop_distance();
            scenario::grid_dimensions(
                self.scenario.width,
                self.scenario.height,
                self.scenario.n_sensors,
                max_pitch,
            )
            .map_err(|m| ("scenario.n_sensors", m))?;
        }
        let r = &self.routing;
        if !(r.route_lifetime > 0.0 && r.rreq_min_interval >= 0.0 && r.discovery_timeout > 0.0) {
            return Err((
                "routing.route_lifetime",
                "routing timers must be positive".into(),
            ));
        }
        if r.buffer_capacity == 0 {
            return Err(("routing.buffer_capacity", "must be >= 1".into()));
        }
        let w = self.mac.validate(
            self.radio.bitrate,
            self.max_propagation_delay(),
            self.allow_short_retx_delay,
        )?;
        Ok(w.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {key}: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl SimError {
    fn config(key: &str, message: impl Into<String>) -> Self {
        SimError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Base,
    Sensor,
    /// A radio-equipped target; index into the target list.
    RadioTarget(usize),
    /// Microbenchmark sender.
    Source,
}

impl Role {
    fn routes(self) -> bool {
        matches!(self, Role::Base | Role::Sensor)
    }
}

/// Traffic driving the run.
#[derive(Debug, Clone, PartialEq)]
pub enum Workload {
    /// Targets emitting detectable events; sensors report to the base.
    Sensing,
    /// Every `Source` node broadcasts probe frames with Poisson arrivals.
    Poisson { rate_per_node: f64 },
    /// Only traffic injected with [`World::inject_report`].
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SimEvent {
    Mac { node: usize, timer: MacTimer },
    ArrivalStart { rx: usize, tx: u64 },
    ArrivalEnd { rx: usize, tx: u64 },
    Emit { target: usize },
    MobilityTick,
    IdentTimeout { sensor: usize, event: EventId },
    Discovery { node: usize, dest: NodeId },
    PoissonArrival { node: usize },
    Inject { node: usize, dest: usize },
}

impl SimEvent {
    fn tag(&self) -> u64 {
        match self {
            SimEvent::Mac { timer, .. } => *timer as u64,
            SimEvent::ArrivalStart { .. } => 10,
            SimEvent::ArrivalEnd { .. } => 11,
            SimEvent::Emit { .. } => 12,
            SimEvent::MobilityTick => 13,
            SimEvent::IdentTimeout { .. } => 14,
            SimEvent::Discovery { .. } => 15,
            SimEvent::PoissonArrival { .. } => 16,
            SimEvent::Inject { .. } => 17,
        }
    }

    fn subject(&self) -> u64 {
        match *self {
            SimEvent::Mac { node, .. }
            | SimEvent::Discovery { node, .. }
            | SimEvent::PoissonArrival { node }
            | SimEvent::Inject { node, .. } => node as u64,
            SimEvent::ArrivalStart { rx, tx } | SimEvent::ArrivalEnd { rx, tx } => {
                (rx as u64) << 32 | tx
            }
            SimEvent::Emit { target } => target as u64,
            SimEvent::IdentTimeout { sensor, .. } => sensor as u64,
            SimEvent::MobilityTick => 0,
        }
    }
}

/// One entry of the dispatch trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub time: f64,
    pub sequence: u64,
    pub tag: u64,
    pub subject: u64,
}

/// A transmission as logged for trace audits.
#[derive(Debug, Clone, PartialEq)]
pub struct TxLogEntry {
    pub time: f64,
    pub node: usize,
    pub kind: FrameKind,
    pub broadcast: bool,
    pub sequence: (usize, u64),
    pub retry_count: u32,
}

struct TxRecord {
    source: usize,
    start: f64,
    end: f64,
    origin: Position,
    frame: Frame,
}

struct Node {
    role: Role,
    mac: Mac,
    router: Router,
    tx_time: f64,
    locked: Option<u64>,
    backoff_rng: ChaCha8Rng,
    reception_rng: ChaCha8Rng,
    traffic_rng: ChaCha8Rng,
    pending_ident: HashMap<EventId, (EventHandle, f64)>,
}

enum MacOutput {
    Transmit(Frame, f64),
    Deliver(Frame),
    Discarded(Frame),
}

/// Adapter giving one node's MAC access to the world.
struct NodeEnv<'a> {
    node: usize,
    sched: &'a mut Scheduler<SimEvent>,
    out: &'a mut Vec<MacOutput>,
    rng: &'a mut ChaCha8Rng,
    medium: &'a BTreeMap<u64, TxRecord>,
    positions: &'a [Position],
    radio: &'a RadioParams,
}

impl MacEnv for NodeEnv<'_> {
    fn now(&self) -> f64 {
        self.sched.now()
    }
    fn schedule(&mut self, at: f64, timer: MacTimer) -> EventHandle {
        self.sched.schedule(
            at,
            SimEvent::Mac {
                node: self.node,
                timer,
            },
        )
    }
    fn cancel(&mut self, handle: EventHandle) -> bool {
        self.sched.cancel(handle)
    }
    fn transmit(&mut self, frame: &Frame, airtime: f64) {
        self.out.push(MacOutput::Transmit(frame.clone(), airtime));
    }
    fn channel_free(&mut self) -> bool {
        let sensed = sensed_power_dbm(
            self.medium,
            self.positions[self.node],
            self.node,
            self.sched.now(),
            self.radio,
        );
        radio::clear_channel(self.radio, sensed)
    }
    fn draw_backoff(&mut self, n: u32) -> u32 {
        self.rng.gen_range(0..n)
    }
    fn deliver(&mut self, frame: Frame) {
        self.out.push(MacOutput::Deliver(frame));
    }
    fn discarded(&mut self, frame: Frame) {
        self.out.push(MacOutput::Discarded(frame));
    }
}

/// Distance used for link-budget purposes; co-located nodes are treated as
/// 1 cm apart.
fn link_distance(a: Position, b: Position) -> f64 {
    a.distance(b).max(0.01)
}

fn arrival_window(rec: &TxRecord, at: Position) -> (f64, f64, f64) {
    let delay = rec.origin.distance(at) / SPEED_OF_LIGHT;
    (rec.start + delay, rec.end + delay, delay)
}

fn sensed_power_dbm(
    medium: &BTreeMap<u64, TxRecord>,
    at: Position,
    node: usize,
    now: f64,
    radio: &RadioParams,
) -> f64 {
    let noise = radio::dbm_to_mw(radio::noise_floor(radio));
    let signals: f64 = medium
        .values()
        .filter(|r| r.source != node)
        .filter(|r| {
            let (s, e, _) = arrival_window(r, at);
            s <= now && now < e
        })
        .map(|r| {
            radio::dbm_to_mw(radio::rx_power(
                radio.tx_power,
                link_distance(r.origin, at),
                radio,
            ))
        })
        .sum();
    radio::mw_to_dbm(noise + signals)
}

/// Counters reported at the end of every run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Counters {
    pub events_dispatched: u64,
    pub data_transmissions: u64,
    pub ack_transmissions: u64,
    pub rreq_transmissions: u64,
    pub probe_transmissions: u64,
    /// probe frames decoded by the base (sink) node
    pub probe_receptions: u64,
    pub reports_delivered: u64,
    pub phantom_reports: u64,
    pub collisions: u64,
    pub arq_discards: u64,
    pub queue_drops: u64,
    pub identified_reports: u64,
    /// events no sensor was close enough to detect
    pub undetected_events: u64,
    /// report frames lost to retransmission exhaustion
    pub report_discards: u64,
}

/// Everything a finished run produced.
pub struct Outcome {
    pub counters: Counters,
    pub radio_time: Vec<RadioTime>,
    pub collector: Collector,
    pub trace_digest: u64,
    pub trace: Option<Vec<TraceEntry>>,
    pub tx_log: Option<Vec<TxLogEntry>>,
    pub routes: Vec<Router>,
    pub duration: f64,
}

impl Outcome {
    pub fn metrics(&self, config: &SimConfig) -> Result<RunMetrics, MetricsError> {
        let mut m = self.collector.finalize(
            self.duration,
            config.truncation_guard,
            self.radio_time.clone(),
            &config.energy,
        )?;
        m.collisions = self.counters.collisions;
        m.arq_discards = self.counters.arq_discards;
        m.queue_drops = self.counters.queue_drops;
        Ok(m)
    }
}

pub struct World {
    config: SimConfig,
    sched: Scheduler<SimEvent>,
    nodes: Vec<Node>,
    positions: Vec<Position>,
    targets: Vec<Target>,
    target_node: Vec<Option<usize>>,
    target_rngs: Vec<ChaCha8Rng>,
    mobility_rng: ChaCha8Rng,
    workload: Workload,
    medium: BTreeMap<u64, TxRecord>,
    next_tx: u64,
    noise_dbm: f64,
    max_airtime: f64,
    collector: Collector,
    counters: Counters,
    digest: u64,
    trace: Option<Vec<TraceEntry>>,
    tx_log: Option<Vec<TxLogEntry>>,
    out: Vec<MacOutput>,
}

/// Index of the base station in every world.
pub const BASE: usize = 0;

impl World {
    /// The detection scenario: base at index 0, sensors next, then radio targets.
    pub fn scenario(config: SimConfig, seed: u64) -> Result<World, SimError> {
        config.validate().map_err(|(k, m)| SimError::config(k, m))?;
        let sp = &config.scenario;
        let mut placement_rng = RngStream::for_entity(seed, 0, StreamPurpose::Placement).rng();
        let layout = scenario::place_nodes(sp, config.radio.max_hop_distance(), &mut placement_rng)
            .map_err(|m| SimError::config("scenario.n_sensors", m))?;
        let targets = scenario::spawn_targets(sp, &mut placement_rng);

        let mut positions = vec![layout.base];
        let mut roles = vec![Role::Base];
        positions.extend(layout.sensors.iter().copied());
        roles.extend(std::iter::repeat_n(Role::Sensor, layout.sensors.len()));
        let mut target_node = vec![None; targets.len()];
        for t in targets.iter().filter(|t| t.radio) {
            target_node[t.index] = Some(positions.len());
            positions.push(t.position);
            roles.push(Role::RadioTarget(t.index));
        }
        let mut w = World::build(config, positions, roles, Workload::Sensing, seed);
        w.targets = targets;
        w.target_node = target_node;
        w.target_rngs = (0..w.targets.len())
            .map(|i| {
                RngStream::for_entity(seed, 1_000_000 + i as u64, StreamPurpose::Traffic).rng()
            })
            .collect();
        w.start_sensing();
        Ok(w)
    }

    /// A world over explicit positions and roles, with no targets.
    pub fn custom(
        config: SimConfig,
        positions: Vec<Position>,
        roles: Vec<Role>,
        workload: Workload,
        seed: u64,
    ) -> World {
        assert_eq!(positions.len(), roles.len());
        let mut w = World::build(config, positions, roles, workload, seed);
        if let Workload::Poisson { rate_per_node } = w.workload {
            for i in 0..w.nodes.len() {
                if w.nodes[i].role == Role::Source {
                    let d = exp_draw(&mut w.nodes[i].traffic_rng, rate_per_node);
                    w.sched.schedule(d, SimEvent::PoissonArrival { node: i });
                }
            }
        }
        w
    }

    fn build(
        config: SimConfig,
        positions: Vec<Position>,
        roles: Vec<Role>,
        workload: Workload,
        seed: u64,
    ) -> World {
        let nodes = roles
            .iter()
            .enumerate()
            .map(|(i, role)| Node {
                role: *role,
                mac: Mac::new(NodeId(i), config.mac.clone(), config.radio.bitrate),
                router: Router::new(NodeId(i), config.routing.clone()),
                tx_time: 0.0,
                locked: None,
                backoff_rng: RngStream::for_entity(seed, i as u64, StreamPurpose::Backoff).rng(),
                reception_rng: RngStream::for_entity(seed, i as u64, StreamPurpose::Reception)
                    .rng(),
                traffic_rng: RngStream::for_entity(seed, i as u64, StreamPurpose::Traffic).rng(),
                pending_ident: HashMap::new(),
            })
            .collect();
        let max_bits = config
            .mac
            .data_bits
            .max(config.mac.control_bits)
            .max(config.mac.ack_bits);
        World {
            noise_dbm: radio::noise_floor(&config.radio),
            max_airtime: config.radio.airtime(max_bits),
            mobility_rng: RngStream::for_entity(seed, 999_999, StreamPurpose::Mobility).rng(),
            config,
            sched: Scheduler::new(),
            nodes,
            positions,
            targets: vec![],
            target_node: vec![],
            target_rngs: vec![],
            workload,
            medium: BTreeMap::new(),
            next_tx: 0,
            collector: Collector::new(),
            counters: Counters::default(),
            digest: 0xcbf2_9ce4_8422_2325,
            trace: None,
            tx_log: None,
            out: vec![],
        }
    }

    fn start_sensing(&mut self) {
        let period = self.config.scenario.event_period;
        for i in 0..self.targets.len() {
            let first = self.target_rngs[i].gen_range(0.0..period);
            self.sched.schedule(first, SimEvent::Emit { target: i });
        }
        if self.config.scenario.target_speed > 0.0 && !self.targets.is_empty() {
            self.sched
                .schedule(self.config.scenario.mobility_tick, SimEvent::MobilityTick);
        }
    }

    /// Records every dispatched event.
    pub fn enable_trace(&mut self) {
        self.trace = Some(vec![]);
    }

    /// Records every transmission.
    pub fn enable_tx_log(&mut self) {
        self.tx_log = Some(vec![]);
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Schedules a probe from `node` to `dest` through the routing layer.
    pub fn inject_report(&mut self, at: f64, node: usize, dest: usize) {
        self.sched.schedule(at, SimEvent::Inject { node, dest });
    }

    pub fn run(mut self) -> Outcome {
        let horizon = self.config.scenario.sim_duration;
        while let Some((t, h, ev)) = self.sched.pop_until(horizon) {
            let (tag, subject) = (ev.tag(), ev.subject());
            self.digest = mix64(self.digest ^ t.to_bits())
                ^ mix64(h.sequence() ^ (tag << 56) ^ subject.rotate_left(17));
            if let Some(trace) = self.trace.as_mut() {
                trace.push(TraceEntry {
                    time: t,
                    sequence: h.sequence(),
                    tag,
                    subject,
                });
            }
            self.dispatch(ev);
        }
        self.sched.advance_to(horizon);
        self.counters.events_dispatched = self.sched.dispatched();
        for n in &self.nodes {
            let s = n.mac.stats();
            self.counters.arq_discards += s.arq_discards;
            self.counters.queue_drops += s.queue_drops;
        }
        let radio_time = self
            .nodes
            .iter()
            .filter(|n| n.role.routes())
            .map(|n| RadioTime {
                tx_time: n.tx_time,
                rx_time: horizon - n.tx_time,
            })
            .collect();
        Outcome {
            counters: self.counters,
            radio_time,
            collector: self.collector,
            trace_digest: self.digest,
            trace: self.trace,
            tx_log: self.tx_log,
            routes: self.nodes.into_iter().map(|n| n.router).collect(),
            duration: horizon,
        }
    }

    fn now(&self) -> f64 {
        self.sched.now()
    }

    fn dispatch(&mut self, ev: SimEvent) {
        match ev {
            SimEvent::Mac { node, timer } => {
                self.with_mac(node, |mac, env| mac.on_timer(timer, env))
            }
            SimEvent::ArrivalStart { rx, tx } => self.arrival_start(rx, tx),
            SimEvent::ArrivalEnd { rx, tx } => self.arrival_end(rx, tx),
            SimEvent::Emit { target } => self.emit(target),
            SimEvent::MobilityTick => self.mobility_tick(),
            SimEvent::IdentTimeout { sensor, event } => {
                if let Some((_, emit)) = self.nodes[sensor].pending_ident.remove(&event) {
                    self.send_report(sensor, event, emit, false);
                }
            }
            SimEvent::Discovery { node, dest } => {
                let now = self.now();
                let actions = self.nodes[node].router.on_discovery_timeout(now, dest);
                self.apply_routing(node, actions);
            }
            SimEvent::PoissonArrival { node } => {
                if let Workload::Poisson { rate_per_node } = self.workload {
                    let frame = Frame::new(
                        FrameKind::Data,
                        Dest::Broadcast,
                        NodeId(node),
                        Dest::Broadcast,
                        self.config.mac.data_bits,
                        Payload::App(AppMessage::Probe),
                    );
                    self.with_mac(node, |mac, env| {
                        mac.enqueue(frame, env);
                    });
                    let d = exp_draw(&mut self.nodes[node].traffic_rng, rate_per_node);
                    self.sched.schedule_in(d, SimEvent::PoissonArrival { node });
                }
            }
            SimEvent::Inject { node, dest } => {
                let now = self.now();
                let actions = self.nodes[node]
                    .router
                    .send_to(now, NodeId(dest), AppMessage::Probe);
                self.apply_routing(node, actions);
            }
        }
    }

    /// Runs `f` against node `i`'s MAC, then applies whatever it produced.
    fn with_mac<F>(&mut self, i: usize, f: F)
    where
        F: FnOnce(&mut Mac, &mut NodeEnv<'_>),
    {
        let mut out = std::mem::take(&mut self.out);
        {
            let node = &mut self.nodes[i];
            let mut env = NodeEnv {
                node: i,
                sched: &mut self.sched,
                out: &mut out,
                rng: &mut node.backoff_rng,
                medium: &self.medium,
                positions: &self.positions,
                radio: &self.config.radio,
            };
            f(&mut node.mac, &mut env);
        }
        for o in out {
            match o {
                MacOutput::Transmit(frame, airtime) => self.start_transmission(i, frame, airtime),
                MacOutput::Deliver(frame) => self.on_deliver(i, frame),
                MacOutput::Discarded(frame) => {
                    if matches!(frame.payload, Payload::App(AppMessage::Report { .. })) {
                        self.counters.report_discards += 1;
                    }
                    if let (true, Some(hop)) = (self.nodes[i].role.routes(), frame.mac_dest.node())
                    {
                        self.nodes[i].router.handle_link_failure(hop);
                    }
                }
            }
        }
    }

    fn start_transmission(&mut self, src: usize, frame: Frame, airtime: f64) {
        let now = self.now();
        let horizon = self.config.scenario.sim_duration;
        self.nodes[src].tx_time += airtime.min(horizon - now).max(0.0);
        match frame.kind {
            FrameKind::Ack => self.counters.ack_transmissions += 1,
            FrameKind::Rreq => self.counters.rreq_transmissions += 1,
            _ => self.counters.data_transmissions += 1,
        }
        if matches!(frame.payload, Payload::App(AppMessage::Probe)) {
            self.counters.probe_transmissions += 1;
        }
        if let Some(log) = self.tx_log.as_mut() {
            log.push(TxLogEntry {
                time: now,
                node: src,
                kind: frame.kind,
                broadcast: frame.is_broadcast(),
                sequence: (frame.sequence.origin.0, frame.sequence.counter),
                retry_count: frame.retry_count,
            });
        }

        let keep_after = now - self.max_airtime - 1e-3;
        while let Some(entry) = self.medium.first_entry() {
            if entry.get().end < keep_after {
                entry.remove();
            } else {
                break;
            }
        }

        let id = self.next_tx;
        self.next_tx += 1;
        let origin = self.positions[src];
        let radio = &self.config.radio;
        for (rx, pos) in self.positions.iter().enumerate() {
            if rx == src {
                continue;
            }
            let d = link_distance(origin, *pos);
            if radio::rx_power(radio.tx_power, d, radio) < radio.sensitivity {
                continue;
            }
            let delay = origin.distance(*pos) / SPEED_OF_LIGHT;
            self.sched
                .schedule(now + delay, SimEvent::ArrivalStart { rx, tx: id });
            self.sched
                .schedule(now + delay + airtime, SimEvent::ArrivalEnd { rx, tx: id });
        }
        self.medium.insert(
            id,
            TxRecord {
                source: src,
                start: now,
                end: now + airtime,
                origin,
                frame,
            },
        );
    }

    fn arrival_start(&mut self, rx: usize, tx: u64) {
        if self.config.radio.channel == ChannelModel::Ideal {
            return;
        }
        let node = &mut self.nodes[rx];
        if node.mac.is_transmitting() {
            return;
        }
        if node.locked.is_none() {
            node.locked = Some(tx);
        } else if self.medium[&tx].frame.mac_dest.accepts(NodeId(rx)) {
            self.counters.collisions += 1;
        }
    }

    fn arrival_end(&mut self, rx: usize, tx: u64) {
        let ideal = self.config.radio.channel == ChannelModel::Ideal;
        if !ideal {
            if self.nodes[rx].locked != Some(tx) {
                return;
            }
            self.nodes[rx].locked = None;
        }
        let Some(rec) = self.medium.get(&tx) else {
            return;
        };
        let at = self.positions[rx];
        let radio = &self.config.radio;
        let peak = radio::rx_power(radio.tx_power, link_distance(rec.origin, at), radio);
        let ok = if ideal {
            peak >= radio.sensitivity
        } else {
            let (start, end, _) = arrival_window(rec, at);
            let mut half_duplex = false;
            let mut interferers = vec![];
            for (oid, other) in &self.medium {
                if *oid == tx {
                    continue;
                }
                let (s, e, _) = arrival_window(other, at);
                if other.source == rx {
                    if other.start < end && other.end > start {
                        half_duplex = true;
                    }
                    continue;
                }
                if s < end && e > start {
                    interferers.push(ArrivingSignal {
                        start: s,
                        end: e,
                        power_dbm: radio::rx_power(
                            radio.tx_power,
                            link_distance(other.origin, at),
                            radio,
                        ),
                    });
                }
            }
            if half_duplex {
                false
            } else {
                let target = ArrivingSignal {
                    start,
                    end,
                    power_dbm: peak,
                };
                let segs = radio::sinr_segments(&target, &interferers, self.noise_dbm);
                let p = radio::packet_success(&segs, radio);
                let draw: f64 = self.nodes[rx].reception_rng.gen();
                let ok = radio::reception_succeeds(p, peak, radio, draw);
                if !ok && !interferers.is_empty() && rec.frame.mac_dest.accepts(NodeId(rx)) {
                    self.counters.collisions += 1;
                }
                ok
            }
        };
        if ok {
            let frame = rec.frame.clone();
            self.with_mac(rx, |mac, env| mac.on_frame_received(frame, env));
        }
    }

    fn on_deliver(&mut self, node: usize, frame: Frame) {
        let now = self.now();
        let role = self.nodes[node].role;
        match frame.payload {
            Payload::Rreq(q) if role.routes() => {
                let a = self.nodes[node]
                    .router
                    .handle_rreq(now, frame.mac_source, q);
                self.apply_routing(node, a);
            }
            Payload::Rrep(p) if role.routes() => {
                let a = self.nodes[node]
                    .router
                    .handle_rrep(now, frame.mac_source, p);
                self.apply_routing(node, a);
            }
            Payload::App(msg) => match frame.net_dest {
                Dest::Broadcast => self.on_local(node, frame.net_source, msg),
                Dest::Node(d) if d.0 == node => self.on_local(node, frame.net_source, msg),
                Dest::Node(d) if role.routes() => {
                    let a = self.nodes[node]
                        .router
                        .forward(now, frame.net_source, d, msg);
                    self.apply_routing(node, a);
                }
                Dest::Node(_) => {}
            },
            _ => {}
        }
    }

    fn apply_routing(&mut self, node: usize, actions: Vec<RouteAction>) {
        for a in actions {
            match a {
                RouteAction::Send {
                    kind,
                    mac_dest,
                    net_source,
                    net_dest,
                    payload,
                } => {
                    let bits = match payload {
                        Payload::App(AppMessage::Report { .. } | AppMessage::Probe) => {
                            self.config.mac.data_bits
                        }
                        _ => self.config.mac.control_bits,
                    };
                    let frame = Frame::new(kind, mac_dest, net_source, net_dest, bits, payload);
                    self.with_mac(node, |mac, env| {
                        mac.enqueue(frame, env);
                    });
                }
                RouteAction::DeliverLocal {
                    net_source,
                    message,
                } => self.on_local(node, net_source, message),
                RouteAction::ArmDiscoveryTimer { destination, at } => {
                    self.sched.schedule(
                        at,
                        SimEvent::Discovery {
                            node,
                            dest: destination,
                        },
                    );
                }
            }
        }
    }

    /// Application-layer handling of a payload addressed to `node`.
    fn on_local(&mut self, node: usize, from: NodeId, msg: AppMessage) {
        let now = self.now();
        match (self.nodes[node].role, msg) {
            (Role::Base, AppMessage::Report { event, .. }) => {
                if self.collector.report_delivered(event, now) {
                    self.counters.reports_delivered += 1;
                } else {
                    self.counters.phantom_reports += 1;
                }
            }
            (Role::Base, AppMessage::Probe) => self.counters.probe_receptions += 1,
            (Role::RadioTarget(t), AppMessage::IdentRequest { event }) if event.target == t => {
                let frame = Frame::new(
                    FrameKind::Data,
                    Dest::Node(from),
                    NodeId(node),
                    Dest::Node(from),
                    self.config.mac.control_bits,
                    Payload::App(AppMessage::IdentReply { event }),
                );
                self.with_mac(node, |mac, env| {
                    mac.enqueue(frame, env);
                });
            }
            (Role::Sensor, AppMessage::IdentReply { event }) => {
                if let Some((h, emit)) = self.nodes[node].pending_ident.remove(&event) {
                    self.sched.cancel(h);
                    self.send_report(node, event, emit, true);
                }
            }
            _ => {}
        }
    }

    fn send_report(&mut self, sensor: usize, event: EventId, emit_time: f64, identified: bool) {
        if identified {
            self.counters.identified_reports += 1;
        }
        let now = self.now();
        let msg = AppMessage::Report {
            event,
            emit_time,
            identified,
        };
        let a = self.nodes[sensor].router.send_to(now, NodeId(BASE), msg);
        self.apply_routing(sensor, a);
    }

    fn emit(&mut self, target: usize) {
        let now = self.now();
        let sp = self.config.scenario.clone();
        let event = scenario::emit_event(&mut self.targets[target], now);
        self.collector.event_generated(event.id, now);
        let next = scenario::next_emission_delay(&sp, &mut self.target_rngs[target]);
        self.sched.schedule_in(next, SimEvent::Emit { target });

        let radio_target = self.targets[target].radio;
        let detecting: Vec<usize> = (0..self.nodes.len())
            .filter(|i| self.nodes[*i].role == Role::Sensor)
            .filter(|i| self.positions[*i].distance(event.emit_position) <= sp.detection_range)
            .collect();
        if detecting.is_empty() {
            self.counters.undetected_events += 1;
        }
        for s in detecting {
            if radio_target {
                let req = Frame::new(
                    FrameKind::Data,
                    Dest::Broadcast,
                    NodeId(s),
                    Dest::Broadcast,
                    self.config.mac.control_bits,
                    Payload::App(AppMessage::IdentRequest { event: event.id }),
                );
                self.with_mac(s, |mac, env| {
                    mac.enqueue(req, env);
                });
                let h = self.sched.schedule_in(
                    sp.identification_timeout,
                    SimEvent::IdentTimeout {
                        sensor: s,
                        event: event.id,
                    },
                );
                self.nodes[s].pending_ident.insert(event.id, (h, now));
            } else {
                self.send_report(s, event.id, now, false);
            }
        }
    }

    fn mobility_tick(&mut self) {
        let sp = &self.config.scenario;
        for t in &mut self.targets {
            scenario::mobility_step(t, sp, sp.mobility_tick, &mut self.mobility_rng);
            if let Some(n) = self.target_node[t.index] {
                self.positions[n] = t.position;
            }
        }
        self.sched
            .schedule_in(sp.mobility_tick, SimEvent::MobilityTick);
    }
}

fn exp_draw(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

/// Runs the detection scenario once and returns its metrics.
pub fn simulate(config: &SimConfig, seed: u64) -> Result<RunMetrics, SimError> {
    let world = World::scenario(config.clone(), seed)?;
    let outcome = world.run();
    Ok(outcome.metrics(config)?)
}

/// A sink (index 0, role `Base`) at the origin with `n` senders evenly
/// spaced on a circle of `radius` metres.
pub fn star_layout(n: usize, radius: f64) -> (Vec<Position>, Vec<Role>) {
    let mut positions = vec![Position::new(0.0, 0.0)];
    let mut roles = vec![Role::Base];
    for i in 0..n {
        let a = std::f64::consts::TAU * i as f64 / n as f64;
        positions.push(Position::new(radius * a.cos(), radius * a.sin()));
        roles.push(Role::Source);
    }
    (positions, roles)
}
