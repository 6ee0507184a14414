//! A reduced AODV: on-demand discovery with destination-only replies.
//!
//! No intermediate replies, no HELLO beacons, no RERR propagation. Link
//! breaks are learnt from MAC retransmission exhaustion and handled by local
//! invalidation followed by a fresh discovery.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::frame::{AppMessage, Dest, FrameKind, NodeId, Payload, Rrep, Rreq};

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingParams {
    /// s, refreshed on use
    pub route_lifetime: f64,
    /// payloads buffered per destination while a discovery runs
    pub buffer_capacity: usize,
    /// s, at most one discovery per destination in this window
    pub rreq_min_interval: f64,
    /// s before a discovery with no reply is retried
    pub discovery_timeout: f64,
    /// discoveries re-issued before buffered payloads are dropped
    pub discovery_retries: u32,
}

impl Default for RoutingParams {
    fn default() -> Self {
        RoutingParams {
            route_lifetime: 10.0,
            buffer_capacity: 10,
            rreq_min_interval: 0.1,
            discovery_timeout: 0.2,
            discovery_retries: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteEntry {
    pub destination: NodeId,
    pub next_hop: NodeId,
    pub hop_count: u32,
    pub dest_sequence: u64,
    pub lifetime_expiry: f64,
}

impl RouteEntry {
    pub fn is_live(&self, now: f64) -> bool {
        now < self.lifetime_expiry
    }
}

/// What the router asks the node to do.
#[derive(Debug, Clone, PartialEq)]
pub enum RouteAction {
    /// Hand a frame to the MAC.
    Send {
        kind: FrameKind,
        mac_dest: Dest,
        net_source: NodeId,
        net_dest: Dest,
        payload: Payload,
    },
    /// A payload addressed to this node.
    DeliverLocal {
        net_source: NodeId,
        message: AppMessage,
    },
    /// Call [`Router::on_discovery_timeout`] for `destination` at `at`.
    ArmDiscoveryTimer { destination: NodeId, at: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouterStats {
    pub discoveries: u64,
    pub rreq_forwarded: u64,
    pub rreq_duplicates: u64,
    pub rrep_drops: u64,
    pub buffer_drops: u64,
    pub discovery_failures: u64,
    pub invalidated: u64,
}

#[derive(Debug)]
struct Buffered {
    net_source: NodeId,
    message: AppMessage,
}

#[derive(Debug)]
pub struct Router {
    id: NodeId,
    params: RoutingParams,
    routes: HashMap<NodeId, RouteEntry>,
    seen_rreq: HashSet<(NodeId, u64)>,
    buffers: HashMap<NodeId, VecDeque<Buffered>>,
    last_discovery: HashMap<NodeId, f64>,
    discovery_attempts: HashMap<NodeId, u32>,
    rreq_id: u64,
    own_seq: u64,
    stats: RouterStats,
}

impl Router {
    pub fn new(id: NodeId, params: RoutingParams) -> Self {
        Router {
            id,
            params,
            routes: HashMap::new(),
            seen_rreq: HashSet::new(),
            buffers: HashMap::new(),
            last_discovery: HashMap::new(),
            discovery_attempts: HashMap::new(),
            rreq_id: 0,
            own_seq: 0,
            stats: RouterStats::default(),
        }
    }

    pub fn stats(&self) -> &RouterStats {
        &self.stats
    }

    /// Live route toward `dest`, if any.
    pub fn route(&self, dest: NodeId, now: f64) -> Option<&RouteEntry> {
        self.routes.get(&dest).filter(|r| r.is_live(now))
    }

    pub fn buffered(&self, dest: NodeId) -> usize {
        self.buffers.get(&dest).map_or(0, VecDeque::len)
    }

    /// Originates a payload from this node.
    pub fn send_to(&mut self, now: f64, dest: NodeId, message: AppMessage) -> Vec<RouteAction> {
        self.route_payload(now, self.id, dest, message)
    }

    /// Relays a payload originated elsewhere.
    pub fn forward(
        &mut self,
        now: f64,
        net_source: NodeId,
        dest: NodeId,
        message: AppMessage,
    ) -> Vec<RouteAction> {
        self.route_payload(now, net_source, dest, message)
    }

    fn route_payload(
        &mut self,
        now: f64,
        net_source: NodeId,
        dest: NodeId,
        message: AppMessage,
    ) -> Vec<RouteAction> {
        if dest == self.id {
            return vec![RouteAction::DeliverLocal {
                net_source,
                message,
            }];
        }
        if let Some(next_hop) = self.use_route(dest, now) {
            return vec![data_action(next_hop, net_source, dest, message)];
        }
        let cap = self.params.buffer_capacity;
        let buf = self.buffers.entry(dest).or_default();
        if buf.len() >= cap {
            buf.pop_front();
            self.stats.buffer_drops += 1;
        }
        buf.push_back(Buffered {
            net_source,
            message,
        });
        self.discover(now, dest)
    }

    /// Looks up a live route and refreshes its lifetime.
    fn use_route(&mut self, dest: NodeId, now: f64) -> Option<NodeId> {
        let lifetime = self.params.route_lifetime;
        let entry = self.routes.get_mut(&dest).filter(|r| r.is_live(now))?;
        entry.lifetime_expiry = entry.lifetime_expiry.max(now + lifetime);
        Some(entry.next_hop)
    }

    fn discover(&mut self, now: f64, dest: NodeId) -> Vec<RouteAction> {
        if self
            .last_discovery
            .get(&dest)
            .is_some_and(|t| now - t < self.params.rreq_min_interval)
        {
            return vec![];
        }
        self.last_discovery.insert(dest, now);
        self.rreq_id += 1;
        self.own_seq += 1;
        self.seen_rreq.insert((self.id, self.rreq_id));
        self.stats.discoveries += 1;
        let rreq = Rreq {
            originator: self.id,
            rreq_id: self.rreq_id,
            originator_seq: self.own_seq,
            destination: dest,
            hop_count: 0,
        };
        vec![
            RouteAction::Send {
                kind: FrameKind::Rreq,
                mac_dest: Dest::Broadcast,
                net_source: self.id,
                net_dest: Dest::Node(dest),
                payload: Payload::Rreq(rreq),
            },
            RouteAction::ArmDiscoveryTimer {
                destination: dest,
                at: now + self.params.discovery_timeout,
            },
        ]
    }

    /// Retries or abandons a discovery that has not produced a route.
    pub fn on_discovery_timeout(&mut self, now: f64, dest: NodeId) -> Vec<RouteAction> {
        if self.buffered(dest) == 0 {
            self.discovery_attempts.remove(&dest);
            return vec![];
        }
        if self.route(dest, now).is_some() {
            return self.flush(now, dest);
        }
        let attempts = self.discovery_attempts.entry(dest).or_insert(0);
        if *attempts < self.params.discovery_retries {
            *attempts += 1;
            self.last_discovery.remove(&dest);
            self.discover(now, dest)
        } else {
            self.discovery_attempts.remove(&dest);
            let dropped = self.buffers.remove(&dest).map_or(0, |b| b.len());
            self.stats.discovery_failures += dropped as u64;
            vec![]
        }
    }

    /// Installs or improves a route. Fresher sequence wins; equal sequence
    /// wins on fewer hops; a dead entry is always replaced.
    fn install(&mut self, now: f64, dest: NodeId, next_hop: NodeId, hops: u32, seq: u64) {
        let expiry = now + self.params.route_lifetime;
        let fresh = RouteEntry {
            destination: dest,
            next_hop,
            hop_count: hops,
            dest_sequence: seq,
            lifetime_expiry: expiry,
        };
        match self.routes.get_mut(&dest) {
            Some(r) if r.is_live(now) => {
                let better =
                    seq > r.dest_sequence || (seq == r.dest_sequence && hops < r.hop_count);
                if better {
                    *r = fresh;
                } else if r.next_hop == next_hop && r.hop_count == hops {
                    r.lifetime_expiry = r.lifetime_expiry.max(expiry);
                }
            }
            _ => {
                self.routes.insert(dest, fresh);
            }
        }
    }

    fn install_neighbor(&mut self, now: f64, neighbor: NodeId) {
        let seq = self.routes.get(&neighbor).map_or(0, |r| r.dest_sequence);
        self.install(now, neighbor, neighbor, 1, seq);
    }

    pub fn handle_rreq(&mut self, now: f64, from: NodeId, rreq: Rreq) -> Vec<RouteAction> {
        if rreq.originator == self.id || !self.seen_rreq.insert((rreq.originator, rreq.rreq_id)) {
            self.stats.rreq_duplicates += 1;
            return vec![];
        }
        let hops = rreq.hop_count + 1;
        self.install(now, rreq.originator, from, hops, rreq.originator_seq);
        if from != rreq.originator {
            self.install_neighbor(now, from);
        }
        if rreq.destination == self.id {
            self.own_seq += 1;
            let rrep = Rrep {
                originator: rreq.originator,
                destination: self.id,
                dest_seq: self.own_seq,
                hop_count: 0,
            };
            return vec![RouteAction::Send {
                kind: FrameKind::Rrep,
                mac_dest: Dest::Node(from),
                net_source: self.id,
                net_dest: Dest::Node(rreq.originator),
                payload: Payload::Rrep(rrep),
            }];
        }
        self.stats.rreq_forwarded += 1;
        vec![RouteAction::Send {
            kind: FrameKind::Rreq,
            mac_dest: Dest::Broadcast,
            net_source: rreq.originator,
            net_dest: Dest::Node(rreq.destination),
            payload: Payload::Rreq(Rreq {
                hop_count: hops,
                ..rreq
            }),
        }]
    }

    pub fn handle_rrep(&mut self, now: f64, from: NodeId, rrep: Rrep) -> Vec<RouteAction> {
        let hops = rrep.hop_count + 1;
        self.install(now, rrep.destination, from, hops, rrep.dest_seq);
        if from != rrep.destination {
            self.install_neighbor(now, from);
        }
        if rrep.originator == self.id {
            self.discovery_attempts.remove(&rrep.destination);
            return self.flush(now, rrep.destination);
        }
        match self.use_route(rrep.originator, now) {
            Some(next_hop) => vec![RouteAction::Send {
                kind: FrameKind::Rrep,
                mac_dest: Dest::Node(next_hop),
                net_source: rrep.destination,
                net_dest: Dest::Node(rrep.originator),
                payload: Payload::Rrep(Rrep {
                    hop_count: hops,
                    ..rrep
                }),
            }],
            None => {
                self.stats.rrep_drops += 1;
                vec![]
            }
        }
    }

    fn flush(&mut self, now: f64, dest: NodeId) -> Vec<RouteAction> {
        let Some(buf) = self.buffers.remove(&dest) else {
            return vec![];
        };
        let Some(next_hop) = self.use_route(dest, now) else {
            self.buffers.insert(dest, buf);
            return vec![];
        };
        buf.into_iter()
            .map(|b| data_action(next_hop, b.net_source, dest, b.message))
            .collect()
    }

    /// Drops every route whose next hop is `next_hop`; returns how many.
    pub fn handle_link_failure(&mut self, next_hop: NodeId) -> usize {
        let before = self.routes.len();
        self.routes.retain(|_, r| r.next_hop != next_hop);
        let removed = before - self.routes.len();
        self.stats.invalidated += removed as u64;
        removed
    }
}

fn data_action(
    next_hop: NodeId,
    net_source: NodeId,
    dest: NodeId,
    message: AppMessage,
) -> RouteAction {
    RouteAction::Send {
        kind: FrameKind::Data,
        mac_dest: Dest::Node(next_hop),
        net_source,
        net_dest: Dest::Node(dest),
        payload: Payload::App(message),
    }
}
