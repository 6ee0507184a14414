//! On-air frames and their payloads.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dest {
    Node(NodeId),
    Broadcast,
}

impl Dest {
    pub fn node(self) -> Option<NodeId> {
        match self {
            Dest::Node(n) => Some(n),
            Dest::Broadcast => None,
        }
    }

    pub fn accepts(self, id: NodeId) -> bool {
        match self {
            Dest::Node(n) => n == id,
            Dest::Broadcast => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Data,
    Ack,
    Rreq,
    Rrep,
    Rerr,
}

/// MAC-level sequence: the transmitting node and its per-node counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence {
    pub origin: NodeId,
    pub counter: u64,
}

/// Identity of an application event: emitting target and its counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId {
    pub target: usize,
    pub counter: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AppMessage {
    /// Detection report relayed to the base station.
    Report {
        event: EventId,
        emit_time: f64,
        identified: bool,
    },
    /// One-hop broadcast asking a radio-equipped target to identify itself.
    IdentRequest {
        event: EventId,
    },
    IdentReply {
        event: EventId,
    },
    /// Filler traffic for microbenchmarks.
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rreq {
    pub originator: NodeId,
    pub rreq_id: u64,
    pub originator_seq: u64,
    pub destination: NodeId,
    pub hop_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rrep {
    pub originator: NodeId,
    pub destination: NodeId,
    pub dest_seq: u64,
    pub hop_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    App(AppMessage),
    Rreq(Rreq),
    Rrep(Rrep),
    Ack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub kind: FrameKind,
    pub mac_source: NodeId,
    pub mac_dest: Dest,
    pub net_source: NodeId,
    pub net_dest: Dest,
    /// Assigned by the MAC on enqueue.
    pub sequence: Sequence,
    pub size_bits: u32,
    pub enqueue_time: f64,
    pub first_tx_time: Option<f64>,
    pub retry_count: u32,
    pub payload: Payload,
}

impl Frame {
    /// A frame before MAC admission; `mac_source`/`sequence` are filled in on enqueue.
    pub fn new(
        kind: FrameKind,
        mac_dest: Dest,
        net_source: NodeId,
        net_dest: Dest,
        size_bits: u32,
        payload: Payload,
    ) -> Self {
        Frame {
            kind,
            mac_source: net_source,
            mac_dest,
            net_source,
            net_dest,
            sequence: Sequence {
                origin: net_source,
                counter: 0,
            },
            size_bits,
            enqueue_time: 0.0,
            first_tx_time: None,
            retry_count: 0,
            payload,
        }
    }

    pub fn ack_for(data: &Frame, from: NodeId, ack_bits: u32) -> Self {
        Frame {
            kind: FrameKind::Ack,
            mac_source: from,
            mac_dest: Dest::Node(data.mac_source),
            net_source: from,
            net_dest: Dest::Node(data.mac_source),
            sequence: data.sequence,
            size_bits: ack_bits,
            enqueue_time: 0.0,
            first_tx_time: None,
            retry_count: 0,
            payload: Payload::Ack,
        }
    }

    pub fn is_broadcast(&self) -> bool {
        self.mac_dest == Dest::Broadcast
    }

    /// Unicast non-ACK frames expect an acknowledgement.
    pub fn needs_ack(&self) -> bool {
        self.kind != FrameKind::Ack && !self.is_broadcast()
    }
}
