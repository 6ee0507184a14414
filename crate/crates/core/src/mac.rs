//! Medium access: UnSlotted ALOHA with ARQ, Slotted ALOHA with ARQ and an
//! unslotted non-persistent CSMA/CA baseline.
//!
//! A [`Mac`] is a per-node state machine. It never touches the medium or the
//! scheduler directly; everything goes through a [`MacEnv`], which the
//! simulation world implements (and tests mock).

use std::collections::{HashSet, VecDeque};

use crate::engine::EventHandle;
use crate::frame::{Dest, Frame, FrameKind, NodeId, Sequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacVariant {
    UnslottedAloha,
    SlottedAloha,
    CsmaCa,
}

impl MacVariant {
    pub fn name(self) -> &'static str {
        match self {
            MacVariant::UnslottedAloha => "unslotted-aloha",
            MacVariant::SlottedAloha => "slotted-aloha",
            MacVariant::CsmaCa => "csma-ca",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unslotted-aloha" | "unslotted" => Some(MacVariant::UnslottedAloha),
            "slotted-aloha" | "slotted" => Some(MacVariant::SlottedAloha),
            "csma-ca" | "csma" => Some(MacVariant::CsmaCa),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacParams {
    pub variant: MacVariant,
    /// s, slotted only
    pub slot_size: f64,
    /// s, ACK wait started at the end of the DATA transmission
    pub retx_delay: f64,
    /// retransmissions beyond the first attempt
    pub retx_limit: u32,
    /// frames, including the one in flight
    pub queue_capacity: usize,
    /// s
    pub csma_backoff_unit: f64,
    pub csma_min_backoff_exponent: u32,
    pub csma_max_backoff_exponent: u32,
    /// s between the end of a DATA reception and its ACK
    pub ack_turnaround: f64,
    pub data_bits: u32,
    pub ack_bits: u32,
    /// identification and routing-control frames
    pub control_bits: u32,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            variant: MacVariant::UnslottedAloha,
            slot_size: 0.002,
            retx_delay: 0.005,
            retx_limit: 6,
            queue_capacity: 50,
            csma_backoff_unit: 320e-6,
            csma_min_backoff_exponent: 3,
            csma_max_backoff_exponent: 5,
            ack_turnaround: 100e-6,
            data_bits: 1152,
            ack_bits: 128,
            control_bits: 256,
        }
    }
}

/// Outcome of [`MacParams::validate`] that did not fail outright.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Warnings(pub Vec<String>);

impl MacParams {
    /// Checks timing invariants against the radio's bitrate and the largest
    /// propagation delay in the field. `allow_short_retx_delay` turns the
    /// retransmission-delay check into a warning.
    pub fn validate(
        &self,
        bitrate: f64,
        max_propagation_delay: f64,
        allow_short_retx_delay: bool,
    ) -> Result<Warnings, (&'static str, String)> {
        let mut warnings = Warnings::default();
        let data = f64::from(self.data_bits) / bitrate;
        let ack = f64::from(self.ack_bits) / bitrate;
        if !(self.retx_delay > 0.0) {
            return Err(("mac.retx_delay", "must be > 0".into()));
        }
        let min_wait = data + ack + 2.0 * max_propagation_delay;
        if self.retx_delay <= min_wait {
            let msg = format!(
                "retx_delay {} s must exceed DATA + ACK airtime + 2 x propagation = {} s",
                self.retx_delay, min_wait
            );
            if allow_short_retx_delay {
                warnings.0.push(msg);
            } else {
                return Err(("mac.retx_delay", msg));
            }
        }
        if self.queue_capacity == 0 {
            return Err(("mac.queue_capacity", "must be >= 1".into()));
        }
        if self.data_bits == 0 || self.ack_bits == 0 || self.control_bits == 0 {
            return Err(("mac.data_bits", "frame sizes must be >= 1 bit".into()));
        }
        if !(self.ack_turnaround > max_propagation_delay) {
            return Err((
                "mac.ack_turnaround",
                format!("must exceed the propagation delay {max_propagation_delay} s"),
            ));
        }
        if !(self.slot_size > 0.0) {
            return Err(("mac.slot_size", "must be > 0".into()));
        }
        if self.variant == MacVariant::SlottedAloha {
            if self.slot_size < data + self.ack_turnaround {
                return Err((
                    "mac.slot_size",
                    format!(
                        "slot {} s shorter than DATA airtime + turnaround {} s",
                        self.slot_size,
                        data + self.ack_turnaround
                    ),
                ));
            }
            if self.slot_size < data + self.ack_turnaround + ack {
                warnings.0.push(format!(
                    "slot {} s does not fit DATA + turnaround + ACK ({} s)",
                    self.slot_size,
                    data + self.ack_turnaround + ack
                ));
            }
        }
        if self.variant == MacVariant::CsmaCa {
            if !(self.csma_backoff_unit > 0.0) {
                return Err(("mac.csma_backoff_unit", "must be > 0".into()));
            }
            if self.csma_min_backoff_exponent > self.csma_max_backoff_exponent
                || self.csma_max_backoff_exponent > 16
            {
                return Err((
                    "mac.csma_max_backoff_exponent",
                    "need min <= max <= 16".into(),
                ));
            }
        }
        Ok(warnings)
    }
}

/// Smallest integer multiple of `slot_size` that is `>= t`.
pub fn next_slot_boundary(t: f64, slot_size: f64) -> f64 {
    assert!(slot_size > 0.0);
    let k = (t / slot_size).floor();
    let b = k * slot_size;
    if b >= t {
        b
    } else {
        (k + 1.0) * slot_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacTimer {
    TxEnd,
    AckTimeout,
    Attempt,
    AckDue,
}

/// Services the MAC needs from its surroundings.
pub trait MacEnv {
    fn now(&self) -> f64;
    fn schedule(&mut self, at: f64, timer: MacTimer) -> EventHandle;
    fn cancel(&mut self, handle: EventHandle) -> bool;
    /// Put `frame` on the air starting now.
    fn transmit(&mut self, frame: &Frame, airtime: f64);
    /// Clear-channel assessment at this node.
    fn channel_free(&mut self) -> bool;
    /// Uniform integer in `0..n`.
    fn draw_backoff(&mut self, n: u32) -> u32;
    /// Frame accepted for the layer above.
    fn deliver(&mut self, frame: Frame);
    /// Frame given up after exhausting its retransmissions.
    fn discarded(&mut self, frame: Frame);
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MacStats {
    pub data_transmissions: u64,
    pub ack_transmissions: u64,
    pub acked: u64,
    pub broadcasts_sent: u64,
    pub arq_discards: u64,
    pub queue_drops: u64,
    pub duplicates: u64,
    pub stale_acks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Waiting,
    Transmitting,
    AwaitingAck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OnAir {
    Data,
    Ack,
}

#[derive(Debug)]
pub struct Mac {
    id: NodeId,
    params: MacParams,
    bitrate: f64,
    queue: VecDeque<Frame>,
    in_flight: Option<(Frame, Phase)>,
    ack_timer: Option<EventHandle>,
    attempt_timer: Option<EventHandle>,
    on_air: Option<OnAir>,
    waiting_for_radio: bool,
    pending_acks: VecDeque<(f64, Frame)>,
    seen: HashSet<Sequence>,
    backoff_exponent: u32,
    counter: u64,
    stats: MacStats,
}

impl Mac {
    pub fn new(id: NodeId, params: MacParams, bitrate: f64) -> Self {
        let be = params.csma_min_backoff_exponent;
        Mac {
            id,
            params,
            bitrate,
            queue: VecDeque::new(),
            in_flight: None,
            ack_timer: None,
            attempt_timer: None,
            on_air: None,
            waiting_for_radio: false,
            pending_acks: VecDeque::new(),
            seen: HashSet::new(),
            backoff_exponent: be,
            counter: 0,
            stats: MacStats::default(),
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn params(&self) -> &MacParams {
        &self.params
    }

    pub fn stats(&self) -> &MacStats {
        &self.stats
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn in_flight(&self) -> Option<&Frame> {
        self.in_flight.as_ref().map(|(f, _)| f)
    }

    pub fn is_transmitting(&self) -> bool {
        self.on_air.is_some()
    }

    pub fn is_idle(&self) -> bool {
        self.in_flight.is_none() && self.queue.is_empty() && self.on_air.is_none()
    }

    pub fn awaiting_ack(&self) -> bool {
        matches!(self.in_flight, Some((_, Phase::AwaitingAck)))
    }

    pub fn has_ack_timer(&self) -> bool {
        self.ack_timer.is_some()
    }

    pub fn backoff_exponent(&self) -> u32 {
        self.backoff_exponent
    }

    fn airtime(&self, bits: u32) -> f64 {
        f64::from(bits) / self.bitrate
    }

    /// Admits a frame; returns false (and counts a drop) if the queue is full.
    pub fn enqueue(&mut self, mut frame: Frame, env: &mut dyn MacEnv) -> bool {
        let occupied = self.queue.len() + usize::from(self.in_flight.is_some());
        if occupied >= self.params.queue_capacity {
            self.stats.queue_drops += 1;
            return false;
        }
        frame.mac_source = self.id;
        frame.sequence = Sequence {
            origin: self.id,
            counter: self.counter,
        };
        self.counter += 1;
        frame.enqueue_time = env.now();
        frame.first_tx_time = None;
        frame.retry_count = 0;
        self.queue.push_back(frame);
        if self.in_flight.is_none() {
            self.service_next(env);
        }
        true
    }

    fn service_next(&mut self, env: &mut dyn MacEnv) {
        if self.in_flight.is_some() {
            return;
        }
        let Some(frame) = self.queue.pop_front() else {
            return;
        };
        self.in_flight = Some((frame, Phase::Waiting));
        self.backoff_exponent = self.params.csma_min_backoff_exponent;
        self.begin_attempt(env);
    }

    /// Starts the access procedure for the in-flight frame.
    fn begin_attempt(&mut self, env: &mut dyn MacEnv) {
        match self.params.variant {
            MacVariant::UnslottedAloha | MacVariant::CsmaCa => self.attempt(env),
            MacVariant::SlottedAloha => self.wait_for_slot(env),
        }
    }

    fn wait_for_slot(&mut self, env: &mut dyn MacEnv) {
        let now = env.now();
        let b = next_slot_boundary(now, self.params.slot_size);
        if b <= now {
            self.attempt(env);
        } else {
            self.arm_attempt(b, env);
        }
    }

    fn arm_attempt(&mut self, at: f64, env: &mut dyn MacEnv) {
        if let Some(h) = self.attempt_timer.take() {
            env.cancel(h);
        }
        self.attempt_timer = Some(env.schedule(at, MacTimer::Attempt));
    }

    fn backoff(&mut self, env: &mut dyn MacEnv) {
        let window = 1u32 << self.backoff_exponent;
        let k = env.draw_backoff(window);
        self.backoff_exponent =
            (self.backoff_exponent + 1).min(self.params.csma_max_backoff_exponent);
        let at = env.now() + f64::from(k) * self.params.csma_backoff_unit;
        self.arm_attempt(at, env);
    }

    fn attempt(&mut self, env: &mut dyn MacEnv) {
        if !matches!(self.in_flight, Some((_, Phase::Waiting))) {
            return;
        }
        // a committed ACK goes out before any new DATA
        if self.on_air.is_some() || !self.pending_acks.is_empty() {
            self.waiting_for_radio = true;
            return;
        }
        if self.params.variant == MacVariant::CsmaCa && !env.channel_free() {
            self.backoff(env);
            return;
        }
        let now = env.now();
        let (frame, phase) = self.in_flight.as_mut().expect("in flight");
        frame.first_tx_time.get_or_insert(now);
        *phase = Phase::Transmitting;
        let frame = frame.clone();
        self.stats.data_transmissions += 1;
        self.start_tx(&frame, OnAir::Data, env);
    }

    fn start_tx(&mut self, frame: &Frame, what: OnAir, env: &mut dyn MacEnv) {
        let airtime = self.airtime(frame.size_bits);
        self.on_air = Some(what);
        env.transmit(frame, airtime);
        env.schedule(env.now() + airtime, MacTimer::TxEnd);
    }

    pub fn on_timer(&mut self, timer: MacTimer, env: &mut dyn MacEnv) {
        match timer {
            MacTimer::TxEnd => self.on_tx_end(env),
            MacTimer::AckTimeout => self.on_ack_timeout(env),
            MacTimer::Attempt => {
                self.attempt_timer = None;
                self.attempt(env);
            }
            MacTimer::AckDue => self.send_ready_ack(env),
        }
    }

    fn on_tx_end(&mut self, env: &mut dyn MacEnv) {
        let what = self.on_air.take().expect("tx end without transmission");
        if what == OnAir::Data {
            let (frame, phase) = self.in_flight.as_mut().expect("data tx without frame");
            debug_assert_eq!(*phase, Phase::Transmitting);
            if frame.needs_ack() {
                *phase = Phase::AwaitingAck;
                let at = env.now() + self.params.retx_delay;
                self.ack_timer = Some(env.schedule(at, MacTimer::AckTimeout));
            } else {
                self.stats.broadcasts_sent += 1;
                self.in_flight = None;
            }
        }
        self.send_ready_ack(env);
        if self.waiting_for_radio {
            self.waiting_for_radio = false;
            match self.params.variant {
                MacVariant::SlottedAloha => self.wait_for_slot(env),
                _ => self.attempt(env),
            }
        }
        self.service_next(env);
    }

    fn send_ready_ack(&mut self, env: &mut dyn MacEnv) {
        if self.on_air.is_some() {
            return;
        }
        let now = env.now();
        if self
            .pending_acks
            .front()
            .is_some_and(|(due, _)| *due <= now)
        {
            let (_, ack) = self.pending_acks.pop_front().expect("front");
            self.stats.ack_transmissions += 1;
            self.start_tx(&ack, OnAir::Ack, env);
        }
    }

    /// Handles a frame the radio decoded successfully.
    pub fn on_frame_received(&mut self, frame: Frame, env: &mut dyn MacEnv) {
        if !frame.mac_dest.accepts(self.id) {
            return;
        }
        if frame.kind == FrameKind::Ack {
            self.on_ack_received(&frame, env);
            return;
        }
        if frame.mac_dest == Dest::Node(self.id) {
            let due = env.now() + self.params.ack_turnaround;
            let ack = Frame::ack_for(&frame, self.id, self.params.ack_bits);
            self.pending_acks.push_back((due, ack));
            env.schedule(due, MacTimer::AckDue);
        }
        if self.seen.insert(frame.sequence) {
            env.deliver(frame);
        } else {
            self.stats.duplicates += 1;
        }
    }

    fn on_ack_received(&mut self, ack: &Frame, env: &mut dyn MacEnv) {
        let matches = match &self.in_flight {
            Some((f, Phase::AwaitingAck)) => {
                f.sequence == ack.sequence && f.mac_dest == Dest::Node(ack.mac_source)
            }
            _ => false,
        };
        if !matches {
            self.stats.stale_acks += 1;
            return;
        }
        if let Some(h) = self.ack_timer.take() {
            env.cancel(h);
        }
        self.in_flight = None;
        self.stats.acked += 1;
        self.service_next(env);
    }

    fn on_ack_timeout(&mut self, env: &mut dyn MacEnv) {
        self.ack_timer = None;
        let Some((frame, phase)) = self.in_flight.as_mut() else {
            return;
        };
        if *phase != Phase::AwaitingAck {
            return;
        }
        if frame.retry_count < self.params.retx_limit {
            frame.retry_count += 1;
            *phase = Phase::Waiting;
            match self.params.variant {
                MacVariant::UnslottedAloha => self.attempt(env),
                MacVariant::SlottedAloha => self.wait_for_slot(env),
                MacVariant::CsmaCa => {
                    self.backoff_exponent = self.params.csma_min_backoff_exponent;
                    self.backoff(env);
                }
            }
        } else {
            let (frame, _) = self.in_flight.take().expect("in flight");
            self.stats.arq_discards += 1;
            env.discarded(frame);
            self.service_next(env);
        }
    }
}
