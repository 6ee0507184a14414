//! Deterministic discrete-event scheduler and per-stream random sources.
//!
//! Events are ordered by `(fire_time, sequence_number)`. The sequence number
//! is assigned at scheduling time, so events sharing a timestamp are
//! dispatched in insertion order.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Simulated time in seconds.
pub type SimTime = f64;

/// Opaque handle returned by [`Scheduler::schedule`], used for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn sequence(self) -> u64 {
        self.0
    }
}

struct Pending<E> {
    time: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Pending<E> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<E> Eq for Pending<E> {}

impl<E> PartialOrd for Pending<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Pending<E> {
    // BinaryHeap is a max-heap; reverse so the earliest (time, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Pending-event set plus simulation clock.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Pending<E>>,
    live: HashSet<u64>,
    dispatched: u64,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: 0.0,
            next_seq: 0,
            heap: BinaryHeap::new(),
            live: HashSet::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Number of scheduled, not yet fired or cancelled events.
    pub fn pending(&self) -> usize {
        self.live.len()
    }

    /// Schedules `payload` at absolute time `at`.
    ///
    /// # Panics
    ///
    /// Scheduling in the past (or at a non-finite time) is a programming
    /// error and aborts the run.
    pub fn schedule(&mut self, at: SimTime, payload: E) -> EventHandle {
        assert!(
            at.is_finite() && at >= self.now,
            "event scheduled in the past: at={at} now={}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Pending {
            time: at,
            seq,
            payload,
        });
        self.live.insert(seq);
        EventHandle(seq)
    }

    /// Schedules `payload` at `now + delay`.
    pub fn schedule_in(&mut self, delay: SimTime, payload: E) -> EventHandle {
        self.schedule(self.now + delay, payload)
    }

    /// Returns true iff the event was pending and has now been removed.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        self.live.remove(&handle.0)
    }

    pub fn is_pending(&self, handle: EventHandle) -> bool {
        self.live.contains(&handle.0)
    }

    /// Pops the next live event with `fire_time <= until`, advancing the clock.
    pub fn pop_until(&mut self, until: SimTime) -> Option<(SimTime, EventHandle, E)> {
        while let Some(top) = self.heap.peek() {
            if top.time > until {
                return None;
            }
            let ev = self.heap.pop().expect("peeked");
            if !self.live.remove(&ev.seq) {
                continue;
            }
            self.now = ev.time;
            self.dispatched += 1;
            return Some((ev.time, EventHandle(ev.seq), ev.payload));
        }
        None
    }

    /// Dispatches every event with `fire_time <= until` and returns the time
    /// of the last dispatched event, or `until` if none remained.
    pub fn run<F>(&mut self, until: SimTime, mut handler: F) -> SimTime
    where
        F: FnMut(&mut Scheduler<E>, SimTime, E),
    {
        let mut last = None;
        while let Some((t, _, ev)) = self.pop_until(until) {
            last = Some(t);
            handler(self, t, ev);
        }
        match last {
            Some(t) => t,
            None => {
                self.now = self.now.max(until);
                until
            }
        }
    }

    /// Advances the clock to `until` once its events are drained.
    pub fn advance_to(&mut self, until: SimTime) {
        if until > self.now {
            self.now = until;
        }
    }
}

/// Purpose of a random stream; one stream per (node, purpose).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Traffic = 0,
    Backoff = 1,
    Mobility = 2,
    Reception = 3,
    Placement = 4,
}

const PURPOSES: u64 = 8;

/// Identity of a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Stream for `purpose` at `entity` (node or target index).
    pub fn for_entity(seed: u64, entity: u64, purpose: StreamPurpose) -> Self {
        RngStream::new(seed, entity * PURPOSES + purpose as u64)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
