//! Reliability, end-to-end latency and two-state radio energy accounting.

use std::collections::BTreeMap;

use crate::frame::EventId;

/// Seconds per day, used to extrapolate energy to 24 h.
pub const DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    /// mW while transmitting
    pub tx_power_draw: f64,
    /// mW while receiving or listening
    pub rx_power_draw: f64,
    /// V, informational
    pub supply_voltage: f64,
}

impl EnergyParams {
    pub fn uwb() -> Self {
        EnergyParams {
            tx_power_draw: 5.0,
            rx_power_draw: 20.0,
            supply_voltage: 1.2,
        }
    }

    pub fn oqpsk() -> Self {
        EnergyParams {
            tx_power_draw: 52.2,
            rx_power_draw: 59.1,
            supply_voltage: 3.0,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "uwb" => Some(Self::uwb()),
            "oqpsk" => Some(Self::oqpsk()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.tx_power_draw > 0.0) {
            return Err(("energy.tx_power_draw", "must be > 0".into()));
        }
        if !(self.rx_power_draw > 0.0) {
            return Err(("energy.rx_power_draw", "must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadioState {
    Tx,
    Rx,
}

/// Time a node's radio spent in each state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RadioTime {
    pub tx_time: f64,
    pub rx_time: f64,
}

impl RadioTime {
    pub fn record(&mut self, state: RadioState, duration: f64) {
        debug_assert!(duration >= 0.0);
        match state {
            RadioState::Tx => self.tx_time += duration,
            RadioState::Rx => self.rx_time += duration,
        }
    }

    /// mW·h consumed over the recorded intervals.
    pub fn energy(&self, e: &EnergyParams) -> f64 {
        (self.tx_time * e.tx_power_draw + self.rx_time * e.rx_power_draw) / 3600.0
    }

    /// Energy scaled from `duration` seconds of activity to one day.
    pub fn daily_energy(&self, e: &EnergyParams, duration: f64) -> f64 {
        self.energy(e) * DAY / duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub generated_events: u64,
    pub delivered_events: u64,
    pub reliability: f64,
    /// seconds, sorted ascending
    pub latencies: Vec<f64>,
    pub mean_latency: Option<f64>,
    pub p95_latency: Option<f64>,
    /// mW·h over the run, per node
    pub per_node_energy: Vec<f64>,
    /// mW·h per day, per node
    pub daily_energy: Vec<f64>,
    pub radio_time: Vec<RadioTime>,
    pub collisions: u64,
    pub arq_discards: u64,
    pub queue_drops: u64,
    pub sim_duration: f64,
}

impl RunMetrics {
    pub fn mean_daily_energy(&self) -> f64 {
        if self.daily_energy.is_empty() {
            return 0.0;
        }
        self.daily_energy.iter().sum::<f64>() / self.daily_energy.len() as f64
    }

    pub fn max_daily_energy(&self) -> f64 {
        self.daily_energy.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("no application events were generated inside the counted window")]
    NoEvents,
}

/// Accumulates per-run observations.
#[derive(Debug, Clone, Default)]
pub struct Collector {
    emitted: BTreeMap<EventId, f64>,
    first_delivery: BTreeMap<EventId, f64>,
    pub collisions: u64,
    pub arq_discards: u64,
    pub queue_drops: u64,
}

impl Collector {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn event_generated(&mut self, id: EventId, emit_time: f64) {
        self.emitted.insert(id, emit_time);
    }

    /// Records a report reaching the base. Only the first delivery of an
    /// event counts. Returns false for unknown events.
    pub fn report_delivered(&mut self, id: EventId, at: f64) -> bool {
        if !self.emitted.contains_key(&id) {
            return false;
        }
        self.first_delivery.entry(id).or_insert(at);
        true
    }

    pub fn generated(&self) -> usize {
        self.emitted.len()
    }

    /// Computes run metrics. Events emitted after `sim_duration - guard`
    /// are left out of reliability and latency.
    pub fn finalize(
        &self,
        sim_duration: f64,
        guard: f64,
        radio_time: Vec<RadioTime>,
        energy: &EnergyParams,
    ) -> Result<RunMetrics, MetricsError> {
        let cutoff = sim_duration - guard;
        let counted: Vec<(&EventId, &f64)> =
            self.emitted.iter().filter(|(_, t)| **t <= cutoff).collect();
        if counted.is_empty() {
            return Err(MetricsError::NoEvents);
        }
        let mut latencies: Vec<f64> = counted
            .iter()
            .filter_map(|(id, emit)| self.first_delivery.get(id).map(|d| d - **emit))
            .collect();
        latencies.sort_by(f64::total_cmp);
        let generated = counted.len() as u64;
        let delivered = latencies.len() as u64;
        let mean_latency = if latencies.is_empty() {
            None
        } else {
            Some(latencies.iter().sum::<f64>() / latencies.len() as f64)
        };
        let per_node_energy = radio_time.iter().map(|r| r.energy(energy)).collect();
        let daily_energy = radio_time
            .iter()
            .map(|r| r.daily_energy(energy, sim_duration))
            .collect();
        Ok(RunMetrics {
            generated_events: generated,
            delivered_events: delivered,
            reliability: delivered as f64 / generated as f64,
            p95_latency: percentile(&latencies, 0.95),
            mean_latency,
            latencies,
            per_node_energy,
            daily_energy,
            radio_time,
            collisions: self.collisions,
            arq_discards: self.arq_discards,
            queue_drops: self.queue_drops,
            sim_duration,
        })
    }
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}
