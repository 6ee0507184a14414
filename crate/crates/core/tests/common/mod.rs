//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::VecDeque;

use uwbsim::config::parse;
use uwbsim::experiment::{run_experiment, ExperimentResult};
use uwbsim::mac::MacVariant;
use uwbsim::metrics::RunMetrics;
use uwbsim::radio::ChannelModel;
use uwbsim::scenario::{self, Position};
use uwbsim::sim::{star_layout, Role, SimConfig, Workload, World, BASE};
use uwbsim::stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run(text: &str) -> ExperimentResult {
    let spec = parse(text).unwrap_or_else(|e| panic!("{e}"));
    run_experiment(&spec).unwrap_or_else(|e| panic!("{e}"))
}

pub fn reliability(m: &RunMetrics) -> Option<f64> {
    Some(m.reliability)
}

pub fn latency(m: &RunMetrics) -> Option<f64> {
    m.mean_latency
}

pub fn energy(m: &RunMetrics) -> Option<f64> {
    Some(m.mean_daily_energy())
}

/// Per-point samples of `f`, one vector per sweep point.
pub fn samples(r: &ExperimentResult, f: fn(&RunMetrics) -> Option<f64>) -> Vec<Vec<f64>> {
    (0..r.spec.n_points())
        .map(|p| r.point_values(p, f))
        .collect()
}

pub fn means(s: &[Vec<f64>]) -> Vec<f64> {
    s.iter()
        .map(|v| stats::mean(v).unwrap_or(f64::NAN))
        .collect()
}

/// `(b̄ − ā) / pooled SE`.
pub fn gap_in_se(a: &[f64], b: &[f64]) -> f64 {
    let d = stats::mean(b).unwrap() - stats::mean(a).unwrap();
    d / stats::pooled_std_err(a, b).unwrap()
}

/// Pure or slotted ALOHA saturation star: `n` senders broadcasting Poisson
/// probes at offered load `g` to a central sink, no retransmissions and the
/// processing gain removed so any overlap is fatal.
///
/// Returns (realised G, measured throughput S).
pub fn aloha_throughput(variant: MacVariant, g: f64, duration: f64, seed: u64) -> (f64, f64) {
    let mut c = SimConfig::default();
    c.radio.bandwidth = c.radio.bitrate;
    c.mac.variant = variant;
    c.mac.retx_limit = 0;
    let airtime = c.data_airtime();
    c.mac.slot_size = 1.3 * airtime;
    c.scenario.sim_duration = duration;
    c.truncation_guard = 0.0;
    let unit = match variant {
        MacVariant::SlottedAloha => c.mac.slot_size,
        _ => airtime,
    };
    let n = 100;
    let (positions, roles) = star_layout(n, 15.0);
    let rate = g / (n as f64 * unit);
    let o = World::custom(
        c,
        positions,
        roles,
        Workload::Poisson {
            rate_per_node: rate,
        },
        seed,
    )
    .run();
    let g_real = o.counters.probe_transmissions as f64 * unit / duration;
    let s = o.counters.probe_receptions as f64 * unit / duration;
    (g_real, s)
}

pub fn aloha_theory(variant: MacVariant, g: f64) -> f64 {
    match variant {
        MacVariant::SlottedAloha => g * (-g).exp(),
        _ => g * (-2.0 * g).exp(),
    }
}

/// Hop counts from `dest` over the unit-disk graph of radius `range`.
pub fn bfs_hops(positions: &[Position], range: f64, dest: usize) -> Vec<Option<u32>> {
    let mut hops = vec![None; positions.len()];
    hops[dest] = Some(0);
    let mut q = VecDeque::from([dest]);
    while let Some(u) = q.pop_front() {
        let h = hops[u].unwrap();
        for v in 0..positions.len() {
            if hops[v].is_none() && v != u && positions[u].distance(positions[v]) <= range {
                hops[v] = Some(h + 1);
                q.push_back(v);
            }
        }
    }
    hops
}

pub struct RoutingCase {
    pub pairs: Vec<(usize, usize)>,
    /// (AODV hop count, BFS hop count) per pair
    pub hops: Vec<(Option<u32>, Option<u32>)>,
    pub delivered: u64,
}

/// One jittered grid with ideal links; 20 probes from random sources to the
/// base, spaced far enough apart that discoveries never overlap.
pub fn routing_case(topology: u64) -> RoutingCase {
    let mut c = SimConfig::default();
    c.radio.channel = ChannelModel::Ideal;
    c.scenario.grid_jitter = 0.3;
    let (w, h) = (c.scenario.width, c.scenario.height);
    let corners = [
        (0.0, h / 2.0),
        (w / 2.0, h / 2.0),
        (w, 0.0),
        (0.0, h),
        (w, h / 2.0),
    ];
    let (bx, by) = corners[topology as usize % corners.len()];
    c.scenario.base_position = Some(Position::new(bx, by));
    let mut rng = ChaCha8Rng::seed_from_u64(0xb0f5 + topology);
    let layout = scenario::place_nodes(&c.scenario, c.radio.max_hop_distance(), &mut rng).unwrap();
    let mut positions = vec![layout.base];
    positions.extend(layout.sensors.iter().copied());
    let mut roles = vec![Role::Base];
    roles.extend(std::iter::repeat_n(Role::Sensor, layout.sensors.len()));

    let pairs: Vec<(usize, usize)> = (0..20)
        .map(|_| (rng.gen_range(1..positions.len()), BASE))
        .collect();
    let spacing = 0.25;
    c.scenario.sim_duration = spacing * (pairs.len() as f64 + 1.0);
    c.routing.route_lifetime = 2.0 * c.scenario.sim_duration;
    let range = c.radio.max_hop_distance();

    let mut w = World::custom(c, positions.clone(), roles, Workload::Manual, topology);
    for (k, &(src, dst)) in pairs.iter().enumerate() {
        w.inject_report(spacing * (k as f64 + 0.5), src, dst);
    }
    let o = w.run();
    let hops = pairs
        .iter()
        .map(|&(src, dst)| {
            let aodv = o.routes[src]
                .route(uwbsim::frame::NodeId(dst), 0.0)
                .map(|r| r.hop_count);
            (aodv, bfs_hops(&positions, range, dst)[src])
        })
        .collect();
    RoutingCase {
        pairs,
        hops,
        delivered: o.counters.probe_receptions,
    }
}
