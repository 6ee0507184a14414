//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Exits non-zero only when a run errors, or when `--strict` is given and a
//! criterion fails. Run with
//! `cargo test --release --test acceptance [-- --strict]`.

mod common;

use std::time::Instant;

use common::{energy, gap_in_se, latency, means, reliability, run, samples};
use uwbsim::config::parse;
use uwbsim::experiment::{run_experiment_with, Execution, ExperimentResult};
use uwbsim::mac::MacVariant;
use uwbsim::metrics::{EnergyParams, RadioState, RadioTime};
use uwbsim::radio::{self, RadioParams};
use uwbsim::scenario::Position;
use uwbsim::sim::{Role, SimConfig, Workload, World};
use uwbsim::stats;

const REPS: &str = "experiment.replications = 20\nexperiment.seed = 1\n";
/// Load at which the OQPSK baseline is compared (event_period, s).
const BASELINE_EVENT_PERIOD: f64 = 0.3;

struct Report {
    passed: usize,
    failed: Vec<u32>,
}

impl Report {
    fn line(&mut self, n: u32, name: &str, ok: bool, detail: String) {
        println!(
            "[{}] {n:>2} {name}: {detail}",
            if ok { "PASS" } else { "FAIL" }
        );
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(n);
        }
    }
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

fn fmt(xs: &[f64]) -> String {
    let v: Vec<String> = xs.iter().map(|x| format!("{x:.5}")).collect();
    format!("[{}]", v.join(", "))
}

fn retx_limit_trend(r: &mut Report) {
    let t = Instant::now();
    let res = run(&format!("{REPS}sweep.mac.retx_limit = 0, 1, 2, 4, 6"));
    let secs = t.elapsed().as_secs_f64();
    let rel = samples(&res, reliability);
    let m = means(&rel);
    let gap = gap_in_se(&rel[0], &rel[4]);
    let ok = non_decreasing(&m) && gap > 2.0 && secs < 300.0;
    r.line(
        1,
        "retx-limit trend",
        ok,
        format!(
            "reliability {} monotone={}, R(6)-R(0) = {gap:.1} SE (need > 2), {secs:.0} s (need < 300)",
            fmt(&m),
            non_decreasing(&m)
        ),
    );
}

fn over_retransmission(r: &mut Report) {
    let res = run(&format!(
        "{REPS}scenario.event_period = 0.2\nsweep.mac.retx_limit = 6, 16"
    ));
    let rel = samples(&res, reliability);
    let lat = samples(&res, latency);
    let drop = gap_in_se(&rel[1], &rel[0]);
    let (m, l) = (means(&rel), means(&lat));
    let ok = drop >= 1.0 && l[1] > l[0];
    r.line(
        2,
        "over-retransmission penalty",
        ok,
        format!(
            "reliability L=6 {:.5} vs L=16 {:.5} ({drop:.2} SE, need >= 1), latency {:.5} vs {:.5} s",
            m[0], m[1], l[0], l[1]
        ),
    );
}

fn slotted_vs_unslotted(r: &mut Report) {
    let res = run(&format!("{REPS}sweep.mac.variant = unslotted, slotted"));
    let rel = samples(&res, reliability);
    let lat = samples(&res, latency);
    let rel_gap = gap_in_se(&rel[0], &rel[1]);
    let lat_gap = gap_in_se(&lat[0], &lat[1]);
    let (m, l) = (means(&rel), means(&lat));
    r.line(
        3,
        "slotted vs unslotted",
        rel_gap >= 1.0 && lat_gap >= 1.0,
        format!(
            "reliability U {:.5} S {:.5} ({rel_gap:.2} SE), latency U {:.5} S {:.5} s ({lat_gap:.2} SE); need >= 1 SE each",
            m[0], m[1], l[0], l[1]
        ),
    );
}

fn slot_size_trend(r: &mut Report) {
    let airtime = SimConfig::default().data_airtime();
    let factors = [1.5, 2.0, 4.0, 8.0];
    let slots: Vec<String> = factors.iter().map(|f| (f * airtime).to_string()).collect();
    let res = run(&format!(
        "{REPS}mac.variant = slotted\nsweep.mac.slot_size = {}",
        slots.join(", ")
    ));
    let (m, l) = (
        means(&samples(&res, reliability)),
        means(&samples(&res, latency)),
    );
    let rho_r = stats::spearman(&factors, &m).unwrap_or(0.0);
    let rho_l = stats::spearman(&factors, &l).unwrap_or(0.0);
    r.line(
        4,
        "slot-size trend",
        rho_r < 0.0 && rho_l > 0.0,
        format!(
            "reliability {} (rho {rho_r:+.2}, need < 0), latency {} (rho {rho_l:+.2}, need > 0)",
            fmt(&m),
            fmt(&l)
        ),
    );
}

fn retx_delay_trend(r: &mut Report) {
    let res = run(&format!(
        "{REPS}sweep.mac.retx_delay = 0.0015, 0.003, 0.006, 0.012"
    ));
    let (m, l) = (
        means(&samples(&res, reliability)),
        means(&samples(&res, latency)),
    );
    r.line(
        5,
        "retx-delay trend",
        non_decreasing(&m) && non_decreasing(&l),
        format!(
            "reliability {} monotone={}, latency {} monotone={}",
            fmt(&m),
            non_decreasing(&m),
            fmt(&l),
            non_decreasing(&l)
        ),
    );
}

/// Returns (OQPSK, UWB) results at the baseline load for the energy check.
fn csma_baseline(r: &mut Report) -> (ExperimentResult, ExperimentResult) {
    let common = format!(
        "experiment.replications = 10\nexperiment.seed = 1\nscenario.event_period = {BASELINE_EVENT_PERIOD}\n"
    );
    let oqpsk = run(&format!("preset = oqpsk\n{common}"));
    let uwb = run(&format!("{common}sweep.mac.variant = unslotted, slotted"));
    let o_rel = means(&samples(&oqpsk, reliability))[0];
    let o_lat = means(&samples(&oqpsk, latency))[0];
    let u_rel = means(&samples(&uwb, reliability));
    let below = u_rel.iter().all(|&u| o_rel < u);
    let in_band = (0.3..=0.7).contains(&o_rel);
    let lat_ok = (1e-3..=1e-1).contains(&o_lat);
    r.line(
        6,
        "CSMA/OQPSK baseline",
        below && in_band && lat_ok,
        format!(
            "event_period {BASELINE_EVENT_PERIOD} s: OQPSK reliability {o_rel:.4} (band 0.5 +- 0.2: {in_band}) \
             vs UWB U {:.4} S {:.4} (below both: {below}), OQPSK latency {o_lat:.4} s (in [1e-3, 1e-1]: {lat_ok})",
            u_rel[0], u_rel[1]
        ),
    );
    (oqpsk, uwb)
}

fn energy_accounting(r: &mut Report, oqpsk: &ExperimentResult, uwb: &ExperimentResult) {
    let e = EnergyParams::uwb();
    let mut t = RadioTime::default();
    let tx = [0.000_256, 0.000_128, 0.001_5];
    let rx = [10.0, 0.25, 89.747_616];
    tx.iter().for_each(|&d| t.record(RadioState::Tx, d));
    rx.iter().for_each(|&d| t.record(RadioState::Rx, d));
    let closed = (5.0 * tx.iter().sum::<f64>() + 20.0 * rx.iter().sum::<f64>()) / 3600.0;
    let rel_err = ((t.energy(&e) - closed) / closed).abs();

    let mut c = SimConfig::default();
    c.scenario.sim_duration = 100.0;
    let o = World::custom(
        c,
        vec![Position::new(0.0, 0.0)],
        vec![Role::Base],
        Workload::Manual,
        1,
    )
    .run();
    let idle = o.radio_time[0].daily_energy(&e, o.duration);

    let o_e = means(&samples(oqpsk, energy))[0];
    let u_e = means(&samples(uwb, energy));
    let ratio = u_e.iter().map(|&u| o_e / u).fold(f64::INFINITY, f64::min);
    let ok = rel_err <= 1e-9 && (idle - 480.0).abs() <= 480.0 * 1e-9 && ratio >= 2.0;
    r.line(
        7,
        "energy accounting",
        ok,
        format!(
            "(a) rel err {rel_err:.1e} (<= 1e-9), (b) idle {idle:.9} mWh/day (480), \
             (c) OQPSK {o_e:.1} vs UWB U {:.1} S {:.1} mWh/day, ratio {ratio:.2} (>= 2)",
            u_e[0], u_e[1]
        ),
    );
}

fn aloha_oracle(r: &mut Report) {
    let mut worst: f64 = 0.0;
    let mut cells = vec![];
    for v in [MacVariant::UnslottedAloha, MacVariant::SlottedAloha] {
        for g in [0.1, 0.5, 1.0] {
            let (g_real, s) = common::aloha_throughput(v, g, 40.0, 3);
            let theory = common::aloha_theory(v, g_real);
            let err = (s - theory).abs() / theory;
            worst = worst.max(err);
            cells.push(format!(
                "{}@{g}: {:+.1}%",
                v.name(),
                100.0 * (s - theory) / theory
            ));
        }
    }
    r.line(
        8,
        "ALOHA analytic oracle",
        worst < 0.05,
        format!("{} (need within 5%)", cells.join(", ")),
    );
}

fn link_budget(r: &mut Report) {
    let (u, o) = (RadioParams::uwb(), RadioParams::oqpsk());
    let checks = [
        ("UWB noise", radio::noise_floor(&u), -89.29, 0.01),
        ("OQPSK noise", radio::noise_floor(&o), -101.28, 0.01),
        ("UWB crossover", radio::crossover_distance(&u), 6.79, 0.01),
        ("UWB hop", u.max_hop_distance(), 20.9, 0.5),
        ("OQPSK hop", o.max_hop_distance(), 28.3, 0.5),
    ];
    let ok = checks
        .iter()
        .all(|(_, got, want, tol)| (got - want).abs() <= *tol);
    let detail: Vec<String> = checks
        .iter()
        .map(|(n, got, want, tol)| format!("{n} {got:.3} ({want} +- {tol})"))
        .collect();
    r.line(9, "link-budget golden values", ok, detail.join(", "));
}

fn routing_oracle(r: &mut Report) {
    let mut mismatches = 0;
    let mut longest = 0;
    for topology in 0..5 {
        let case = common::routing_case(topology);
        mismatches += case
            .hops
            .iter()
            .filter(|(a, b)| a != b || b.is_none())
            .count();
        longest = longest.max(case.hops.iter().filter_map(|h| h.1).max().unwrap_or(0));
    }
    r.line(
        10,
        "routing BFS oracle",
        mismatches == 0,
        format!("5 topologies x 20 pairs, {mismatches} mismatches, longest path {longest} hops"),
    );
}

fn determinism(r: &mut Report) {
    let spec = parse(
        "scenario.sim_duration = 10\nmetrics.truncation_guard = 2\nexperiment.replications = 3\n\
         experiment.seed = 77\nsweep.mac.variant = unslotted, slotted\nsweep.mac.retx_limit = 0, 4",
    )
    .unwrap();
    let bytes = |mode| {
        let res = run_experiment_with(&spec, mode).unwrap();
        let (mut a, mut b) = (vec![], vec![]);
        res.write_runs_csv(&mut a).unwrap();
        res.write_summary_csv(&mut b).unwrap();
        (a, b)
    };
    let first = bytes(Execution::Parallel);
    let again = bytes(Execution::Parallel);
    let seq = bytes(Execution::Sequential);
    r.line(
        11,
        "determinism",
        first == again && first == seq,
        format!(
            "rerun identical: {}, sequential == parallel: {} ({} + {} bytes)",
            first == again,
            first == seq,
            first.0.len(),
            first.1.len()
        ),
    );
}

fn main() {
    let strict = std::env::args().any(|a| a == "--strict");
    let start = Instant::now();
    let mut r = Report {
        passed: 0,
        failed: vec![],
    };
    retx_limit_trend(&mut r);
    over_retransmission(&mut r);
    slotted_vs_unslotted(&mut r);
    slot_size_trend(&mut r);
    retx_delay_trend(&mut r);
    let (oqpsk, uwb) = csma_baseline(&mut r);
    energy_accounting(&mut r, &oqpsk, &uwb);
    aloha_oracle(&mut r);
    link_budget(&mut r);
    routing_oracle(&mut r);
    determinism(&mut r);
    println!(
        "acceptance: {}/{} passed, failed {:?}, {:.0} s",
        r.passed,
        r.passed + r.failed.len(),
        r.failed,
        start.elapsed().as_secs_f64()
    );
    if strict && !r.failed.is_empty() {
        std::process::exit(1);
    }
}
