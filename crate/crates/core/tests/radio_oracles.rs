mod common;

use approx::assert_abs_diff_eq;
use uwbsim::mac::MacVariant;
use uwbsim::metrics::{EnergyParams, RadioState, RadioTime};
use uwbsim::radio::{self, RadioParams};
use uwbsim::scenario::Position;
use uwbsim::sim::{Role, SimConfig, Workload, World};

#[test]
fn link_budget_golden_values() {
    let (u, o) = (RadioParams::uwb(), RadioParams::oqpsk());
    assert_abs_diff_eq!(radio::noise_floor(&u), -89.29, epsilon = 0.01);
    assert_abs_diff_eq!(radio::noise_floor(&o), -101.28, epsilon = 0.01);
    assert_abs_diff_eq!(radio::crossover_distance(&u), 6.79, epsilon = 0.01);
    assert_abs_diff_eq!(u.max_hop_distance(), 20.9, epsilon = 0.5);
    assert_abs_diff_eq!(o.max_hop_distance(), 28.3, epsilon = 0.5);
}

#[test]
fn received_power_at_max_hop_is_sensitivity() {
    for p in [RadioParams::uwb(), RadioParams::oqpsk()] {
        let d = p.max_hop_distance();
        assert_abs_diff_eq!(
            radio::rx_power(p.tx_power, d, &p),
            p.sensitivity,
            epsilon = 1e-9
        );
    }
}

#[test]
fn hand_specified_intervals() {
    let e = EnergyParams::uwb();
    let mut t = RadioTime::default();
    for d in [0.000_256, 0.000_128, 0.001_5] {
        t.record(RadioState::Tx, d);
    }
    for d in [10.0, 0.25, 89.747_616] {
        t.record(RadioState::Rx, d);
    }
    let tx = 0.000_256 + 0.000_128 + 0.001_5;
    let rx = 10.0 + 0.25 + 89.747_616;
    let expect = (5.0 * tx + 20.0 * rx) / 3600.0;
    assert!(((t.energy(&e) - expect) / expect).abs() < 1e-9);
}

#[test]
fn idle_node_draws_receive_power_all_day() {
    let mut c = SimConfig::default();
    c.scenario.sim_duration = 100.0;
    let w = World::custom(
        c,
        vec![Position::new(0.0, 0.0)],
        vec![Role::Base],
        Workload::Manual,
        1,
    );
    let o = w.run();
    let daily = o.radio_time[0].daily_energy(&EnergyParams::uwb(), o.duration);
    assert!((daily - 480.0).abs() < 480.0 * 1e-9, "{daily}");
}

#[test]
fn aloha_star_matches_closed_form() {
    for v in [MacVariant::UnslottedAloha, MacVariant::SlottedAloha] {
        for g in [0.1, 0.5, 1.0] {
            let (g_real, s) = common::aloha_throughput(v, g, 20.0, 3);
            assert!(
                (g_real - g).abs() / g < 0.1,
                "{v:?} offered {g}, realised {g_real}"
            );
            let theory = common::aloha_theory(v, g_real);
            assert!(
                (s - theory).abs() / theory < 0.05,
                "{v:?} G={g_real}: {s} vs {theory}"
            );
        }
    }
}
