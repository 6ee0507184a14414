mod common;

use common::{bfs_hops, routing_case};
use uwbsim::scenario::Position;

#[test]
fn bfs_oracle_on_a_line() {
    let p: Vec<Position> = (0..5)
        .map(|i| Position::new(10.0 * i as f64, 0.0))
        .collect();
    let h = bfs_hops(&p, 15.0, 0);
    assert_eq!(h, vec![Some(0), Some(1), Some(2), Some(3), Some(4)]);
    let far = [Position::new(0.0, 0.0), Position::new(100.0, 0.0)];
    assert_eq!(bfs_hops(&far, 15.0, 0), vec![Some(0), None]);
}

#[test]
fn discovered_hop_counts_match_bfs() {
    for topology in 0..5 {
        let case = routing_case(topology);
        for (&(src, dst), &(aodv, bfs)) in case.pairs.iter().zip(&case.hops) {
            assert!(bfs.is_some(), "topology {topology}: {src} disconnected");
            assert_eq!(aodv, bfs, "topology {topology}: {src} -> {dst}");
        }
        let longest = case.hops.iter().filter_map(|h| h.1).max().unwrap();
        assert!(longest >= 3, "topology {topology}: longest path {longest}");
        assert_eq!(
            case.delivered,
            case.pairs.len() as u64,
            "topology {topology}"
        );
    }
}
