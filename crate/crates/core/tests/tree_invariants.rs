mod common;

use common::{knapsack, small};
use optval_core::bnb::NoObserver;
use optval_core::classifiers::PhaseHistory;
use optval_core::dynamics::is_optimal_incumbent;
use optval_core::gen::Family;
use optval_core::tree::EventKind;
use optval_core::{solve, Proof, SolveParams, TreeEvent, TreeState};
use proptest::prelude::*;

/// What the observer saw at one processed node.
struct Snapshot {
    t: usize,
    lower: f64,
    open: usize,
    incumbent: Option<f64>,
    omega: f64,
}

/// Solves while re-deriving the tree from the event stream and checking
/// every structural rule on the way.
fn checked_solve(
    inst: &optval_core::MilpInstance,
    solver_seed: u64,
    node_limit: usize,
) -> (optval_core::SolveResult, Vec<Snapshot>, PhaseHistory) {
    let mut replica = TreeState::new();
    let mut snaps = Vec::new();
    let mut live = PhaseHistory::default();
    let mut seen_t = 0;
    let mut last_omega = 0.0;
    let mut obs = |ev: &TreeEvent, state: &TreeState| {
        let subject = match ev.kind {
            EventKind::Branched { node, .. } | EventKind::Pruned { node, processed: true, .. } => Some(node),
            EventKind::NewIncumbent { node, .. } | EventKind::NodeProcessed { node, .. } => Some(node),
            _ => None,
        };
        if ev.t == replica.t() + 1 && seen_t < ev.t {
            seen_t = ev.t;
            assert_eq!(subject, replica.select_node(), "node chosen at t={}", ev.t);
        }
        if let EventKind::Branched { node, down, up, .. } = ev.kind {
            let parent_depth = replica.open_nodes().find(|n| n.0 == node).unwrap().1;
            for c in [down, up] {
                assert_eq!(c.depth, parent_depth + 1);
                assert!(c.estimate >= c.bound - 1e-6);
            }
        }
        replica.apply(ev).unwrap();
        assert_eq!(replica.inner_count() + replica.leaf_count() + replica.open_count(), replica.created_count());
        assert_eq!(state.inner_count() + state.leaf_count() + state.open_count(), state.created_count());
        assert_eq!(replica.rank1_count(), replica.rank1_count_naive());
        assert!(state.tree_weight() >= last_omega);
        last_omega = state.tree_weight();
        if let EventKind::NodeProcessed { .. } = ev.kind {
            live.record(state);
            snaps.push(Snapshot {
                t: state.t(),
                lower: state.global_lower(),
                open: state.open_count(),
                incumbent: state.incumbent(),
                omega: state.tree_weight(),
            });
        }
    };
    let params = SolveParams { seed: solver_seed, node_limit, ..Default::default() };
    let res = solve(inst, &params, &mut obs).unwrap();
    (res, snaps, live)
}

/// Generator families plus random knapsacks as a fourth kind.
fn instance(kind: u8, seed: u64) -> optval_core::MilpInstance {
    match kind {
        0..=2 => small(Family::ALL[kind as usize], seed),
        _ => knapsack(20, 2, seed),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_runs_keep_tree_invariants(kind in 0u8..4, inst_seed in 0u64..1000, solver_seed in 0u64..4) {
        let (res, snaps, live) = checked_solve(&instance(kind, inst_seed), solver_seed, usize::MAX);
        prop_assert_eq!(res.proof, Proof::OptimalityProved);
        let z = res.z_star;
        let tol = 1e-6 * (1.0 + z.abs());

        // Bound sandwich at every processed node.
        for s in &snaps {
            if s.open > 0 {
                prop_assert!(s.lower <= z + tol, "t={} lower {} > z* {}", s.t, s.lower, z);
            }
            if let Some(zb) = s.incumbent {
                prop_assert!(z <= zb + tol);
            }
        }
        prop_assert!((snaps.last().unwrap().omega - 1.0).abs() <= 1e-9);
        prop_assert_eq!(snaps.len(), res.node_count);

        // Incumbents only improve; labels are absorbing.
        for w in res.incumbent_history.windows(2) {
            prop_assert!(w[1].1 < w[0].1);
            prop_assert!(w[1].0 >= w[0].0);
        }
        let labels: Vec<bool> = snaps.iter().map(|s| s.incumbent.is_some_and(|zb| is_optimal_incumbent(zb, z))).collect();
        prop_assert!(labels.windows(2).all(|w| w[0] <= w[1]));

        // Baseline criteria never switch back off, and replaying the log
        // gives the same series as the live run.
        let replayed = PhaseHistory::from_events(&res.event_log).unwrap();
        prop_assert_eq!(&replayed, &live);
        let est: Vec<bool> = replayed.t.iter().map(|&t| replayed.c_est(t)).collect();
        let r1: Vec<bool> = replayed.t.iter().map(|&t| replayed.c_rank1(t)).collect();
        prop_assert!(est.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(r1.windows(2).all(|w| w[0] <= w[1]));
        for &t in &replayed.t {
            prop_assert_eq!(replayed.c_est(t), replayed.est_running_min(t) < 0.0);
            prop_assert_eq!(replayed.c_rank1(t), replayed.rank1_running_min(t) == 0);
        }

        // The stored log rebuilds the final tracker state.
        let state = TreeState::replay(&res.event_log).unwrap();
        prop_assert_eq!(state.t(), res.final_state.t());
        prop_assert_eq!(state.tree_weight(), res.final_state.tree_weight());
        prop_assert_eq!(state.open_history(), res.final_state.open_history());
        prop_assert_eq!(state.incumbent(), Some(z));
        prop_assert_eq!(state.finished(), Some(Proof::OptimalityProved));
    }

    #[test]
    fn node_limited_runs_stay_consistent(kind in 0u8..4, inst_seed in 0u64..1000, limit in 1usize..6) {
        let (res, snaps, _) = checked_solve(&instance(kind, inst_seed), 0, limit);
        prop_assert!(res.node_count <= limit);
        prop_assert_eq!(snaps.len(), res.node_count);
        if res.proof == Proof::NodeLimit {
            prop_assert!(res.final_state.open_count() > 0);
            prop_assert!(res.final_state.tree_weight() < 1.0);
        }
    }
}

#[test]
fn same_seed_gives_identical_logs() {
    for family in Family::ALL {
        for seed in [0, 9] {
            let inst = small(family, 5);
            let p = SolveParams { seed, ..Default::default() };
            let a = solve(&inst, &p, &mut NoObserver).unwrap();
            let b = solve(&inst, &p, &mut NoObserver).unwrap();
            assert_eq!(a.event_log, b.event_log);
            assert_eq!(a.x_star, b.x_star);
        }
    }
}

#[test]
fn seeds_change_the_search_but_not_the_optimum() {
    for family in Family::ALL {
        let inst = small(family, 11);
        let z: Vec<f64> =
            (0..4).map(|s| solve(&inst, &SolveParams { seed: s, ..Default::default() }, &mut NoObserver).unwrap().z_star).collect();
        assert!(z.iter().all(|&v| v == z[0]), "{z:?}");
    }
}

#[test]
fn completed_runs_close_the_tree() {
    let mut runs = 0;
    for family in Family::ALL {
        for seed in 0..30 {
            let res = solve(&small(family, seed), &SolveParams::default(), &mut NoObserver).unwrap();
            assert_eq!(res.proof, Proof::OptimalityProved);
            let w = TreeState::replay(&res.event_log).unwrap().tree_weight();
            assert!((w - 1.0).abs() <= 1e-9, "omega {w}");
            runs += 1;
        }
    }
    assert_eq!(runs, 90);
}
