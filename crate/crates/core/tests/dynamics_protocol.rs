mod common;

use common::knapsack;
use optval_core::bnb::NoObserver;
use optval_core::dynamics::{collect, replay_features, CollectParams, DynError};
use optval_core::{solve, MilpInstance, Proof, SolveParams};

/// Knapsacks whose search needs more than `min_nodes` nodes and finds a
/// solution at the root.
fn hard_knapsacks(min_nodes: usize, count: usize) -> Vec<(MilpInstance, usize)> {
    (0..400)
        .map(|s| knapsack(30, 2, s))
        .filter_map(|inst| {
            let r = solve(&inst, &SolveParams::default(), &mut NoObserver).ok()?;
            (r.node_count > min_nodes && r.incumbent_history.first()?.0 == 1).then_some((inst, r.node_count))
        })
        .take(count)
        .collect()
}

#[test]
fn forced_sampling_takes_every_node_after_warmup() {
    let cases = hard_knapsacks(150, 3);
    assert_eq!(cases.len(), 3);
    for (inst, nodes) in cases {
        let params = CollectParams { p_sample: 1.0, ..Default::default() };
        let (samples, res) = collect(&inst, -1.0, -2.0, params, &SolveParams::default()).unwrap();
        assert_eq!(res.node_count, nodes);
        let times: Vec<usize> = samples.iter().map(|s| s.t).collect();
        assert_eq!(times, (101..=nodes).collect::<Vec<_>>());
        assert!(samples.windows(2).all(|w| w[0].label <= w[1].label));
        assert!(samples.iter().all(|s| s.z_star == res.z_star && s.z_lp == -2.0));
    }
}

#[test]
fn easy_runs_give_no_samples() {
    for seed in 0..20 {
        let inst = knapsack(10, 2, seed);
        let params = CollectParams { p_sample: 1.0, ..Default::default() };
        let (samples, res) = collect(&inst, -1.0, -1.0, params, &SolveParams::default()).unwrap();
        assert!(res.node_count <= 100);
        assert!(samples.is_empty());
    }
}

#[test]
fn censored_runs_are_rejected() {
    let (inst, _) = hard_knapsacks(150, 1).pop().unwrap();
    let sp = SolveParams { node_limit: 120, ..Default::default() };
    let err = collect(&inst, -1.0, -1.0, CollectParams { p_sample: 1.0, ..Default::default() }, &sp).unwrap_err();
    assert_eq!(err, DynError::CensoredRun(Proof::NodeLimit));
}

#[test]
fn features_replay_bit_for_bit() {
    for (inst, _) in hard_knapsacks(120, 4) {
        for seed in [1, 2] {
            let params = CollectParams { p_sample: 0.3, seed, ..Default::default() };
            let (samples, res) = collect(&inst, -123.0, -130.0, params, &SolveParams::default()).unwrap();
            assert!(!samples.is_empty());
            let times: Vec<usize> = samples.iter().map(|s| s.t).collect();
            let again = replay_features(&res.event_log, -123.0, &times, params.window).unwrap();
            for (s, f) in samples.iter().zip(&again) {
                assert_eq!(s.features.map(f64::to_bits), f.map(f64::to_bits));
            }
        }
    }
}

#[test]
fn features_stay_in_range() {
    for (inst, _) in hard_knapsacks(120, 4) {
        let params = CollectParams { p_sample: 1.0, ..Default::default() };
        let (samples, _) = collect(&inst, -100.0, -110.0, params, &SolveParams::default()).unwrap();
        let mut last_omega = 0.0;
        for s in &samples {
            let [g, omega, mu, _, _] = s.features;
            assert!((0.0..=1.0).contains(&g));
            assert!((0.0..=1.0).contains(&omega) && omega >= last_omega);
            assert!(mu >= 0.0);
            last_omega = omega;
        }
    }
}
