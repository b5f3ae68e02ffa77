mod common;

use std::time::Instant;

use common::{brute_force, knapsack, tiny_batch};
use optval_core::bnb::NoObserver;
use optval_core::gen::{draw_auction, draw_gisp, gen_comb_auction, gen_gisp, gen_set_covering, Family, FamilyConfig};
use optval_core::model::validate;
use optval_core::{solve, Proof, SolveParams};

#[test]
fn optimum_matches_enumeration_on_tiny_instances() {
    let start = Instant::now();
    let mut checked = 0;
    for family in Family::ALL {
        for inst in tiny_batch(family, 20, 14) {
            let want = brute_force(&inst).expect("generated instances are feasible");
            for seed in [0, 3] {
                let res = solve(&inst, &SolveParams { seed, ..Default::default() }, &mut NoObserver).unwrap();
                assert_eq!(res.proof, Proof::OptimalityProved);
                assert_eq!(res.z_star, want, "{} seed {seed}", inst.name);
                let x = res.x_star.as_ref().unwrap();
                assert!(inst.is_feasible(x, 1e-9));
                assert_eq!(inst.objective(x), res.z_star);
            }
            checked += 1;
        }
    }
    assert_eq!(checked, 60);
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn optimum_matches_enumeration_on_random_knapsacks() {
    let mut branched = 0;
    for seed in 0..40 {
        let inst = knapsack(14, 3, seed);
        let want = brute_force(&inst).unwrap();
        let res = solve(&inst, &SolveParams::default(), &mut NoObserver).unwrap();
        assert_eq!(res.z_star, want, "seed {seed}");
        branched += usize::from(res.node_count > 1);
    }
    assert!(branched >= 30, "only {branched} runs branched");
}

#[test]
fn two_by_two_cover_needs_both_columns_or_the_cheaper_one() {
    for seed in 0..10 {
        let inst = gen_set_covering(2, 2, 0.9, seed).unwrap();
        // Each row needs two covering columns, so both columns cover both rows.
        assert!(inst.rows.iter().all(|r| r.len() == 2));
        let want = inst.obj[0].min(inst.obj[1]);
        assert_eq!(brute_force(&inst), Some(want));
        let res = solve(&inst, &SolveParams::default(), &mut NoObserver).unwrap();
        assert_eq!(res.z_star, want);
    }
}

#[test]
fn small_auction_matches_best_packing() {
    for seed in 0..10 {
        let a = draw_auction(3, 4, seed).unwrap();
        let inst = gen_comb_auction(3, 4, seed).unwrap();
        // Independent packing search over the drawn bundles.
        let mut best = 0.0f64;
        for mask in 0u32..16 {
            let mut used = [false; 3];
            let mut ok = true;
            let mut value = 0.0;
            for b in 0..4 {
                if mask >> b & 1 == 1 {
                    for &item in &a.bundles[b] {
                        ok &= !used[item];
                        used[item] = true;
                    }
                    value += a.prices[b];
                }
            }
            if ok {
                best = best.max(value);
            }
        }
        let res = solve(&inst, &SolveParams::default(), &mut NoObserver).unwrap();
        assert_eq!(inst.user_objective(res.z_star), best, "seed {seed}");
    }
}

#[test]
fn near_complete_gisp_matches_enumeration() {
    for seed in 0..10 {
        let g = draw_gisp(4, 0.99, 0.5, seed).unwrap();
        let inst = gen_gisp(4, 0.99, 0.5, seed).unwrap();
        // Enumerate node subsets, paying for every removable edge inside.
        let mut best = f64::NEG_INFINITY;
        for mask in 0u32..16 {
            let inside = |v: usize| mask >> v & 1 == 1;
            let mut value: f64 = (0..4).filter(|&v| inside(v)).map(|v| g.revenue[v]).sum();
            let mut ok = true;
            for (e, &(u, v, removable)) in g.edges.iter().enumerate() {
                if inside(u) && inside(v) {
                    if removable {
                        value -= g.cost[e];
                    } else {
                        ok = false;
                    }
                }
            }
            if ok {
                best = best.max(value);
            }
        }
        let res = solve(&inst, &SolveParams::default(), &mut NoObserver).unwrap();
        assert_eq!(inst.user_objective(res.z_star), best, "seed {seed}");
    }
}

#[test]
fn generated_instances_validate() {
    for family in Family::ALL {
        let cfg = FamilyConfig::desk(family);
        for seed in 0..100 {
            let inst = cfg.generate(seed).unwrap();
            assert_eq!(validate(&inst), Vec::<String>::new(), "{}", inst.name);
            assert_eq!(inst, cfg.generate(seed).unwrap());
        }
    }
}
