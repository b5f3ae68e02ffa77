//! LP relaxation checks against brute-force vertex enumeration.

mod common;

use common::lp::{random_lp, vertex_oracle};
use optval_core::model::LpStatus;
use optval_core::rng::Rng;
use optval_core::simplex::{dual_objective, solve_lp, BoundSet, LpSolver};

#[test]
fn simplex_matches_vertex_enumeration_on_random_lps() {
    let mut rng = Rng::new(2024);
    let mut optimal = 0;
    let mut infeasible = 0;
    for case in 0..200 {
        let inst = if case % 2 == 0 {
            random_lp(&mut rng, 6, 8, f64::INFINITY)
        } else {
            let upper = 1.0 + rng.int_in(0, 2) as f64;
            random_lp(&mut rng, 4, 5, upper)
        };
        let sol = solve_lp(&inst, &BoundSet::new()).unwrap();
        match vertex_oracle(&inst) {
            Some(z) => {
                optimal += 1;
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                assert!((sol.z_lp - z).abs() <= 1e-6, "case {case}: simplex {} oracle {z}", sol.z_lp);
                assert!(inst.max_violation(&sol.x) <= 1e-6);
            }
            None => {
                infeasible += 1;
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}");
            }
        }
    }
    assert!(optimal > 100, "too few feasible cases: {optimal}");
    assert!(infeasible > 0 || optimal == 200);
}

#[test]
fn weak_duality_holds_at_optimum() {
    let mut rng = Rng::new(77);
    for _ in 0..100 {
        let inst = random_lp(&mut rng, 7, 9, 3.0);
        let b = BoundSet::new();
        let sol = solve_lp(&inst, &b).unwrap();
        if sol.status != LpStatus::Optimal {
            continue;
        }
        let dual = dual_objective(&inst, &b, &sol);
        assert!(dual <= sol.z_lp + 1e-6, "dual {dual} > primal {}", sol.z_lp);
        assert!((dual - sol.z_lp).abs() <= 1e-6);
        assert!(sol.duals.iter().all(|&y| y >= -1e-7));
    }
}

#[test]
fn warm_started_branches_match_cold_solves_and_never_improve_the_parent() {
    let mut rng = Rng::new(5);
    let mut checked = 0;
    while checked < 100 {
        let inst = random_lp(&mut rng, 8, 10, 1.0);
        let solver = LpSolver::new(&inst);
        let root = solver.solve(&BoundSet::new()).unwrap();
        if root.status != LpStatus::Optimal {
            continue;
        }
        let Some(j) = (0..inst.num_vars).find(|&j| (root.x[j] - root.x[j].round()).abs() > 1e-6) else {
            continue;
        };
        let mut b = BoundSet::new();
        if rng.bernoulli(0.5) {
            b.set(j, 0.0, root.x[j].floor());
        } else {
            b.set(j, root.x[j].ceil(), 1.0);
        }
        let warm = solver.resolve(&root, &b).unwrap();
        let cold = solver.solve(&b).unwrap();
        assert_eq!(warm.status, cold.status);
        if cold.status == LpStatus::Optimal {
            assert!((warm.z_lp - cold.z_lp).abs() <= 1e-6);
            assert!(cold.z_lp >= root.z_lp - 1e-6);
        }
        checked += 1;
    }
}

#[test]
fn tightening_a_satisfied_bound_keeps_the_optimum() {
    let mut rng = Rng::new(8);
    for _ in 0..50 {
        let inst = random_lp(&mut rng, 5, 6, 2.0);
        let solver = LpSolver::new(&inst);
        let root = solver.solve(&BoundSet::new()).unwrap();
        if root.status != LpStatus::Optimal {
            continue;
        }
        let mut b = BoundSet::new();
        b.set(0, 0.0, (root.x[0] + 0.5).min(inst.var_upper[0]));
        let warm = solver.resolve(&root, &b).unwrap();
        assert!((warm.z_lp - root.z_lp).abs() <= 1e-9);
    }
}
