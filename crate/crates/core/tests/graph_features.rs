mod common;

use common::small;
use optval_core::gen::Family;
use optval_core::graph::{extract, BipartiteGraph};
use optval_core::model::LpSolution;
use optval_core::rng::Rng;
use optval_core::simplex::solve_lp;
use optval_core::{BoundSet, MilpInstance};

/// Relabels columns by `col[j]` and rows by `row[i]` (old index → new).
fn permute(inst: &MilpInstance, lp: &LpSolution, col: &[usize], row: &[usize]) -> (MilpInstance, LpSolution) {
    let (n, m) = (inst.num_vars, inst.num_cons);
    let scatter = |v: &[f64], map: &[usize], len: usize| {
        let mut out = vec![0.0; len];
        for (k, &x) in v.iter().enumerate() {
            out[map[k]] = x;
        }
        out
    };
    let mut rows = vec![Vec::new(); m];
    let mut rhs = vec![0.0; m];
    for (i, r) in inst.rows.iter().enumerate() {
        rows[row[i]] = r.iter().map(|&(j, a)| (col[j], a)).collect();
        rhs[row[i]] = inst.rhs[i];
    }
    let mut p = MilpInstance::new(
        inst.name.clone(),
        scatter(&inst.obj, col, n),
        rows,
        rhs,
        inst.integer_set.iter().map(|&j| col[j]).collect(),
        scatter(&inst.var_lower, col, n),
        scatter(&inst.var_upper, col, n),
    );
    p.maximize_origin = inst.maximize_origin;
    let mut basis = lp.basis.clone();
    for (j, &b) in lp.basis.iter().enumerate() {
        basis[col[j]] = b;
    }
    let plp = LpSolution {
        x: scatter(&lp.x, col, n),
        duals: scatter(&lp.duals, row, m),
        reduced_costs: scatter(&lp.reduced_costs, col, n),
        basis,
        ..lp.clone()
    };
    (p, plp)
}

fn random_perm(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut p);
    p
}

fn sorted_edges(g: &BipartiteGraph) -> Vec<(usize, usize, u64)> {
    let mut e: Vec<_> = g.edges.iter().map(|&(i, j, w)| (i, j, w.to_bits())).collect();
    e.sort_unstable();
    e
}

#[test]
fn extraction_is_permutation_equivariant() {
    let mut rng = Rng::new(8);
    for family in Family::ALL {
        for seed in 0..5 {
            let inst = small(family, seed);
            let lp = solve_lp(&inst, &BoundSet::new()).unwrap();
            let g = extract(&inst, &lp).unwrap();
            let col = random_perm(inst.num_vars, &mut rng);
            let row = random_perm(inst.num_cons, &mut rng);
            let (pi, plp) = permute(&inst, &lp, &col, &row);
            let pg = extract(&pi, &plp).unwrap();
            for j in 0..inst.num_vars {
                assert_eq!(g.var_row(j), pg.var_row(col[j]));
            }
            for i in 0..inst.num_cons {
                let (a, b) = (g.cons_row(i), pg.cons_row(row[i]));
                // The cosine column sums products in row order.
                assert_eq!(a[..3], b[..3]);
                assert!((a[3] - b[3]).abs() <= 1e-12);
            }
            let mapped: Vec<_> = {
                let mut e: Vec<_> = g.edges.iter().map(|&(i, j, w)| (row[i], col[j], w.to_bits())).collect();
                e.sort_unstable();
                e
            };
            assert_eq!(mapped, sorted_edges(&pg));
        }
    }
}

#[test]
fn graphs_are_finite_and_match_the_matrix() {
    for family in Family::ALL {
        for seed in 0..5 {
            let inst = small(family, seed);
            let lp = solve_lp(&inst, &BoundSet::new()).unwrap();
            let g = extract(&inst, &lp).unwrap();
            assert!(g.var_feats.iter().chain(&g.cons_feats).all(|v| v.is_finite()));
            let nnz = inst.rows.iter().flatten().filter(|e| e.1 != 0.0).count();
            assert_eq!(g.edges.len(), nnz);
            let int_count = (0..g.num_vars).filter(|&j| g.var_row(j)[1] == 1.0).count();
            assert_eq!(int_count, inst.integer_set.len());
            for j in 0..g.num_vars {
                let one_hot = &g.var_row(j)[6..];
                assert_eq!(one_hot.iter().sum::<f64>(), 1.0);
            }
            assert_eq!(g, extract(&inst, &lp).unwrap());
        }
    }
}
