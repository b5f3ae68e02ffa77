use optval_core::gnn::{GnnModel, TargetKind};
use optval_core::graph::{BipartiteGraph, CONS_FEATS, VAR_FEATS};
use optval_core::rng::Rng;

pub fn random_graph(rng: &mut Rng) -> BipartiteGraph {
    let m = 1 + rng.index(5);
    let n = 1 + rng.index(7);
    let cons_feats = (0..m * CONS_FEATS).map(|_| rng.normal()).collect();
    let var_feats = (0..n * VAR_FEATS).map(|_| rng.normal()).collect();
    let mut edges = Vec::new();
    for i in 0..m {
        for j in 0..n {
            if rng.bernoulli(0.6) {
                edges.push((i, j, rng.uniform_in(-1.0, 1.0)));
            }
        }
    }
    BipartiteGraph { num_cons: m, num_vars: n, cons_feats, var_feats, edges, z_lp_root: rng.normal() }
}

pub fn random_model(rng: &mut Rng, seed: u64) -> GnnModel {
    let hidden = 2 + rng.index(5);
    let mut model = GnnModel::init(hidden, TargetKind::Theta3, seed);
    // Nonzero biases so every block carries gradient.
    for p in &mut model.params {
        *p = rng.uniform_in(-0.8, 0.8);
    }
    for k in 0..CONS_FEATS {
        model.cons_mean[k] = 0.3 * rng.normal();
        model.cons_std[k] = rng.uniform_in(0.5, 2.0);
    }
    for k in 0..VAR_FEATS {
        model.var_mean[k] = 0.3 * rng.normal();
        model.var_std[k] = rng.uniform_in(0.5, 2.0);
    }
    model
}

pub fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn block_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = norm(a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(a.iter().copied()).max(norm(b.iter().copied()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}
