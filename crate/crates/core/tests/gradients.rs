//! Analytic gradients against central finite differences.

mod common;

use common::grad::{block_rel_err, norm, random_graph, random_model};
use optval_core::classifiers::logistic_loss_grad;
use optval_core::gnn::{GnnModel, TargetKind};
use optval_core::graph::BipartiteGraph;
use optval_core::rng::Rng;

const GNN_STEP: f64 = 1e-4;
const GNN_TOL: f64 = 1e-4;
const LOGIT_STEP: f64 = 1e-5;
const LOGIT_TOL: f64 = 1e-5;

#[test]
fn gnn_gradients_match_finite_differences() {
    let mut rng = Rng::new(20240601);
    let mut worst = 0.0f64;
    let mut live = std::collections::BTreeMap::<&str, usize>::new();
    for config in 0..20 {
        let mut model = random_model(&mut rng, config);
        let graphs: Vec<BipartiteGraph> = (0..1 + rng.index(3)).map(|_| random_graph(&mut rng)).collect();
        let batch: Vec<(&BipartiteGraph, f64)> = graphs.iter().map(|g| (g, rng.normal())).collect();
        let (_, grad) = model.loss_and_gradients(&batch).unwrap();

        let mut numeric = vec![0.0; grad.len()];
        for k in 0..grad.len() {
            let orig = model.params[k];
            model.params[k] = orig + GNN_STEP;
            let up = model.loss_and_gradients(&batch).unwrap().0;
            model.params[k] = orig - GNN_STEP;
            let down = model.loss_and_gradients(&batch).unwrap().0;
            model.params[k] = orig;
            numeric[k] = (up - down) / (2.0 * GNN_STEP);
        }
        for (name, range) in model.blocks() {
            let a = &grad[range.clone()];
            let b = &numeric[range];
            // Dead ReLUs or edgeless graphs can zero a block legitimately.
            *live.entry(name).or_default() += usize::from(norm(a.iter().copied()) > 0.0);
            let err = block_rel_err(a, b);
            worst = worst.max(err);
            assert!(err < GNN_TOL, "config {config}: block {name} relative error {err:e}");
        }
    }
    eprintln!("worst GNN block relative error {worst:e}");
    for (name, count) in live {
        assert!(count >= 15, "block {name} carried gradient in only {count} of 20 configurations");
    }
}

#[test]
fn gnn_block_layout_covers_every_parameter() {
    let model = GnnModel::init(4, TargetKind::Theta1, 0);
    let blocks = model.blocks();
    let names: Vec<&str> = blocks.iter().map(|b| b.0).collect();
    assert_eq!(names, ["emb_c1", "emb_c2", "emb_v1", "emb_v2", "w11", "w12", "w21", "w22", "head1", "head2"]);
    let mut next = 0;
    for (_, r) in &blocks {
        assert_eq!(r.start, next);
        next = r.end;
    }
    assert_eq!(next, model.param_count());
}

#[test]
fn logistic_gradients_match_finite_differences() {
    let mut rng = Rng::new(77);
    for config in 0..20 {
        let n = 5 + rng.index(40);
        let xs: Vec<[f64; 5]> = (0..n).map(|_| core::array::from_fn(|_| rng.normal())).collect();
        let ys: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
        let w: [f64; 5] = core::array::from_fn(|_| rng.normal());
        let b = rng.normal();
        let lambda = [0.0, 1e-3, 0.1][config % 3];
        let (_, gw, gb) = logistic_loss_grad(&w, b, &xs, &ys, lambda);

        let loss = |w: &[f64; 5], b: f64| logistic_loss_grad(w, b, &xs, &ys, lambda).0;
        let mut numeric = [0.0; 6];
        for k in 0..5 {
            let (mut up, mut down) = (w, w);
            up[k] += LOGIT_STEP;
            down[k] -= LOGIT_STEP;
            numeric[k] = (loss(&up, b) - loss(&down, b)) / (2.0 * LOGIT_STEP);
        }
        numeric[5] = (loss(&w, b + LOGIT_STEP) - loss(&w, b - LOGIT_STEP)) / (2.0 * LOGIT_STEP);
        let analytic = [gw[0], gw[1], gw[2], gw[3], gw[4], gb];
        for k in 0..6 {
            let err = (analytic[k] - numeric[k]).abs() / analytic[k].abs().max(numeric[k].abs()).max(1e-8);
            assert!(err < LOGIT_TOL, "config {config}, coordinate {k}: relative error {err:e}");
        }
    }
}
