#![allow(dead_code)]

pub mod grad;
pub mod lp;

use optval_core::gen::{gen_comb_auction, gen_gisp, gen_set_covering, Family};
use optval_core::rng::Rng;
use optval_core::MilpInstance;

/// Exhaustive minimum over all 0/1 assignments. Every variable must be
/// binary.
pub fn brute_force(inst: &MilpInstance) -> Option<f64> {
    let n = inst.num_vars;
    assert!(n <= 20, "brute force over {n} variables");
    assert!(inst.var_upper.iter().all(|&u| u == 1.0) && inst.var_lower.iter().all(|&l| l == 0.0));
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = f64::from((mask >> j) & 1);
        }
        let ok = inst.rows.iter().zip(&inst.rhs).all(|(row, &b)| {
            let act: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
            act >= b - 1e-12
        });
        if ok {
            let z: f64 = inst.obj.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(z, |b: f64| b.min(z)));
        }
    }
    best
}

/// Tiny instance with at most `max_vars` columns, or `None` if this seed
/// produced a larger one.
pub fn tiny(family: Family, seed: u64, max_vars: usize) -> Option<MilpInstance> {
    let inst = match family {
        Family::SetCovering => gen_set_covering(10, 14, 0.15, seed).ok()?,
        Family::CombAuction => gen_comb_auction(6, 14, seed).ok()?,
        Family::Gisp => gen_gisp(10, 0.5, 0.25, seed).ok()?,
    };
    (inst.num_vars <= max_vars).then_some(inst)
}

/// First `count` tiny instances of a family, scanning seeds upward.
pub fn tiny_batch(family: Family, count: usize, max_vars: usize) -> Vec<MilpInstance> {
    (0u64..).filter_map(|s| tiny(family, s, max_vars)).take(count).collect()
}

/// Small instances that usually need some branching.
pub fn small(family: Family, seed: u64) -> MilpInstance {
    match family {
        Family::SetCovering => gen_set_covering(60, 80, 0.06, seed).unwrap(),
        Family::CombAuction => gen_comb_auction(25, 60, seed).unwrap(),
        Family::Gisp => gen_gisp(18, 0.5, 0.75, seed).unwrap(),
    }
}

/// `max v·x` subject to `m` random knapsack rows, in min form.
pub fn knapsack(n: usize, m: usize, seed: u64) -> MilpInstance {
    let mut rng = Rng::new(seed);
    let obj = (0..n).map(|_| -(rng.int_in(1, 60) as f64)).collect();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for _ in 0..m {
        let w: Vec<f64> = (0..n).map(|_| rng.int_in(1, 40) as f64).collect();
        rhs.push(-(w.iter().sum::<f64>() * 0.4).floor());
        rows.push(w.iter().enumerate().map(|(j, &a)| (j, -a)).collect());
    }
    MilpInstance::binary(format!("ks-{seed}"), obj, rows, rhs)
}
