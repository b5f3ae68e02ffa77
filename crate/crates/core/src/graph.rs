//! Bipartite variable/constraint graph of an instance at the root LP.
//!
//! Variable features, in order:
//! `[c_j/‖c‖, is_integer, has_finite_upper, x_j, min(f_j, 1−f_j), d_j/‖c‖,
//! basic, at_lower, at_upper, free]`.
//!
//! Constraint features, in order:
//! `[b_i/‖A_i‖, y_i·‖A_i‖/‖c‖, tight, cos(A_i, c)]`.
//!
//! Edge weights are `a_ij/‖A_i‖`. Nothing derived from an incumbent enters.

use alloc::vec::Vec;
use core::fmt;

use crate::model::{LpSolution, LpStatus, MilpInstance};

pub const VAR_FEATS: usize = 10;
pub const CONS_FEATS: usize = 4;
/// Tightness tolerance on the row activity.
pub const TIGHT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    pub num_cons: usize,
    pub num_vars: usize,
    /// Row-major `num_cons × CONS_FEATS`.
    pub cons_feats: Vec<f64>,
    /// Row-major `num_vars × VAR_FEATS`.
    pub var_feats: Vec<f64>,
    /// `(row, column, weight)` sorted by row, then column.
    pub edges: Vec<(usize, usize, f64)>,
    pub z_lp_root: f64,
}

impl BipartiteGraph {
    pub fn cons_row(&self, i: usize) -> &[f64] {
        &self.cons_feats[i * CONS_FEATS..(i + 1) * CONS_FEATS]
    }

    pub fn var_row(&self, j: usize) -> &[f64] {
        &self.var_feats[j * VAR_FEATS..(j + 1) * VAR_FEATS]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    DegenerateNorm { what: &'static str, index: usize },
    LpNotOptimal,
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::DegenerateNorm { what, index } => write!(f, "zero norm for {what} {index}"),
            GraphError::LpNotOptimal => write!(f, "root LP is not optimal"),
        }
    }
}

impl core::error::Error for GraphError {}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    libm::sqrt(v.map(|a| a * a).sum())
}

pub fn extract(inst: &MilpInstance, lp: &LpSolution) -> Result<BipartiteGraph, GraphError> {
    if lp.status != LpStatus::Optimal {
        return Err(GraphError::LpNotOptimal);
    }
    let c_norm = norm(inst.obj.iter().copied());
    if c_norm == 0.0 {
        return Err(GraphError::DegenerateNorm { what: "objective", index: 0 });
    }
    let integral = inst.integrality();
    let mut var_feats = Vec::with_capacity(inst.num_vars * VAR_FEATS);
    for j in 0..inst.num_vars {
        let x = lp.x[j];
        let f = x - libm::floor(x);
        let frac = if integral[j] { f.min(1.0 - f) } else { 0.0 };
        var_feats.extend_from_slice(&[
            inst.obj[j] / c_norm,
            if integral[j] { 1.0 } else { 0.0 },
            if inst.var_upper[j].is_finite() { 1.0 } else { 0.0 },
            x,
            frac,
            lp.reduced_costs[j] / c_norm,
        ]);
        var_feats.extend_from_slice(&lp.basis[j].one_hot());
    }

    let mut cons_feats = Vec::with_capacity(inst.num_cons * CONS_FEATS);
    let mut edges = Vec::with_capacity(inst.nnz());
    for (i, row) in inst.rows.iter().enumerate() {
        let a_norm = norm(row.iter().map(|&(_, a)| a));
        if a_norm == 0.0 {
            return Err(GraphError::DegenerateNorm { what: "row", index: i });
        }
        let activity = inst.row_activity(i, &lp.x);
        let tight = (activity - inst.rhs[i]).abs() <= TIGHT_TOL * (1.0 + inst.rhs[i].abs());
        let dot: f64 = row.iter().map(|&(j, a)| a * inst.obj[j]).sum();
        cons_feats.extend_from_slice(&[
            inst.rhs[i] / a_norm,
            lp.duals[i] * a_norm / c_norm,
            if tight { 1.0 } else { 0.0 },
            dot / (a_norm * c_norm),
        ]);
        let mut es: Vec<(usize, usize, f64)> =
            row.iter().filter(|&&(_, a)| a != 0.0).map(|&(j, a)| (i, j, a / a_norm)).collect();
        es.sort_by_key(|e| e.1);
        edges.extend(es);
    }
    Ok(BipartiteGraph {
        num_cons: inst.num_cons,
        num_vars: inst.num_vars,
        cons_feats,
        var_feats,
        edges,
        z_lp_root: lp.z_lp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BasisStatus;
    use crate::simplex::{solve_lp, BoundSet};
    use alloc::vec;

    #[test]
    fn single_variable_graph() {
        let inst = MilpInstance::new("one", vec![1.0], vec![vec![(0, 1.0)]], vec![1.0], vec![0], vec![0.0], vec![f64::INFINITY]);
        let lp = solve_lp(&inst, &BoundSet::new()).unwrap();
        let g = extract(&inst, &lp).unwrap();
        assert_eq!(lp.basis[0], BasisStatus::Basic);
        assert_eq!(g.var_row(0), &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(g.cons_row(0), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(g.edges, vec![(0, 0, 1.0)]);
        assert_eq!(g.z_lp_root, 1.0);
    }

    #[test]
    fn zero_objective_is_rejected() {
        let inst = MilpInstance::binary("z", vec![0.0], vec![vec![(0, 1.0)]], vec![0.0]);
        let lp = solve_lp(&inst, &BoundSet::new()).unwrap();
        assert_eq!(extract(&inst, &lp), Err(GraphError::DegenerateNorm { what: "objective", index: 0 }));
    }
}
