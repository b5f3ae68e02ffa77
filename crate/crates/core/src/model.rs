//! Canonical MILP data model.
//!
//! Every instance is stored as `min c·x` subject to `A x ≥ b` with
//! per-variable bounds and an integer/continuous partition of the columns.
//! Maximization problems and `≤` rows are negated by their producers.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// One sparse row of the constraint matrix as `(column, coefficient)` pairs.
pub type Row = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    pub name: String,
    pub num_vars: usize,
    pub num_cons: usize,
    pub obj: Vec<f64>,
    /// Row `i` reads `Σ coef·x[col] ≥ rhs[i]`.
    pub rows: Vec<Row>,
    pub rhs: Vec<f64>,
    pub integer_set: Vec<usize>,
    pub continuous_set: Vec<usize>,
    pub var_lower: Vec<f64>,
    pub var_upper: Vec<f64>,
    /// The stored objective is the negation of the user's (maximization)
    /// objective. User-facing values must be negated back.
    pub maximize_origin: bool,
}

impl MilpInstance {
    /// Builds an instance; the continuous set is the complement of
    /// `integer_set`.
    pub fn new(
        name: impl Into<String>,
        obj: Vec<f64>,
        rows: Vec<Row>,
        rhs: Vec<f64>,
        integer_set: Vec<usize>,
        var_lower: Vec<f64>,
        var_upper: Vec<f64>,
    ) -> Self {
        let n = obj.len();
        let mut is_int = vec![false; n];
        for &j in &integer_set {
            if j < n {
                is_int[j] = true;
            }
        }
        let continuous_set = (0..n).filter(|&j| !is_int[j]).collect();
        MilpInstance {
            name: name.into(),
            num_vars: n,
            num_cons: rows.len(),
            obj,
            rows,
            rhs,
            integer_set,
            continuous_set,
            var_lower,
            var_upper,
            maximize_origin: false,
        }
    }

    /// All-binary instance with default `[0, 1]` bounds.
    pub fn binary(name: impl Into<String>, obj: Vec<f64>, rows: Vec<Row>, rhs: Vec<f64>) -> Self {
        let n = obj.len();
        Self::new(name, obj, rows, rhs, (0..n).collect(), vec![0.0; n], vec![1.0; n])
    }

    pub fn integrality(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_vars];
        for &j in &self.integer_set {
            if j < self.num_vars {
                mask[j] = true;
            }
        }
        mask
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.obj.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Largest violation of any row or bound by `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.num_cons {
            worst = worst.max(self.rhs[i] - self.row_activity(i, x));
        }
        for j in 0..self.num_vars {
            worst = worst.max(self.var_lower[j] - x[j]).max(x[j] - self.var_upper[j]);
        }
        worst
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.num_vars || self.max_violation(x) > tol {
            return false;
        }
        self.integer_set.iter().all(|&j| (x[j] - libm::round(x[j])).abs() <= tol)
    }

    /// Objective value as the user posed it (undoes the min-form negation).
    pub fn user_objective(&self, z: f64) -> f64 {
        if self.maximize_origin {
            -z
        } else {
            z
        }
    }

    /// Number of nonzero coefficients.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

/// Checks the structural invariants of an instance. Returns one message per
/// violation; an empty list means the instance is well formed.
pub fn validate(inst: &MilpInstance) -> Vec<String> {
    let mut out = Vec::new();
    let n = inst.num_vars;
    if inst.obj.len() != n {
        out.push(format!("obj length {} != num_vars {}", inst.obj.len(), n));
    }
    if inst.rows.len() != inst.num_cons {
        out.push(format!("row count {} != num_cons {}", inst.rows.len(), inst.num_cons));
    }
    if inst.rhs.len() != inst.rows.len() {
        out.push(format!("rhs length {} != row count {}", inst.rhs.len(), inst.rows.len()));
    }
    if inst.var_lower.len() != n || inst.var_upper.len() != n {
        out.push(format!("bounds length != num_vars {n}"));
    }
    for (j, c) in inst.obj.iter().enumerate() {
        if !c.is_finite() {
            out.push(format!("non-finite objective at {j}"));
        }
    }

    let mut seen_int = vec![false; n];
    let mut seen_cont = vec![false; n];
    for &j in &inst.integer_set {
        if j >= n {
            out.push(format!("integer index out of range {j}"));
        } else if seen_int[j] {
            out.push(format!("duplicate integer index {j}"));
        } else {
            seen_int[j] = true;
        }
    }
    for &j in &inst.continuous_set {
        if j >= n {
            out.push(format!("continuous index out of range {j}"));
        } else if seen_cont[j] {
            out.push(format!("duplicate continuous index {j}"));
        } else {
            seen_cont[j] = true;
        }
    }
    for j in 0..n {
        match (seen_int[j], seen_cont[j]) {
            (true, true) => out.push(format!("partition overlap at {j}")),
            (false, false) => out.push(format!("partition missing {j}")),
            _ => {}
        }
    }

    for (i, row) in inst.rows.iter().enumerate() {
        if row.iter().all(|&(_, a)| a == 0.0) {
            out.push(format!("empty row {i}"));
        }
        for &(j, a) in row {
            if j >= n {
                out.push(format!("column out of range in row {i}: {j}"));
            }
            if !a.is_finite() {
                out.push(format!("non-finite coefficient in row {i} at {j}"));
            }
        }
    }
    for (i, b) in inst.rhs.iter().enumerate() {
        if !b.is_finite() {
            out.push(format!("non-finite rhs {i}"));
        }
    }
    for j in 0..inst.var_lower.len().min(inst.var_upper.len()) {
        let (lo, up) = (inst.var_lower[j], inst.var_upper[j]);
        if lo.is_nan() || up.is_nan() || lo > up {
            out.push(format!("bounds inverted at {j}"));
        }
    }
    out
}

/// Negates the objective, turning `max c·x` into `min −c·x`. Applying it
/// twice restores the original instance, flag included.
pub fn negate_to_min(inst: &MilpInstance) -> MilpInstance {
    let mut out = inst.clone();
    for c in &mut out.obj {
        *c = -*c;
    }
    out.maximize_origin = !inst.maximize_origin;
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    NonbasicFree,
}

impl BasisStatus {
    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self as usize] = 1.0;
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub z_lp: f64,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    /// Status of each structural column.
    pub basis: Vec<BasisStatus>,
    /// Status of each row's surplus column; needed to warm start.
    pub row_basis: Vec<BasisStatus>,
    pub iterations: usize,
    /// For `Unbounded`: an improving direction in the structural space.
    pub ray: Option<Vec<f64>>,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, iterations: usize) -> Self {
        LpSolution {
            status,
            z_lp: match status {
                LpStatus::Infeasible => f64::INFINITY,
                LpStatus::Unbounded => f64::NEG_INFINITY,
                LpStatus::Optimal => f64::NAN,
            },
            x: Vec::new(),
            duals: Vec::new(),
            reduced_costs: Vec::new(),
            basis: Vec::new(),
            row_basis: Vec::new(),
            iterations,
            ray: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
