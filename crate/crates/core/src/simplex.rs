//! Bounded revised simplex for the LP relaxations of a [`MilpInstance`].
//!
//! Rows `A x ≥ b` are turned into equalities with one surplus column per
//! row, `A x − s = b`, `s ≥ 0`. The basis is factorized through its
//! structural kernel: the basic surplus columns are unit vectors, so only
//! the square block formed by the basic structural columns and the rows
//! whose surplus is nonbasic needs a dense LU. Pivots between
//! refactorizations are kept as product-form eta columns.
//!
//! Cold starts use the dual simplex from the all-surplus basis whenever the
//! structural columns can be placed at dual feasible bounds, and a
//! composite phase-1/phase-2 primal simplex otherwise. Warm starts from a
//! parent basis after bound changes use the dual simplex. Pricing is
//! Dantzig's rule; after `3·(n+m)` pivots without objective progress both
//! methods switch to Bland's smallest-index rule.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::DenseLu;
use crate::model::{BasisStatus, LpSolution, LpStatus, MilpInstance};

const NONE: usize = usize::MAX;

/// Per-variable bound overrides applied on top of the instance bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundSet {
    overrides: BTreeMap<usize, (f64, f64)>,
}

impl BoundSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, var: usize, lower: f64, upper: f64) {
        self.overrides.insert(var, (lower, upper));
    }

    pub fn get(&self, var: usize) -> Option<(f64, f64)> {
        self.overrides.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.overrides.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overrides.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.overrides.iter().map(|(&j, &(lo, up))| (j, lo, up))
    }

    /// Effective bounds of `var` given the instance defaults.
    pub fn bounds_of(&self, inst: &MilpInstance, var: usize) -> (f64, f64) {
        self.get(var).unwrap_or((inst.var_lower[var], inst.var_upper[var]))
    }

    /// Intersects the current bounds of `var` with `upper ≤ value`.
    pub fn tighten_upper(&mut self, inst: &MilpInstance, var: usize, value: f64) {
        let (lo, up) = self.bounds_of(inst, var);
        self.set(var, lo, up.min(value));
    }

    pub fn tighten_lower(&mut self, inst: &MilpInstance, var: usize, value: f64) {
        let (lo, up) = self.bounds_of(inst, var);
        self.set(var, lo.max(value), up);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpParams {
    /// Pivot limit; defaults to `50·(n+m)`.
    pub max_iters: Option<usize>,
    pub refactor_period: usize,
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
}

impl Default for LpParams {
    fn default() -> Self {
        LpParams { max_iters: None, refactor_period: 50, feas_tol: 1e-9, opt_tol: 1e-9, pivot_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpError {
    /// Pivot limit exceeded or the basis became singular.
    NumericalBreakdown { iterations: usize },
}

impl fmt::Display for LpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LpError::NumericalBreakdown { iterations } => {
                write!(f, "simplex numerical breakdown after {iterations} pivots")
            }
        }
    }
}

impl core::error::Error for LpError {}

/// Solves the LP relaxation of `inst` under `bounds` from scratch.
pub fn solve_lp(inst: &MilpInstance, bounds: &BoundSet) -> Result<LpSolution, LpError> {
    LpSolver::new(inst).solve(bounds)
}

/// Re-solves after a bound change starting from the basis of `prev`.
pub fn resolve_from_basis(
    inst: &MilpInstance,
    prev: &LpSolution,
    bounds: &BoundSet,
) -> Result<LpSolution, LpError> {
    LpSolver::new(inst).resolve(prev, bounds)
}

/// Reusable solver context for one instance. Holds a column-major copy of
/// the constraint matrix; each solve allocates its own working state.
#[derive(Debug, Clone)]
pub struct LpSolver<'a> {
    inst: &'a MilpInstance,
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    pub params: LpParams,
}

impl<'a> LpSolver<'a> {
    pub fn new(inst: &'a MilpInstance) -> Self {
        let n = inst.num_vars;
        let m = inst.num_cons;
        let mut counts = vec![0usize; n + 1];
        for row in &inst.rows {
            for &(j, a) in row {
                if a != 0.0 {
                    counts[j + 1] += 1;
                }
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let mut fill = counts;
        let nnz = col_start[n];
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        for (i, row) in inst.rows.iter().enumerate() {
            for &(j, a) in row {
                if a != 0.0 {
                    col_row[fill[j]] = i;
                    col_val[fill[j]] = a;
                    fill[j] += 1;
                }
            }
        }
        LpSolver { inst, n, m, col_start, col_row, col_val, params: LpParams::default() }
    }

    pub fn instance(&self) -> &'a MilpInstance {
        self.inst
    }

    pub fn solve(&self, bounds: &BoundSet) -> Result<LpSolution, LpError> {
        let Some(mut work) = Work::cold(self, bounds) else {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
        };
        work.run()
    }

    /// Warm start from `prev`'s basis; falls back to a cold solve when the
    /// old basis cannot be reused or the warm run breaks down.
    pub fn resolve(&self, prev: &LpSolution, bounds: &BoundSet) -> Result<LpSolution, LpError> {
        if prev.status != LpStatus::Optimal
            || prev.basis.len() != self.n
            || prev.row_basis.len() != self.m
        {
            return self.solve(bounds);
        }
        match Work::warm(self, prev, bounds) {
            WarmStart::Infeasible => Ok(LpSolution::without_point(LpStatus::Infeasible, 0)),
            WarmStart::Unusable => self.solve(bounds),
            WarmStart::Ready(mut work) => match work.run() {
                Ok(sol) => Ok(sol),
                Err(_) => self.solve(bounds),
            },
        }
    }

    fn cost(&self, j: usize) -> f64 {
        if j < self.n {
            self.inst.obj[j]
        } else {
            0.0
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (range, slack) = if j < self.n {
            (self.col_start[j]..self.col_start[j + 1], None)
        } else {
            (0..0, Some(j - self.n))
        };
        self.col_row[range.clone()]
            .iter()
            .copied()
            .zip(self.col_val[range].iter().copied())
            .chain(slack.map(|i| (i, -1.0)))
    }

    fn dot_column(&self, v: &[f64], j: usize) -> f64 {
        if j < self.n {
            let r = self.col_start[j]..self.col_start[j + 1];
            self.col_row[r.clone()].iter().zip(&self.col_val[r]).map(|(&i, &a)| v[i] * a).sum()
        } else {
            -v[j - self.n]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    Free,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// Basis factorization: kernel LU plus eta file.
#[derive(Debug, Clone, Default)]
struct Factor {
    k: usize,
    kernel_cols: Vec<usize>,
    kernel_rows: Vec<usize>,
    row_slot: Vec<usize>,
    /// Basis head at refactor time.
    base_head: Vec<usize>,
    lu: DenseLu,
    etas: Vec<Eta>,
}

enum Outcome {
    Optimal,
    Infeasible,
    Unbounded(Vec<f64>),
    /// The dual simplex found the basis not dual feasible.
    NotDualFeasible,
}

enum WarmStart<'s, 'a> {
    Ready(Work<'s, 'a>),
    Infeasible,
    Unusable,
}

struct Work<'s, 'a> {
    s: &'s LpSolver<'a>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    head: Vec<usize>,
    factor: Factor,
    iters: usize,
    max_iters: usize,
}

impl<'s, 'a> Work<'s, 'a> {
    fn with_bounds(s: &'s LpSolver<'a>, bounds: &BoundSet) -> Option<Self> {
        let (n, m) = (s.n, s.m);
        let mut lo = vec![0.0; n + m];
        let mut up = vec![f64::INFINITY; n + m];
        for j in 0..n {
            let (l, u) = bounds.bounds_of(s.inst, j);
            if l > u + s.params.feas_tol {
                return None;
            }
            lo[j] = l;
            up[j] = u.max(l);
        }
        Some(Work {
            s,
            lo,
            up,
            x: vec![0.0; n + m],
            state: vec![State::Lower; n + m],
            head: Vec::new(),
            factor: Factor::default(),
            iters: 0,
            max_iters: s.params.max_iters.unwrap_or(50 * (n + m).max(1)),
        })
    }

    fn cold(s: &'s LpSolver<'a>, bounds: &BoundSet) -> Option<Self> {
        let mut w = Self::with_bounds(s, bounds)?;
        let n = s.n;
        for j in 0..n {
            let c = s.cost(j);
            let (l, u) = (w.lo[j], w.hi(j));
            let st = if c > 0.0 {
                if l.is_finite() {
                    State::Lower
                } else if u.is_finite() {
                    State::Upper
                } else {
                    State::Free
                }
            } else if c < 0.0 {
                if u.is_finite() {
                    State::Upper
                } else if l.is_finite() {
                    State::Lower
                } else {
                    State::Free
                }
            } else if l.is_finite() {
                State::Lower
            } else if u.is_finite() {
                State::Upper
            } else {
                State::Free
            };
            w.set_nonbasic(j, st);
        }
        for i in 0..s.m {
            w.state[n + i] = State::Basic;
        }
        w.head = (n..n + s.m).collect();
        w.refactor().ok()?;
        w.compute_xb();
        Some(w)
    }

    fn warm(s: &'s LpSolver<'a>, prev: &LpSolution, bounds: &BoundSet) -> WarmStart<'s, 'a> {
        let Some(mut w) = Self::with_bounds(s, bounds) else {
            return WarmStart::Infeasible;
        };
        let n = s.n;
        let mut head = Vec::with_capacity(s.m);
        let statuses = prev.basis.iter().chain(&prev.row_basis).copied().enumerate();
        for (j, st) in statuses {
            let st = match st {
                BasisStatus::Basic => {
                    head.push(j);
                    State::Basic
                }
                BasisStatus::AtLower => State::Lower,
                BasisStatus::AtUpper => State::Upper,
                BasisStatus::NonbasicFree => State::Free,
            };
            if st == State::Basic {
                w.state[j] = st;
            } else {
                let st = w.feasible_state(j, st);
                w.set_nonbasic(j, st);
            }
        }
        if head.len() != s.m {
            return WarmStart::Unusable;
        }
        debug_assert!(head.iter().all(|&j| j < n + s.m));
        w.head = head;
        if w.refactor().is_err() {
            return WarmStart::Unusable;
        }
        w.compute_xb();
        WarmStart::Ready(w)
    }

    fn hi(&self, j: usize) -> f64 {
        self.up[j]
    }

    /// Closest valid nonbasic state to `want` given the current bounds.
    fn feasible_state(&self, j: usize, want: State) -> State {
        let (l, u) = (self.lo[j], self.up[j]);
        match want {
            State::Upper if u.is_finite() => State::Upper,
            State::Lower if l.is_finite() => State::Lower,
            _ if l.is_finite() => State::Lower,
            _ if u.is_finite() => State::Upper,
            _ => State::Free,
        }
    }

    fn set_nonbasic(&mut self, j: usize, st: State) {
        self.state[j] = st;
        self.x[j] = match st {
            State::Lower => self.lo[j],
            State::Upper => self.up[j],
            _ => 0.0,
        };
    }

    fn n_total(&self) -> usize {
        self.s.n + self.s.m
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let (n, m) = (self.s.n, self.s.m);
        let mut kernel_cols = Vec::new();
        let mut slack_basic = vec![false; m];
        for &j in &self.head {
            if j < n {
                kernel_cols.push(j);
            } else {
                slack_basic[j - n] = true;
            }
        }
        kernel_cols.sort_unstable();
        let kernel_rows: Vec<usize> = (0..m).filter(|&i| !slack_basic[i]).collect();
        let k = kernel_cols.len();
        if kernel_rows.len() != k {
            return Err(LpError::NumericalBreakdown { iterations: self.iters });
        }
        let mut row_slot = vec![NONE; m];
        for (r, &i) in kernel_rows.iter().enumerate() {
            row_slot[i] = r;
        }
        let mut dense = vec![0.0; k * k];
        for (c, &j) in kernel_cols.iter().enumerate() {
            for (i, a) in self.s.column(j) {
                let r = row_slot[i];
                if r != NONE {
                    dense[r * k + c] = a;
                }
            }
        }
        let lu = DenseLu::factorize(dense, k, 1e-11)
            .ok_or(LpError::NumericalBreakdown { iterations: self.iters })?;
        let mut head = kernel_cols.clone();
        head.extend((0..m).filter(|&i| slack_basic[i]).map(|i| n + i));
        self.head = head.clone();
        self.factor = Factor { k, kernel_cols, kernel_rows, row_slot, base_head: head, lu, etas: Vec::new() };
        Ok(())
    }

    /// Solves `B z = a` for a dense row-indexed `a`; result is per position.
    fn ftran(&self, a: &[f64]) -> Vec<f64> {
        let f = &self.factor;
        let (n, m, k) = (self.s.n, self.s.m, f.k);
        let mut z = vec![0.0; m];
        let mut kern: Vec<f64> = f.kernel_rows.iter().map(|&i| a[i]).collect();
        f.lu.solve(&mut kern);
        let mut acc = vec![0.0; m];
        for (c, &j) in f.kernel_cols.iter().enumerate() {
            let v = kern[c];
            z[c] = v;
            if v != 0.0 {
                for (i, aij) in self.s.column(j) {
                    acc[i] += aij * v;
                }
            }
        }
        for p in k..m {
            let i = f.base_head[p] - n;
            z[p] = acc[i] - a[i];
        }
        for eta in &f.etas {
            let zr = z[eta.pos] / eta.pivot;
            z[eta.pos] = zr;
            if zr != 0.0 {
                for &(p, v) in &eta.entries {
                    z[p] -= v * zr;
                }
            }
        }
        z
    }

    /// Solves `yᵀ B = cᵀ` for `c` given per position; `y` is row-indexed.
    fn btran(&self, c: &[f64]) -> Vec<f64> {
        let f = &self.factor;
        let (n, m, k) = (self.s.n, self.s.m, f.k);
        let mut w = c.to_vec();
        for eta in f.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(p, v)| w[p] * v).sum();
            w[eta.pos] = (w[eta.pos] - s) / eta.pivot;
        }
        let mut y = vec![0.0; m];
        for p in k..m {
            y[f.base_head[p] - n] = -w[p];
        }
        let mut rhs = vec![0.0; k];
        for (c_idx, &j) in f.kernel_cols.iter().enumerate() {
            let mut s = w[c_idx];
            for (i, a) in self.s.column(j) {
                if f.row_slot[i] == NONE {
                    s -= y[i] * a;
                }
            }
            rhs[c_idx] = s;
        }
        f.lu.solve_transposed(&mut rhs);
        for (r, &i) in f.kernel_rows.iter().enumerate() {
            y[i] = rhs[r];
        }
        y
    }

    fn dense_column(&self, j: usize) -> Vec<f64> {
        let mut a = vec![0.0; self.s.m];
        for (i, v) in self.s.column(j) {
            a[i] = v;
        }
        a
    }

    fn compute_xb(&mut self) {
        let mut rhs = self.s.inst.rhs.clone();
        for j in 0..self.n_total() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (i, a) in self.s.column(j) {
                    rhs[i] -= a * xj;
                }
            }
        }
        let z = self.ftran(&rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = z[p];
        }
    }

    fn pivot(&mut self, pos: usize, entering: usize, alpha: &[f64]) -> Result<(), LpError> {
        let leaving = self.head[pos];
        debug_assert_ne!(self.state[leaving], State::Basic);
        self.head[pos] = entering;
        self.state[entering] = State::Basic;
        if self.factor.etas.len() + 1 >= self.s.params.refactor_period {
            self.refactor()?;
            self.compute_xb();
        } else {
            let entries = alpha
                .iter()
                .enumerate()
                .filter(|&(p, &v)| p != pos && v != 0.0)
                .map(|(p, &v)| (p, v))
                .collect();
            self.factor.etas.push(Eta { pos, pivot: alpha[pos], entries });
        }
        Ok(())
    }

    fn basic_costs(&self, phase1: bool) -> Vec<f64> {
        let tol = self.s.params.feas_tol;
        self.head
            .iter()
            .map(|&j| {
                if phase1 {
                    if self.x[j] < self.lo[j] - tol {
                        -1.0
                    } else if self.x[j] > self.up[j] + tol {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.s.cost(j)
                }
            })
            .collect()
    }

    fn infeasibility(&self) -> f64 {
        let tol = self.s.params.feas_tol;
        self.head
            .iter()
            .map(|&j| {
                let x = self.x[j];
                if x < self.lo[j] - tol {
                    self.lo[j] - x
                } else if x > self.up[j] + tol {
                    x - self.up[j]
                } else {
                    0.0
                }
            })
            .sum()
    }

    fn objective(&self) -> f64 {
        (0..self.s.n).map(|j| self.s.cost(j) * self.x[j]).sum()
    }

    fn check_iters(&self) -> Result<(), LpError> {
        if self.iters >= self.max_iters {
            Err(LpError::NumericalBreakdown { iterations: self.iters })
        } else {
            Ok(())
        }
    }

    fn is_dual_feasible(&self, y: &[f64]) -> bool {
        let tol = 1e-7;
        (0..self.n_total()).all(|j| {
            let st = self.state[j];
            if st == State::Basic || self.lo[j] == self.up[j] {
                return true;
            }
            let d = self.s.cost(j) - self.s.dot_column(y, j);
            match st {
                State::Lower => d >= -tol,
                State::Upper => d <= tol,
                State::Free => d.abs() <= tol,
                State::Basic => true,
            }
        })
    }

    fn run(&mut self) -> Result<LpSolution, LpError> {
        let mut refreshed = false;
        loop {
            let y = self.btran(&self.basic_costs(false));
            let outcome = if self.is_dual_feasible(&y) {
                match self.dual()? {
                    Outcome::NotDualFeasible => self.primal()?,
                    other => other,
                }
            } else {
                self.primal()?
            };
            match outcome {
                Outcome::Optimal => {
                    if self.verify() {
                        return Ok(self.extract());
                    }
                    if refreshed {
                        return Err(LpError::NumericalBreakdown { iterations: self.iters });
                    }
                    refreshed = true;
                    self.refactor()?;
                    self.compute_xb();
                }
                Outcome::Infeasible => {
                    return Ok(LpSolution::without_point(LpStatus::Infeasible, self.iters));
                }
                Outcome::Unbounded(ray) => {
                    let mut sol = LpSolution::without_point(LpStatus::Unbounded, self.iters);
                    sol.ray = Some(ray);
                    return Ok(sol);
                }
                Outcome::NotDualFeasible => unreachable!(),
            }
        }
    }

    fn primal(&mut self) -> Result<Outcome, LpError> {
        let p = self.s.params;
        let total = self.n_total();
        let stall_limit = 3 * total;
        let mut bland = false;
        let mut best = f64::INFINITY;
        let mut stall = 0usize;
        let mut last_phase1 = None;
        loop {
            self.check_iters()?;
            let infeas = self.infeasibility();
            let phase1 = infeas > 0.0;
            if last_phase1 != Some(phase1) {
                last_phase1 = Some(phase1);
                best = f64::INFINITY;
                stall = 0;
                bland = false;
            }
            let obj = if phase1 { infeas } else { self.objective() };
            if obj < best - 1e-12 * (1.0 + best.abs().min(1e300)) {
                best = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            }

            let y = self.btran(&self.basic_costs(phase1));
            let mut entering = NONE;
            let mut best_d = 0.0;
            let mut entering_d = 0.0;
            for j in 0..total {
                let st = self.state[j];
                if st == State::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let c = if phase1 { 0.0 } else { self.s.cost(j) };
                let d = c - self.s.dot_column(&y, j);
                let eligible = match st {
                    State::Lower => d < -p.opt_tol,
                    State::Upper => d > p.opt_tol,
                    State::Free => d.abs() > p.opt_tol,
                    State::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = j;
                    entering_d = d;
                    break;
                }
                if d.abs() > best_d {
                    best_d = d.abs();
                    entering = j;
                    entering_d = d;
                }
            }
            if entering == NONE {
                return Ok(if phase1 { Outcome::Infeasible } else { Outcome::Optimal });
            }
            let q = entering;
            let sigma = if entering_d < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(&self.dense_column(q));

            // Ratio test over the basic variables.
            let mut limits: Vec<(usize, f64, State)> = Vec::new();
            let mut t_min = f64::INFINITY;
            for (pos, &a) in alpha.iter().enumerate() {
                if a.abs() <= p.pivot_tol {
                    continue;
                }
                let j = self.head[pos];
                let (x, l, u) = (self.x[j], self.lo[j], self.up[j]);
                let rate = -sigma * a;
                let hit = if rate < 0.0 {
                    if x > u + p.feas_tol {
                        Some(((x - u) / -rate, State::Upper))
                    } else if x >= l - p.feas_tol && l.is_finite() {
                        Some(((x - l).max(0.0) / -rate, State::Lower))
                    } else {
                        None
                    }
                } else if x < l - p.feas_tol {
                    Some(((l - x) / rate, State::Lower))
                } else if x <= u + p.feas_tol && u.is_finite() {
                    Some(((u - x).max(0.0) / rate, State::Upper))
                } else {
                    None
                };
                if let Some((t, st)) = hit {
                    t_min = t_min.min(t);
                    limits.push((pos, t, st));
                }
            }
            let flip = self.up[q] - self.lo[q];
            if limits.is_empty() && !flip.is_finite() {
                if phase1 {
                    return Err(LpError::NumericalBreakdown { iterations: self.iters });
                }
                let mut ray = vec![0.0; self.s.n];
                if q < self.s.n {
                    ray[q] = sigma;
                }
                for (pos, &a) in alpha.iter().enumerate() {
                    let j = self.head[pos];
                    if j < self.s.n {
                        ray[j] = -sigma * a;
                    }
                }
                return Ok(Outcome::Unbounded(ray));
            }
            self.iters += 1;
            if flip.is_finite() && flip <= t_min {
                for (pos, &a) in alpha.iter().enumerate() {
                    let j = self.head[pos];
                    self.x[j] -= sigma * flip * a;
                }
                let st = if self.state[q] == State::Lower { State::Upper } else { State::Lower };
                self.set_nonbasic(q, st);
                continue;
            }
            let slack = 1e-12 * (1.0 + t_min);
            let mut choice: Option<(usize, f64, State)> = None;
            for &(pos, t, st) in &limits {
                if t > t_min + slack {
                    continue;
                }
                let better = match choice {
                    None => true,
                    Some((cp, _, _)) => {
                        if bland {
                            self.head[pos] < self.head[cp]
                        } else {
                            alpha[pos].abs() > alpha[cp].abs()
                        }
                    }
                };
                if better {
                    choice = Some((pos, t, st));
                }
            }
            let (r, theta, leave_state) = choice.expect("ratio test candidate");
            let theta = theta.max(0.0);
            for (pos, &a) in alpha.iter().enumerate() {
                let j = self.head[pos];
                self.x[j] -= sigma * theta * a;
            }
            self.x[q] += sigma * theta;
            let leaving = self.head[r];
            self.set_nonbasic(leaving, leave_state);
            self.pivot(r, q, &alpha)?;
        }
    }

    fn dual(&mut self) -> Result<Outcome, LpError> {
        let p = self.s.params;
        let total = self.n_total();
        let stall_limit = 3 * total;
        let mut bland = false;
        let mut best = f64::NEG_INFINITY;
        let mut stall = 0usize;
        loop {
            self.check_iters()?;
            let obj = self.objective();
            if obj > best + 1e-12 * (1.0 + best.abs().min(1e300)) {
                best = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            }

            // Leaving row: largest bound violation.
            let mut r = NONE;
            let mut worst = 0.0;
            for (pos, &j) in self.head.iter().enumerate() {
                let (x, l, u) = (self.x[j], self.lo[j], self.up[j]);
                let viol = if x < l - p.feas_tol {
                    l - x
                } else if x > u + p.feas_tol {
                    x - u
                } else {
                    continue;
                };
                let better = if bland { r == NONE || j < self.head[r] } else { viol > worst };
                if better {
                    worst = viol;
                    r = pos;
                }
            }
            if r == NONE {
                return Ok(Outcome::Optimal);
            }
            let leaving = self.head[r];
            let increase = self.x[leaving] < self.lo[leaving];

            let y = self.btran(&self.basic_costs(false));
            let mut unit = vec![0.0; self.s.m];
            unit[r] = 1.0;
            let rho = self.btran(&unit);

            let mut q = NONE;
            let mut q_ratio = f64::INFINITY;
            let mut q_alpha = 0.0;
            for j in 0..total {
                let st = self.state[j];
                if st == State::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let a = self.s.dot_column(&rho, j);
                if a.abs() <= p.pivot_tol {
                    continue;
                }
                let can_up = matches!(st, State::Lower | State::Free);
                let can_down = matches!(st, State::Upper | State::Free);
                let eligible = if increase {
                    (can_up && a < 0.0) || (can_down && a > 0.0)
                } else {
                    (can_up && a > 0.0) || (can_down && a < 0.0)
                };
                if !eligible {
                    continue;
                }
                let d = self.s.cost(j) - self.s.dot_column(&y, j);
                let bad = match st {
                    State::Lower => d < -1e-7,
                    State::Upper => d > 1e-7,
                    State::Free => d.abs() > 1e-7,
                    State::Basic => false,
                };
                if bad {
                    return Ok(Outcome::NotDualFeasible);
                }
                let ratio = d.abs() / a.abs();
                let better = if ratio < q_ratio - 1e-12 {
                    true
                } else if ratio <= q_ratio + 1e-12 {
                    if bland {
                        j < q
                    } else {
                        a.abs() > q_alpha
                    }
                } else {
                    false
                };
                if better {
                    q = j;
                    q_ratio = ratio.min(q_ratio);
                    q_alpha = a.abs();
                }
            }
            if q == NONE {
                return Ok(Outcome::Infeasible);
            }
            let alpha = self.ftran(&self.dense_column(q));
            if alpha[r].abs() <= p.pivot_tol {
                // Row and column computations disagree; rebuild and retry.
                self.refactor()?;
                self.compute_xb();
                self.iters += 1;
                continue;
            }
            let target = if increase { self.lo[leaving] } else { self.up[leaving] };
            let delta = (self.x[leaving] - target) / alpha[r];
            for (pos, &a) in alpha.iter().enumerate() {
                let j = self.head[pos];
                self.x[j] -= a * delta;
            }
            self.x[q] += delta;
            self.set_nonbasic(leaving, if increase { State::Lower } else { State::Upper });
            self.iters += 1;
            self.pivot(r, q, &alpha)?;
        }
    }

    /// Row activities and bounds within tolerance of the recomputed point.
    fn verify(&mut self) -> bool {
        self.compute_xb();
        let inst = self.s.inst;
        let n = self.s.n;
        let tol = 1e-6;
        for j in 0..self.n_total() {
            if self.x[j] < self.lo[j] - tol || self.x[j] > self.up[j] + tol {
                return false;
            }
        }
        let x = &self.x[..n];
        (0..self.s.m).all(|i| inst.row_activity(i, x) >= inst.rhs[i] - tol)
    }

    fn extract(&self) -> LpSolution {
        let n = self.s.n;
        let y = self.btran(&self.basic_costs(false));
        let x: Vec<f64> = (0..n).map(|j| self.x[j].clamp(self.lo[j], self.up[j])).collect();
        let reduced_costs = (0..n)
            .map(|j| if self.state[j] == State::Basic { 0.0 } else { self.s.cost(j) - self.s.dot_column(&y, j) })
            .collect();
        let status = |st: State| match st {
            State::Basic => BasisStatus::Basic,
            State::Lower => BasisStatus::AtLower,
            State::Upper => BasisStatus::AtUpper,
            State::Free => BasisStatus::NonbasicFree,
        };
        LpSolution {
            status: LpStatus::Optimal,
            z_lp: self.s.inst.objective(&x),
            basis: self.state[..n].iter().map(|&s| status(s)).collect(),
            row_basis: self.state[n..].iter().map(|&s| status(s)).collect(),
            x,
            duals: y,
            reduced_costs,
            iterations: self.iters,
            ray: None,
        }
    }
}

/// Dual objective `b·y + Σ_j (reduced cost at its active bound)`.
pub fn dual_objective(inst: &MilpInstance, bounds: &BoundSet, sol: &LpSolution) -> f64 {
    let mut z: f64 = inst.rhs.iter().zip(&sol.duals).map(|(b, y)| b * y).sum();
    for (j, &d) in sol.reduced_costs.iter().enumerate() {
        let (lo, up) = bounds.bounds_of(inst, j);
        if d > 0.0 {
            z += d * lo;
        } else if d < 0.0 {
            z += d * up;
        }
    }
    z
}
