//! LP-based branch and bound with best-bound node selection,
//! most-fractional branching and pseudocost node estimates.

use alloc::collections::BTreeSet;
use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use crate::model::{validate, LpSolution, LpStatus, MilpInstance};
use crate::ord::Key;
use crate::rng::{derive_seed, Rng};
use crate::simplex::{BoundSet, LpError, LpSolver};
pub use crate::tree::Proof;
use crate::tree::{ChildInfo, EventKind, PruneReason, TreeEvent, TreeState};

/// Integrality tolerance for LP values.
pub const INT_TOL: f64 = 1e-6;
/// Relative tolerance of the pruning test `z ≥ z̄ − tol·(1+|z̄|)`.
pub const PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveParams {
    pub node_limit: usize,
    /// Seconds; only enforced by [`solve_with_clock`].
    pub time_limit: Option<f64>,
    /// Permutes the column order; 0 keeps the instance order.
    pub seed: u64,
    /// The rounding heuristic runs at the root and at every processed node
    /// whose index is a multiple of this period.
    pub heuristic_period: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { node_limit: usize::MAX, time_limit: None, seed: 0, heuristic_period: 10 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Best objective found (min form); `+∞` without an incumbent.
    pub z_star: f64,
    pub x_star: Option<Vec<f64>>,
    /// Processed nodes.
    pub node_count: usize,
    pub proof: Proof,
    pub event_log: Vec<TreeEvent>,
    /// `(t, z̄)` at every incumbent improvement.
    pub incumbent_history: Vec<(usize, f64)>,
    /// Tracker state after the last event.
    pub final_state: TreeState,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BnbError {
    InvalidInstance(Vec<String>),
    InfeasibleInstance,
    UnboundedRelaxation,
    Lp(LpError),
}

impl fmt::Display for BnbError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BnbError::InvalidInstance(v) => write!(f, "invalid instance: {}", v.join("; ")),
            BnbError::InfeasibleInstance => write!(f, "instance has no feasible solution"),
            BnbError::UnboundedRelaxation => write!(f, "LP relaxation is unbounded"),
            BnbError::Lp(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for BnbError {}

impl From<LpError> for BnbError {
    fn from(e: LpError) -> Self {
        BnbError::Lp(e)
    }
}

/// Receives every event synchronously, after the tracker has applied it.
pub trait Observer {
    fn on_event(&mut self, event: &TreeEvent, state: &TreeState);
}

/// Observer that ignores everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoObserver;

impl Observer for NoObserver {
    fn on_event(&mut self, _: &TreeEvent, _: &TreeState) {}
}

impl<F: FnMut(&TreeEvent, &TreeState)> Observer for F {
    fn on_event(&mut self, event: &TreeEvent, state: &TreeState) {
        self(event, state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

/// Per-variable average objective degradation per unit of bound change.
#[derive(Debug, Clone, PartialEq)]
pub struct Pseudocosts {
    down: Vec<f64>,
    up: Vec<f64>,
    down_n: Vec<u32>,
    up_n: Vec<u32>,
    fallback: Vec<f64>,
}

impl Pseudocosts {
    /// Uninitialized entries report `|c_j|`.
    pub fn new(obj: &[f64]) -> Self {
        let n = obj.len();
        Pseudocosts {
            down: vec![0.0; n],
            up: vec![0.0; n],
            down_n: vec![0; n],
            up_n: vec![0; n],
            fallback: obj.iter().map(|c| c.abs()).collect(),
        }
    }

    pub fn get(&self, j: usize, dir: Direction) -> f64 {
        match dir {
            Direction::Down if self.down_n[j] > 0 => self.down[j],
            Direction::Up if self.up_n[j] > 0 => self.up[j],
            _ => self.fallback[j],
        }
    }

    pub fn count(&self, j: usize, dir: Direction) -> u32 {
        match dir {
            Direction::Down => self.down_n[j],
            Direction::Up => self.up_n[j],
        }
    }

    /// Folds `Δz/Δbound` into the running mean. Negative degradations from
    /// LP round-off count as zero.
    pub fn update(&mut self, j: usize, dir: Direction, dz: f64, dbound: f64) {
        debug_assert!(dbound > 0.0);
        let obs = dz.max(0.0) / dbound;
        let (mean, n) = match dir {
            Direction::Down => (&mut self.down[j], &mut self.down_n[j]),
            Direction::Up => (&mut self.up[j], &mut self.up_n[j]),
        };
        *n += 1;
        *mean += (obs - *mean) / f64::from(*n);
    }
}

/// `ĉ = z + Σ min(Ψ⁻_j f_j, Ψ⁺_j (1 − f_j))` over the given
/// `(variable, fractional part)` pairs.
pub fn node_estimate(z_lp_parent: f64, fracs: &[(usize, f64)], pc: &Pseudocosts) -> f64 {
    z_lp_parent
        + fracs
            .iter()
            .map(|&(j, f)| (pc.get(j, Direction::Down) * f).min(pc.get(j, Direction::Up) * (1.0 - f)))
            .sum::<f64>()
}

/// Fractional integer variables of `x` with their fractional parts, in
/// index order.
pub fn fractional_parts(x: &[f64], integral: &[bool]) -> Vec<(usize, f64)> {
    (0..x.len())
        .filter(|&j| integral[j])
        .filter_map(|j| {
            let f = x[j] - libm::floor(x[j]);
            let dist = f.min(1.0 - f);
            (dist > INT_TOL).then_some((j, f))
        })
        .collect()
}

/// Most fractional integer variable, ties to the lowest index.
pub fn most_fractional(x: &[f64], integral: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, f) in fractional_parts(x, integral) {
        let dist = f.min(1.0 - f);
        if best.is_none_or(|(_, b)| dist > b) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Rounds the integer variables of an LP point to the nearest integer and,
/// if that violates a row, down. Returns the first feasible candidate.
pub fn rounding_heuristic(inst: &MilpInstance, x: &[f64]) -> Option<Vec<f64>> {
    let integral = inst.integrality();
    let nearest: Vec<f64> = x.iter().zip(&integral).map(|(&v, &int)| if int { libm::round(v) } else { v }).collect();
    if inst.is_feasible(&nearest, INT_TOL) {
        return Some(nearest);
    }
    let floor: Vec<f64> = x
        .iter()
        .zip(&integral)
        .map(|(&v, &int)| if int { libm::floor(v + INT_TOL) } else { v })
        .collect();
    inst.is_feasible(&floor, INT_TOL).then_some(floor)
}

fn cutoff(z_bar: f64) -> f64 {
    if z_bar == f64::INFINITY {
        return f64::INFINITY;
    }
    z_bar - PRUNE_TOL * (1.0 + z_bar.abs())
}

struct Node {
    depth: usize,
    bounds: BoundSet,
    /// LP value of the parent.
    bound: f64,
    warm: Option<Rc<LpSolution>>,
    /// Variable, direction and bound change that created this node.
    branch: Option<(usize, Direction, f64)>,
}

type OpenKey = (Key, Reverse<usize>, usize);

/// Column permutation driven by the seed. `perm[k]` is the original index
/// of permuted column `k`.
fn column_order(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    if seed != 0 {
        Rng::new(derive_seed(seed, 0x5EED)).shuffle(&mut perm);
    }
    perm
}

fn permuted(inst: &MilpInstance, perm: &[usize]) -> MilpInstance {
    let n = inst.num_vars;
    let mut inv = vec![0; n];
    for (k, &j) in perm.iter().enumerate() {
        inv[j] = k;
    }
    let rows = inst
        .rows
        .iter()
        .map(|r| {
            let mut r: Vec<(usize, f64)> = r.iter().map(|&(j, a)| (inv[j], a)).collect();
            r.sort_by_key(|&(k, _)| k);
            r
        })
        .collect();
    let mut ints: Vec<usize> = inst.integer_set.iter().map(|&j| inv[j]).collect();
    ints.sort_unstable();
    let mut out = MilpInstance::new(
        inst.name.clone(),
        perm.iter().map(|&j| inst.obj[j]).collect(),
        rows,
        inst.rhs.clone(),
        ints,
        perm.iter().map(|&j| inst.var_lower[j]).collect(),
        perm.iter().map(|&j| inst.var_upper[j]).collect(),
    );
    out.maximize_origin = inst.maximize_origin;
    out
}

/// Solves without a time limit.
pub fn solve(inst: &MilpInstance, params: &SolveParams, observer: &mut dyn Observer) -> Result<SolveResult, BnbError> {
    solve_with_clock(inst, params, observer, &|| 0.0)
}

/// Solves with `clock()` reporting elapsed seconds for the time limit.
pub fn solve_with_clock(
    inst: &MilpInstance,
    params: &SolveParams,
    observer: &mut dyn Observer,
    clock: &dyn Fn() -> f64,
) -> Result<SolveResult, BnbError> {
    let problems = validate(inst);
    if !problems.is_empty() {
        return Err(BnbError::InvalidInstance(problems));
    }
    let perm = column_order(inst.num_vars, params.seed);
    let work = permuted(inst, &perm);
    Engine::new(&work, &perm, params, observer, clock).run()
}

struct Engine<'a, 'o> {
    inst: &'a MilpInstance,
    perm: &'a [usize],
    params: &'a SolveParams,
    observer: &'o mut dyn Observer,
    clock: &'o dyn Fn() -> f64,
    lp: LpSolver<'a>,
    integral: Vec<bool>,
    pc: Pseudocosts,
    nodes: Vec<Option<Node>>,
    open: BTreeSet<OpenKey>,
    state: TreeState,
    events: Vec<TreeEvent>,
    incumbent: Option<(f64, Vec<f64>)>,
    history: Vec<(usize, f64)>,
    processed: usize,
}

impl<'a, 'o> Engine<'a, 'o> {
    fn new(
        inst: &'a MilpInstance,
        perm: &'a [usize],
        params: &'a SolveParams,
        observer: &'o mut dyn Observer,
        clock: &'o dyn Fn() -> f64,
    ) -> Self {
        let root = Node {
            depth: 0,
            bounds: BoundSet::new(),
            bound: f64::NEG_INFINITY,
            warm: None,
            branch: None,
        };
        let mut open = BTreeSet::new();
        open.insert((Key(f64::NEG_INFINITY), Reverse(0), 0));
        Engine {
            inst,
            perm,
            params,
            observer,
            clock,
            lp: LpSolver::new(inst),
            integral: inst.integrality(),
            pc: Pseudocosts::new(&inst.obj),
            nodes: vec![Some(root)],
            open,
            state: TreeState::new(),
            events: Vec::new(),
            incumbent: None,
            history: Vec::new(),
            processed: 0,
        }
    }

    fn emit(&mut self, t: usize, kind: EventKind) {
        let ev = TreeEvent { t, kind };
        self.state.apply(&ev).expect("engine emits a consistent event stream");
        self.observer.on_event(&ev, &self.state);
        self.events.push(ev);
    }

    fn z_bar(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |(z, _)| *z)
    }

    fn run(mut self) -> Result<SolveResult, BnbError> {
        let proof = loop {
            let Some(&first) = self.open.first() else { break Proof::OptimalityProved };
            if self.processed >= self.params.node_limit {
                break Proof::NodeLimit;
            }
            if self.params.time_limit.is_some_and(|lim| (self.clock)() >= lim) {
                break Proof::TimeLimit;
            }
            self.open.remove(&first);
            self.process(first.2)?;
        };
        if proof == Proof::OptimalityProved && self.incumbent.is_none() {
            return Err(BnbError::InfeasibleInstance);
        }
        let z_star = self.z_bar();
        self.emit(self.processed, EventKind::Finished { proof, z_star });
        let x_star = self.incumbent.take().map(|(_, xp)| {
            let mut x = vec![0.0; xp.len()];
            for (k, &j) in self.perm.iter().enumerate() {
                x[j] = xp[k];
            }
            x
        });
        Ok(SolveResult {
            z_star,
            x_star,
            node_count: self.processed,
            proof,
            event_log: self.events,
            incumbent_history: self.history,
            final_state: self.state,
        })
    }

    fn process(&mut self, id: usize) -> Result<(), BnbError> {
        let node = self.nodes[id].take().expect("open node has data");
        let t = self.processed + 1;
        if node.bound >= cutoff(self.z_bar()) {
            // Stale entry; unreachable while open nodes are pruned eagerly.
            self.emit(self.processed, EventKind::Pruned { node: id, reason: PruneReason::PrunedByBound, processed: false });
            return Ok(());
        }
        let sol = match &node.warm {
            Some(prev) => self.lp.resolve(prev, &node.bounds)?,
            None => self.lp.solve(&node.bounds)?,
        };
        self.processed = t;
        match sol.status {
            LpStatus::Unbounded => return Err(BnbError::UnboundedRelaxation),
            LpStatus::Infeasible => {
                self.emit(t, EventKind::Pruned { node: id, reason: PruneReason::Infeasible, processed: true });
                self.finish_node(t, id, node.depth, f64::INFINITY);
            }
            LpStatus::Optimal => {
                if let Some((j, dir, dbound)) = node.branch {
                    self.pc.update(j, dir, sol.z_lp - node.bound, dbound);
                }
                self.settle(t, id, &node, sol);
            }
        }
        Ok(())
    }

    /// Handles a node whose LP is optimal and emits its closing events.
    fn settle(&mut self, t: usize, id: usize, node: &Node, sol: LpSolution) {
        let z_lp = sol.z_lp;
        let fracs = fractional_parts(&sol.x, &self.integral);
        if z_lp >= cutoff(self.z_bar()) {
            self.emit(t, EventKind::Pruned { node: id, reason: PruneReason::PrunedByBound, processed: true });
        } else if fracs.is_empty() {
            let x: Vec<f64> =
                sol.x.iter().zip(&self.integral).map(|(&v, &int)| if int { libm::round(v) } else { v }).collect();
            let z = self.inst.objective(&x);
            self.offer(t, id, z, x);
            self.emit(t, EventKind::Pruned { node: id, reason: PruneReason::IntegerFeasible, processed: true });
        } else {
            let period = self.params.heuristic_period.max(1);
            if t == 1 || t.is_multiple_of(period) {
                if let Some(x) = rounding_heuristic(self.inst, &sol.x) {
                    let z = self.inst.objective(&x);
                    self.offer(t, id, z, x);
                }
            }
            if z_lp >= cutoff(self.z_bar()) {
                self.emit(t, EventKind::Pruned { node: id, reason: PruneReason::PrunedByBound, processed: true });
            } else {
                self.branch(t, id, node, sol, &fracs);
            }
        }
        self.finish_node(t, id, node.depth, z_lp);
    }

    fn finish_node(&mut self, t: usize, id: usize, depth: usize, z_lp: f64) {
        let open_count = self.open.len();
        self.emit(t, EventKind::NodeProcessed { node: id, depth, z_lp, open_count });
    }

    /// Accepts `x` as the new incumbent if it strictly improves, then
    /// discards every open node the new bound dominates.
    fn offer(&mut self, t: usize, id: usize, z: f64, x: Vec<f64>) {
        if z >= cutoff(self.z_bar()) {
            return;
        }
        self.incumbent = Some((z, x));
        self.history.push((t, z));
        self.emit(t, EventKind::NewIncumbent { node: id, z });
        let cut = cutoff(z);
        let mut doomed: Vec<usize> = self
            .open
            .range((Key(cut), Reverse(usize::MAX), 0)..)
            .map(|k| k.2)
            .collect();
        doomed.sort_unstable();
        for d in doomed {
            let n = self.nodes[d].take().expect("open node has data");
            self.open.remove(&(Key(n.bound), Reverse(n.depth), d));
            self.emit(t, EventKind::Pruned { node: d, reason: PruneReason::PrunedByBound, processed: false });
        }
    }

    fn branch(&mut self, t: usize, id: usize, node: &Node, sol: LpSolution, fracs: &[(usize, f64)]) {
        let j = most_fractional(&sol.x, &self.integral).expect("fractional point");
        let f = fracs.iter().find(|&&(k, _)| k == j).map(|&(_, f)| f).expect("branch variable is fractional");
        let xj = sol.x[j];
        let estimate = node_estimate(sol.z_lp, fracs, &self.pc);
        let z_lp = sol.z_lp;
        let warm = Rc::new(sol);
        let depth = node.depth + 1;

        let mut down_bounds = node.bounds.clone();
        down_bounds.tighten_upper(self.inst, j, libm::floor(xj));
        let mut up_bounds = node.bounds.clone();
        up_bounds.tighten_lower(self.inst, j, libm::ceil(xj));

        let ids = [self.nodes.len(), self.nodes.len() + 1];
        for (k, (bounds, dir, delta)) in
            [(down_bounds, Direction::Down, f), (up_bounds, Direction::Up, 1.0 - f)].into_iter().enumerate()
        {
            self.nodes.push(Some(Node {
                depth,
                bounds,
                bound: z_lp,
                warm: Some(Rc::clone(&warm)),
                branch: Some((j, dir, delta)),
            }));
            self.open.insert((Key(z_lp), Reverse(depth), ids[k]));
        }
        let info = |id| ChildInfo { id, depth, bound: z_lp, estimate };
        self.emit(t, EventKind::Branched { node: id, var: self.perm[j], down: info(ids[0]), up: info(ids[1]) });
    }
}
