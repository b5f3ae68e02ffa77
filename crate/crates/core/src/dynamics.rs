//! Dynamic search features and the sampling protocol that turns solver
//! runs into labelled training data.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::bnb::{solve, BnbError, Observer, SolveParams, SolveResult};
use crate::model::MilpInstance;
use crate::rng::{derive_seed, Rng};
use crate::tree::{EventKind, Proof, TreeError, TreeEvent, TreeState};

/// Floor of the gap denominator.
pub const GAP_EPS: f64 = 1e-9;
/// Default window of the open-node trend.
pub const TREND_WINDOW: usize = 20;
/// Incumbents this close to zero make the ratio feature undefined.
pub const RATIO_EPS: f64 = 1e-12;
/// Relative tolerance of the "incumbent is optimal" label.
pub const LABEL_TOL: f64 = 1e-6;

pub const FEATURE_NAMES: [&str; 5] = ["gap", "tree_weight", "median_gap", "open_trend", "gnn_ratio"];

#[derive(Debug, Clone, PartialEq)]
pub enum DynError {
    InsufficientHistory { have: usize, need: usize },
    DegenerateIncumbent(f64),
    NoIncumbent,
    CensoredRun(Proof),
    Solve(BnbError),
    Replay(TreeError),
}

impl fmt::Display for DynError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynError::InsufficientHistory { have, need } => write!(f, "trend needs {need} points, have {have}"),
            DynError::DegenerateIncumbent(z) => write!(f, "incumbent {z} too close to zero for the ratio"),
            DynError::NoIncumbent => write!(f, "no incumbent yet"),
            DynError::CensoredRun(p) => write!(f, "run stopped before an optimality proof ({})", p.as_str()),
            DynError::Solve(e) => write!(f, "{e}"),
            DynError::Replay(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DynError {}

/// `|z̄ − z̲| / max(|z̄|, |z̲|, ε)`, or 1 without an incumbent or when the
/// bounds have opposite signs.
pub fn gap(z_bar: Option<f64>, z_low: f64) -> f64 {
    let Some(z_bar) = z_bar else { return 1.0 };
    if z_bar * z_low < 0.0 {
        return 1.0;
    }
    (z_bar - z_low).abs() / z_bar.abs().max(z_low.abs()).max(GAP_EPS)
}

/// `Σ 2^{−d}` over leaf depths.
pub fn tree_weight(leaf_depths: &[usize]) -> f64 {
    leaf_depths.iter().map(|&d| libm::ldexp(1.0, -(d as i32))).sum()
}

/// Median with the even-size convention of averaging the middle pair.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// `|z̄ − median(open bounds)| / |z̄⁰ − z^LP|`. An empty open set counts as
/// median `z̄`; a denominator at most `1e-9` gives 0.
pub fn median_gap(z_bar: f64, open_median: Option<f64>, first_incumbent: f64, z_lp_root: f64) -> f64 {
    let denom = (first_incumbent - z_lp_root).abs();
    if denom <= 1e-9 {
        return 0.0;
    }
    let m = open_median.unwrap_or(z_bar);
    (z_bar - m).abs() / denom
}

/// Least-squares slope of `window` against its positions.
pub fn slope(window: &[f64]) -> f64 {
    let n = window.len() as f64;
    if window.len() < 2 {
        return 0.0;
    }
    let k_mean = (n - 1.0) / 2.0;
    let y_mean = window.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &y) in window.iter().enumerate() {
        let dk = k as f64 - k_mean;
        num += dk * (y - y_mean);
        den += dk * dk;
    }
    num / den
}

/// Slope of `|O_k|` over `k = t−h, …, t`.
pub fn open_trend(open_history: &[usize], t: usize, h: usize) -> Result<f64, DynError> {
    if t < h || t >= open_history.len() {
        return Err(DynError::InsufficientHistory { have: open_history.len().min(t + 1), need: h + 1 });
    }
    let window: Vec<f64> = open_history[t - h..=t].iter().map(|&c| c as f64).collect();
    Ok(slope(&window))
}

pub fn gnn_ratio(f_pred: f64, z_bar: f64) -> Result<f64, DynError> {
    if z_bar.abs() <= RATIO_EPS {
        return Err(DynError::DegenerateIncumbent(z_bar));
    }
    Ok(f_pred / z_bar)
}

/// `(g, ω, μ, τ, ρ)` at the current state.
pub fn features(state: &TreeState, f_pred: f64, h: usize) -> Result<[f64; 5], DynError> {
    let z_bar = state.incumbent().ok_or(DynError::NoIncumbent)?;
    let lower = if state.open_count() == 0 { z_bar } else { state.global_lower() };
    let g = gap(Some(z_bar), lower);
    let omega = state.tree_weight();
    let first = state.first_incumbent().ok_or(DynError::NoIncumbent)?;
    let root = state.root_lp().unwrap_or(first);
    let mu = median_gap(z_bar, state.median_open_bound(), first, root);
    let tau = open_trend(state.open_history(), state.t(), h)?;
    let rho = gnn_ratio(f_pred, z_bar)?;
    Ok([g, omega, mu, tau, rho])
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicSample {
    pub instance: String,
    pub seed: u64,
    pub t: usize,
    /// `(g, ω, μ, τ, ρ)`
    pub features: [f64; 5],
    pub z_bar: f64,
    pub z_star: f64,
    pub z_lp: f64,
    pub f_pred: f64,
    pub label: bool,
}

pub fn is_optimal_incumbent(z_bar: f64, z_star: f64) -> bool {
    (z_bar - z_star).abs() <= LABEL_TOL * (1.0 + z_star.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectParams {
    /// No samples while `t` is at most this.
    pub warmup: usize,
    pub p_sample: f64,
    pub seed: u64,
    pub window: usize,
}

impl Default for CollectParams {
    fn default() -> Self {
        CollectParams { warmup: 100, p_sample: 0.02, seed: 0, window: TREND_WINDOW }
    }
}

/// Observer that draws samples during a solve. Labels are attached once
/// the run is over.
#[derive(Debug, Clone)]
pub struct Collector {
    params: CollectParams,
    f_pred: f64,
    rng: Rng,
    pending: Vec<(usize, [f64; 5], f64)>,
    /// Sample times dropped because the ratio was undefined.
    pub discarded: Vec<usize>,
}

impl Collector {
    pub fn new(params: CollectParams, f_pred: f64) -> Self {
        Collector { params, f_pred, rng: Rng::new(derive_seed(params.seed, 0xD1A)), pending: Vec::new(), discarded: Vec::new() }
    }

    /// Labels the pending samples against the run's optimum. A run without
    /// an optimality proof yields an error and no samples.
    pub fn finish(self, instance: &str, z_lp: f64, result: &SolveResult) -> Result<Vec<DynamicSample>, DynError> {
        if result.proof != Proof::OptimalityProved {
            return Err(DynError::CensoredRun(result.proof));
        }
        let z_star = result.z_star;
        Ok(self
            .pending
            .into_iter()
            .map(|(t, features, z_bar)| DynamicSample {
                instance: String::from(instance),
                seed: self.params.seed,
                t,
                features,
                z_bar,
                z_star,
                z_lp,
                f_pred: self.f_pred,
                label: is_optimal_incumbent(z_bar, z_star),
            })
            .collect())
    }
}

impl Observer for Collector {
    fn on_event(&mut self, event: &TreeEvent, state: &TreeState) {
        if !matches!(event.kind, EventKind::NodeProcessed { .. }) {
            return;
        }
        let Some(z_bar) = state.incumbent() else { return };
        if state.t() <= self.params.warmup || !self.rng.bernoulli(self.params.p_sample) {
            return;
        }
        match features(state, self.f_pred, self.params.window) {
            Ok(x) => self.pending.push((state.t(), x, z_bar)),
            Err(_) => self.discarded.push(state.t()),
        }
    }
}

/// Solves `inst` with the collector attached. The solver seed is the
/// collection seed, so each seed is one randomized run.
pub fn collect(
    inst: &MilpInstance,
    f_pred: f64,
    z_lp: f64,
    params: CollectParams,
    solve_params: &SolveParams,
) -> Result<(Vec<DynamicSample>, SolveResult), DynError> {
    let mut collector = Collector::new(params, f_pred);
    let sp = SolveParams { seed: params.seed, ..*solve_params };
    let result = solve(inst, &sp, &mut collector).map_err(DynError::Solve)?;
    let samples = collector.finish(&inst.name, z_lp, &result)?;
    Ok((samples, result))
}

/// Recomputes the features at the given times by replaying a log.
pub fn replay_features(events: &[TreeEvent], f_pred: f64, times: &[usize], h: usize) -> Result<Vec<[f64; 5]>, DynError> {
    let mut state = TreeState::new();
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    for ev in events {
        state.apply(ev).map_err(DynError::Replay)?;
        if let EventKind::NodeProcessed { .. } = ev.kind {
            while next < times.len() && times[next] == state.t() {
                out.push(features(&state, f_pred, h)?);
                next += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn gap_cases() {
        assert_eq!(gap(None, 5.0), 1.0);
        assert_eq!(gap(Some(10.0), 5.0), 0.5);
        assert_eq!(gap(Some(4.0), -1.0), 1.0);
        assert_eq!(gap(Some(0.0), 0.0), 0.0);
    }

    #[test]
    fn tree_weight_cases() {
        assert_eq!(tree_weight(&[0]), 1.0);
        assert_eq!(tree_weight(&[1, 2, 2]), 1.0);
    }

    #[test]
    fn median_gap_cases() {
        let mu = median_gap(10.0, median(&[7.0, 8.0, 9.0]), 20.0, 5.0);
        assert!((mu - 2.0 / 15.0).abs() < 1e-15);
        assert_eq!(median_gap(10.0, None, 20.0, 5.0), 0.0);
        assert_eq!(median(&[6.0, 8.0]), Some(7.0));
        assert_eq!(median_gap(10.0, Some(3.0), 5.0, 5.0), 0.0);
    }

    #[test]
    fn trend_cases() {
        let flat = vec![4usize; 30];
        assert_eq!(open_trend(&flat, 25, 20).unwrap(), 0.0);
        let line: Vec<usize> = (0..30).map(|k| 2 * k + 3).collect();
        assert_eq!(open_trend(&line, 29, 20).unwrap(), 2.0);
        assert_eq!(open_trend(&line, 10, 20), Err(DynError::InsufficientHistory { have: 11, need: 21 }));
    }

    #[test]
    fn ratio_cases() {
        assert_eq!(gnn_ratio(9.0, 10.0).unwrap(), 0.9);
        assert_eq!(gnn_ratio(10.0, 10.0).unwrap(), 1.0);
        assert_eq!(gnn_ratio(-50.0, -40.0).unwrap(), 1.25);
        assert!(gnn_ratio(1.0, 0.0).is_err());
    }
}
