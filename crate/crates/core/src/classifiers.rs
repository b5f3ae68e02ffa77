//! Predictors of whether the incumbent is already optimal.

use alloc::vec::Vec;
use core::fmt;

use crate::dynamics::DynamicSample;
use crate::tree::{EventKind, TreeError, TreeEvent, TreeState};

/// Per processed node: incumbent, smallest open estimate and |R¹|.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseHistory {
    pub t: Vec<usize>,
    /// `+∞` before the first incumbent.
    pub z_bar: Vec<f64>,
    /// `+∞` when nothing is open.
    pub est_min: Vec<f64>,
    pub rank1: Vec<usize>,
    /// First time the best-estimate criterion held, if ever.
    pub est_fired: Option<usize>,
    /// First time |R¹| was zero, if ever.
    pub rank1_fired: Option<usize>,
}

impl PhaseHistory {
    pub fn record(&mut self, state: &TreeState) {
        let t = state.t();
        let z_bar = state.incumbent().unwrap_or(f64::INFINITY);
        let est = state.best_estimate_min();
        let r1 = state.rank1_count();
        self.t.push(t);
        self.z_bar.push(z_bar);
        self.est_min.push(est);
        self.rank1.push(r1);
        if self.est_fired.is_none() && est_margin(z_bar, est) < 0.0 {
            self.est_fired = Some(t);
        }
        if self.rank1_fired.is_none() && r1 == 0 {
            self.rank1_fired = Some(t);
        }
    }

    /// Rebuilds the history from a solver event log.
    pub fn from_events(events: &[TreeEvent]) -> Result<Self, TreeError> {
        let mut state = TreeState::new();
        let mut h = PhaseHistory::default();
        for ev in events {
            state.apply(ev)?;
            if matches!(ev.kind, EventKind::NodeProcessed { .. }) {
                h.record(&state);
            }
        }
        Ok(h)
    }

    fn prefix(&self, t: usize) -> usize {
        self.t.partition_point(|&s| s <= t)
    }

    /// Best-estimate criterion at time `t`.
    pub fn c_est(&self, t: usize) -> bool {
        self.est_fired.is_some_and(|s| s <= t)
    }

    /// Rank-1 criterion at time `t`.
    pub fn c_rank1(&self, t: usize) -> bool {
        self.rank1_fired.is_some_and(|s| s <= t)
    }

    /// `min_{s≤t} (z̄(s) − ĉ^min(s))` recomputed from the stored series.
    pub fn est_running_min(&self, t: usize) -> f64 {
        let k = self.prefix(t);
        (0..k).map(|i| est_margin(self.z_bar[i], self.est_min[i])).fold(f64::INFINITY, f64::min)
    }

    pub fn rank1_running_min(&self, t: usize) -> usize {
        let k = self.prefix(t);
        self.rank1[..k].iter().copied().min().unwrap_or(usize::MAX)
    }
}

/// `z̄ − ĉ^min`, treating a missing incumbent as `+∞` and an empty open set
/// as `ĉ^min = +∞`.
fn est_margin(z_bar: f64, est_min: f64) -> f64 {
    if z_bar == f64::INFINITY {
        f64::INFINITY
    } else {
        z_bar - est_min
    }
}

/// Best-estimate criterion over a series of `(z̄, ĉ^min)`: true once
/// `z̄ − ĉ^min` has been negative.
pub fn c_est(series: &[(f64, f64)]) -> bool {
    series.iter().map(|&(z, c)| est_margin(z, c)).fold(f64::INFINITY, f64::min) < 0.0
}

/// Rank-1 criterion over a series of |R¹| values.
pub fn c_rank1(series: &[usize]) -> bool {
    series.iter().min() == Some(&0)
}

/// `z̄ < f + ε·|f|`.
pub fn c_gnn(f_pred: f64, z_bar: f64, eps: f64) -> bool {
    z_bar < f_pred + eps * f_pred.abs()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierError {
    DegenerateLabels { positives: usize, total: usize },
    NonFinite,
}

impl fmt::Display for ClassifierError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierError::DegenerateLabels { positives, total } => {
                write!(f, "training labels need both classes ({positives} of {total} positive)")
            }
            ClassifierError::NonFinite => write!(f, "non-finite feature or weight"),
        }
    }
}

impl core::error::Error for ClassifierError {}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// Weights on standardized features.
    pub weights: [f64; 5],
    pub intercept: f64,
    pub mean: [f64; 5],
    pub std: [f64; 5],
    pub threshold: f64,
    pub lambda: f64,
}

impl LogisticModel {
    pub fn standardize(&self, x: &[f64; 5]) -> [f64; 5] {
        core::array::from_fn(|k| (x[k] - self.mean[k]) / self.std[k])
    }

    /// `(probability, class)` with class `probability > threshold`.
    pub fn predict(&self, x: &[f64; 5]) -> (f64, bool) {
        let z = self.standardize(x);
        let s: f64 = self.weights.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + self.intercept;
        let p = sigmoid(s);
        (p, p > self.threshold)
    }
}

pub fn c_dyn(model: &LogisticModel, x: &[f64; 5]) -> (f64, bool) {
    model.predict(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticParams {
    pub lambda: f64,
    pub lr: f64,
    pub epochs: usize,
    pub threshold: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { lambda: 1e-3, lr: 0.1, epochs: 500, threshold: 0.5 }
    }
}

/// Mean log-loss plus `λ/2·‖w‖²` (intercept unpenalized) on standardized
/// rows, with its gradient `(∂w, ∂b)`.
pub fn logistic_loss_grad(w: &[f64; 5], b: f64, xs: &[[f64; 5]], ys: &[bool], lambda: f64) -> (f64, [f64; 5], f64) {
    let n = xs.len().max(1) as f64;
    let mut loss = 0.0;
    let mut gw = [0.0; 5];
    let mut gb = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let s: f64 = w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
        let yv = if y { 1.0 } else { 0.0 };
        // log(1 + e^s) − y·s, computed stably.
        let softplus = if s > 0.0 { s + libm::log1p(libm::exp(-s)) } else { libm::log1p(libm::exp(s)) };
        loss += softplus - yv * s;
        let r = sigmoid(s) - yv;
        for k in 0..5 {
            gw[k] += r * x[k];
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    for k in 0..5 {
        gw[k] = gw[k] / n + lambda * w[k];
        loss += 0.5 * lambda * w[k] * w[k];
    }
    (loss, gw, gb)
}

/// Full-batch gradient descent from zero weights. Returns the model and
/// the loss before each step.
pub fn train_logistic(xs: &[[f64; 5]], ys: &[bool], hp: &LogisticParams) -> Result<(LogisticModel, Vec<f64>), ClassifierError> {
    let positives = ys.iter().filter(|&&y| y).count();
    if positives == 0 || positives == ys.len() {
        return Err(ClassifierError::DegenerateLabels { positives, total: ys.len() });
    }
    if xs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ClassifierError::NonFinite);
    }
    let n = xs.len() as f64;
    let mut mean = [0.0; 5];
    for x in xs {
        for k in 0..5 {
            mean[k] += x[k] / n;
        }
    }
    let mut std = [0.0; 5];
    for x in xs {
        for k in 0..5 {
            std[k] += (x[k] - mean[k]) * (x[k] - mean[k]) / n;
        }
    }
    for s in &mut std {
        *s = libm::sqrt(*s);
        if *s <= 1e-12 {
            *s = 1.0;
        }
    }
    let mut model = LogisticModel { weights: [0.0; 5], intercept: 0.0, mean, std, threshold: hp.threshold, lambda: hp.lambda };
    let zs: Vec<[f64; 5]> = xs.iter().map(|x| model.standardize(x)).collect();
    let mut curve = Vec::with_capacity(hp.epochs + 1);
    for _ in 0..hp.epochs {
        let (loss, gw, gb) = logistic_loss_grad(&model.weights, model.intercept, &zs, ys, hp.lambda);
        curve.push(loss);
        for k in 0..5 {
            model.weights[k] -= hp.lr * gw[k];
        }
        model.intercept -= hp.lr * gb;
    }
    curve.push(logistic_loss_grad(&model.weights, model.intercept, &zs, ys, hp.lambda).0);
    if model.weights.iter().any(|w| !w.is_finite()) || !model.intercept.is_finite() {
        return Err(ClassifierError::NonFinite);
    }
    Ok((model, curve))
}

/// Trains on the feature tuples and labels of dynamic samples.
pub fn train_on_samples(samples: &[DynamicSample], hp: &LogisticParams) -> Result<(LogisticModel, Vec<f64>), ClassifierError> {
    let xs: Vec<[f64; 5]> = samples.iter().map(|s| s.features).collect();
    let ys: Vec<bool> = samples.iter().map(|s| s.label).collect();
    train_logistic(&xs, &ys, hp)
}

/// Baseline predictions `(C^est, C^rank-1)` at the sample times of one run.
pub fn baseline_predictions(history: &PhaseHistory, times: &[usize]) -> Vec<(bool, bool)> {
    times.iter().map(|&t| (history.c_est(t), history.c_rank1(t))).collect()
}

/// Predictions of every classifier family for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Predictions {
    pub est: bool,
    pub rank1: bool,
    pub gnn0: bool,
    pub gnn_eps: bool,
    pub dynamic: bool,
}
