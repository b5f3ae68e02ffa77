//! Error metrics, classification reports, ε tuning, solving-phase
//! breakdowns and feature importance.

use alloc::vec::Vec;
use core::fmt;

use crate::classifiers::{c_gnn, LogisticModel};
use crate::dynamics::FEATURE_NAMES;
use crate::tree::{EventKind, Proof, TreeEvent};

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    DegenerateTrueValue { index: usize },
    LengthMismatch { preds: usize, trues: usize },
    Empty,
    CensoredRun,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DegenerateTrueValue { index } => write!(f, "true value at {index} is zero"),
            EvalError::LengthMismatch { preds, trues } => write!(f, "{preds} predictions for {trues} values"),
            EvalError::Empty => write!(f, "nothing to evaluate"),
            EvalError::CensoredRun => write!(f, "run has no optimality proof"),
        }
    }
}

impl core::error::Error for EvalError {}

/// `100 · mean |z*_i − z̃_i| / |z*_i|`.
pub fn relative_error(preds: &[f64], trues: &[f64]) -> Result<f64, EvalError> {
    if preds.len() != trues.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), trues: trues.len() });
    }
    if trues.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut s = 0.0;
    for (i, (&p, &z)) in preds.iter().zip(trues).enumerate() {
        if z.abs() <= 1e-12 {
            return Err(EvalError::DegenerateTrueValue { index: i });
        }
        s += (z - p).abs() / z.abs();
    }
    Ok(100.0 * s / trues.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    pub correct: f64,
    pub false_pos: f64,
    pub false_neg: f64,
    pub n: usize,
}

pub fn classification_report(labels: &[bool], preds: &[bool]) -> ClassificationReport {
    let n = labels.len().min(preds.len());
    let (mut ok, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&y, &p) in labels.iter().zip(preds) {
        match (p, y) {
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => ok += 1,
        }
    }
    let d = n.max(1) as f64;
    ClassificationReport { correct: ok as f64 / d, false_pos: fp as f64 / d, false_neg: fneg as f64 / d, n }
}

/// Majority class of the training labels; ties go to the positive class.
pub fn majority_class(train_labels: &[bool]) -> bool {
    let pos = train_labels.iter().filter(|&&y| y).count();
    2 * pos >= train_labels.len()
}

/// The 41 ε values `−0.02, −0.019, …, 0.02`.
pub fn epsilon_grid() -> Vec<f64> {
    (0..=40).map(|k| (k as f64 - 20.0) / 1000.0).collect()
}

/// One validation sample for the GNN classifier: `(f_pred, z̄, label)`.
pub type GnnCase = (f64, f64, bool);

pub fn gnn_accuracy(cases: &[GnnCase], eps: f64) -> f64 {
    let ok = cases.iter().filter(|&&(f, z, y)| c_gnn(f, z, eps) == y).count();
    ok as f64 / cases.len().max(1) as f64
}

pub fn positive_rate(cases: &[GnnCase], eps: f64) -> f64 {
    let pos = cases.iter().filter(|&&(f, z, _)| c_gnn(f, z, eps)).count();
    pos as f64 / cases.len().max(1) as f64
}

/// Grid-searched ε with the accuracy curve over [`epsilon_grid`]. Ties go
/// to the smaller `|ε|`, then the smaller ε.
pub fn tune_epsilon(cases: &[GnnCase]) -> Result<(f64, Vec<(f64, f64)>), EvalError> {
    if cases.is_empty() {
        return Err(EvalError::Empty);
    }
    let curve: Vec<(f64, f64)> = epsilon_grid().into_iter().map(|e| (e, gnn_accuracy(cases, e))).collect();
    let mut best = curve[0];
    for &(e, acc) in &curve[1..] {
        let better = acc > best.1
            || (acc == best.1 && (e.abs() < best.0.abs() || (e.abs() == best.0.abs() && e < best.0)));
        if better {
            best = (e, acc);
        }
    }
    Ok((best.0, curve))
}

/// Node-count timestamps of one solver run. A solution found while
/// processing node `t` is stamped `t − 1`, the work completed before it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTimes {
    pub first_solution: f64,
    pub within_5pct: f64,
    pub optimal_found: f64,
    pub first_branch: f64,
    pub total: f64,
}

/// Fractions of a run spent in phases 1, 2a, 2b and 3, and before the
/// first branching.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseFractions {
    pub feasibility: f64,
    pub improvement_a: f64,
    pub improvement_b: f64,
    pub proving: f64,
    pub before_branching: f64,
}

impl PhaseFractions {
    pub fn sum(&self) -> f64 {
        self.feasibility + self.improvement_a + self.improvement_b + self.proving
    }
}

/// `z̄` within 5% of `z*` in the direction of worse objective values.
pub fn within_5pct(z_bar: f64, z_star: f64) -> bool {
    z_bar - z_star <= 0.05 * z_star.abs()
}

pub fn phase_times(events: &[TreeEvent], z_star: f64) -> Result<PhaseTimes, EvalError> {
    let mut first = None;
    let mut five = None;
    let mut opt = None;
    let mut branch = None;
    let mut total = None;
    for ev in events {
        let stamp = ev.t.saturating_sub(1) as f64;
        match ev.kind {
            EventKind::NewIncumbent { z, .. } => {
                first.get_or_insert(stamp);
                if within_5pct(z, z_star) {
                    five.get_or_insert(stamp);
                }
                if crate::dynamics::is_optimal_incumbent(z, z_star) {
                    opt.get_or_insert(stamp);
                }
            }
            EventKind::Branched { .. } => {
                branch.get_or_insert(stamp);
            }
            EventKind::Finished { proof, .. } => {
                if proof != Proof::OptimalityProved {
                    return Err(EvalError::CensoredRun);
                }
                total = Some(ev.t as f64);
            }
            _ => {}
        }
    }
    let total = total.ok_or(EvalError::CensoredRun)?;
    let (Some(first), Some(five), Some(opt)) = (first, five, opt) else {
        return Err(EvalError::CensoredRun);
    };
    Ok(PhaseTimes { first_solution: first, within_5pct: five, optimal_found: opt, first_branch: branch.unwrap_or(total), total })
}

pub fn phase_fractions(p: &PhaseTimes) -> PhaseFractions {
    let t = p.total.max(1.0);
    PhaseFractions {
        feasibility: p.first_solution / t,
        improvement_a: (p.within_5pct - p.first_solution) / t,
        improvement_b: (p.optimal_found - p.within_5pct) / t,
        proving: (p.total - p.optimal_found) / t,
        before_branching: p.first_branch / t,
    }
}

/// Per-run fractions averaged over runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseBreakdown {
    pub runs: Vec<PhaseFractions>,
    pub mean: PhaseFractions,
    pub excluded: usize,
}

pub fn phase_breakdown(runs: &[(Vec<TreeEvent>, f64)]) -> PhaseBreakdown {
    let mut out = PhaseBreakdown::default();
    for (events, z_star) in runs {
        match phase_times(events, *z_star) {
            Ok(p) => out.runs.push(phase_fractions(&p)),
            Err(_) => out.excluded += 1,
        }
    }
    let k = out.runs.len().max(1) as f64;
    for r in &out.runs {
        out.mean.feasibility += r.feasibility / k;
        out.mean.improvement_a += r.improvement_a / k;
        out.mean.improvement_b += r.improvement_b / k;
        out.mean.proving += r.proving / k;
        out.mean.before_branching += r.before_branching / k;
    }
    out
}

/// `|w_k|` normalized to sum 1, sorted descending (stable on ties). All-zero
/// weights give equal shares.
pub fn feature_importance(model: &LogisticModel) -> Vec<(&'static str, f64)> {
    let total: f64 = model.weights.iter().map(|w| w.abs()).sum();
    let mut out: Vec<(&'static str, f64)> = FEATURE_NAMES
        .iter()
        .zip(&model.weights)
        .map(|(&name, w)| (name, if total > 0.0 { w.abs() / total } else { 0.2 }))
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::PruneReason;
    use alloc::vec;

    #[test]
    fn relative_error_cases() {
        assert_eq!(relative_error(&[3.0, -2.0], &[3.0, -2.0]).unwrap(), 0.0);
        let e = relative_error(&[99.0, -51.0], &[100.0, -50.0]).unwrap();
        assert!((e - 1.5).abs() < 1e-12);
        assert_eq!(relative_error(&[1.0], &[0.0]), Err(EvalError::DegenerateTrueValue { index: 0 }));
    }

    #[test]
    fn report_cases() {
        let y = [true, true, false];
        let r = classification_report(&y, &y);
        assert_eq!((r.correct, r.false_pos, r.false_neg), (1.0, 0.0, 0.0));
        let labels: Vec<bool> = (0..100).map(|k| k < 64).collect();
        let r = classification_report(&labels, &[true; 100]);
        assert_eq!((r.correct, r.false_pos, r.false_neg), (0.64, 0.36, 0.0));
        let flipped: Vec<bool> = labels.iter().map(|b| !b).collect();
        let preds: Vec<bool> = (0..100).map(|k| k % 3 == 0).collect();
        let (a, b) = (classification_report(&labels, &preds), classification_report(&flipped, &preds.iter().map(|p| !p).collect::<Vec<_>>()));
        assert_eq!((a.false_pos, a.false_neg), (b.false_neg, b.false_pos));
    }

    #[test]
    fn perfect_predictor_tunes_to_zero() {
        let cases: Vec<GnnCase> = (1..30).map(|k| (k as f64, k as f64 + if k % 2 == 0 { 0.0 } else { 5.0 }, k % 2 == 0)).collect();
        // z̄ = f is never < f, so positives need ε > 0; build a case that is
        // perfect at ε = 0 instead.
        let perfect: Vec<GnnCase> = (1..30).map(|k| (k as f64, k as f64 * if k % 2 == 0 { 0.5 } else { 2.0 }, k % 2 == 0)).collect();
        assert_eq!(tune_epsilon(&perfect).unwrap().0, 0.0);
        let (e, _) = tune_epsilon(&cases).unwrap();
        assert!(gnn_accuracy(&cases, e) >= gnn_accuracy(&cases, 0.0));
    }

    #[test]
    fn grid_has_41_points_with_exact_zero() {
        let g = epsilon_grid();
        assert_eq!(g.len(), 41);
        assert_eq!(g[20], 0.0);
        assert_eq!((g[0], g[40]), (-0.02, 0.02));
    }

    #[test]
    fn integral_root_is_all_proving() {
        let events = vec![
            TreeEvent { t: 1, kind: EventKind::NewIncumbent { node: 0, z: 3.0 } },
            TreeEvent { t: 1, kind: EventKind::Pruned { node: 0, reason: PruneReason::IntegerFeasible, processed: true } },
            TreeEvent { t: 1, kind: EventKind::NodeProcessed { node: 0, depth: 0, z_lp: 3.0, open_count: 0 } },
            TreeEvent { t: 1, kind: EventKind::Finished { proof: Proof::OptimalityProved, z_star: 3.0 } },
        ];
        let f = phase_fractions(&phase_times(&events, 3.0).unwrap());
        assert_eq!((f.feasibility, f.improvement_a, f.improvement_b, f.proving), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn importance_cases() {
        let mut m = LogisticModel { weights: [2.0, 0.0, 0.0, 0.0, 0.0], intercept: 0.0, mean: [0.0; 5], std: [1.0; 5], threshold: 0.5, lambda: 0.0 };
        assert_eq!(feature_importance(&m)[0], ("gap", 1.0));
        m.weights = [-1.0; 5];
        assert!(feature_importance(&m).iter().all(|&(_, v)| v == 0.2));
    }
}
