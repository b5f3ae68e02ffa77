//! Graph neural network regressor for the optimal objective value.
//!
//! Pipeline per graph: standardize features, embed constraints and
//! variables with two ReLU layers each, one constraint-side and one
//! variable-side half-convolution
//!
//! ```text
//! c'_i = c_i W11 + (Σ_j A_ij v_j) W12
//! v'_j = v_j W21 + (Σ_i A_ij c'_i) W22
//! ```
//!
//! then a ReLU head per variable and the mean over variables. Weights are
//! stored `in × out` so a layer maps row vectors `x ↦ x W + b`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::graph::{BipartiteGraph, CONS_FEATS, VAR_FEATS};
use crate::rng::{derive_seed, Rng};

/// `|z^LP|` below this makes the ratio target undefined.
pub const LP_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TargetKind {
    /// `z*`
    Theta1,
    /// `z* / z^LP`
    Theta2,
    /// `z* − z^LP`
    Theta3,
}

impl TargetKind {
    pub const ALL: [TargetKind; 3] = [TargetKind::Theta1, TargetKind::Theta2, TargetKind::Theta3];

    pub fn tag(self) -> &'static str {
        match self {
            TargetKind::Theta1 => "t1",
            TargetKind::Theta2 => "t2",
            TargetKind::Theta3 => "t3",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "t1" | "theta1" => Some(TargetKind::Theta1),
            "t2" | "theta2" => Some(TargetKind::Theta2),
            "t3" | "theta3" => Some(TargetKind::Theta3),
            _ => None,
        }
    }

    pub fn encode(self, z_star: f64, z_lp: f64) -> Result<f64, GnnError> {
        match self {
            TargetKind::Theta1 => Ok(z_star),
            TargetKind::Theta2 if z_lp.abs() <= LP_EPS => Err(GnnError::DegenerateLp(z_lp)),
            TargetKind::Theta2 => Ok(z_star / z_lp),
            TargetKind::Theta3 => Ok(z_star - z_lp),
        }
    }

    pub fn decode(self, value: f64, z_lp: f64) -> Result<f64, GnnError> {
        match self {
            TargetKind::Theta1 => Ok(value),
            TargetKind::Theta2 if z_lp.abs() <= LP_EPS => Err(GnnError::DegenerateLp(z_lp)),
            TargetKind::Theta2 => Ok(value * z_lp),
            TargetKind::Theta3 => Ok(value + z_lp),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GnnError {
    DimensionMismatch(String),
    DegenerateLp(f64),
    Diverged { epoch: usize },
    TooFewSamples(usize),
}

impl fmt::Display for GnnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GnnError::DimensionMismatch(s) => write!(f, "dimension mismatch: {s}"),
            GnnError::DegenerateLp(z) => write!(f, "root LP value {z} too close to zero for the ratio target"),
            GnnError::Diverged { epoch } => write!(f, "training loss became non-finite in epoch {epoch}"),
            GnnError::TooFewSamples(n) => write!(f, "need at least 10 training samples, got {n}"),
        }
    }
}

impl core::error::Error for GnnError {}

/// One affine or linear map inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Block {
    w: usize,
    din: usize,
    dout: usize,
    /// Offset of the bias, if any.
    b: Option<usize>,
}

impl Block {
    fn end(&self) -> usize {
        self.b.map_or(self.w + self.din * self.dout, |b| b + self.dout)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    emb_c1: Block,
    emb_c2: Block,
    emb_v1: Block,
    emb_v2: Block,
    w11: Block,
    w12: Block,
    w21: Block,
    w22: Block,
    head1: Block,
    head2: Block,
}

const BLOCK_NAMES: [&str; 10] =
    ["emb_c1", "emb_c2", "emb_v1", "emb_v2", "w11", "w12", "w21", "w22", "head1", "head2"];

impl Layout {
    fn new(h: usize) -> Self {
        let mut at = 0;
        let mut block = |din: usize, dout: usize, bias: bool| {
            let w = at;
            at += din * dout;
            let b = bias.then(|| {
                let b = at;
                at += dout;
                b
            });
            Block { w, din, dout, b }
        };
        Layout {
            emb_c1: block(CONS_FEATS, h, true),
            emb_c2: block(h, h, true),
            emb_v1: block(VAR_FEATS, h, true),
            emb_v2: block(h, h, true),
            w11: block(h, h, false),
            w12: block(h, h, false),
            w21: block(h, h, false),
            w22: block(h, h, false),
            head1: block(h, h, true),
            head2: block(h, 1, true),
        }
    }

    fn blocks(&self) -> [Block; 10] {
        [
            self.emb_c1, self.emb_c2, self.emb_v1, self.emb_v2, self.w11, self.w12, self.w21, self.w22, self.head1,
            self.head2,
        ]
    }

    fn len(&self) -> usize {
        self.head2.end()
    }
}

/// `y = x W (+ b)` for `rows` row vectors.
fn lin_fwd(p: &[f64], blk: Block, x: &[f64], rows: usize) -> Vec<f64> {
    let (din, dout) = (blk.din, blk.dout);
    let w = &p[blk.w..blk.w + din * dout];
    let mut y = vec![0.0; rows * dout];
    for r in 0..rows {
        let yr = &mut y[r * dout..(r + 1) * dout];
        if let Some(b) = blk.b {
            yr.copy_from_slice(&p[b..b + dout]);
        }
        for (k, &xk) in x[r * din..(r + 1) * din].iter().enumerate() {
            if xk != 0.0 {
                for (yo, wo) in yr.iter_mut().zip(&w[k * dout..(k + 1) * dout]) {
                    *yo += xk * wo;
                }
            }
        }
    }
    y
}

/// Accumulates `dW += xᵀ dy`, `db += Σ dy` and returns `dx = dy Wᵀ` when
/// asked for.
fn lin_bwd(p: &[f64], g: &mut [f64], blk: Block, x: &[f64], dy: &[f64], rows: usize, want_dx: bool) -> Vec<f64> {
    let (din, dout) = (blk.din, blk.dout);
    for r in 0..rows {
        let dyr = &dy[r * dout..(r + 1) * dout];
        for (k, &xk) in x[r * din..(r + 1) * din].iter().enumerate() {
            if xk != 0.0 {
                let gw = &mut g[blk.w + k * dout..blk.w + (k + 1) * dout];
                for (gk, d) in gw.iter_mut().zip(dyr) {
                    *gk += xk * d;
                }
            }
        }
        if let Some(b) = blk.b {
            for (gb, d) in g[b..b + dout].iter_mut().zip(dyr) {
                *gb += d;
            }
        }
    }
    if !want_dx {
        return Vec::new();
    }
    let w = &p[blk.w..blk.w + din * dout];
    let mut wt = vec![0.0; din * dout];
    for k in 0..din {
        for o in 0..dout {
            wt[o * din + k] = w[k * dout + o];
        }
    }
    let mut dx = vec![0.0; rows * din];
    for r in 0..rows {
        let dxr = &mut dx[r * din..(r + 1) * din];
        for (o, &d) in dy[r * dout..(r + 1) * dout].iter().enumerate() {
            if d != 0.0 {
                for (xk, wk) in dxr.iter_mut().zip(&wt[o * din..(o + 1) * din]) {
                    *xk += d * wk;
                }
            }
        }
    }
    dx
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Zeroes gradient entries whose activation was clipped.
fn relu_mask(d: &mut [f64], act: &[f64]) {
    for (g, &a) in d.iter_mut().zip(act) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Activations kept for the backward pass.
struct Tape {
    cn: Vec<f64>,
    vn: Vec<f64>,
    hc: Vec<f64>,
    ec: Vec<f64>,
    hv: Vec<f64>,
    ev: Vec<f64>,
    sc: Vec<f64>,
    sv: Vec<f64>,
    vp: Vec<f64>,
    hh: Vec<f64>,
    out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub hidden: usize,
    pub target: TargetKind,
    pub target_mean: f64,
    pub target_std: f64,
    pub cons_mean: Vec<f64>,
    pub cons_std: Vec<f64>,
    pub var_mean: Vec<f64>,
    pub var_std: Vec<f64>,
    pub params: Vec<f64>,
}

impl GnnModel {
    /// Glorot-uniform weights, zero biases and identity standardization.
    pub fn init(hidden: usize, target: TargetKind, seed: u64) -> Self {
        let layout = Layout::new(hidden);
        let mut params = vec![0.0; layout.len()];
        let mut rng = Rng::new(seed);
        for blk in layout.blocks() {
            let limit = libm::sqrt(6.0 / (blk.din + blk.dout) as f64);
            for w in &mut params[blk.w..blk.w + blk.din * blk.dout] {
                *w = rng.uniform_in(-limit, limit);
            }
        }
        GnnModel {
            hidden,
            target,
            target_mean: 0.0,
            target_std: 1.0,
            cons_mean: vec![0.0; CONS_FEATS],
            cons_std: vec![1.0; CONS_FEATS],
            var_mean: vec![0.0; VAR_FEATS],
            var_std: vec![1.0; VAR_FEATS],
            params,
        }
    }

    fn layout(&self) -> Layout {
        Layout::new(self.hidden)
    }

    pub fn param_count(&self) -> usize {
        self.layout().len()
    }

    /// Named parameter ranges, in storage order.
    pub fn blocks(&self) -> Vec<(&'static str, Range<usize>)> {
        self.layout().blocks().iter().zip(BLOCK_NAMES).map(|(b, name)| (name, b.w..b.end())).collect()
    }

    fn check(&self, g: &BipartiteGraph) -> Result<(), GnnError> {
        if self.params.len() != self.param_count() {
            return Err(GnnError::DimensionMismatch(alloc::format!(
                "{} parameters for hidden size {}",
                self.params.len(),
                self.hidden
            )));
        }
        if g.cons_feats.len() != g.num_cons * CONS_FEATS || g.var_feats.len() != g.num_vars * VAR_FEATS {
            return Err(GnnError::DimensionMismatch(String::from("feature matrix sizes")));
        }
        if g.num_vars == 0 {
            return Err(GnnError::DimensionMismatch(String::from("graph without variables")));
        }
        if g.edges.iter().any(|&(i, j, _)| i >= g.num_cons || j >= g.num_vars) {
            return Err(GnnError::DimensionMismatch(String::from("edge out of range")));
        }
        Ok(())
    }

    fn tape(&self, g: &BipartiteGraph) -> Tape {
        let l = self.layout();
        let h = self.hidden;
        let p = &self.params;
        let (m, n) = (g.num_cons, g.num_vars);
        let standardize = |raw: &[f64], mean: &[f64], std: &[f64]| -> Vec<f64> {
            let d = mean.len();
            raw.iter().enumerate().map(|(k, x)| (x - mean[k % d]) / std[k % d]).collect()
        };
        let cn = standardize(&g.cons_feats, &self.cons_mean, &self.cons_std);
        let vn = standardize(&g.var_feats, &self.var_mean, &self.var_std);
        let mut hc = lin_fwd(p, l.emb_c1, &cn, m);
        relu(&mut hc);
        let mut ec = lin_fwd(p, l.emb_c2, &hc, m);
        relu(&mut ec);
        let mut hv = lin_fwd(p, l.emb_v1, &vn, n);
        relu(&mut hv);
        let mut ev = lin_fwd(p, l.emb_v2, &hv, n);
        relu(&mut ev);

        let mut sc = vec![0.0; m * h];
        for &(i, j, a) in &g.edges {
            axpy(&mut sc[i * h..(i + 1) * h], a, &ev[j * h..(j + 1) * h]);
        }
        let mut cp = lin_fwd(p, l.w11, &ec, m);
        for (x, y) in cp.iter_mut().zip(lin_fwd(p, l.w12, &sc, m)) {
            *x += y;
        }
        let mut sv = vec![0.0; n * h];
        for &(i, j, a) in &g.edges {
            axpy(&mut sv[j * h..(j + 1) * h], a, &cp[i * h..(i + 1) * h]);
        }
        let mut vp = lin_fwd(p, l.w21, &ev, n);
        for (x, y) in vp.iter_mut().zip(lin_fwd(p, l.w22, &sv, n)) {
            *x += y;
        }
        let mut hh = lin_fwd(p, l.head1, &vp, n);
        relu(&mut hh);
        let outs = lin_fwd(p, l.head2, &hh, n);
        let out = outs.iter().sum::<f64>() / n as f64;
        Tape { cn, vn, hc, ec, hv, ev, sc, sv, vp, hh, out }
    }

    /// Standardized target estimate.
    pub fn forward(&self, g: &BipartiteGraph) -> Result<f64, GnnError> {
        self.check(g)?;
        Ok(self.tape(g).out)
    }

    /// Predicted optimal objective (min form).
    pub fn predict_objective(&self, g: &BipartiteGraph) -> Result<f64, GnnError> {
        let raw = self.forward(g)?;
        self.target.decode(raw * self.target_std + self.target_mean, g.z_lp_root)
    }

    /// Adds `d out / d params · dout` into `grad`.
    fn backward(&self, g: &BipartiteGraph, t: &Tape, dout: f64, grad: &mut [f64]) {
        let l = self.layout();
        let h = self.hidden;
        let p = &self.params;
        let (m, n) = (g.num_cons, g.num_vars);

        let d_outs = vec![dout / n as f64; n];
        let mut d_hh = lin_bwd(p, grad, l.head2, &t.hh, &d_outs, n, true);
        relu_mask(&mut d_hh, &t.hh);
        let d_vp = lin_bwd(p, grad, l.head1, &t.vp, &d_hh, n, true);

        let mut d_ev = lin_bwd(p, grad, l.w21, &t.ev, &d_vp, n, true);
        let d_sv = lin_bwd(p, grad, l.w22, &t.sv, &d_vp, n, true);
        let mut d_cp = vec![0.0; m * h];
        for &(i, j, a) in &g.edges {
            axpy(&mut d_cp[i * h..(i + 1) * h], a, &d_sv[j * h..(j + 1) * h]);
        }
        let mut d_ec = lin_bwd(p, grad, l.w11, &t.ec, &d_cp, m, true);
        let d_sc = lin_bwd(p, grad, l.w12, &t.sc, &d_cp, m, true);
        for &(i, j, a) in &g.edges {
            axpy(&mut d_ev[j * h..(j + 1) * h], a, &d_sc[i * h..(i + 1) * h]);
        }

        relu_mask(&mut d_ec, &t.ec);
        let mut d_hc = lin_bwd(p, grad, l.emb_c2, &t.hc, &d_ec, m, true);
        relu_mask(&mut d_hc, &t.hc);
        lin_bwd(p, grad, l.emb_c1, &t.cn, &d_hc, m, false);

        relu_mask(&mut d_ev, &t.ev);
        let mut d_hv = lin_bwd(p, grad, l.emb_v2, &t.hv, &d_ev, n, true);
        relu_mask(&mut d_hv, &t.hv);
        lin_bwd(p, grad, l.emb_v1, &t.vn, &d_hv, n, false);
    }

    /// Mean squared error against standardized targets and its gradient.
    pub fn loss_and_gradients(&self, batch: &[(&BipartiteGraph, f64)]) -> Result<(f64, Vec<f64>), GnnError> {
        let mut grad = vec![0.0; self.param_count()];
        if batch.is_empty() {
            return Ok((0.0, grad));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for &(g, target) in batch {
            self.check(g)?;
            let tape = self.tape(g);
            let r = tape.out - target;
            loss += r * r * scale;
            self.backward(g, &tape, 2.0 * r * scale, &mut grad);
        }
        Ok((loss, grad))
    }

    /// Standardized target of a sample under this model's statistics.
    pub fn standardized_target(&self, z_star: f64, z_lp: f64) -> Result<f64, GnnError> {
        Ok((self.target.encode(z_star, z_lp)? - self.target_mean) / self.target_std)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    pub graph: BipartiteGraph,
    pub z_lp: f64,
    pub z_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub target: TargetKind,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams { hidden: 32, lr: 1e-3, epochs: 100, batch_size: 16, patience: 15, seed: 0, target: TargetKind::Theta3 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

/// Per-column mean and standard deviation over stacked rows; a zero
/// deviation becomes 1.
fn column_stats<'a>(rows: impl Iterator<Item = &'a [f64]>, d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut count = 0usize;
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for r in rows {
        count += 1;
        for k in 0..d {
            sum[k] += r[k];
            sq[k] += r[k] * r[k];
        }
    }
    let c = count.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / c).collect();
    let std = (0..d)
        .map(|k| {
            let var = (sq[k] / c - mean[k] * mean[k]).max(0.0);
            let s = libm::sqrt(var);
            if s > 1e-12 {
                s
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len().max(1) as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let s = libm::sqrt(var);
    (mean, if s > 1e-12 { s } else { 1.0 })
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(len: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; len], v: vec![0.0; len], step: 0, lr }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - libm::pow(Self::B1, f64::from(self.step));
        let c2 = 1.0 - libm::pow(Self::B2, f64::from(self.step));
        for k in 0..params.len() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * grad[k];
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * grad[k] * grad[k];
            params[k] -= self.lr * (self.m[k] / c1) / (libm::sqrt(self.v[k] / c2) + Self::EPS);
        }
    }
}

fn mse(model: &GnnModel, data: &[(&BipartiteGraph, f64)]) -> Result<f64, GnnError> {
    let mut s = 0.0;
    for &(g, t) in data {
        let r = model.forward(g)? - t;
        s += r * r;
    }
    Ok(s / data.len().max(1) as f64)
}

/// Trains with Adam on minibatches; statistics come from `train` only.
/// With a nonempty `val`, keeps the parameters of the best validation
/// epoch and stops after `patience` epochs without improvement.
pub fn train(train: &[RegressionSample], val: &[RegressionSample], hp: &TrainParams) -> Result<(GnnModel, TrainReport), GnnError> {
    if train.len() < 10 {
        return Err(GnnError::TooFewSamples(train.len()));
    }
    let mut model = GnnModel::init(hp.hidden, hp.target, derive_seed(hp.seed, 0));
    let (cm, cs) = column_stats(train.iter().flat_map(|s| s.graph.cons_feats.chunks_exact(CONS_FEATS)), CONS_FEATS);
    let (vm, vs) = column_stats(train.iter().flat_map(|s| s.graph.var_feats.chunks_exact(VAR_FEATS)), VAR_FEATS);
    model.cons_mean = cm;
    model.cons_std = cs;
    model.var_mean = vm;
    model.var_std = vs;
    let raw: Vec<f64> = train.iter().map(|s| hp.target.encode(s.z_star, s.z_lp)).collect::<Result<_, _>>()?;
    let (tm, ts) = mean_std(&raw);
    model.target_mean = tm;
    model.target_std = ts;

    let tr: Vec<(&BipartiteGraph, f64)> = train.iter().zip(&raw).map(|(s, &r)| (&s.graph, (r - tm) / ts)).collect();
    let va: Vec<(&BipartiteGraph, f64)> = val
        .iter()
        .map(|s| Ok((&s.graph, model.standardized_target(s.z_star, s.z_lp)?)))
        .collect::<Result<_, GnnError>>()?;

    let mut adam = Adam::new(model.params.len(), hp.lr);
    let mut rng = Rng::new(derive_seed(hp.seed, 1));
    let mut order: Vec<usize> = (0..tr.len()).collect();
    let mut report = TrainReport::default();
    let mut best = (f64::INFINITY, model.params.clone());
    let mut stale = 0;
    let bs = hp.batch_size.max(1);
    for epoch in 0..hp.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(bs) {
            let batch: Vec<(&BipartiteGraph, f64)> = chunk.iter().map(|&k| tr[k]).collect();
            let (loss, grad) = model.loss_and_gradients(&batch)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(GnnError::Diverged { epoch });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.update(&mut model.params, &grad);
        }
        report.train_loss.push(epoch_loss / tr.len() as f64);
        if va.is_empty() {
            report.best_epoch = epoch;
            continue;
        }
        let vl = mse(&model, &va)?;
        if !vl.is_finite() {
            return Err(GnnError::Diverged { epoch });
        }
        report.val_loss.push(vl);
        if vl < best.0 {
            best = (vl, model.params.clone());
            report.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale >= hp.patience {
                break;
            }
        }
    }
    if !va.is_empty() {
        model.params = best.1;
    }
    Ok((model, report))
}
