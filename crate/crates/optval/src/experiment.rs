//! Stage drivers. Stages communicate through split directories:
//!
//! - `*.milp` instances and `manifest.tsv` (gen)
//! - `solutions.tsv` and `graphs/<name>.graph` (solve)
//! - `samples.dyn` and `logs/<name>-s<seed>.events` (collect)

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use optval_core::bnb::NoObserver;
use optval_core::classifiers::{baseline_predictions, c_gnn, train_on_samples, LogisticModel, LogisticParams, PhaseHistory};
use optval_core::dynamics::{collect, gnn_ratio, CollectParams, DynError, DynamicSample};
use optval_core::evaluation::{
    classification_report, feature_importance, majority_class, phase_breakdown, relative_error, tune_epsilon,
    ClassificationReport, GnnCase, PhaseBreakdown,
};
use optval_core::gen::{gen_mixed, Family, FamilyConfig};
use optval_core::gnn::{train, GnnModel, RegressionSample, TargetKind, TrainParams, TrainReport};
use optval_core::graph::{extract, BipartiteGraph};
use optval_core::rng::derive_seed;
use optval_core::{solve, BoundSet, LpStatus, MilpInstance, Proof, SolveParams, TreeEvent};

use crate::config::{FamilySel, RunConfig};
use crate::formats::{self, ManifestRow, PredRow, SolutionRow};
use crate::io::{atomic_write, par_map, progress, read_text};
use crate::report;

pub const MANIFEST: &str = "manifest.tsv";
pub const SOLUTIONS: &str = "solutions.tsv";
pub const SAMPLES: &str = "samples.dyn";
pub const GRAPHS: &str = "graphs";
pub const LOGS: &str = "logs";

pub fn solve_params(cfg: &RunConfig) -> SolveParams {
    SolveParams { node_limit: cfg.node_limit, heuristic_period: cfg.heuristic_period, ..SolveParams::default() }
}

pub fn gnn_params(cfg: &RunConfig, target: TargetKind) -> TrainParams {
    TrainParams {
        hidden: cfg.gnn_hidden,
        lr: cfg.gnn_lr,
        epochs: cfg.gnn_epochs,
        batch_size: cfg.gnn_batch,
        patience: cfg.gnn_patience,
        seed: derive_seed(cfg.seed, 0x6E6E),
        target,
    }
}

pub fn logit_params(cfg: &RunConfig) -> LogisticParams {
    LogisticParams { lambda: cfg.logit_lambda, lr: cfg.logit_lr, epochs: cfg.logit_epochs, threshold: cfg.logit_threshold }
}

/// `rows=100 cols=200 density=0.05` style description.
pub fn describe(c: &FamilyConfig) -> String {
    match *c {
        FamilyConfig::SetCovering { rows, cols, density } => format!("rows={rows} cols={cols} density={density:?}"),
        FamilyConfig::CombAuction { items, bids } => format!("items={items} bids={bids}"),
        FamilyConfig::Gisp { nodes, edge_prob, alpha } => format!("nodes={nodes} edge_prob={edge_prob:?} alpha={alpha:?}"),
    }
}

// ---------------------------------------------------------------- gen

/// Writes `count` instances plus a manifest into `dir`. Instance `k` of a
/// single family uses seed `derive_seed(seed, k)`.
pub fn gen_split(
    dir: &Path,
    family: FamilySel,
    sizes: &dyn Fn(Family) -> FamilyConfig,
    count: usize,
    seed: u64,
    hash: &str,
) -> Result<Vec<ManifestRow>> {
    let items: Vec<(Family, u64, MilpInstance)> = match family {
        FamilySel::One(f) => (0..count)
            .map(|k| {
                let s = derive_seed(seed, k as u64);
                Ok((f, s, sizes(f).generate(s)?))
            })
            .collect::<Result<_>>()?,
        FamilySel::Mixed => gen_mixed(count, &Family::ALL.map(sizes), seed)?,
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut rows = Vec::with_capacity(items.len());
    for (f, s, inst) in &items {
        let file = format!("{}.milp", inst.name);
        if rows.iter().any(|r: &ManifestRow| r.file == file) {
            bail!("duplicate instance name {}", inst.name);
        }
        atomic_write(&dir.join(&file), formats::write_milp(inst, hash).as_bytes())?;
        rows.push(ManifestRow { file, family: f.tag().into(), seed: *s, params: describe(&sizes(*f)) });
    }
    atomic_write(&dir.join(MANIFEST), formats::write_manifest(&rows, hash).as_bytes())?;
    Ok(rows)
}

/// `*.milp` files of a directory in name order.
pub fn instance_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "milp"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_instance(path: &Path) -> Result<MilpInstance> {
    let (inst, _) = formats::read_milp(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(inst)
}

pub fn load_split(dir: &Path) -> Result<Vec<MilpInstance>> {
    instance_files(dir)?.iter().map(|p| load_instance(p)).collect()
}

// -------------------------------------------------------------- solve

/// Root LP, root graph and the full search of one instance.
pub fn solve_one(inst: &MilpInstance, sp: &SolveParams) -> Result<(SolutionRow, BipartiteGraph, Vec<TreeEvent>)> {
    let lp = solve_lp_checked(inst)?;
    let graph = extract(inst, &lp).map_err(|e| anyhow!("{}: graph: {e}", inst.name))?;
    let res = solve(inst, sp, &mut NoObserver).map_err(|e| anyhow!("{}: {e}", inst.name))?;
    let row = SolutionRow { instance: inst.name.clone(), z_star: res.z_star, z_lp: lp.z_lp, nodes: res.node_count, proof: res.proof };
    Ok((row, graph, res.event_log))
}

fn solve_lp_checked(inst: &MilpInstance) -> Result<optval_core::LpSolution> {
    let lp = optval_core::simplex::solve_lp(inst, &BoundSet::new()).map_err(|e| anyhow!("{}: root LP: {e}", inst.name))?;
    if lp.status != LpStatus::Optimal {
        bail!("{}: root LP is {:?}", inst.name, lp.status);
    }
    Ok(lp)
}

/// Solves every instance of `dir`, writing `solutions.tsv`, the root
/// graphs and, with `logs`, one event log per instance into that directory.
pub fn solve_split(dir: &Path, cfg: &RunConfig, hash: &str, logs: Option<&Path>) -> Result<Vec<SolutionRow>> {
    let files = instance_files(dir)?;
    let sp = solve_params(cfg);
    let rows = par_map(&files, |path| {
        let inst = load_instance(path)?;
        let (row, graph, events) = solve_one(&inst, &sp)?;
        atomic_write(&dir.join(GRAPHS).join(format!("{}.graph", inst.name)), formats::write_graph(&inst.name, &graph, hash).as_bytes())?;
        if let Some(l) = logs {
            atomic_write(&l.join(format!("{}.events", inst.name)), formats::write_events(&events, hash).as_bytes())?;
        }
        Ok(row)
    })?;
    let open = rows.iter().filter(|r| r.proof != Proof::OptimalityProved).count();
    if open > 0 {
        progress("solve", format!("{open} of {} runs stopped before an optimality proof", rows.len()));
    }
    atomic_write(&dir.join(SOLUTIONS), formats::write_solutions(&rows, hash).as_bytes())?;
    Ok(rows)
}

pub fn load_solutions(dir: &Path) -> Result<Vec<SolutionRow>> {
    let path = dir.join(SOLUTIONS);
    if !path.exists() {
        bail!("{} is missing; run solve on {} first", path.display(), dir.display());
    }
    let (rows, _) = formats::read_solutions(&read_text(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(rows)
}

pub fn load_graph(dir: &Path, instance: &str) -> Result<BipartiteGraph> {
    let path = dir.join(GRAPHS).join(format!("{instance}.graph"));
    let (g, _) = formats::read_graph(&read_text(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(g)
}

// ------------------------------------------------------------ collect

#[derive(Debug, Clone, Default)]
pub struct CollectOutcome {
    pub samples: Vec<DynamicSample>,
    pub runs: usize,
    /// `(instance, seed)` of runs without an optimality proof.
    pub censored: Vec<(String, u64)>,
}

/// Seed of run `k` on the instance at position `index` of a split.
pub fn run_seed(base: u64, index: usize, k: usize) -> u64 {
    derive_seed(derive_seed(base, index as u64), k as u64)
}

pub fn log_path(dir: &Path, instance: &str, seed: u64) -> PathBuf {
    dir.join(LOGS).join(format!("{instance}-s{seed}.events"))
}

/// Runs the collection protocol `collect_seeds` times per instance. With
/// a model the samples carry its prediction and ratio; without one both
/// are NaN until [`attach_ratio`].
pub fn collect_split(dir: &Path, cfg: &RunConfig, hash: &str, gnn: Option<&GnnModel>) -> Result<CollectOutcome> {
    let files = instance_files(dir)?;
    let z_lp: BTreeMap<String, f64> = load_solutions(dir)?.into_iter().map(|r| (r.instance, r.z_lp)).collect();
    let jobs: Vec<(usize, usize)> = (0..files.len()).flat_map(|i| (0..cfg.collect_seeds).map(move |k| (i, k))).collect();
    let sp = solve_params(cfg);
    type Run = (Vec<DynamicSample>, Option<(String, u64)>);
    let runs: Vec<Run> = par_map(&jobs, |&(i, k)| {
        let inst = load_instance(&files[i])?;
        let zl = *z_lp.get(&inst.name).ok_or_else(|| anyhow!("{} has no row in {SOLUTIONS}", inst.name))?;
        let f_pred = match gnn {
            Some(m) => m.predict_objective(&load_graph(dir, &inst.name)?)?,
            None => f64::NAN,
        };
        let seed = run_seed(cfg.seed, i, k);
        let params = CollectParams { warmup: cfg.warmup, p_sample: cfg.p_sample, seed, window: cfg.window };
        match collect(&inst, f_pred, zl, params, &sp) {
            Ok((samples, res)) => {
                atomic_write(&log_path(dir, &inst.name, seed), formats::write_events(&res.event_log, hash).as_bytes())?;
                Ok((samples, None))
            }
            Err(DynError::CensoredRun(p)) => {
                progress("collect", format!("{} seed {seed}: censored ({}), samples dropped", inst.name, p.as_str()));
                Ok((Vec::new(), Some((inst.name.clone(), seed))))
            }
            Err(e) => Err(anyhow!("{}: {e}", inst.name)),
        }
    })?;
    let mut out = CollectOutcome { runs: runs.len(), ..Default::default() };
    for (s, c) in runs {
        out.samples.extend(s);
        out.censored.extend(c);
    }
    atomic_write(&dir.join(SAMPLES), formats::write_samples(&out.samples, hash).as_bytes())?;
    Ok(out)
}

pub fn load_samples(dir: &Path) -> Result<Vec<DynamicSample>> {
    let path = if dir.is_dir() { dir.join(SAMPLES) } else { dir.to_path_buf() };
    let (s, _) = formats::read_samples(&read_text(&path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(s)
}

/// GNN objective prediction for every solved instance of a split.
pub fn predictions(dir: &Path, model: &GnnModel) -> Result<BTreeMap<String, f64>> {
    load_solutions(dir)?
        .into_iter()
        .map(|r| {
            let f = model.predict_objective(&load_graph(dir, &r.instance)?)?;
            Ok((r.instance, f))
        })
        .collect()
}

/// Fills in `f_pred` and `ρ = f / z̄`. Samples whose incumbent is too
/// close to zero are dropped; the count is returned.
pub fn attach_ratio(samples: Vec<DynamicSample>, f: &BTreeMap<String, f64>) -> Result<(Vec<DynamicSample>, usize)> {
    let mut kept = Vec::with_capacity(samples.len());
    let mut dropped = 0;
    for mut s in samples {
        let fp = *f.get(&s.instance).ok_or_else(|| anyhow!("no prediction for instance {}", s.instance))?;
        match gnn_ratio(fp, s.z_bar) {
            Ok(rho) => {
                s.f_pred = fp;
                s.features[4] = rho;
                kept.push(s);
            }
            Err(_) => dropped += 1,
        }
    }
    Ok((kept, dropped))
}

// ---------------------------------------------------------- train-gnn

/// Root graphs and solution values of the proved instances of a split.
pub fn regression_set(dir: &Path) -> Result<Vec<RegressionSample>> {
    load_solutions(dir)?
        .into_iter()
        .filter(|r| r.proof == Proof::OptimalityProved)
        .map(|r| Ok(RegressionSample { graph: load_graph(dir, &r.instance)?, z_lp: r.z_lp, z_star: r.z_star }))
        .collect()
}

pub fn train_gnn(train_set: &[RegressionSample], val_set: &[RegressionSample], cfg: &RunConfig, target: TargetKind) -> Result<(GnnModel, TrainReport)> {
    Ok(train(train_set, val_set, &gnn_params(cfg, target))?)
}

/// Relative error (percent) of the model's objective predictions.
pub fn gnn_error(model: &GnnModel, set: &[RegressionSample]) -> Result<f64> {
    let preds: Vec<f64> = set.iter().map(|s| model.predict_objective(&s.graph)).collect::<Result<_, _>>()?;
    let trues: Vec<f64> = set.iter().map(|s| s.z_star).collect();
    Ok(relative_error(&preds, &trues)?)
}

/// Relative error of predicting `z* ≈ z^LP`.
pub fn lp_error(set: &[RegressionSample]) -> Result<f64> {
    let preds: Vec<f64> = set.iter().map(|s| s.z_lp).collect();
    let trues: Vec<f64> = set.iter().map(|s| s.z_star).collect();
    Ok(relative_error(&preds, &trues)?)
}

// ----------------------------------------------------- classification

pub fn gnn_cases(samples: &[DynamicSample]) -> Vec<GnnCase> {
    samples.iter().map(|s| (s.f_pred, s.z_bar, s.label)).collect()
}

/// Predictions of every classifier on `samples`. Baselines are rebuilt
/// from the stored event log of each run.
pub fn classify(dir: &Path, samples: &[DynamicSample], logit: &LogisticModel, eps: f64) -> Result<Vec<PredRow>> {
    let mut runs: BTreeMap<(&str, u64), Vec<usize>> = BTreeMap::new();
    for (k, s) in samples.iter().enumerate() {
        runs.entry((&s.instance, s.seed)).or_default().push(k);
    }
    let mut base = vec![(false, false); samples.len()];
    for ((instance, seed), idx) in &runs {
        let path = log_path(dir, instance, *seed);
        let (events, _) = formats::read_events(&read_text(&path)?).with_context(|| format!("parsing {}", path.display()))?;
        let hist = PhaseHistory::from_events(&events).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let times: Vec<usize> = idx.iter().map(|&k| samples[k].t).collect();
        for (&k, p) in idx.iter().zip(baseline_predictions(&hist, &times)) {
            base[k] = p;
        }
    }
    Ok(samples
        .iter()
        .zip(base)
        .map(|(s, (est, rank1))| {
            let (p, dynamic) = logit.predict(&s.features);
            PredRow {
                instance: s.instance.clone(),
                seed: s.seed,
                t: s.t,
                label: s.label,
                est,
                rank1,
                gnn0: c_gnn(s.f_pred, s.z_bar, 0.0),
                gnn_eps: c_gnn(s.f_pred, s.z_bar, eps),
                dynamic,
                p_dynamic: p,
            }
        })
        .collect())
}

pub const CLASSIFIERS: [&str; 6] = ["Majority", "C^est", "C^rank-1", "C^GNN_0", "C^GNN_eps*", "C^D"];

/// One report per classifier in [`CLASSIFIERS`] order.
pub fn reports(preds: &[PredRow], majority: bool) -> Vec<(&'static str, ClassificationReport)> {
    let labels: Vec<bool> = preds.iter().map(|p| p.label).collect();
    let cols: [Vec<bool>; 6] = [
        vec![majority; preds.len()],
        preds.iter().map(|p| p.est).collect(),
        preds.iter().map(|p| p.rank1).collect(),
        preds.iter().map(|p| p.gnn0).collect(),
        preds.iter().map(|p| p.gnn_eps).collect(),
        preds.iter().map(|p| p.dynamic).collect(),
    ];
    CLASSIFIERS.iter().zip(cols).map(|(&name, c)| (name, classification_report(&labels, &c))).collect()
}

// ----------------------------------------------------- phase analysis

/// Solves each instance once per seed `0..seeds` and splits every proved
/// run into phases. Unproved runs are counted as excluded.
pub fn phase_analysis(instances: &[MilpInstance], seeds: usize, cfg: &RunConfig) -> Result<PhaseBreakdown> {
    let jobs: Vec<(usize, u64)> = (0..instances.len()).flat_map(|i| (0..seeds as u64).map(move |s| (i, s))).collect();
    let sp = solve_params(cfg);
    let runs = par_map(&jobs, |&(i, s)| {
        let res = solve(&instances[i], &SolveParams { seed: s, ..sp }, &mut NoObserver).map_err(|e| anyhow!("{}: {e}", instances[i].name))?;
        Ok((res.event_log, res.z_star))
    })?;
    let b = phase_breakdown(&runs);
    if b.excluded > 0 {
        progress("phase-analysis", format!("{} censored runs excluded", b.excluded));
    }
    Ok(b)
}

/// `phase_instances` fresh Q1-sized instances of `family`, each solved
/// with `phase_seeds` seeds.
pub fn family_phases(family: Family, cfg: &RunConfig) -> Result<PhaseBreakdown> {
    let sizes = cfg.q1_config(family);
    let insts = (0..cfg.phase_instances).map(|k| sizes.generate(derive_seed(cfg.seed, k as u64))).collect::<Result<Vec<_>, _>>()?;
    phase_analysis(&insts, cfg.phase_seeds, cfg)
}

// ------------------------------------------------------------ pipeline

#[derive(Debug, Clone)]
pub struct TargetResult {
    pub target: TargetKind,
    pub val_error: f64,
    pub test_error: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

#[derive(Debug, Clone)]
pub struct Q1Summary {
    pub family: FamilySel,
    pub targets: Vec<TargetResult>,
    pub lp_val_error: f64,
    pub lp_test_error: f64,
    /// Lowest validation error.
    pub best: TargetKind,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Q1Summary {
    pub fn test_error(&self, t: TargetKind) -> f64 {
        self.targets.iter().find(|r| r.target == t).map_or(f64::NAN, |r| r.test_error)
    }
}

#[derive(Debug, Clone)]
pub struct Q2Summary {
    pub family: FamilySel,
    pub target: TargetKind,
    pub gnn_test_error: f64,
    pub eps: f64,
    pub eps_curve: Vec<(f64, f64)>,
    pub majority: bool,
    pub reports: Vec<(&'static str, ClassificationReport)>,
    pub importance: Vec<(&'static str, f64)>,
    pub logit: LogisticModel,
    pub samples: [usize; 3],
    pub positives: [usize; 3],
    pub runs: usize,
    pub censored: usize,
    pub dropped: usize,
}

impl Q2Summary {
    pub fn report(&self, name: &str) -> ClassificationReport {
        self.reports.iter().find(|r| r.0 == name).map(|r| r.1).expect("known classifier name")
    }
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub q1: Q1Summary,
    pub q2: Q2Summary,
    /// Wall time spent generating, solving and training for Q1. Not
    /// written to any artifact.
    pub q1_secs: f64,
}

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

fn split_seed(cfg: &RunConfig, question: u64, split: usize) -> u64 {
    derive_seed(cfg.seed, 10 * question + split as u64)
}

/// Mixed sets need a multiple of three.
fn family_count(family: FamilySel, n: usize) -> usize {
    match family {
        FamilySel::One(_) => n,
        FamilySel::Mixed => n.div_ceil(3) * 3,
    }
}

fn staged<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.with_context(|| format!("stage {stage} failed"))
}

/// gen → solve → collect → train-gnn → train-dyn → eval for one family,
/// with reports under `out/reports`.
pub fn pipeline(cfg: &RunConfig, out: &Path) -> Result<PipelineSummary> {
    let hash = cfg.hash();
    let family = cfg.family;
    let q1_dirs: Vec<PathBuf> = SPLITS.iter().map(|s| out.join("q1").join(s)).collect();
    let q2_dirs: Vec<PathBuf> = SPLITS.iter().map(|s| out.join("q2").join(s)).collect();
    let q1_counts = [cfg.q1_train, cfg.q1_val, cfg.q1_test];
    let q2_counts = [cfg.q2_train, cfg.q2_val, cfg.q2_test];
    let q1_sizes = |f: Family| cfg.q1_config(f);
    let q2_sizes = |f: Family| cfg.q2_config(f);
    let mut q1_secs = 0.0;

    staged("gen", (|| {
        for k in 0..3 {
            let clock = Instant::now();
            gen_split(&q1_dirs[k], family, &q1_sizes, family_count(family, q1_counts[k]), split_seed(cfg, 1, k), &hash)?;
            q1_secs += clock.elapsed().as_secs_f64();
            gen_split(&q2_dirs[k], family, &q2_sizes, family_count(family, q2_counts[k]), split_seed(cfg, 2, k), &hash)?;
        }
        progress("gen", format!("{family}: instances written under {}", out.display()));
        Ok(())
    })())?;

    staged("solve", (|| {
        for (k, d) in q1_dirs.iter().chain(&q2_dirs).enumerate() {
            let clock = Instant::now();
            let rows = solve_split(d, cfg, &hash, None)?;
            if k < 3 {
                q1_secs += clock.elapsed().as_secs_f64();
            }
            let nodes: usize = rows.iter().map(|r| r.nodes).sum();
            progress("solve", format!("{}: {} instances, {nodes} nodes", d.display(), rows.len()));
        }
        Ok(())
    })())?;

    let collected = staged("collect", (|| {
        let mut outs = Vec::new();
        for d in &q2_dirs {
            let o = collect_split(d, cfg, &hash, None)?;
            progress("collect", format!("{}: {} runs, {} samples, {} censored", d.display(), o.runs, o.samples.len(), o.censored.len()));
            outs.push(o);
        }
        Ok(outs)
    })())?;

    let models = out.join("models");
    let (q1, q2_gnn) = staged("train-gnn", (|| {
        let clock = Instant::now();
        let sets: Vec<Vec<RegressionSample>> = q1_dirs.iter().map(|d| regression_set(d)).collect::<Result<_>>()?;
        let mut targets = Vec::new();
        for t in TargetKind::ALL {
            let (model, rep) = train_gnn(&sets[0], &sets[1], cfg, t)?;
            atomic_write(&models.join(format!("q1-{}.gnn", t.tag())), formats::write_gnn(&model, &hash).as_bytes())?;
            let r = TargetResult {
                target: t,
                val_error: gnn_error(&model, &sets[1])?,
                test_error: gnn_error(&model, &sets[2])?,
                best_epoch: rep.best_epoch,
                epochs_run: rep.train_loss.len(),
            };
            progress("train-gnn", format!("{family} {}: val {:.3}% test {:.3}% ({} epochs)", t.tag(), r.val_error, r.test_error, r.epochs_run));
            targets.push(r);
        }
        let best = targets.iter().min_by(|a, b| a.val_error.total_cmp(&b.val_error)).map(|r| r.target).expect("three targets");
        let q1 = Q1Summary {
            family,
            lp_val_error: lp_error(&sets[1])?,
            lp_test_error: lp_error(&sets[2])?,
            best,
            targets,
            train: sets[0].len(),
            val: sets[1].len(),
            test: sets[2].len(),
        };
        q1_secs += clock.elapsed().as_secs_f64();
        let q2_train = regression_set(&q2_dirs[0])?;
        let q2_val = regression_set(&q2_dirs[1])?;
        let (model, _) = train_gnn(&q2_train, &q2_val, cfg, best)?;
        atomic_write(&models.join("q2.gnn"), formats::write_gnn(&model, &hash).as_bytes())?;
        Ok((q1, model))
    })())?;

    let (sets, logit, dropped) = staged("train-dyn", (|| {
        let mut sets = Vec::new();
        let mut dropped = 0;
        for (d, o) in q2_dirs.iter().zip(&collected) {
            let (s, k) = attach_ratio(o.samples.clone(), &predictions(d, &q2_gnn)?)?;
            atomic_write(&d.join(SAMPLES), formats::write_samples(&s, &hash).as_bytes())?;
            dropped += k;
            sets.push(s);
        }
        let (logit, _) = train_on_samples(&sets[0], &logit_params(cfg))?;
        atomic_write(&models.join("q2.logit"), formats::write_logit(&logit, &hash).as_bytes())?;
        Ok((sets, logit, dropped))
    })())?;

    let summary = staged("eval", (|| {
        let (eps, eps_curve) = tune_epsilon(&gnn_cases(&sets[1]))?;
        let preds = classify(&q2_dirs[2], &sets[2], &logit, eps)?;
        let majority = majority_class(&sets[0].iter().map(|s| s.label).collect::<Vec<_>>());
        atomic_write(
            &out.join("reports").join("q2-preds.tsv"),
            formats::write_preds(&preds, &hash, &[("eps", formats::fmt_f64(eps)), ("majority", u8::from(majority).to_string())]).as_bytes(),
        )?;
        let q2_test = regression_set(&q2_dirs[2])?;
        let q2 = Q2Summary {
            family,
            target: q1.best,
            gnn_test_error: gnn_error(&q2_gnn, &q2_test)?,
            eps,
            eps_curve,
            majority,
            reports: reports(&preds, majority),
            importance: feature_importance(&logit),
            logit,
            samples: [sets[0].len(), sets[1].len(), sets[2].len()],
            positives: [0, 1, 2].map(|k| sets[k].iter().filter(|s| s.label).count()),
            runs: collected.iter().map(|o| o.runs).sum(),
            censored: collected.iter().map(|o| o.censored.len()).sum(),
            dropped,
        };
        let s = PipelineSummary { q1: q1.clone(), q2, q1_secs };
        report::write_pipeline_reports(&out.join("reports"), &s, &hash)?;
        Ok(s)
    })())?;
    Ok(summary)
}
