//! On-disk formats. JSON documents (`milp-v1`, `graph-v1`, `gnn-v1`,
//! `logit-v1`) store floats as shortest round-trip decimal strings so
//! reading gives back the same bits. Line formats (`dyn-v1`,
//! `events-v1`, `solutions-v1`, `manifest-v1`) are tab separated with a
//! `# <format>\tconfig=<hash>` first line.

use std::fmt::Write as _;

use optval_core::classifiers::LogisticModel;
use optval_core::dynamics::{DynamicSample, FEATURE_NAMES};
use optval_core::gnn::{GnnModel, TargetKind};
use optval_core::graph::{BipartiteGraph, CONS_FEATS, VAR_FEATS};
use optval_core::tree::{ChildInfo, EventKind, PruneReason};
use optval_core::{MilpInstance, Proof, TreeEvent};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const MILP_V1: &str = "milp-v1";
pub const GRAPH_V1: &str = "graph-v1";
pub const GNN_V1: &str = "gnn-v1";
pub const LOGIT_V1: &str = "logit-v1";
pub const DYN_V1: &str = "dyn-v1";
pub const EVENTS_V1: &str = "events-v1";
pub const SOLUTIONS_V1: &str = "solutions-v1";
pub const MANIFEST_V1: &str = "manifest-v1";
pub const PREDS_V1: &str = "preds-v1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("expected format {expected}, found {found:?}")]
    Version { expected: &'static str, found: String },
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn invalid(msg: impl Into<String>) -> FormatError {
    FormatError::Invalid(msg.into())
}

/// `f64` stored as its `{:?}` text.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_f64(self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_f64(&s).map(Num).ok_or_else(|| serde::de::Error::custom(format!("not a number: {s:?}")))
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}

fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

fn floats(v: Vec<Num>) -> Vec<f64> {
    v.into_iter().map(|n| n.0).collect()
}

fn check_version(found: &str, expected: &'static str) -> Result<(), FormatError> {
    if found == expected {
        Ok(())
    } else {
        Err(FormatError::Version { expected, found: found.into() })
    }
}

/// Reads the `format` field without committing to a schema.
pub fn json_format(text: &str) -> Result<String, FormatError> {
    #[derive(Deserialize)]
    struct Probe {
        format: String,
    }
    Ok(serde_json::from_str::<Probe>(text)?.format)
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string(doc).expect("in-memory documents serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- milp-v1

#[derive(Serialize, Deserialize)]
struct Entry {
    idx: usize,
    coef: Num,
}

#[derive(Serialize, Deserialize)]
struct MilpDoc {
    format: String,
    config: String,
    name: String,
    n: usize,
    m: usize,
    obj: Vec<Num>,
    rows: Vec<Vec<Entry>>,
    rhs: Vec<Num>,
    integer_set: Vec<usize>,
    bounds: Vec<[Num; 2]>,
    maximize_origin: bool,
}

pub fn write_milp(inst: &MilpInstance, config: &str) -> String {
    to_json(&MilpDoc {
        format: MILP_V1.into(),
        config: config.into(),
        name: inst.name.clone(),
        n: inst.num_vars,
        m: inst.num_cons,
        obj: nums(&inst.obj),
        rows: inst.rows.iter().map(|r| r.iter().map(|&(idx, a)| Entry { idx, coef: Num(a) }).collect()).collect(),
        rhs: nums(&inst.rhs),
        integer_set: inst.integer_set.clone(),
        bounds: inst.var_lower.iter().zip(&inst.var_upper).map(|(&l, &u)| [Num(l), Num(u)]).collect(),
        maximize_origin: inst.maximize_origin,
    })
}

pub fn read_milp(text: &str) -> Result<(MilpInstance, String), FormatError> {
    check_version(&json_format(text)?, MILP_V1)?;
    let d: MilpDoc = serde_json::from_str(text)?;
    if d.obj.len() != d.n || d.bounds.len() != d.n || d.rows.len() != d.m || d.rhs.len() != d.m {
        return Err(invalid("dimension fields disagree with array lengths"));
    }
    if d.integer_set.iter().chain(d.rows.iter().flatten().map(|e| &e.idx)).any(|&j| j >= d.n) {
        return Err(invalid("column index out of range"));
    }
    let (lower, upper) = d.bounds.iter().map(|b| (b[0].0, b[1].0)).unzip();
    let rows = d.rows.into_iter().map(|r| r.into_iter().map(|e| (e.idx, e.coef.0)).collect()).collect();
    let mut inst = MilpInstance::new(d.name, floats(d.obj), rows, floats(d.rhs), d.integer_set, lower, upper);
    inst.maximize_origin = d.maximize_origin;
    Ok((inst, d.config))
}

// --------------------------------------------------------------- graph-v1

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    format: String,
    config: String,
    instance: String,
    num_cons: usize,
    num_vars: usize,
    cons_feats: Vec<Num>,
    var_feats: Vec<Num>,
    edges: Vec<(usize, usize, Num)>,
    z_lp_root: Num,
}

pub fn write_graph(instance: &str, g: &BipartiteGraph, config: &str) -> String {
    to_json(&GraphDoc {
        format: GRAPH_V1.into(),
        config: config.into(),
        instance: instance.into(),
        num_cons: g.num_cons,
        num_vars: g.num_vars,
        cons_feats: nums(&g.cons_feats),
        var_feats: nums(&g.var_feats),
        edges: g.edges.iter().map(|&(i, j, w)| (i, j, Num(w))).collect(),
        z_lp_root: Num(g.z_lp_root),
    })
}

/// Returns the graph and the instance name it belongs to.
pub fn read_graph(text: &str) -> Result<(BipartiteGraph, String), FormatError> {
    check_version(&json_format(text)?, GRAPH_V1)?;
    let d: GraphDoc = serde_json::from_str(text)?;
    if d.cons_feats.len() != d.num_cons * CONS_FEATS || d.var_feats.len() != d.num_vars * VAR_FEATS {
        return Err(invalid("feature arrays do not match the graph dimensions"));
    }
    if d.edges.iter().any(|&(i, j, _)| i >= d.num_cons || j >= d.num_vars) {
        return Err(invalid("edge endpoint out of range"));
    }
    let g = BipartiteGraph {
        num_cons: d.num_cons,
        num_vars: d.num_vars,
        cons_feats: floats(d.cons_feats),
        var_feats: floats(d.var_feats),
        edges: d.edges.into_iter().map(|(i, j, w)| (i, j, w.0)).collect(),
        z_lp_root: d.z_lp_root.0,
    };
    Ok((g, d.instance))
}

// ----------------------------------------------------------------- gnn-v1

#[derive(Serialize, Deserialize)]
struct GnnDoc {
    format: String,
    config: String,
    hidden: usize,
    cons_feats: usize,
    var_feats: usize,
    target: String,
    target_mean: Num,
    target_std: Num,
    cons_mean: Vec<Num>,
    cons_std: Vec<Num>,
    var_mean: Vec<Num>,
    var_std: Vec<Num>,
    params: Vec<Num>,
}

pub fn write_gnn(m: &GnnModel, config: &str) -> String {
    to_json(&GnnDoc {
        format: GNN_V1.into(),
        config: config.into(),
        hidden: m.hidden,
        cons_feats: CONS_FEATS,
        var_feats: VAR_FEATS,
        target: m.target.tag().into(),
        target_mean: Num(m.target_mean),
        target_std: Num(m.target_std),
        cons_mean: nums(&m.cons_mean),
        cons_std: nums(&m.cons_std),
        var_mean: nums(&m.var_mean),
        var_std: nums(&m.var_std),
        params: nums(&m.params),
    })
}

pub fn read_gnn(text: &str) -> Result<(GnnModel, String), FormatError> {
    check_version(&json_format(text)?, GNN_V1)?;
    let d: GnnDoc = serde_json::from_str(text)?;
    if d.cons_feats != CONS_FEATS || d.var_feats != VAR_FEATS {
        return Err(invalid("feature widths differ from this build"));
    }
    let target = TargetKind::parse(&d.target).ok_or_else(|| invalid(format!("unknown target {:?}", d.target)))?;
    let mut m = GnnModel::init(d.hidden, target, 0);
    if d.params.len() != m.param_count() {
        return Err(invalid(format!("expected {} parameters, found {}", m.param_count(), d.params.len())));
    }
    if d.cons_mean.len() != CONS_FEATS || d.cons_std.len() != CONS_FEATS || d.var_mean.len() != VAR_FEATS || d.var_std.len() != VAR_FEATS {
        return Err(invalid("standardization arrays have the wrong width"));
    }
    m.target_mean = d.target_mean.0;
    m.target_std = d.target_std.0;
    m.cons_mean = floats(d.cons_mean);
    m.cons_std = floats(d.cons_std);
    m.var_mean = floats(d.var_mean);
    m.var_std = floats(d.var_std);
    m.params = floats(d.params);
    Ok((m, d.config))
}

// --------------------------------------------------------------- logit-v1

#[derive(Serialize, Deserialize)]
struct LogitDoc {
    format: String,
    config: String,
    features: Vec<String>,
    weights: [Num; 5],
    intercept: Num,
    mean: [Num; 5],
    std: [Num; 5],
    threshold: Num,
    lambda: Num,
}

pub fn write_logit(m: &LogisticModel, config: &str) -> String {
    to_json(&LogitDoc {
        format: LOGIT_V1.into(),
        config: config.into(),
        features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        weights: m.weights.map(Num),
        intercept: Num(m.intercept),
        mean: m.mean.map(Num),
        std: m.std.map(Num),
        threshold: Num(m.threshold),
        lambda: Num(m.lambda),
    })
}

pub fn read_logit(text: &str) -> Result<(LogisticModel, String), FormatError> {
    check_version(&json_format(text)?, LOGIT_V1)?;
    let d: LogitDoc = serde_json::from_str(text)?;
    if d.features != FEATURE_NAMES {
        return Err(invalid("feature order differs from this build"));
    }
    let m = LogisticModel {
        weights: d.weights.map(|n| n.0),
        intercept: d.intercept.0,
        mean: d.mean.map(|n| n.0),
        std: d.std.map(|n| n.0),
        threshold: d.threshold.0,
        lambda: d.lambda.0,
    };
    Ok((m, d.config))
}

// ------------------------------------------------------------ line formats

pub fn header(format: &str, config: &str) -> String {
    format!("# {format}\tconfig={config}\n")
}

/// Checks the header and returns the config hash plus the remaining lines
/// with their 1-based line numbers. A second line starting with `#` is a
/// column legend and is skipped.
/// Numbered data lines of a line format.
type Lines<'a> = Vec<(usize, &'a str)>;

fn body<'a>(text: &'a str, expected: &'static str) -> Result<(String, Lines<'a>), FormatError> {
    let mut lines = text.lines().enumerate();
    let first = lines.next().map(|l| l.1).unwrap_or("");
    let rest = first.strip_prefix("# ").unwrap_or("");
    let mut parts = rest.split('\t');
    check_version(parts.next().unwrap_or(""), expected)?;
    let config = parts.find_map(|p| p.strip_prefix("config=")).unwrap_or("").to_string();
    let rows = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('#')).map(|(i, l)| (i + 1, l)).collect();
    Ok((config, rows))
}

fn field<T: std::str::FromStr>(cols: &[&str], k: usize, line: usize) -> Result<T, FormatError> {
    cols.get(k)
        .ok_or_else(|| FormatError::Line { line, msg: format!("missing column {}", k + 1) })?
        .parse()
        .map_err(|_| FormatError::Line { line, msg: format!("bad value {:?} in column {}", cols[k], k + 1) })
}

fn real(cols: &[&str], k: usize, line: usize) -> Result<f64, FormatError> {
    let s = cols.get(k).ok_or_else(|| FormatError::Line { line, msg: format!("missing column {}", k + 1) })?;
    parse_f64(s).ok_or_else(|| FormatError::Line { line, msg: format!("bad number {s:?} in column {}", k + 1) })
}

fn expect_width(cols: &[&str], n: usize, line: usize) -> Result<(), FormatError> {
    if cols.len() == n {
        Ok(())
    } else {
        Err(FormatError::Line { line, msg: format!("expected {n} columns, found {}", cols.len()) })
    }
}

// ------------------------------------------------------------------ dyn-v1

pub const DYN_COLUMNS: &str =
    "instance\tseed\tt\tgap\ttree_weight\tmedian_gap\topen_trend\tgnn_ratio\tz_bar\tz_star\tz_lp\tf_pred\tlabel";

pub fn write_samples(samples: &[DynamicSample], config: &str) -> String {
    let mut s = header(DYN_V1, config);
    s.push_str("# ");
    s.push_str(DYN_COLUMNS);
    s.push('\n');
    for x in samples {
        write!(s, "{}\t{}\t{}", x.instance, x.seed, x.t).unwrap();
        for v in x.features.iter().chain([&x.z_bar, &x.z_star, &x.z_lp, &x.f_pred]) {
            write!(s, "\t{}", fmt_f64(*v)).unwrap();
        }
        writeln!(s, "\t{}", u8::from(x.label)).unwrap();
    }
    s
}

pub fn read_samples(text: &str) -> Result<(Vec<DynamicSample>, String), FormatError> {
    let (config, rows) = body(text, DYN_V1)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, l) in rows {
        let c: Vec<&str> = l.split('\t').collect();
        expect_width(&c, 13, line)?;
        let mut features = [0.0; 5];
        for (k, f) in features.iter_mut().enumerate() {
            *f = real(&c, 3 + k, line)?;
        }
        out.push(DynamicSample {
            instance: c[0].to_string(),
            seed: field(&c, 1, line)?,
            t: field(&c, 2, line)?,
            features,
            z_bar: real(&c, 8, line)?,
            z_star: real(&c, 9, line)?,
            z_lp: real(&c, 10, line)?,
            f_pred: real(&c, 11, line)?,
            label: match c[12] {
                "0" => false,
                "1" => true,
                v => return Err(FormatError::Line { line, msg: format!("label must be 0 or 1, got {v:?}") }),
            },
        });
    }
    Ok((out, config))
}

// --------------------------------------------------------------- events-v1

pub fn write_events(events: &[TreeEvent], config: &str) -> String {
    let mut s = header(EVENTS_V1, config);
    for ev in events {
        write!(s, "{}\t", ev.t).unwrap();
        match &ev.kind {
            EventKind::Branched { node, var, down, up } => {
                write!(s, "branched\t{node}\t{var}").unwrap();
                for c in [down, up] {
                    write!(s, "\t{}\t{}\t{}\t{}", c.id, c.depth, fmt_f64(c.bound), fmt_f64(c.estimate)).unwrap();
                }
            }
            EventKind::Pruned { node, reason, processed } => {
                write!(s, "pruned\t{node}\t{}\t{}", reason.as_str(), u8::from(*processed)).unwrap()
            }
            EventKind::NewIncumbent { node, z } => write!(s, "incumbent\t{node}\t{}", fmt_f64(*z)).unwrap(),
            EventKind::NodeProcessed { node, depth, z_lp, open_count } => {
                write!(s, "processed\t{node}\t{depth}\t{}\t{open_count}", fmt_f64(*z_lp)).unwrap()
            }
            EventKind::Finished { proof, z_star } => write!(s, "finished\t{}\t{}", proof.as_str(), fmt_f64(*z_star)).unwrap(),
        }
        s.push('\n');
    }
    s
}

pub fn read_events(text: &str) -> Result<(Vec<TreeEvent>, String), FormatError> {
    let (config, rows) = body(text, EVENTS_V1)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, l) in rows {
        let c: Vec<&str> = l.split('\t').collect();
        let t = field(&c, 0, line)?;
        let child = |k: usize| -> Result<ChildInfo, FormatError> {
            Ok(ChildInfo { id: field(&c, k, line)?, depth: field(&c, k + 1, line)?, bound: real(&c, k + 2, line)?, estimate: real(&c, k + 3, line)? })
        };
        let kind = match c.get(1).copied() {
            Some("branched") => {
                expect_width(&c, 12, line)?;
                EventKind::Branched { node: field(&c, 2, line)?, var: field(&c, 3, line)?, down: child(4)?, up: child(8)? }
            }
            Some("pruned") => {
                expect_width(&c, 5, line)?;
                let reason = PruneReason::parse(c[3]).ok_or_else(|| FormatError::Line { line, msg: format!("unknown prune reason {:?}", c[3]) })?;
                EventKind::Pruned { node: field(&c, 2, line)?, reason, processed: field::<u8>(&c, 4, line)? == 1 }
            }
            Some("incumbent") => {
                expect_width(&c, 4, line)?;
                EventKind::NewIncumbent { node: field(&c, 2, line)?, z: real(&c, 3, line)? }
            }
            Some("processed") => {
                expect_width(&c, 6, line)?;
                EventKind::NodeProcessed { node: field(&c, 2, line)?, depth: field(&c, 3, line)?, z_lp: real(&c, 4, line)?, open_count: field(&c, 5, line)? }
            }
            Some("finished") => {
                expect_width(&c, 4, line)?;
                let proof = Proof::parse(c[2]).ok_or_else(|| FormatError::Line { line, msg: format!("unknown proof {:?}", c[2]) })?;
                EventKind::Finished { proof, z_star: real(&c, 3, line)? }
            }
            other => return Err(FormatError::Line { line, msg: format!("unknown event kind {other:?}") }),
        };
        out.push(TreeEvent { t, kind });
    }
    Ok((out, config))
}

// ------------------------------------------------------------ solutions-v1

/// One solved instance: optimum, root LP value and search size.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRow {
    pub instance: String,
    pub z_star: f64,
    pub z_lp: f64,
    pub nodes: usize,
    pub proof: Proof,
}

pub fn write_solutions(rows: &[SolutionRow], config: &str) -> String {
    let mut s = header(SOLUTIONS_V1, config);
    s.push_str("# instance\tz_star\tz_lp\tnodes\tproof\n");
    for r in rows {
        writeln!(s, "{}\t{}\t{}\t{}\t{}", r.instance, fmt_f64(r.z_star), fmt_f64(r.z_lp), r.nodes, r.proof.as_str()).unwrap();
    }
    s
}

pub fn read_solutions(text: &str) -> Result<(Vec<SolutionRow>, String), FormatError> {
    let (config, rows) = body(text, SOLUTIONS_V1)?;
    rows.into_iter()
        .map(|(line, l)| {
            let c: Vec<&str> = l.split('\t').collect();
            expect_width(&c, 5, line)?;
            Ok(SolutionRow {
                instance: c[0].to_string(),
                z_star: real(&c, 1, line)?,
                z_lp: real(&c, 2, line)?,
                nodes: field(&c, 3, line)?,
                proof: Proof::parse(c[4]).ok_or_else(|| FormatError::Line { line, msg: format!("unknown proof {:?}", c[4]) })?,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(|r| (r, config))
}

// ------------------------------------------------------------- manifest-v1

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub file: String,
    pub family: String,
    pub seed: u64,
    pub params: String,
}

pub fn write_manifest(rows: &[ManifestRow], config: &str) -> String {
    let mut s = header(MANIFEST_V1, config);
    s.push_str("# file\tfamily\tseed\tparams\n");
    for r in rows {
        writeln!(s, "{}\t{}\t{}\t{}", r.file, r.family, r.seed, r.params).unwrap();
    }
    s
}

pub fn read_manifest(text: &str) -> Result<(Vec<ManifestRow>, String), FormatError> {
    let (config, rows) = body(text, MANIFEST_V1)?;
    rows.into_iter()
        .map(|(line, l)| {
            let c: Vec<&str> = l.split('\t').collect();
            expect_width(&c, 4, line)?;
            Ok(ManifestRow { file: c[0].into(), family: c[1].into(), seed: field(&c, 2, line)?, params: c[3].into() })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(|r| (r, config))
}

// ---------------------------------------------------------------- preds-v1

/// Classifier outputs for one test sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PredRow {
    pub instance: String,
    pub seed: u64,
    pub t: usize,
    pub label: bool,
    pub est: bool,
    pub rank1: bool,
    pub gnn0: bool,
    pub gnn_eps: bool,
    pub dynamic: bool,
    pub p_dynamic: f64,
}

pub const PRED_COLUMNS: &str = "instance\tseed\tt\tlabel\test\trank1\tgnn0\tgnn_eps\tdynamic\tp_dynamic";

/// Writes predictions; `meta` pairs go into the header after the config.
pub fn write_preds(rows: &[PredRow], config: &str, meta: &[(&str, String)]) -> String {
    let mut s = format!("# {PREDS_V1}\tconfig={config}");
    for (k, v) in meta {
        write!(s, "\t{k}={v}").unwrap();
    }
    s.push('\n');
    s.push_str("# ");
    s.push_str(PRED_COLUMNS);
    s.push('\n');
    for r in rows {
        let b = |x: bool| u8::from(x);
        writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.instance,
            r.seed,
            r.t,
            b(r.label),
            b(r.est),
            b(r.rank1),
            b(r.gnn0),
            b(r.gnn_eps),
            b(r.dynamic),
            fmt_f64(r.p_dynamic)
        )
        .unwrap();
    }
    s
}

/// Returns rows, config hash and the header's extra `key=value` pairs.
/// `key=value` pairs from a predictions header.
pub type Meta = Vec<(String, String)>;

pub fn read_preds(text: &str) -> Result<(Vec<PredRow>, String, Meta), FormatError> {
    let (config, rows) = body(text, PREDS_V1)?;
    let meta = text
        .lines()
        .next()
        .unwrap_or("")
        .split('\t')
        .skip(2)
        .filter_map(|p| p.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect();
    let flag = |c: &[&str], k: usize, line: usize| -> Result<bool, FormatError> {
        match field::<u8>(c, k, line)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(FormatError::Line { line, msg: format!("flag must be 0 or 1, got {v}") }),
        }
    };
    let mut out = Vec::with_capacity(rows.len());
    for (line, l) in rows {
        let c: Vec<&str> = l.split('\t').collect();
        expect_width(&c, 10, line)?;
        out.push(PredRow {
            instance: c[0].into(),
            seed: field(&c, 1, line)?,
            t: field(&c, 2, line)?,
            label: flag(&c, 3, line)?,
            est: flag(&c, 4, line)?,
            rank1: flag(&c, 5, line)?,
            gnn0: flag(&c, 6, line)?,
            gnn_eps: flag(&c, 7, line)?,
            dynamic: flag(&c, 8, line)?,
            p_dynamic: real(&c, 9, line)?,
        });
    }
    Ok((out, config, meta))
}
