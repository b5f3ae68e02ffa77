//! Command-line front end. Exit codes: 0 success, 1 runtime failure
//! (the message names the stage), 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use optval_core::classifiers::train_on_samples;
use optval_core::evaluation::{majority_class, tune_epsilon};
use optval_core::gen::Family;

use crate::config::{parse_pairs, RunConfig};
use crate::experiment as ex;
use crate::formats;
use crate::io::{atomic_write, progress, read_text};
use crate::report;

#[derive(Parser, Debug)]
#[command(name = "optval", version, about = "Objective-value and phase-transition prediction for branch and bound")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// key=value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key (repeatable); applied last.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// tiny, desk or full.
    #[arg(long, global = true)]
    pub scale: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate instances and a manifest.
    Gen {
        #[arg(long)]
        family: String,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Size preset: q1 (objective-value sizes) or q2 (collection sizes).
        #[arg(long, default_value = "q1")]
        sizes: String,
        #[command(flatten)]
        common: Common,
    },
    /// Solve one instance file, or every instance in a directory.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        node_limit: Option<usize>,
        /// Event log file (single instance) or log directory (directory input).
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Collect dynamic samples from a solved directory.
    Collect {
        #[arg(long)]
        dir: PathBuf,
        /// GNN model; without it `f_pred` and the ratio are left empty.
        #[arg(long)]
        gnn: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the objective-value GNN.
    TrainGnn {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train the dynamic-feature logistic classifier.
    TrainDyn {
        #[arg(long)]
        data: PathBuf,
        /// GNN model used to fill in the ratio feature.
        #[arg(long)]
        gnn: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Grid-search the GNN classifier offset on a validation directory.
    TuneEps {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gnn: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every classifier on a collected directory.
    Classify {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        gnn: PathBuf,
        #[arg(long)]
        logit: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        eps: f64,
        /// Training directory whose labels define the majority class.
        #[arg(long)]
        majority_from: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Classification report from a predictions file, or GNN error on a
    /// solved directory.
    Eval {
        #[arg(long)]
        preds: Option<PathBuf>,
        #[arg(long)]
        gnn: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Phase breakdown over instances × seeds.
    PhaseAnalysis {
        /// Families to analyse (comma separated); ignored with --in.
        #[arg(long, default_value = "sc,ca,gisp")]
        family: String,
        /// Existing instance directory instead of generated instances.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// gen → solve → collect → train-gnn → train-dyn → eval.
    Pipeline {
        #[arg(long)]
        family: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen { .. } => "gen",
            Command::Solve { .. } => "solve",
            Command::Collect { .. } => "collect",
            Command::TrainGnn { .. } => "train-gnn",
            Command::TrainDyn { .. } => "train-dyn",
            Command::TuneEps { .. } => "tune-eps",
            Command::Classify { .. } => "classify",
            Command::Eval { .. } => "eval",
            Command::PhaseAnalysis { .. } => "phase-analysis",
            Command::Pipeline { .. } => "pipeline",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Gen { common, .. }
            | Command::Solve { common, .. }
            | Command::Collect { common, .. }
            | Command::TrainGnn { common, .. }
            | Command::TrainDyn { common, .. }
            | Command::TuneEps { common, .. }
            | Command::Classify { common, .. }
            | Command::Eval { common, .. }
            | Command::PhaseAnalysis { common, .. }
            | Command::Pipeline { common, .. } => common,
        }
    }

    /// Config overrides carried by subcommand flags.
    fn flag_pairs(&self) -> Vec<(String, String)> {
        let mut v = Vec::new();
        match self {
            Command::Gen { family, count, .. } => {
                v.push(("family".into(), family.clone()));
                v.push(("count".into(), count.to_string()));
            }
            Command::Solve { node_limit: Some(n), .. } => v.push(("node_limit".into(), n.to_string())),
            Command::TrainGnn { target: Some(t), .. } => v.push(("target".into(), t.clone())),
            Command::Pipeline { family, .. } => v.push(("family".into(), family.clone())),
            _ => {}
        }
        v
    }
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

/// Layers: scale preset < config file < flags < `--set`.
fn resolve_config(cmd: &Command) -> Result<RunConfig, Failure> {
    let c = cmd.common();
    let mut layers = Vec::new();
    if let Some(path) = &c.config {
        let text = read_text(path).map_err(Failure::Runtime)?;
        layers.extend(parse_pairs(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?);
    }
    if let Some(s) = &c.scale {
        layers.push(("scale".into(), s.clone()));
    }
    if let Some(s) = c.seed {
        layers.push(("seed".into(), s.to_string()));
    }
    layers.extend(cmd.flag_pairs());
    for kv in &c.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        layers.push((k.trim().into(), v.trim().into()));
    }
    RunConfig::resolve(&layers).map_err(|e| Failure::Usage(e.to_string()))
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stage = cli.command.name();
    let outcome = resolve_config(&cli.command).and_then(|cfg| execute(&cli.command, &cfg).map_err(Failure::Runtime));
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run `optval {stage} --help` for usage");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: stage {stage} failed: {e:#}");
            1
        }
    }
}

fn load_gnn(path: &Path) -> Result<optval_core::gnn::GnnModel> {
    let (m, _) = formats::read_gnn(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(m)
}

fn load_logit(path: &Path) -> Result<optval_core::classifiers::LogisticModel> {
    let (m, _) = formats::read_logit(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(m)
}

/// Samples of a directory with the ratio feature present: taken from the
/// GNN when given, else the stored values must already be complete.
fn ready_samples(dir: &Path, gnn: Option<&Path>) -> Result<Vec<optval_core::dynamics::DynamicSample>> {
    let samples = ex::load_samples(dir)?;
    match gnn {
        Some(p) => {
            let model = load_gnn(p)?;
            let (s, dropped) = ex::attach_ratio(samples, &ex::predictions(dir, &model)?)?;
            if dropped > 0 {
                progress("samples", format!("{dropped} samples dropped for a zero incumbent"));
            }
            Ok(s)
        }
        None => {
            if samples.iter().any(|s| !s.features[4].is_finite()) {
                bail!("{} has samples without a GNN ratio; pass --gnn", dir.display());
            }
            Ok(samples)
        }
    }
}

fn execute(cmd: &Command, cfg: &RunConfig) -> Result<()> {
    let hash = cfg.hash();
    match cmd {
        Command::Gen { out, sizes, count, .. } => {
            let rows = match sizes.as_str() {
                "q1" => ex::gen_split(out, cfg.family, &|f| cfg.q1_config(f), *count, cfg.seed, &hash)?,
                "q2" => ex::gen_split(out, cfg.family, &|f| cfg.q2_config(f), *count, cfg.seed, &hash)?,
                other => bail!("unknown size preset {other:?}; expected q1 or q2"),
            };
            progress("gen", format!("{} instances written to {}", rows.len(), out.display()));
        }
        Command::Solve { input, log, .. } => {
            if input.is_dir() {
                let rows = ex::solve_split(input, cfg, &hash, log.as_deref())?;
                progress("solve", format!("{} instances solved in {}", rows.len(), input.display()));
            } else {
                let inst = ex::load_instance(input)?;
                let (row, _, events) = ex::solve_one(&inst, &ex::solve_params(cfg))?;
                if let Some(l) = log {
                    atomic_write(l, formats::write_events(&events, &hash).as_bytes())?;
                }
                println!(
                    "{}\tz_star={}\tobjective={}\tz_lp={}\tnodes={}\tproof={}",
                    row.instance,
                    formats::fmt_f64(row.z_star),
                    formats::fmt_f64(inst.user_objective(row.z_star)),
                    formats::fmt_f64(row.z_lp),
                    row.nodes,
                    row.proof.as_str()
                );
            }
        }
        Command::Collect { dir, gnn, .. } => {
            let model = gnn.as_deref().map(load_gnn).transpose()?;
            let o = ex::collect_split(dir, cfg, &hash, model.as_ref())?;
            progress("collect", format!("{} runs, {} samples, {} censored", o.runs, o.samples.len(), o.censored.len()));
        }
        Command::TrainGnn { data, val, out, .. } => {
            let train_set = ex::regression_set(data)?;
            let val_set = match val {
                Some(v) => ex::regression_set(v)?,
                None => Vec::new(),
            };
            let (model, rep) = ex::train_gnn(&train_set, &val_set, cfg, cfg.target)?;
            atomic_write(out, formats::write_gnn(&model, &hash).as_bytes())?;
            progress("train-gnn", format!("{} epochs, best epoch {}", rep.train_loss.len(), rep.best_epoch));
        }
        Command::TrainDyn { data, gnn, out, .. } => {
            let samples = ready_samples(data, gnn.as_deref())?;
            let (model, curve) = train_on_samples(&samples, &ex::logit_params(cfg))?;
            atomic_write(out, formats::write_logit(&model, &hash).as_bytes())?;
            progress("train-dyn", format!("{} samples, final loss {:.6}", samples.len(), curve.last().copied().unwrap_or(f64::NAN)));
        }
        Command::TuneEps { data, gnn, out, .. } => {
            let samples = ready_samples(data, Some(gnn))?;
            let (eps, curve) = tune_epsilon(&ex::gnn_cases(&samples))?;
            let rows: Vec<Vec<String>> = curve.iter().map(|&(e, a)| vec![format!("{e:.3}"), format!("{a:.4}")]).collect();
            let text = format!("# {}\tconfig={hash}\teps={}\n", report::REPORT_V1, formats::fmt_f64(eps)) + &report::csv(&["eps", "val_accuracy"], &rows);
            atomic_write(out, text.as_bytes())?;
            println!("eps={}", formats::fmt_f64(eps));
        }
        Command::Classify { data, gnn, logit, eps, majority_from, out, .. } => {
            let samples = ready_samples(data, Some(gnn))?;
            let train_labels: Vec<bool> = ex::load_samples(majority_from)?.iter().map(|s| s.label).collect();
            let preds = ex::classify(data, &samples, &load_logit(logit)?, *eps)?;
            let meta = [("eps", formats::fmt_f64(*eps)), ("majority", u8::from(majority_class(&train_labels)).to_string())];
            atomic_write(out, formats::write_preds(&preds, &hash, &meta).as_bytes())?;
            progress("classify", format!("{} samples classified", preds.len()));
        }
        Command::Eval { preds, gnn, data, out, .. } => {
            if preds.is_none() && (gnn.is_none() || data.is_none()) {
                bail!("eval needs --preds, or --gnn with --data");
            }
            if let Some(p) = preds {
                let (rows, _, meta) = formats::read_preds(&read_text(p)?).with_context(|| format!("parsing {}", p.display()))?;
                let majority = meta.iter().find(|(k, _)| k == "majority").map(|(_, v)| v == "1").ok_or_else(|| anyhow!("{} has no majority entry", p.display()))?;
                let reps = ex::reports(&rows, majority);
                report::write_eval_reports(out, cfg.family.tag(), &reps, &hash)?;
                print!("{}", report::table(&report::Q2_HEADER, &report::classification_rows(cfg.family.tag(), &reps)));
            }
            if let (Some(g), Some(d)) = (gnn, data) {
                let model = load_gnn(g)?;
                let set = ex::regression_set(d)?;
                let rows = vec![
                    vec![format!("GNN {}", model.target.tag()), format!("{:.4}", ex::gnn_error(&model, &set)?)],
                    vec!["z_lp".into(), format!("{:.4}", ex::lp_error(&set)?)],
                ];
                let text = format!("# {}\tconfig={hash}\n", report::REPORT_V1) + &report::table(&["predictor", "error_pct"], &rows);
                atomic_write(&out.join("q1-eval.txt"), text.as_bytes())?;
                print!("{}", report::table(&["predictor", "error_pct"], &rows));
            }
        }
        Command::PhaseAnalysis { family, input, out, .. } => {
            let mut rows = Vec::new();
            if let Some(dir) = input {
                let b = ex::phase_analysis(&ex::load_split(dir)?, cfg.phase_seeds, cfg)?;
                rows.push((dir.display().to_string(), b));
            } else {
                for tag in family.split(',') {
                    let f = Family::parse(tag.trim()).ok_or_else(|| anyhow!("unknown family {tag:?}"))?;
                    rows.push((f.tag().to_string(), ex::family_phases(f, cfg)?));
                }
            }
            report::write_phase_reports(out, &rows, &hash)?;
            print!("{}", report::table(&report::PHASE_HEADER, &report::phase_rows(&rows)));
        }
        Command::Pipeline { out, .. } => {
            let s = ex::pipeline(cfg, out)?;
            print!("{}", report::table(&report::Q1_HEADER, &report::q1_rows(&s.q1)));
            println!();
            print!("{}", report::table(&report::Q2_HEADER, &report::classification_rows(s.q2.family.tag(), &s.q2.reports)));
        }
    }
    Ok(())
}
