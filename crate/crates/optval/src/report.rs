//! Aligned-text tables, CSV tables and plot-data series.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use optval_core::evaluation::{ClassificationReport, PhaseBreakdown};

use crate::experiment::{PipelineSummary, Q1Summary, Q2Summary};
use crate::io::atomic_write;

pub const REPORT_V1: &str = "report-v1";

fn head(config: &str) -> String {
    format!("# {REPORT_V1}\tconfig={config}\n")
}

/// Left-aligned first column, right-aligned rest.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (k, c) in cells.enumerate() {
            let pad = width[k].saturating_sub(c.chars().count());
            if k == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&mut header.iter().copied());
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (width.len() - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(&mut r.iter().map(String::as_str)));
    }
    out
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",") + "\n";
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

pub fn q1_rows(q: &Q1Summary) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = q
        .targets
        .iter()
        .map(|r| {
            vec![
                q.family.tag().to_string(),
                format!("GNN {}", r.target.tag()),
                f4(r.val_error),
                f4(r.test_error),
                r.epochs_run.to_string(),
                if r.target == q.best { "*".into() } else { String::new() },
            ]
        })
        .collect();
    rows.push(vec![q.family.tag().into(), "z_lp".into(), f4(q.lp_val_error), f4(q.lp_test_error), "0".into(), String::new()]);
    rows
}

pub const Q1_HEADER: [&str; 6] = ["family", "predictor", "val_error_pct", "test_error_pct", "epochs", "selected"];

pub fn classification_rows(family: &str, reports: &[(&str, ClassificationReport)]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|(name, r)| vec![family.to_string(), name.to_string(), f4(r.correct), f4(r.false_pos), f4(r.false_neg), r.n.to_string()])
        .collect()
}

pub const Q2_HEADER: [&str; 6] = ["family", "classifier", "correct", "false_pos", "false_neg", "n"];

fn q2_text(q: &Q2Summary) -> String {
    let mut s = table(&Q2_HEADER, &classification_rows(q.family.tag(), &q.reports));
    writeln!(s).unwrap();
    writeln!(s, "GNN target {} (test error {:.4}%), eps* = {:.3}", q.target.tag(), q.gnn_test_error, q.eps).unwrap();
    writeln!(
        s,
        "samples train/val/test = {}/{}/{}, positives {}/{}/{}",
        q.samples[0], q.samples[1], q.samples[2], q.positives[0], q.positives[1], q.positives[2]
    )
    .unwrap();
    writeln!(s, "runs {}, censored {}, dropped for zero incumbent {}", q.runs, q.censored, q.dropped).unwrap();
    writeln!(s).unwrap();
    let imp: Vec<Vec<String>> = q.importance.iter().map(|(n, w)| vec![n.to_string(), f4(*w)]).collect();
    s.push_str(&table(&["feature", "importance"], &imp));
    s
}

pub fn write_pipeline_reports(dir: &Path, p: &PipelineSummary, config: &str) -> Result<()> {
    let q1 = q1_rows(&p.q1);
    atomic_write(&dir.join("q1.txt"), (head(config) + &table(&Q1_HEADER, &q1)).as_bytes())?;
    atomic_write(&dir.join("q1.csv"), (head(config) + &csv(&Q1_HEADER, &q1)).as_bytes())?;
    let q2 = classification_rows(p.q2.family.tag(), &p.q2.reports);
    atomic_write(&dir.join("q2.txt"), (head(config) + &q2_text(&p.q2)).as_bytes())?;
    atomic_write(&dir.join("q2.csv"), (head(config) + &csv(&Q2_HEADER, &q2)).as_bytes())?;
    let curve: Vec<Vec<String>> = p.q2.eps_curve.iter().map(|&(e, a)| vec![format!("{e:.3}"), f4(a)]).collect();
    atomic_write(&dir.join("q2-eps.csv"), (head(config) + &csv(&["eps", "val_accuracy"], &curve)).as_bytes())?;
    let imp: Vec<Vec<String>> = p.q2.importance.iter().map(|(n, w)| vec![n.to_string(), f4(*w)]).collect();
    atomic_write(&dir.join("q2-importance.csv"), (head(config) + &csv(&["feature", "importance"], &imp)).as_bytes())?;
    Ok(())
}

pub const PHASE_HEADER: [&str; 8] =
    ["family", "runs", "excluded", "feasibility", "improvement_a", "improvement_b", "proving", "before_branching"];

pub fn phase_rows(rows: &[(String, PhaseBreakdown)]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|(f, b)| {
            let m = &b.mean;
            vec![
                f.clone(),
                b.runs.len().to_string(),
                b.excluded.to_string(),
                f4(m.feasibility),
                f4(m.improvement_a),
                f4(m.improvement_b),
                f4(m.proving),
                f4(m.before_branching),
            ]
        })
        .collect()
}

/// Table, CSV and a stacked-bar plot-data file (`family,phase,start,end`).
pub fn write_phase_reports(dir: &Path, rows: &[(String, PhaseBreakdown)], config: &str) -> Result<()> {
    let body = phase_rows(rows);
    atomic_write(&dir.join("phases.txt"), (head(config) + &table(&PHASE_HEADER, &body)).as_bytes())?;
    atomic_write(&dir.join("phases.csv"), (head(config) + &csv(&PHASE_HEADER, &body)).as_bytes())?;
    let mut plot = Vec::new();
    for (f, b) in rows {
        let m = &b.mean;
        let mut start = 0.0;
        for (name, share) in [("1", m.feasibility), ("2a", m.improvement_a), ("2b", m.improvement_b), ("3", m.proving)] {
            plot.push(vec![f.clone(), name.into(), f4(start), f4(start + share)]);
            start += share;
        }
        plot.push(vec![f.clone(), "first_branch".into(), f4(m.before_branching), f4(m.before_branching)]);
    }
    atomic_write(&dir.join("phases-plot.csv"), (head(config) + &csv(&["family", "phase", "start", "end"], &plot)).as_bytes())?;
    Ok(())
}

/// Report for a predictions file on its own.
pub fn write_eval_reports(dir: &Path, family: &str, reports: &[(&str, ClassificationReport)], config: &str) -> Result<()> {
    let rows = classification_rows(family, reports);
    atomic_write(&dir.join("eval.txt"), (head(config) + &table(&Q2_HEADER, &rows)).as_bytes())?;
    atomic_write(&dir.join("eval.csv"), (head(config) + &csv(&Q2_HEADER, &rows)).as_bytes())?;
    Ok(())
}
