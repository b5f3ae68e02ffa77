//! Run configuration: scale presets, a key=value file format and the
//! override order `defaults < scale preset < config file < flags < --set`.

use std::fmt;

use optval_core::gen::{Family, FamilyConfig};
use optval_core::gnn::TargetKind;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Seconds-long runs for smoke tests.
    Tiny,
    Desk,
    /// Published benchmark sizes and counts.
    Full,
}

impl Scale {
    pub fn tag(self) -> &'static str {
        match self {
            Scale::Tiny => "tiny",
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tiny" => Some(Scale::Tiny),
            "desk" => Some(Scale::Desk),
            "full" => Some(Scale::Full),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilySel {
    One(Family),
    Mixed,
}

impl FamilySel {
    pub fn tag(self) -> &'static str {
        match self {
            FamilySel::One(f) => f.tag(),
            FamilySel::Mixed => "mixed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "mixed" {
            Some(FamilySel::Mixed)
        } else {
            Family::parse(s).map(FamilySel::One)
        }
    }
}

impl fmt::Display for FamilySel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Every tunable of a run. Paths are not part of it, so the config hash
/// only reflects what changes the numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scale: Scale,
    pub family: FamilySel,
    pub seed: u64,
    pub count: usize,
    pub node_limit: usize,
    pub heuristic_period: usize,
    pub warmup: usize,
    pub p_sample: f64,
    pub window: usize,
    pub collect_seeds: usize,
    pub gnn_hidden: usize,
    pub gnn_lr: f64,
    pub gnn_epochs: usize,
    pub gnn_batch: usize,
    pub gnn_patience: usize,
    pub target: TargetKind,
    pub logit_lr: f64,
    pub logit_epochs: usize,
    pub logit_lambda: f64,
    pub logit_threshold: f64,
    pub q1_train: usize,
    pub q1_val: usize,
    pub q1_test: usize,
    pub q2_train: usize,
    pub q2_val: usize,
    pub q2_test: usize,
    pub phase_instances: usize,
    pub phase_seeds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Scale::Desk)
    }
}

impl RunConfig {
    pub fn preset(scale: Scale) -> Self {
        let base = RunConfig {
            scale,
            family: FamilySel::One(Family::SetCovering),
            seed: 0,
            count: 10,
            node_limit: 100_000,
            heuristic_period: 10,
            warmup: 100,
            p_sample: 0.02,
            window: 20,
            collect_seeds: 2,
            gnn_hidden: 32,
            gnn_lr: 1e-3,
            gnn_epochs: 100,
            gnn_batch: 16,
            gnn_patience: 15,
            target: TargetKind::Theta3,
            logit_lr: 0.1,
            logit_epochs: 500,
            logit_lambda: 1e-3,
            logit_threshold: 0.5,
            q1_train: 500,
            q1_val: 100,
            q1_test: 100,
            q2_train: 160,
            q2_val: 40,
            q2_test: 80,
            phase_instances: 30,
            phase_seeds: 3,
        };
        match scale {
            Scale::Desk => base,
            Scale::Tiny => RunConfig {
                gnn_hidden: 8,
                gnn_epochs: 6,
                gnn_patience: 3,
                logit_epochs: 200,
                p_sample: 0.1,
                q1_train: 12,
                q1_val: 4,
                q1_test: 4,
                q2_train: 12,
                q2_val: 4,
                q2_test: 4,
                phase_instances: 4,
                phase_seeds: 2,
                ..base
            },
            Scale::Full => RunConfig {
                q1_train: 10_000,
                q1_val: 2000,
                q1_test: 2000,
                q2_train: 10_000,
                q2_val: 2000,
                q2_test: 2000,
                phase_instances: 100,
                collect_seeds: 1,
                ..base
            },
        }
    }

    /// Instance sizes for the objective-value experiment and phase analysis.
    pub fn q1_config(&self, family: Family) -> FamilyConfig {
        match self.scale {
            Scale::Tiny => match family {
                Family::SetCovering => FamilyConfig::SetCovering { rows: 30, cols: 60, density: 0.08 },
                Family::CombAuction => FamilyConfig::CombAuction { items: 12, bids: 40 },
                Family::Gisp => FamilyConfig::Gisp { nodes: 12, edge_prob: 0.6, alpha: 0.75 },
            },
            Scale::Desk => FamilyConfig::desk(family),
            Scale::Full => FamilyConfig::full(family),
        }
    }

    /// Instance sizes for sample collection. Desk-sized instances rarely
    /// need more than the 100-node warm-up, so these are larger.
    pub fn q2_config(&self, family: Family) -> FamilyConfig {
        match self.scale {
            Scale::Tiny => FamilyConfig::Gisp { nodes: 40, edge_prob: 0.6, alpha: 0.75 },
            Scale::Desk => match family {
                Family::SetCovering => FamilyConfig::SetCovering { rows: 300, cols: 500, density: 0.05 },
                Family::CombAuction => FamilyConfig::CombAuction { items: 80, bids: 300 },
                Family::Gisp => FamilyConfig::Gisp { nodes: 50, edge_prob: 0.6, alpha: 0.75 },
            },
            Scale::Full => FamilyConfig::full(family),
        }
    }

    /// Canonical `key=value` lines, sorted by key.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut v = vec![
            ("scale", self.scale.tag().to_string()),
            ("family", self.family.tag().to_string()),
            ("seed", self.seed.to_string()),
            ("count", self.count.to_string()),
            ("node_limit", self.node_limit.to_string()),
            ("heuristic_period", self.heuristic_period.to_string()),
            ("warmup", self.warmup.to_string()),
            ("p_sample", format!("{:?}", self.p_sample)),
            ("window", self.window.to_string()),
            ("collect_seeds", self.collect_seeds.to_string()),
            ("gnn_hidden", self.gnn_hidden.to_string()),
            ("gnn_lr", format!("{:?}", self.gnn_lr)),
            ("gnn_epochs", self.gnn_epochs.to_string()),
            ("gnn_batch", self.gnn_batch.to_string()),
            ("gnn_patience", self.gnn_patience.to_string()),
            ("target", self.target.tag().to_string()),
            ("logit_lr", format!("{:?}", self.logit_lr)),
            ("logit_epochs", self.logit_epochs.to_string()),
            ("logit_lambda", format!("{:?}", self.logit_lambda)),
            ("logit_threshold", format!("{:?}", self.logit_threshold)),
            ("q1_train", self.q1_train.to_string()),
            ("q1_val", self.q1_val.to_string()),
            ("q1_test", self.q1_test.to_string()),
            ("q2_train", self.q2_train.to_string()),
            ("q2_val", self.q2_val.to_string()),
            ("q2_test", self.q2_test.to_string()),
            ("phase_instances", self.phase_instances.to_string()),
            ("phase_seeds", self.phase_seeds.to_string()),
        ];
        v.sort_by_key(|e| e.0);
        v
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        crate::io::config_hash(&self.to_text())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: &str| ConfigError::BadValue { key: key.into(), value: value.into(), reason: reason.into() };
        let int = || value.parse::<usize>().map_err(|e| bad(&e.to_string()));
        let real = || match value.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            Ok(_) => Err(bad("not finite")),
            Err(e) => Err(bad(&e.to_string())),
        };
        let prob = || real().and_then(|x| if (0.0..=1.0).contains(&x) { Ok(x) } else { Err(bad("outside [0, 1]")) });
        let positive = || int().and_then(|n| if n > 0 { Ok(n) } else { Err(bad("must be positive")) });
        match key {
            "scale" => self.scale = Scale::parse(value).ok_or_else(|| bad("expected tiny, desk or full"))?,
            "family" => self.family = FamilySel::parse(value).ok_or_else(|| bad("expected sc, ca, gisp or mixed"))?,
            "seed" => self.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(&e.to_string()))?,
            "count" => self.count = int()?,
            "node_limit" => self.node_limit = positive()?,
            "heuristic_period" => self.heuristic_period = int()?,
            "warmup" => self.warmup = int()?,
            "p_sample" => self.p_sample = prob()?,
            "window" => self.window = positive()?,
            "collect_seeds" => self.collect_seeds = positive()?,
            "gnn_hidden" => self.gnn_hidden = positive()?,
            "gnn_lr" => self.gnn_lr = real()?,
            "gnn_epochs" => self.gnn_epochs = positive()?,
            "gnn_batch" => self.gnn_batch = positive()?,
            "gnn_patience" => self.gnn_patience = positive()?,
            "target" => self.target = TargetKind::parse(value).ok_or_else(|| bad("expected t1, t2 or t3"))?,
            "logit_lr" => self.logit_lr = real()?,
            "logit_epochs" => self.logit_epochs = positive()?,
            "logit_lambda" => self.logit_lambda = real()?,
            "logit_threshold" => self.logit_threshold = prob()?,
            "q1_train" => self.q1_train = positive()?,
            "q1_val" => self.q1_val = positive()?,
            "q1_test" => self.q1_test = positive()?,
            "q2_train" => self.q2_train = positive()?,
            "q2_val" => self.q2_val = positive()?,
            "q2_test" => self.q2_test = positive()?,
            "phase_instances" => self.phase_instances = positive()?,
            "phase_seeds" => self.phase_seeds = positive()?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Builds a config from layered `key=value` pairs. The last `scale`
    /// among them picks the preset; all pairs are then applied in order.
    pub fn resolve(layers: &[(String, String)]) -> Result<Self, ConfigError> {
        let scale = match layers.iter().rev().find(|(k, _)| k == "scale") {
            Some((_, v)) => Scale::parse(v).ok_or_else(|| ConfigError::BadValue {
                key: "scale".into(),
                value: v.clone(),
                reason: "expected tiny, desk or full".into(),
            })?,
            None => Scale::Desk,
        };
        let mut cfg = RunConfig::preset(scale);
        for (k, v) in layers {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

/// Parses a config file: `key = value` lines, `#` comments, blank lines.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.into() });
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1, text: raw.into() });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}
