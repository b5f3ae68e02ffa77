//! Seeded benchmark generators: set covering, combinatorial auctions and
//! generalized independent set (GISP).
//!
//! All outputs are in min form. Packing-type problems are negated and carry
//! `maximize_origin = true`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::model::{MilpInstance, Row};
use crate::rng::{derive_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    SetCovering,
    CombAuction,
    Gisp,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::SetCovering, Family::CombAuction, Family::Gisp];

    pub fn tag(self) -> &'static str {
        match self {
            Family::SetCovering => "sc",
            Family::CombAuction => "ca",
            Family::Gisp => "gisp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sc" | "setcover" | "set-covering" => Some(Family::SetCovering),
            "ca" | "cauctions" | "comb-auction" => Some(Family::CombAuction),
            "gisp" => Some(Family::Gisp),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Size parameters of one family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyConfig {
    SetCovering { rows: usize, cols: usize, density: f64 },
    CombAuction { items: usize, bids: usize },
    Gisp { nodes: usize, edge_prob: f64, alpha: f64 },
}

impl FamilyConfig {
    pub fn family(&self) -> Family {
        match self {
            FamilyConfig::SetCovering { .. } => Family::SetCovering,
            FamilyConfig::CombAuction { .. } => Family::CombAuction,
            FamilyConfig::Gisp { .. } => Family::Gisp,
        }
    }

    /// Laptop-sized defaults.
    pub fn desk(family: Family) -> Self {
        match family {
            Family::SetCovering => FamilyConfig::SetCovering { rows: 100, cols: 200, density: 0.05 },
            Family::CombAuction => FamilyConfig::CombAuction { items: 40, bids: 200 },
            Family::Gisp => FamilyConfig::Gisp { nodes: 25, edge_prob: 0.6, alpha: 0.75 },
        }
    }

    /// Sizes of the published benchmark.
    pub fn full(family: Family) -> Self {
        match family {
            Family::SetCovering => FamilyConfig::SetCovering { rows: 750, cols: 1000, density: 0.05 },
            Family::CombAuction => FamilyConfig::CombAuction { items: 200, bids: 1000 },
            Family::Gisp => FamilyConfig::Gisp { nodes: 80, edge_prob: 0.6, alpha: 0.75 },
        }
    }

    pub fn generate(&self, seed: u64) -> Result<MilpInstance, GenError> {
        match *self {
            FamilyConfig::SetCovering { rows, cols, density } => gen_set_covering(rows, cols, density, seed),
            FamilyConfig::CombAuction { items, bids } => gen_comb_auction(items, bids, seed),
            FamilyConfig::Gisp { nodes, edge_prob, alpha } => gen_gisp(nodes, edge_prob, alpha, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenError(pub String);

impl fmt::Display for GenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "generator config error: {}", self.0)
    }
}

impl core::error::Error for GenError {}

fn check_prob(name: &str, p: f64) -> Result<(), GenError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(GenError(format!("{name} must lie in (0, 1), got {p}")))
    }
}

/// `min c·x` with `Σ_{j covers i} x_j ≥ 1` per row. Every row ends up
/// covered by at least two columns and every column covers a row.
pub fn gen_set_covering(rows: usize, cols: usize, density: f64, seed: u64) -> Result<MilpInstance, GenError> {
    check_prob("density", density)?;
    if rows == 0 || cols == 0 {
        return Err(GenError(String::from("rows and cols must be at least 1")));
    }
    if cols < 2 || libm::round(density * cols as f64) < 2.0 {
        return Err(GenError(format!("density·cols = {} cannot give two covers per row", density * cols as f64)));
    }
    let mut rng = Rng::new(seed);
    let mut member = vec![vec![false; cols]; rows];
    for row in member.iter_mut() {
        for cell in row.iter_mut() {
            *cell = rng.bernoulli(density);
        }
    }
    for row in member.iter_mut() {
        while row.iter().filter(|&&b| b).count() < 2 {
            let j = rng.index(cols);
            row[j] = true;
        }
    }
    for j in 0..cols {
        if !member.iter().any(|r| r[j]) {
            let i = rng.index(rows);
            member[i][j] = true;
        }
    }
    let obj: Vec<f64> = (0..cols).map(|_| rng.int_in(1, 100) as f64).collect();
    let a: Vec<Row> = member
        .iter()
        .map(|r| r.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| (j, 1.0)).collect())
        .collect();
    Ok(MilpInstance::binary(format!("sc-{rows}x{cols}-{seed}"), obj, a, vec![1.0; rows]))
}

/// Bundles of items and their prices, before conversion to a MILP.
#[derive(Debug, Clone, PartialEq)]
pub struct Auction {
    pub bundles: Vec<Vec<usize>>,
    pub prices: Vec<f64>,
}

/// Bundle continuation probability of the random walk.
const WALK_CONTINUE: f64 = 0.65;

/// Draws bids over an item compatibility graph. Each bundle starts at a
/// uniform item and keeps adding an item chosen with probability
/// proportional to its compatibility with the last one added. Prices are
/// integers near `U[0.5, 1.5]·Σ` common values of the bundle.
pub fn draw_auction(items: usize, bids: usize, seed: u64) -> Result<Auction, GenError> {
    if items == 0 || bids == 0 {
        return Err(GenError(String::from("items and bids must be at least 1")));
    }
    let mut rng = Rng::new(seed);
    let values: Vec<f64> = (0..items).map(|_| rng.int_in(1, 100) as f64).collect();
    let mut compat = vec![0.0; items * items];
    for i in 0..items {
        for k in i + 1..items {
            let w = rng.uniform();
            compat[i * items + k] = w;
            compat[k * items + i] = w;
        }
    }
    let mut bundles: Vec<Vec<usize>> = Vec::with_capacity(bids);
    for _ in 0..bids {
        let mut bundle = vec![rng.index(items)];
        let mut inside = vec![false; items];
        inside[bundle[0]] = true;
        while bundle.len() < items && rng.bernoulli(WALK_CONTINUE) {
            let last = *bundle.last().unwrap_or(&0);
            let total: f64 = (0..items).filter(|&k| !inside[k]).map(|k| compat[last * items + k]).sum();
            let next = if total > 0.0 {
                let mut u = rng.uniform() * total;
                let mut pick = None;
                for k in (0..items).filter(|&k| !inside[k]) {
                    pick = Some(k);
                    u -= compat[last * items + k];
                    if u < 0.0 {
                        break;
                    }
                }
                pick
            } else {
                let free: Vec<usize> = (0..items).filter(|&k| !inside[k]).collect();
                Some(free[rng.index(free.len())])
            };
            let Some(k) = next else { break };
            inside[k] = true;
            bundle.push(k);
        }
        bundle.sort_unstable();
        bundles.push(bundle);
    }
    // Items no bid asked for join a random bundle so every row is nonempty.
    for item in 0..items {
        if !bundles.iter().any(|b| b.contains(&item)) {
            let b = rng.index(bids);
            bundles[b].push(item);
            bundles[b].sort_unstable();
        }
    }
    let prices = bundles
        .iter()
        .map(|b| {
            let base: f64 = b.iter().map(|&i| values[i]).sum();
            libm::round(rng.uniform_in(0.5, 1.5) * base).max(1.0)
        })
        .collect();
    Ok(Auction { bundles, prices })
}

/// Winner determination: `max Σ price_b x_b` with each item sold at most
/// once, stored as `min −price·x` with rows `−Σ x_b ≥ −1`.
pub fn gen_comb_auction(items: usize, bids: usize, seed: u64) -> Result<MilpInstance, GenError> {
    let auction = draw_auction(items, bids, seed)?;
    let mut rows: Vec<Row> = vec![Vec::new(); items];
    for (b, bundle) in auction.bundles.iter().enumerate() {
        for &i in bundle {
            rows[i].push((b, -1.0));
        }
    }
    let obj = auction.prices.iter().map(|p| -p).collect();
    let mut inst = MilpInstance::binary(format!("ca-{items}x{bids}-{seed}"), obj, rows, vec![-1.0; items]);
    inst.maximize_origin = true;
    Ok(inst)
}

/// Erdős–Rényi graph with removable edges.
#[derive(Debug, Clone, PartialEq)]
pub struct GispGraph {
    pub nodes: usize,
    /// `(u, v, removable)` with `u < v`.
    pub edges: Vec<(usize, usize, bool)>,
    pub revenue: Vec<f64>,
    /// Removal cost per edge; 0 for permanent edges.
    pub cost: Vec<f64>,
}

pub fn draw_gisp(nodes: usize, edge_prob: f64, alpha: f64, seed: u64) -> Result<GispGraph, GenError> {
    check_prob("edge probability", edge_prob)?;
    check_prob("alpha", alpha)?;
    if nodes < 2 {
        return Err(GenError(String::from("GISP needs at least 2 nodes")));
    }
    let mut rng = Rng::new(seed);
    let mut edges = Vec::new();
    for u in 0..nodes {
        for v in u + 1..nodes {
            if rng.bernoulli(edge_prob) {
                edges.push((u, v, rng.bernoulli(alpha)));
            }
        }
    }
    let revenue = (0..nodes).map(|_| rng.int_in(1, 100) as f64).collect();
    let cost = edges.iter().map(|&(_, _, rem)| if rem { rng.int_in(1, 100) as f64 } else { 0.0 }).collect();
    Ok(GispGraph { nodes, edges, revenue, cost })
}

/// `max Σ r_v x_v − Σ c_e y_e` subject to `x_u + x_v − y_e ≤ 1` for
/// removable edges and `x_u + x_v ≤ 1` otherwise, stored in min form.
/// Columns are the nodes followed by one `y_e` per removable edge.
pub fn gen_gisp(nodes: usize, edge_prob: f64, alpha: f64, seed: u64) -> Result<MilpInstance, GenError> {
    let g = draw_gisp(nodes, edge_prob, alpha, seed)?;
    let mut obj: Vec<f64> = g.revenue.iter().map(|r| -r).collect();
    let mut rows: Vec<Row> = Vec::with_capacity(g.edges.len());
    for (e, &(u, v, removable)) in g.edges.iter().enumerate() {
        let mut row = vec![(u, -1.0), (v, -1.0)];
        if removable {
            row.push((obj.len(), 1.0));
            obj.push(g.cost[e]);
        }
        rows.push(row);
    }
    let m = rows.len();
    let mut inst = MilpInstance::binary(format!("gisp-{nodes}-{seed}"), obj, rows, vec![-1.0; m]);
    inst.maximize_origin = true;
    Ok(inst)
}

/// `count / 3` instances of each family in a seed-determined order, each
/// with the seed it was generated from.
pub fn gen_mixed(count: usize, configs: &[FamilyConfig; 3], seed: u64) -> Result<Vec<(Family, u64, MilpInstance)>, GenError> {
    if !count.is_multiple_of(3) {
        return Err(GenError(format!("mixed count {count} is not divisible by 3")));
    }
    let per = count / 3;
    let mut out = Vec::with_capacity(count);
    for (f, cfg) in configs.iter().enumerate() {
        for k in 0..per {
            let s = derive_seed(seed, (f * per + k) as u64);
            out.push((cfg.family(), s, cfg.generate(s)?));
        }
    }
    Rng::new(derive_seed(seed, u64::MAX)).shuffle(&mut out);
    Ok(out)
}
