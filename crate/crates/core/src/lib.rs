//! Instrumented LP-based branch and bound for MILP, bipartite-graph
//! regression of the optimal objective value, and classifiers that decide
//! during a solve whether the incumbent is already optimal.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and experiment drivers live in the companion `optval` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bnb;
pub mod classifiers;
pub mod dynamics;
pub mod evaluation;
pub mod gen;
pub mod gnn;
pub mod graph;
pub mod model;
pub mod rng;
pub mod simplex;
pub mod tree;

mod linalg;
mod ord;

pub use bnb::{solve, BnbError, Observer, SolveParams, SolveResult};
pub use model::{LpSolution, LpStatus, MilpInstance};
pub use simplex::{BoundSet, LpSolver};
pub use tree::{Proof, TreeEvent, TreeState};

