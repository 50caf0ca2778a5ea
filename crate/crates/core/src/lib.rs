//! Branch-and-cut computation of (alpha, beta)-approximate pure Nash
//! equilibria for mixed-integer standard and generalized Nash games, with an
//! adaptive binary search for the minimal uniform alpha and a brute-force
//! oracle for desk-scale verification.

pub mod adaptive;
pub mod bestresponse;
pub mod bnc;
pub mod cli;
pub mod cuts;
pub mod fixtures;
pub mod flowgame;
pub mod lifted;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod report;

/// Equilibrium-check tolerance: pi_i <= alpha_i Phi_i + beta_i + NE_TOL.
pub const NE_TOL: f64 = 1e-8;
/// Node pruning threshold on the LP value.
pub const PRUNE_TOL: f64 = 1e-5;
/// Integer-feasibility tolerance.
pub const INT_TOL: f64 = 1e-6;
