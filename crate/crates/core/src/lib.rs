//! Simulation of the extended Wigner's Friend scenario under two rival
//! dynamics for Friend's measurement: absolute collapse (AoM) and unitary
//! evolution of the whole Lab (NoM). The crate computes observed outcome
//! tables, evaluates the witnesses that separate the two, and searches
//! numerically for violations of the AoM bounds.
//!
//! Start with [`scenario::Scenario`] and [`scenario::run_trial`], then
//! [`witnesses`] for `T`/`T(q)` and [`bipartite`] for `P_0`, `P_1`, `P_S`.

pub mod bipartite;
pub mod channel;
pub mod cli;
pub mod error;
pub mod io;
pub mod optimize;
pub mod oracle;
pub mod qlinalg;
pub mod scenario;
pub mod witnesses;

pub use error::{Error, Result};
